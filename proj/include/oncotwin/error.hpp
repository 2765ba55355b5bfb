/**
 * @file error.hpp
 * @brief Exception types. Expected data problems (validation findings,
 *        parse failures, quarantined payloads) are returned as values instead.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace oncotwin {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside an operation's domain (negative TMB, e >= 1, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace oncotwin
