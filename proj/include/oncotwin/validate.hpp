/**
 * @file validate.hpp
 * @brief Record-level validation and TMB classing.
 */
#pragma once

#include <string>
#include <vector>

#include "oncotwin/model.hpp"

namespace oncotwin {

enum class Severity { error, warning };

struct Finding {
    std::string field;
    Severity severity = Severity::error;
    std::string message;

    bool operator==(const Finding&) const = default;
};

struct ValidationReport {
    std::vector<Finding> findings;

    [[nodiscard]] std::size_t error_count() const;
    [[nodiscard]] std::size_t warning_count() const;
    [[nodiscard]] bool admissible() const { return error_count() == 0; }
    bool operator==(const ValidationReport&) const = default;
};

/// [0,5) low, [5,15) intermediate, [15,inf) high. Throws DomainError for
/// negative or non-finite input.
TmbClass tmb_class(double tmb);

/// Pure; errors block storage, warnings (absent attributes, unparsed prose)
/// never do.
ValidationReport validate_twin(const DigitalTwin& twin);

}  // namespace oncotwin
