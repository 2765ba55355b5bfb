/**
 * @file query.hpp
 * @brief Field predicates over twins: `field op value` terms joined by AND/OR.
 *
 * AND binds tighter than OR. Operators are == != >= <= > < and ~ (case-
 * insensitive substring). Values with spaces are double-quoted. A term whose
 * field is absent on a twin is false, whatever the operator.
 */
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "oncotwin/error.hpp"
#include "oncotwin/model.hpp"

namespace oncotwin {

class QueryError : public Error {
public:
    using Error::Error;
};

enum class CompareOp { eq, ne, ge, le, gt, lt, contains };

struct Term {
    std::string field;
    CompareOp op = CompareOp::eq;
    std::string value;
};

/// Disjunction of conjunctions. Empty matches everything.
struct Predicate {
    std::vector<std::vector<Term>> any_of;

    bool empty() const { return any_of.empty(); }
};

/// Throws QueryError on malformed text or unknown field names.
Predicate parse_predicate(std::string_view text);

/// Field names accepted by parse_predicate.
const std::vector<std::string>& query_fields();

using FieldValue = std::variant<std::monostate, double, std::string>;

/// Throws QueryError for unknown fields. Multi-valued fields (similarity,
/// markers) come back joined with ", ".
FieldValue field_value(const DigitalTwin& t, std::string_view field);

bool matches(const DigitalTwin& t, const Predicate& p);

}  // namespace oncotwin
