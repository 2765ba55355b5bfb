/**
 * @file parsers.hpp
 * @brief Deterministic grammars for the clinical strings found in EHR notes
 *        and publications (survival durations, PD-L1, MMR, age, TMB,
 *        response categories).
 *
 * Every parser is total: it never throws and always keeps the raw input.
 * "Unknown" inputs such as "n/a" are successful parses whose value carries
 * no number; only genuinely unreadable text yields Confidence::failed.
 */
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "oncotwin/model.hpp"

namespace oncotwin {

enum class Confidence { exact, inferred, failed };

std::string_view to_string(Confidence c);

template <typename T>
struct ParseOutcome {
    std::optional<T> value;  // present iff confidence != failed
    Confidence confidence = Confidence::failed;
    std::string raw;
    std::optional<std::string> note;

    [[nodiscard]] bool ok() const { return confidence != Confidence::failed; }
};

struct MmrReading {
    std::optional<MmrStatus> mmr;
    std::optional<double> msi_fraction;

    bool operator==(const MmrReading&) const = default;
};

/// Decimal comma accepted. "<1%" style bounds map to 0.9 of the bound with
/// inferred confidence so thresholds at the bound behave correctly.
ParseOutcome<CensoredDuration> parse_duration(std::string_view s);
ParseOutcome<std::optional<PdL1Score>> parse_pdl1(std::string_view s);
ParseOutcome<MmrReading> parse_mmr(std::string_view s);
ParseOutcome<AgeValue> parse_age(std::string_view s);
ParseOutcome<std::optional<double>> parse_tmb(std::string_view s);
ParseOutcome<ResponseRecord> parse_response(std::string_view s);

/// True for the recognized "no value" spellings ("n/a", "-", "unknown", ...).
bool is_unknown_token(std::string_view s);

// Canonical renderings; re-parsing a rendering yields an equal value.
std::string render_duration(const CensoredDuration& d);
std::string render_pdl1(const PdL1Score& p);
std::string render_mmr(const MmrReading& m);
std::string render_age(const AgeValue& a);
std::string render_tmb(double tmb);
std::string render_response(const ResponseRecord& r);

}  // namespace oncotwin
