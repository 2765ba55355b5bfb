/**
 * @file evaluation.hpp
 * @brief Extraction-quality harness: adjudication files, confusion tallies,
 *        accuracy/precision/recall/F1, review sampling and sample sizing.
 *
 * Metrics are recomputed from counts. A metric whose denominator is zero is
 * absent rather than 0 or 1.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oncotwin/codec.hpp"
#include "oncotwin/error.hpp"

namespace oncotwin {

enum class Verdict { tp, tn, fp, fn };
std::string_view to_string(Verdict v);
std::optional<Verdict> verdict_from_string(std::string_view s);

struct AdjudicationRecord {
    std::string source;  // "ehr" or "literature"
    std::string subject;
    std::string attribute;
    std::optional<std::string> extracted;
    std::optional<std::string> gold;
    Verdict verdict = Verdict::tn;
    std::string reviewer;
    std::string note;

    bool operator==(const AdjudicationRecord&) const = default;
};

Json adjudication_to_json(const AdjudicationRecord& r);
/// Throws DecodeError.
AdjudicationRecord adjudication_from_json(const Json& j);
/// One record per line. Errors name path:line.
std::vector<AdjudicationRecord> read_adjudications(const std::filesystem::path& path);
/// Appends under an exclusive lock so concurrent reviewers do not interleave.
void append_adjudication(const std::filesystem::path& path, const AdjudicationRecord& r);

/// Values are compared after canonicalization by the domain parser that
/// fits the attribute (durations, age, response, sample size); other
/// attributes compare case- and whitespace-insensitively.
Verdict score(std::string_view attribute, const std::optional<std::string>& extracted,
              const std::optional<std::string>& gold);

struct ConfusionTally {
    std::string attribute;
    std::int64_t observations = 0;
    std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;

    void add(Verdict v);
    bool operator==(const ConfusionTally&) const = default;
};

struct Metrics {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

/// Throws DomainError for zero observations or counts that do not add up.
Metrics metrics(const ConfusionTally& t);

/// Half-up to 2 decimals.
double round2(double x);
/// "0.97", or "" when absent.
std::string display2(const std::optional<double>& x);

/// Cochran with finite-population correction, rounded up. Throws DomainError
/// unless Z>0, N>=1, 0<e<1, 0<P<1.
std::int64_t sample_size(double z, std::int64_t population, double e, double p);

/// Uniform draw without replacement. The result depends only on the set of
/// ids, n and seed, not on input order. Throws DomainError when n exceeds
/// the population or ids repeat.
std::vector<std::string> draw_sample(std::vector<std::string> population, std::size_t n,
                                     std::uint64_t seed);

struct MetricsRow {
    std::string source;
    ConfusionTally tally;
    Metrics metrics;
};

struct VerdictMismatch {
    AdjudicationRecord record;
    Verdict rescored;
};

struct EvaluationReport {
    /// Per source: attribute rows in first-seen order, then a TOTAL row.
    std::vector<MetricsRow> rows;
    /// Records whose stored verdict disagrees with score(). Reported, not fatal.
    std::vector<VerdictMismatch> mismatches;
};

/// Thrown when one (source, subject, attribute) carries different verdicts.
class ConflictingVerdicts : public Error {
public:
    explicit ConflictingVerdicts(std::vector<std::string> conflicts);
    const std::vector<std::string>& conflicts() const { return conflicts_; }

private:
    std::vector<std::string> conflicts_;
};

EvaluationReport evaluate_run(const std::vector<AdjudicationRecord>& records);

Json report_to_json(const EvaluationReport& r);
/// Columns: source, attribute, observations, tp, tn, fp, fn, accuracy,
/// precision, recall, f1.
std::string report_to_csv(const EvaluationReport& r);

struct LintFinding {
    std::size_t line = 0;
    std::string source;
    std::string attribute;
    std::string column;
    std::string reported;
    std::string recomputed;
};

/// Checks an imported metrics table (the report_to_csv layout) against its
/// own counts. Throws DecodeError on malformed rows.
std::vector<LintFinding> lint_metrics_table(std::string_view csv);

}  // namespace oncotwin
