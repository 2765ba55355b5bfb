/**
 * @file analytics.hpp
 * @brief Cohort outcome statistics.
 *
 * Censored durations follow the observed-bound policy by default: ">30
 * (ongoing)" contributes 30. Durations without a number are left out and
 * counted separately. Survival curves are out of scope.
 */
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oncotwin/codec.hpp"
#include "oncotwin/model.hpp"
#include "oncotwin/stats.hpp"

namespace oncotwin {

enum class CensoringPolicy {
    observed_bound,    // censored values count at their bound
    exclude_censored,  // only events count
};

struct CensoredSummary {
    std::optional<double> median;
    std::optional<Range> range;
    std::size_t n_known = 0;     // durations carrying a number
    std::size_t n_censored = 0;  // of those, how many are censored
    std::size_t n_unknown = 0;

    bool operator==(const CensoredSummary&) const = default;
};

CensoredSummary censored_summary(std::span<const CensoredDuration> durations,
                                 CensoringPolicy policy = CensoringPolicy::observed_bound);

struct LineStats {
    std::optional<double> mean;
    std::optional<double> median;
    std::optional<Range> range;
    std::size_t n = 0;
    std::size_t excluded = 0;  // twins without a treatment line

    bool operator==(const LineStats&) const = default;
};

LineStats line_stats(std::span<const DigitalTwin> twins);

enum class VitalStatus { alive, deceased, unknown };
std::string_view to_string(VitalStatus v);

/// Read from the OS source text: "deceased"/"died" win over "alive"/"ongoing";
/// a censored duration without either word counts as alive.
VitalStatus vital_status(const DigitalTwin& twin);

struct CohortSummary {
    std::size_t n = 0;
    CensoredSummary pfs;
    CensoredSummary os;
    LineStats lines;
    std::optional<double> median_cps;
    std::optional<Range> cps_range;
    std::optional<double> median_tmb;
    std::optional<Range> tmb_range;
    /// First category of each response; twins without one under "unknown".
    std::map<std::string, std::size_t> best_response;
    /// Full category sequence ("PR, PD"); same "unknown" bucket.
    std::map<std::string, std::size_t> trajectories;
    std::map<std::string, std::size_t> vital_status;  // alive, deceased, unknown

    bool operator==(const CohortSummary&) const = default;
};

CohortSummary summarize(std::span<const DigitalTwin> twins,
                        CensoringPolicy policy = CensoringPolicy::observed_bound);

Json summary_to_json(const CohortSummary& s);

}  // namespace oncotwin
