/**
 * @file matcher.hpp
 * @brief Analog-case eligibility rules, the screening funnel and the what-if
 *        overlay.
 *
 * Every rule is mandatory. A rule whose input is missing from the twin is
 * "unknown", and unknown never passes.
 */
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oncotwin/analytics.hpp"
#include "oncotwin/codec.hpp"
#include "oncotwin/model.hpp"
#include "oncotwin/store.hpp"

namespace oncotwin {

struct EligibilitySpec {
    double min_cps = 40;
    double max_tmb_exclusive = 15;
    MmrStatus required_mmr = MmrStatus::pMMR;
    bool similarity_filter = true;
    std::set<Similarity> similarity{Similarity::gyn_oncology_discipline,
                                    Similarity::carcinosarcoma_or_sarcomatoid_morphology};
    bool require_ici_treatment = true;

    bool operator==(const EligibilitySpec&) const = default;
};

/// Throws DomainError for non-positive thresholds or an empty similarity set
/// with filtering on.
void check_spec(const EligibilitySpec& spec);

/// Missing keys keep their defaults; unknown keys are a DomainError.
EligibilitySpec spec_from_json(const Json& j);
Json spec_to_json(const EligibilitySpec& spec);

enum class RuleOutcome { pass, fail, unknown };
std::string_view to_string(RuleOutcome r);

// Rule names used in MatchResult::per_rule and the funnel.
inline constexpr std::string_view kRuleCps = "cps";
inline constexpr std::string_view kRuleTmb = "tmb";
inline constexpr std::string_view kRuleMmr = "mmr";
inline constexpr std::string_view kRuleSimilarity = "similarity";
inline constexpr std::string_view kRuleIci = "ici";

struct MatchResult {
    std::string twin_id;
    bool passed = false;
    std::map<std::string, RuleOutcome> per_rule;
    std::vector<std::string> reasons;  // "<rule>: <why>" for each non-pass
};

MatchResult evaluate_eligibility(const DigitalTwin& twin, const EligibilitySpec& spec);
Json match_result_to_json(const MatchResult& r);

struct FunnelStage {
    std::string name;
    std::vector<std::string> ids;
};

/// Stages: all, cps, tmb+mmr, similarity, ici. Each is a subset of the one
/// before. Disabled rules let everything through their stage.
std::vector<FunnelStage> cohort_funnel(const std::vector<DigitalTwin>& twins,
                                       const EligibilitySpec& spec);
Json funnel_to_json(const std::vector<FunnelStage>& stages);

/// Biomarker and treatment fields a what-if may change. Setting a structured
/// value drops the matching source string so the record renders from it.
struct WhatIfOverrides {
    std::optional<double> cps;
    std::optional<double> tmb;
    std::optional<MmrStatus> mmr;
    std::optional<std::string> pdl1;  // source-text forms, parsed like ingestion
    std::optional<std::string> tmb_text;
    std::optional<std::string> mmr_text;
    std::optional<std::vector<OtherMarker>> others;
    std::optional<std::string> study_treatment;
    std::optional<int> treatment_line;
    std::optional<std::vector<TreatmentEvent>> previous_treatments;
};

/// Keys: cps, tmb, mmr, "pd-l1", "tmb/mb", "msi/mss", others,
/// "study treatment", "treatment line", "previous treatments". Anything else
/// is a DomainError naming the key.
WhatIfOverrides overrides_from_json(const Json& j);

DigitalTwin apply_overrides(DigitalTwin twin, const WhatIfOverrides& o);

struct WhatIfResult {
    DigitalTwin modified;
    MatchResult subject;  // the modified twin against subject_spec
    std::vector<std::string> analog_ids;
    CohortSummary summary;
    std::optional<std::string> reason;  // set when no analog search happened
};

/// The default spec without the ICI requirement.
EligibilitySpec subject_spec(EligibilitySpec spec = {});

/// The subject is gated by `subject` (it is the patient being planned for,
/// so no ICI requirement). When it passes, analogs are the other snapshot
/// twins passing `spec`. Reads only from the snapshot.
WhatIfResult whatif(const DigitalTwin& twin, const WhatIfOverrides& overrides,
                    const EligibilitySpec& spec, const StoreSnapshot& snapshot,
                    const EligibilitySpec& subject = subject_spec());

Json whatif_to_json(const WhatIfResult& r);

}  // namespace oncotwin
