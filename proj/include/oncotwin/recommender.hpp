/**
 * @file recommender.hpp
 * @brief Biomarker rule engine over a curated knowledge file, and the
 *        cost-coverage letter.
 *
 * The knowledge base is data: one JSON object per line with the
 * KnowledgeEntry fields. Entries fire against the twin's biomarker state;
 * trial rows are filtered by region and recruitment.
 */
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oncotwin/analytics.hpp"
#include "oncotwin/codec.hpp"
#include "oncotwin/error.hpp"
#include "oncotwin/model.hpp"

namespace oncotwin {

enum class Condition { positive, negative, elevated, not_determined, any };
enum class ActionKind { treatment, confirmatory_test, trial_referral, monitoring };
/// Declaration order is rank order.
enum class EvidenceLevel { phase_3, phase_2, phase_1, case_report, retrospective, preclinical };

std::string_view to_string(Condition v);
std::string_view to_string(ActionKind v);
std::string_view to_string(EvidenceLevel v);

struct KnowledgeEntry {
    std::string id;  // "<biomarker>-<n>", stable across loads of one file
    std::string biomarker;
    Condition condition = Condition::any;
    ActionKind action_kind = ActionKind::treatment;
    std::string action;
    EvidenceLevel evidence_level = EvidenceLevel::preclinical;
    std::string expected_response;
    std::optional<std::string> region;
    std::optional<std::string> trial_id;
    std::optional<bool> recruiting;
    std::string reference;
    std::optional<std::string> note;  // supporting evidence folded into this row

    bool operator==(const KnowledgeEntry&) const = default;
};

class KbError : public Error {
public:
    using Error::Error;
};

struct KnowledgeBase {
    std::vector<KnowledgeEntry> entries;  // file order
    std::vector<std::string> warnings;
};

/// Throws KbError naming the line for malformed rows, trial referrals
/// without a trial id, rows without a reference and repeated
/// (biomarker, action) pairs.
KnowledgeBase load_kb(const std::filesystem::path& path);
KnowledgeBase parse_kb(std::string_view text, const std::string& origin = "<kb>");
Json kb_entry_to_json(const KnowledgeEntry& e);

/// Lowercase alphanumerics with spelled-out Greek ("FRα" -> "fralpha") and a
/// few synonyms folded ("estrogen receptor" -> "er").
std::string normalize_marker(std::string_view name);

enum class MarkerState { positive, negative, elevated, not_determined };
std::string_view to_string(MarkerState s);

struct MarkerReading {
    MarkerState state = MarkerState::not_determined;
    std::string evidence;                 // e.g. "HER2: positive"
    std::optional<std::string> observed;  // "YYYY-MM"
};

/// PD-L1, TMB and MMR are read from the typed panel; anything else from the
/// free-form markers.
MarkerReading marker_state(const DigitalTwin& twin, std::string_view biomarker);

struct RecommendContext {
    std::optional<std::string> region;
    bool allow_off_label = false;
    std::optional<std::string> as_of;  // "YYYY-MM"; no staleness check when absent
    int stale_after_months = 24;
};

struct Recommendation {
    KnowledgeEntry entry;
    std::string rationale;
    std::vector<std::string> gating_notes;
};

/// Ordered by evidence level, then action kind, then file order.
std::vector<Recommendation> recommend(const DigitalTwin& twin, const KnowledgeBase& kb,
                                      const RecommendContext& ctx = {});

Json recommendation_to_json(const Recommendation& r);

/// A treatment recommendation backed by the analog cohort instead of a KB
/// row: the twin's own PD-L1 evidence and the cohort's outcomes.
Recommendation analog_recommendation(const DigitalTwin& twin, const std::string& therapy,
                                     const CohortSummary& analogs);

/// Deterministic UTF-8 text with a front-matter block (twin id, date,
/// recommendation id). The analog summary is included when given.
std::string coverage_letter(const DigitalTwin& twin, const Recommendation& rec,
                            const std::string& date,
                            const std::optional<CohortSummary>& analogs = std::nullopt);

}  // namespace oncotwin
