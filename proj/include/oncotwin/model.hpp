/**
 * @file model.hpp
 * @brief Domain types shared by every oncotwin module.
 *
 * A DigitalTwin is one patient (or one literature case) record. String
 * attributes coming from clinical documents keep their raw source text next
 * to the parsed value so that records serialize back byte-for-byte.
 */
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oncotwin {

enum class Source { institutional, literature };
enum class Adjudication { unreviewed, confirmed, corrected };
enum class TmbClass { low, intermediate, high };
enum class MmrStatus { pMMR, dMMR };
enum class Qualitative { positive, negative };
enum class ResponseCategory { CR, PR, SD, MR, PD };
enum class Similarity { gyn_oncology_discipline, carcinosarcoma_or_sarcomatoid_morphology };

/// PD-L1 expression. Percent scores (TPS, IC) are fractions in [0,1].
struct PdL1Score {
    std::optional<double> cps;
    std::optional<double> tps;
    std::optional<double> ic;
    std::optional<Qualitative> qualitative;

    [[nodiscard]] bool empty() const { return !cps && !tps && !ic && !qualitative; }
    bool operator==(const PdL1Score&) const = default;
};

/// Free-form marker such as "HER2: positive". `observed` is a "YYYY-MM" date
/// when the finding is dated in the source.
struct OtherMarker {
    std::string name;
    std::string detail;
    std::optional<std::string> observed;

    bool operator==(const OtherMarker&) const = default;
};

struct BiomarkerPanel {
    std::optional<PdL1Score> pdl1;
    std::optional<double> tmb;  // mutations per megabase
    std::optional<TmbClass> tmb_class;
    std::optional<MmrStatus> mmr;
    std::optional<double> msi_fraction;
    std::vector<OtherMarker> others;

    // Source strings; empty means "render from the parsed value".
    std::string pdl1_raw;
    std::string tmb_raw;
    std::string mmr_raw;

    [[nodiscard]] bool empty() const {
        return !pdl1 && !tmb && !tmb_class && !mmr && !msi_fraction && others.empty() &&
               pdl1_raw.empty() && tmb_raw.empty() && mmr_raw.empty();
    }
    bool operator==(const BiomarkerPanel&) const = default;
};

/// PFS or OS in months. `months` absent means the source gave no number.
struct CensoredDuration {
    std::optional<double> months;
    bool censored = false;
    std::string raw;

    bool operator==(const CensoredDuration&) const = default;
};

struct ResponseRecord {
    std::vector<ResponseCategory> categories;
    std::optional<std::string> adverse_effects;
    std::string raw;

    bool operator==(const ResponseRecord&) const = default;
};

struct TreatmentEvent {
    std::optional<int> line;
    std::string description;
    std::optional<ResponseRecord> response;

    bool operator==(const TreatmentEvent&) const = default;
};

/// Exact age when low == high; a range otherwise; unknown when both absent.
struct AgeValue {
    std::optional<int> low;
    std::optional<int> high;
    std::string raw;

    [[nodiscard]] bool known() const { return low.has_value(); }
    [[nodiscard]] bool exact() const { return low && high && *low == *high; }
    bool operator==(const AgeValue&) const = default;
};

struct DigitalTwin {
    std::string id;
    Source source = Source::institutional;
    std::string source_ref;
    std::optional<int> sample_size;
    std::optional<AgeValue> age;
    std::optional<std::string> gender;
    std::optional<std::string> race;
    std::string diagnosis;
    BiomarkerPanel biomarkers;
    std::vector<TreatmentEvent> previous_treatments;
    std::string study_treatment;
    std::optional<int> treatment_line;
    std::optional<ResponseRecord> study_response;
    std::optional<CensoredDuration> pfs;
    std::optional<CensoredDuration> os;
    std::optional<std::string> main_recommendation;
    std::vector<Similarity> similarity;
    Adjudication adjudication = Adjudication::unreviewed;

    bool operator==(const DigitalTwin&) const = default;
};

// Enum <-> wire string. from_string returns nullopt for unknown names.
std::string_view to_string(Source v);
std::string_view to_string(Adjudication v);
std::string_view to_string(TmbClass v);
std::string_view to_string(MmrStatus v);
std::string_view to_string(Qualitative v);
std::string_view to_string(ResponseCategory v);
std::string_view to_string(Similarity v);

std::optional<Source> source_from_string(std::string_view s);
std::optional<Adjudication> adjudication_from_string(std::string_view s);
std::optional<TmbClass> tmb_class_from_string(std::string_view s);
std::optional<MmrStatus> mmr_from_string(std::string_view s);
std::optional<ResponseCategory> response_category_from_string(std::string_view s);
std::optional<Similarity> similarity_from_string(std::string_view s);

/// True when the study treatment names an immune checkpoint inhibitor.
bool is_ici_treatment(std::string_view treatment);

}  // namespace oncotwin
