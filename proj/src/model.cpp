#include "oncotwin/model.hpp"

#include <array>
#include <charconv>
#include <utility>

#include "text.hpp"

namespace oncotwin {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table,
                        std::string_view s) {
    for (const auto& [value, name] : table) {
        if (name == s) return value;
    }
    return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) {
    for (const auto& [value, name] : table) {
        if (value == v) return name;
    }
    return "?";
}

constexpr std::array<std::pair<Source, std::string_view>, 2> kSources{{
    {Source::institutional, "institutional"},
    {Source::literature, "literature"},
}};

constexpr std::array<std::pair<Adjudication, std::string_view>, 3> kAdjudications{{
    {Adjudication::unreviewed, "unreviewed"},
    {Adjudication::confirmed, "confirmed"},
    {Adjudication::corrected, "corrected"},
}};

constexpr std::array<std::pair<TmbClass, std::string_view>, 3> kTmbClasses{{
    {TmbClass::low, "low"},
    {TmbClass::intermediate, "intermediate"},
    {TmbClass::high, "high"},
}};

constexpr std::array<std::pair<MmrStatus, std::string_view>, 2> kMmr{{
    {MmrStatus::pMMR, "pMMR"},
    {MmrStatus::dMMR, "dMMR"},
}};

constexpr std::array<std::pair<ResponseCategory, std::string_view>, 5> kResponses{{
    {ResponseCategory::CR, "CR"},
    {ResponseCategory::PR, "PR"},
    {ResponseCategory::SD, "SD"},
    {ResponseCategory::MR, "MR"},
    {ResponseCategory::PD, "PD"},
}};

constexpr std::array<std::pair<Similarity, std::string_view>, 2> kSimilarity{{
    {Similarity::gyn_oncology_discipline, "gyn_oncology_discipline"},
    {Similarity::carcinosarcoma_or_sarcomatoid_morphology,
     "carcinosarcoma_or_sarcomatoid_morphology"},
}};

}  // namespace

std::string_view to_string(Source v) { return name_of(kSources, v); }
std::string_view to_string(Adjudication v) { return name_of(kAdjudications, v); }
std::string_view to_string(TmbClass v) { return name_of(kTmbClasses, v); }
std::string_view to_string(MmrStatus v) { return name_of(kMmr, v); }
std::string_view to_string(Qualitative v) {
    return v == Qualitative::positive ? "positive" : "negative";
}
std::string_view to_string(ResponseCategory v) { return name_of(kResponses, v); }
std::string_view to_string(Similarity v) { return name_of(kSimilarity, v); }

std::optional<Source> source_from_string(std::string_view s) { return lookup(kSources, s); }
std::optional<Adjudication> adjudication_from_string(std::string_view s) {
    return lookup(kAdjudications, s);
}
std::optional<TmbClass> tmb_class_from_string(std::string_view s) {
    return lookup(kTmbClasses, s);
}
std::optional<MmrStatus> mmr_from_string(std::string_view s) { return lookup(kMmr, s); }
std::optional<ResponseCategory> response_category_from_string(std::string_view s) {
    return lookup(kResponses, s);
}
std::optional<Similarity> similarity_from_string(std::string_view s) {
    return lookup(kSimilarity, s);
}

bool is_ici_treatment(std::string_view treatment) {
    static constexpr std::array<std::string_view, 14> kMarkers{
        "pembrolizumab", "nivolumab",  "ipilimumab", "avelumab", "durvalumab",
        "atezolizumab",  "dostarlimab", "cemiplimab", "tremelimumab", "tislelizumab",
        "pd-1",          "pd-l1",      "ctla-4",     "checkpoint inhibitor"};
    const auto lowered = text::lower(treatment);
    for (auto marker : kMarkers) {
        if (lowered.find(marker) != std::string::npos) return true;
    }
    return false;
}

namespace text {

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), end);
}

}  // namespace text

}  // namespace oncotwin
