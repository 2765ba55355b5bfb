#include <gtest/gtest.h>

#include <random>

#include "oncotwin/matcher.hpp"
#include "oncotwin/query.hpp"
#include "test_support.hpp"

using namespace oncotwin;
using oncotwin::testing::by_id;
using oncotwin::testing::data_path;
using oncotwin::testing::fixture_twins;
using oncotwin::testing::TempDir;

namespace {

std::vector<std::string> passing(const std::vector<DigitalTwin>& twins, const EligibilitySpec& spec) {
    std::vector<std::string> out;
    for (const auto& t : twins) {
        if (evaluate_eligibility(t, spec).passed) out.push_back(t.id);
    }
    return out;
}

bool has_reason(const MatchResult& r, const std::string& rule) {
    for (const auto& why : r.reasons) {
        if (why.rfind(rule + ":", 0) == 0) return true;
    }
    return false;
}

std::unique_ptr<TwinStore> fixture_store(const TempDir& dir) {
    auto store = TwinStore::open(dir.path());
    for (const auto& t : fixture_twins()) store->put(t, "test");
    return store;
}

}  // namespace

TEST(Eligibility, Case1Passes) {
    auto twins = fixture_twins();
    auto r = evaluate_eligibility(by_id(twins, "case-1"), EligibilitySpec{});
    EXPECT_TRUE(r.passed);
    EXPECT_TRUE(r.reasons.empty());
    EXPECT_EQ(r.per_rule.size(), 5u);
}

TEST(Eligibility, Case8FailsOnMmr) {
    auto twins = fixture_twins();
    auto r = evaluate_eligibility(by_id(twins, "case-8"), EligibilitySpec{});
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(r.per_rule.at("mmr"), RuleOutcome::fail);
    EXPECT_TRUE(has_reason(r, "mmr"));
}

TEST(Eligibility, Case7PassesOnMorphologyAlone) {
    auto twins = fixture_twins();
    const auto& c7 = by_id(twins, "case-7");
    EXPECT_TRUE(evaluate_eligibility(c7, EligibilitySpec{}).passed);
    EligibilitySpec gyn_only;
    gyn_only.similarity = {Similarity::gyn_oncology_discipline};
    auto r = evaluate_eligibility(c7, gyn_only);
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(r.per_rule.at("similarity"), RuleOutcome::fail);
}

TEST(Eligibility, QualitativePdl1IsUnknown) {
    auto twins = fixture_twins();
    for (const char* id : {"case-9", "case-16"}) {
        auto r = evaluate_eligibility(by_id(twins, id), EligibilitySpec{});
        EXPECT_EQ(r.per_rule.at("cps"), RuleOutcome::unknown) << id;
        EXPECT_FALSE(r.passed);
        EXPECT_TRUE(has_reason(r, "cps"));
    }
}

TEST(Eligibility, MissingValuesFailMandatoryRules) {
    DigitalTwin t;
    t.id = "empty";
    auto r = evaluate_eligibility(t, EligibilitySpec{});
    EXPECT_FALSE(r.passed);
    for (const auto& [rule, outcome] : r.per_rule) EXPECT_EQ(outcome, RuleOutcome::unknown) << rule;
    EXPECT_EQ(r.reasons.size(), 5u);
}

TEST(Eligibility, PassedIffEveryRulePasses) {
    for (const auto& t : fixture_twins()) {
        auto r = evaluate_eligibility(t, EligibilitySpec{});
        bool all = std::all_of(r.per_rule.begin(), r.per_rule.end(),
                               [](const auto& kv) { return kv.second == RuleOutcome::pass; });
        EXPECT_EQ(r.passed, all) << t.id;
    }
}

TEST(Eligibility, TmbBoundIsStrict) {
    auto t = by_id(fixture_twins(), "case-1");
    t.biomarkers.tmb = 15;
    EXPECT_EQ(evaluate_eligibility(t, EligibilitySpec{}).per_rule.at("tmb"), RuleOutcome::fail);
    t.biomarkers.tmb = 14.99;
    EXPECT_EQ(evaluate_eligibility(t, EligibilitySpec{}).per_rule.at("tmb"), RuleOutcome::pass);
}

// The default rules restated as a query predicate: a second, independent path
// to the same verdict (missing fields are false in predicates too).
TEST(Eligibility, AgreesWithPredicateOracle) {
    auto pred = parse_predicate(
        "cps >= 40 AND tmb < 15 AND mmr == pMMR AND similarity ~ gyn_oncology_discipline AND ici == true"
        " OR cps >= 40 AND tmb < 15 AND mmr == pMMR AND similarity ~ carcinosarcoma AND ici == true");
    std::vector<DigitalTwin> twins = fixture_twins();
    std::mt19937_64 rng(2024);
    const std::vector<std::string> treatments = {"Pembrolizumab", "Letrozole", "", "Nivolumab + ipilimumab",
                                                 "Carboplatin + paclitaxel"};
    for (int i = 0; i < 100; ++i) {
        DigitalTwin t;
        t.id = "synthetic-" + std::to_string(i);
        switch (rng() % 4) {
            case 0: break;
            case 1: t.biomarkers.pdl1 = PdL1Score{std::nullopt, std::nullopt, std::nullopt, Qualitative::positive}; break;
            default: t.biomarkers.pdl1 = PdL1Score{static_cast<double>(rng() % 101), std::nullopt, std::nullopt, std::nullopt};
        }
        if (rng() % 5) t.biomarkers.tmb = static_cast<double>(rng() % 300) / 10;
        if (rng() % 5) t.biomarkers.mmr = rng() % 3 ? MmrStatus::pMMR : MmrStatus::dMMR;
        if (rng() % 2) t.similarity.push_back(Similarity::gyn_oncology_discipline);
        if (rng() % 2) t.similarity.push_back(Similarity::carcinosarcoma_or_sarcomatoid_morphology);
        t.study_treatment = treatments[rng() % treatments.size()];
        twins.push_back(std::move(t));
    }
    ASSERT_EQ(twins.size(), 121u);
    for (const auto& t : twins) {
        EXPECT_EQ(evaluate_eligibility(t, EligibilitySpec{}).passed, matches(t, pred)) << t.id;
    }
}

TEST(Funnel, CandidatePoolNarrowsToSeven) {
    auto pool = read_twins_file(data_path("fixtures/funnel_candidates.jsonl"));
    ASSERT_EQ(pool.size(), 9u);
    auto stages = cohort_funnel(pool, EligibilitySpec{});
    std::vector<std::size_t> sizes;
    for (const auto& s : stages) sizes.push_back(s.ids.size());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{9, 9, 9, 9, 7}));
    EXPECT_EQ(stages.back().ids,
              (std::vector<std::string>{"case-1", "case-2", "case-3", "case-4", "case-5", "case-6", "case-7"}));
    EXPECT_EQ(stages.back().name, "ici");
}

TEST(Funnel, EmptyInput) {
    auto stages = cohort_funnel({}, EligibilitySpec{});
    ASSERT_EQ(stages.size(), 5u);
    for (const auto& s : stages) EXPECT_TRUE(s.ids.empty());
}

TEST(Funnel, HighCpsThreshold) {
    auto pool = read_twins_file(data_path("fixtures/funnel_candidates.jsonl"));
    EligibilitySpec spec;
    spec.min_cps = 80;
    EXPECT_EQ(cohort_funnel(pool, spec).back().ids,
              (std::vector<std::string>{"case-4", "case-5", "case-7"}));
}

TEST(Funnel, StagesAreNested) {
    auto stages = cohort_funnel(fixture_twins(), EligibilitySpec{});
    for (std::size_t i = 1; i < stages.size(); ++i) {
        for (const auto& id : stages[i].ids) {
            EXPECT_NE(std::find(stages[i - 1].ids.begin(), stages[i - 1].ids.end(), id), stages[i - 1].ids.end());
        }
    }
}

TEST(Monotonicity, TighterThresholdsNeverGrowTheMatchedSet) {
    auto twins = fixture_twins();
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
        EligibilitySpec a;
        a.min_cps = 1 + static_cast<double>(rng() % 100);
        a.max_tmb_exclusive = 1 + static_cast<double>(rng() % 200) / 10;
        EligibilitySpec b = a;
        b.min_cps += static_cast<double>(rng() % 30);
        b.max_tmb_exclusive = std::max(0.1, b.max_tmb_exclusive - static_cast<double>(rng() % 50) / 10);
        auto wide = passing(twins, a);
        auto narrow = passing(twins, b);
        EXPECT_TRUE(std::includes(wide.begin(), wide.end(), narrow.begin(), narrow.end()));
    }
}

TEST(Spec, JsonRoundTripAndChecks) {
    EligibilitySpec s;
    s.min_cps = 50;
    s.similarity = {Similarity::gyn_oncology_discipline};
    EXPECT_EQ(spec_from_json(spec_to_json(s)), s);
    EXPECT_EQ(spec_from_json(Json::object()), EligibilitySpec{});
    EXPECT_THROW(spec_from_json(Json{{"min_cps", 0}}), DomainError);
    EXPECT_THROW(spec_from_json(Json{{"max_tmb_exclusive", -1}}), DomainError);
    EXPECT_THROW(spec_from_json(Json{{"similarity", Json::array()}}), DomainError);
    EXPECT_NO_THROW(spec_from_json(Json{{"similarity", Json::array()}, {"similarity_filter", false}}));
    EXPECT_THROW(spec_from_json(Json{{"min_tps", 1}}), DomainError);
    EXPECT_THROW(spec_from_json(Json{{"min_cps", "high"}}), DomainError);
}

TEST(WhatIf, UnchangedCase1HasSixAnalogs) {
    TempDir dir;
    auto store = fixture_store(dir);
    auto snap = store->snapshot();
    auto r = whatif(snap->get("case-1"), {}, EligibilitySpec{}, *snap);
    EXPECT_TRUE(r.subject.passed);
    EXPECT_FALSE(r.reason);
    EXPECT_EQ(r.analog_ids,
              (std::vector<std::string>{"case-2", "case-3", "case-4", "case-5", "case-6", "case-7"}));
    EXPECT_EQ(r.summary.n, 6u);
    EXPECT_EQ(r.modified, snap->get("case-1"));
}

TEST(WhatIf, HigherCpsThresholdShrinksAnalogs) {
    TempDir dir;
    auto store = fixture_store(dir);
    auto snap = store->snapshot();
    EligibilitySpec spec;
    spec.min_cps = 80;
    auto r = whatif(snap->get("case-1"), {}, spec, *snap);
    EXPECT_EQ(r.analog_ids, (std::vector<std::string>{"case-4", "case-5", "case-7"}));
}

TEST(WhatIf, DmmrOverrideEmptiesAnalogs) {
    TempDir dir;
    auto store = fixture_store(dir);
    auto snap = store->snapshot();
    auto r = whatif(snap->get("case-1"), overrides_from_json(Json{{"mmr", "dMMR"}}), EligibilitySpec{}, *snap);
    EXPECT_FALSE(r.subject.passed);
    EXPECT_TRUE(r.analog_ids.empty());
    ASSERT_TRUE(r.reason);
    EXPECT_NE(r.reason->find("mmr"), std::string::npos);
    EXPECT_EQ(r.modified.biomarkers.mmr, MmrStatus::dMMR);
    EXPECT_TRUE(r.modified.biomarkers.mmr_raw.empty());
}

TEST(WhatIf, LowCpsOverrideFailsWithReason) {
    TempDir dir;
    auto store = fixture_store(dir);
    auto snap = store->snapshot();
    auto r = whatif(snap->get("case-1"), overrides_from_json(Json{{"cps", 10}}), EligibilitySpec{}, *snap);
    EXPECT_FALSE(r.subject.passed);
    EXPECT_EQ(r.summary.n, 0u);
    ASSERT_TRUE(r.reason);
    EXPECT_NE(r.reason->find("cps"), std::string::npos);
    EXPECT_DOUBLE_EQ(*r.modified.biomarkers.pdl1->cps, 10);
    EXPECT_DOUBLE_EQ(*r.modified.biomarkers.pdl1->tps, 0.03);
}

TEST(WhatIf, StoreAndOriginalUntouched) {
    TempDir dir;
    auto store = fixture_store(dir);
    auto before = store->snapshot()->all();
    auto log_size = std::filesystem::file_size(dir.path() / "twins.log");
    auto original = store->get("case-1");
    auto copy = original;
    whatif(original, overrides_from_json(Json{{"tmb", 20}, {"study treatment", "Letrozole"}}),
           EligibilitySpec{}, *store->snapshot());
    EXPECT_EQ(original, copy);
    EXPECT_EQ(store->snapshot()->all(), before);
    EXPECT_EQ(std::filesystem::file_size(dir.path() / "twins.log"), log_size);
}

TEST(WhatIf, OverrideParsing) {
    auto o = overrides_from_json(Json{{"pd-l1", "CPS: 5"}, {"tmb/mb", "20"}, {"msi/mss", "dMMR"},
                                      {"others", Json::array({Json{{"name", "HER2"}, {"detail", "negative"}}})},
                                      {"treatment line", 4}});
    auto t = apply_overrides(by_id(fixture_twins(), "case-1"), o);
    EXPECT_DOUBLE_EQ(*t.biomarkers.pdl1->cps, 5);
    EXPECT_EQ(t.biomarkers.pdl1_raw, "CPS: 5");
    EXPECT_EQ(t.biomarkers.tmb_class, TmbClass::high);
    EXPECT_EQ(t.biomarkers.mmr, MmrStatus::dMMR);
    ASSERT_EQ(t.biomarkers.others.size(), 1u);
    EXPECT_EQ(t.treatment_line, 4);
    EXPECT_THROW(overrides_from_json(Json{{"age", 50}}), DomainError);
    EXPECT_THROW(overrides_from_json(Json{{"cps", "high"}}), DomainError);
    EXPECT_THROW(overrides_from_json(Json{{"mmr", "maybe"}}), DomainError);
}

TEST(WhatIf, JsonShape) {
    TempDir dir;
    auto store = fixture_store(dir);
    auto snap = store->snapshot();
    auto j = whatif_to_json(whatif(snap->get("case-1"), {}, EligibilitySpec{}, *snap));
    EXPECT_EQ(j["analogs"].size(), 6u);
    EXPECT_EQ(j["summary"]["n"], 6);
    EXPECT_EQ(decode_twin(j["twin"]), snap->get("case-1"));
}
