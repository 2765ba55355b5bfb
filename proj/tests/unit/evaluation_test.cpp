#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "oncotwin/evaluation.hpp"
#include "test_support.hpp"

using namespace oncotwin;
using oncotwin::testing::data_path;
using oncotwin::testing::TempDir;

namespace {

ConfusionTally tally(std::int64_t tp, std::int64_t tn, std::int64_t fp, std::int64_t fn) {
    return {"x", tp + tn + fp + fn, tp, tn, fp, fn};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const MetricsRow& row(const EvaluationReport& r, const std::string& source, const std::string& attr) {
    for (const auto& x : r.rows) {
        if (x.source == source && x.tally.attribute == attr) return x;
    }
    throw std::runtime_error("row missing: " + source + "/" + attr);
}

}  // namespace

TEST(Score, Verdicts) {
    EXPECT_EQ(score("Diagnosis", "UCS", "UCS"), Verdict::tp);
    EXPECT_EQ(score("Diagnosis", std::nullopt, std::nullopt), Verdict::tn);
    EXPECT_EQ(score("Race", "White", std::nullopt), Verdict::fp);
    EXPECT_EQ(score("Race", std::nullopt, "White"), Verdict::fn);
    EXPECT_EQ(score("PFS [months]", "6 months", "PFS 18"), Verdict::fn);
}

TEST(Score, CanonicalizesThroughParsers) {
    EXPECT_EQ(score("PFS [months]", ">30 (ongoing)", "> 30 (ongoing)"), Verdict::tp);
    EXPECT_EQ(score("OS [months]", "9,9", "9.9"), Verdict::tp);
    EXPECT_EQ(score("Study treatment response", "partial response", "PR"), Verdict::tp);
    EXPECT_EQ(score("Diagnosis", "  ucs ", "UCS"), Verdict::tp);
    EXPECT_EQ(score("Diagnosis", "n/a", std::nullopt), Verdict::tn);
    EXPECT_EQ(score("Sample size", "007", "7"), Verdict::tp);
}

TEST(Metrics, ReferenceTableRows) {
    auto lit = metrics(tally(225, 120, 0, 7));
    EXPECT_EQ(display2(lit.accuracy), "0.98");
    EXPECT_EQ(display2(lit.precision), "1.00");
    EXPECT_EQ(display2(lit.recall), "0.97");
    EXPECT_EQ(display2(lit.f1), "0.98");
    auto diag = metrics(tally(7, 0, 0, 0));
    for (const auto& m : {diag.accuracy, diag.precision, diag.recall, diag.f1}) EXPECT_EQ(display2(m), "1.00");
    EXPECT_EQ(display2(metrics(tally(1, 0, 0, 6)).recall), "0.14");
}

TEST(Metrics, UndefinedAreAbsent) {
    auto m = metrics(tally(0, 5, 0, 0));
    EXPECT_DOUBLE_EQ(*m.accuracy, 1.0);
    EXPECT_FALSE(m.precision);
    EXPECT_FALSE(m.recall);
    EXPECT_FALSE(m.f1);
    EXPECT_EQ(display2(m.f1), "");
    auto zero = metrics(tally(0, 0, 2, 3));
    EXPECT_DOUBLE_EQ(*zero.precision, 0);
    EXPECT_FALSE(zero.f1);
    EXPECT_THROW(metrics(tally(0, 0, 0, 0)), DomainError);
    EXPECT_THROW(metrics({"x", 5, 1, 1, 1, 1}), DomainError);
}

TEST(Metrics, BoundsOverAllSmallTallies) {
    for (int tp = 0; tp <= 8; ++tp)
        for (int tn = 0; tn <= 4; ++tn)
            for (int fp = 0; fp <= 8; ++fp)
                for (int fn = 0; fn <= 8; ++fn) {
                    if (tp + tn + fp + fn == 0) continue;
                    auto m = metrics(tally(tp, tn, fp, fn));
                    for (const auto& v : {m.accuracy, m.precision, m.recall, m.f1}) {
                        if (v) {
                            EXPECT_GE(*v, 0.0);
                            EXPECT_LE(*v, 1.0);
                        }
                    }
                    if (m.f1) {
                        double p = *m.precision, r = *m.recall;
                        EXPECT_LE(*m.f1, std::max(p, r) + 1e-12);
                        EXPECT_LE(*m.f1, std::min(2 * p, 2 * r) + 1e-12);
                    }
                }
}

TEST(Rounding, HalfUp) {
    EXPECT_DOUBLE_EQ(round2(0.125), 0.13);
    EXPECT_DOUBLE_EQ(round2(0.135), 0.14);
    EXPECT_DOUBLE_EQ(round2(0.9749), 0.97);
    EXPECT_EQ(display2(1.0), "1.00");
    EXPECT_EQ(display2(std::nullopt), "");
}

TEST(SampleSize, FrozenValues) {
    EXPECT_EQ(sample_size(1.96, 7956, 0.05, 0.5), 367);
    EXPECT_EQ(sample_size(1.96, 1'000'000'000'000, 0.05, 0.5), 385);
    EXPECT_EQ(sample_size(1.96, 1, 0.05, 0.5), 1);
    EXPECT_EQ(sample_size(2.576, 1000, 0.05, 0.5), 400);
    EXPECT_EQ(sample_size(1.645, 500, 0.1, 0.3), 52);
    EXPECT_EQ(sample_size(1.96, 352, 0.03, 0.5), 265);
}

TEST(SampleSize, DomainErrors) {
    EXPECT_THROW(sample_size(0, 100, 0.05, 0.5), DomainError);
    EXPECT_THROW(sample_size(1.96, 0, 0.05, 0.5), DomainError);
    EXPECT_THROW(sample_size(1.96, 100, 0, 0.5), DomainError);
    EXPECT_THROW(sample_size(1.96, 100, 1, 0.5), DomainError);
    EXPECT_THROW(sample_size(1.96, 100, 0.05, 0), DomainError);
    EXPECT_THROW(sample_size(1.96, 100, 0.05, 1), DomainError);
}

TEST(SampleSize, MonotoneOnGrid) {
    const std::vector<std::int64_t> ns = {1, 10, 100, 352, 1000, 7956, 100000, 10'000'000, 1'000'000'000};
    const std::vector<double> es = {0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.5};
    const std::vector<double> ps = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
    int points = 0;
    for (auto n : ns)
        for (auto e : es)
            for (auto p : ps) {
                ++points;
                auto v = sample_size(1.96, n, e, p);
                EXPECT_GE(v, 1);
                EXPECT_LE(v, n);
                EXPECT_LE(v, sample_size(1.96, n * 2, e, p));
                EXPECT_GE(v, sample_size(1.96, n, e * 1.1, p));
                EXPECT_LE(v, sample_size(1.96, n, e, 0.5));
            }
    EXPECT_GE(points, 990);
}

TEST(DrawSample, DistinctDeterministicOrderFree) {
    std::vector<std::string> ids;
    for (int i = 0; i < 7956; ++i) ids.push_back("attr-" + std::to_string(i));
    auto a = draw_sample(ids, 352, 42);
    EXPECT_EQ(a.size(), 352u);
    EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), 352u);
    EXPECT_EQ(draw_sample(ids, 352, 42), a);
    auto shuffled = ids;
    std::mt19937 rng(1);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(draw_sample(shuffled, 352, 42), a);
    EXPECT_NE(draw_sample(ids, 352, 43), a);
    std::set<std::string> pop(ids.begin(), ids.end());
    for (const auto& x : a) EXPECT_TRUE(pop.count(x));
}

TEST(DrawSample, EdgeCases) {
    std::vector<std::string> ids{"c", "a", "b"};
    auto all = draw_sample(ids, 3, 0);
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_TRUE(draw_sample(ids, 0, 0).empty());
    EXPECT_THROW(draw_sample(ids, 4, 0), DomainError);
    EXPECT_THROW(draw_sample({"a", "a"}, 1, 0), DomainError);
}

TEST(DrawSample, RoughlyUniform) {
    std::vector<std::string> ids;
    for (int i = 0; i < 20; ++i) ids.push_back(std::string(1, char('a' + i)));
    std::map<std::string, int> hits;
    const int trials = 20000;
    for (int s = 0; s < trials; ++s) {
        for (const auto& x : draw_sample(ids, 5, static_cast<std::uint64_t>(s))) ++hits[x];
    }
    // Each id is drawn with probability 1/4; allow five standard deviations.
    const double expected = trials * 0.25;
    const double sd = std::sqrt(trials * 0.25 * 0.75);
    for (const auto& [id, n] : hits) EXPECT_NEAR(n, expected, 5 * sd) << id;
    EXPECT_EQ(hits.size(), 20u);
}

TEST(EvaluateRun, LiteratureFixtureTotal) {
    auto recs = read_adjudications(data_path("fixtures/adjudications_literature.jsonl"));
    auto r = evaluate_run(recs);
    const auto& total = row(r, "literature", "TOTAL");
    EXPECT_EQ(total.tally, (ConfusionTally{"TOTAL", 352, 225, 120, 0, 7}));
    EXPECT_EQ(display2(total.metrics.accuracy), "0.98");
    EXPECT_EQ(display2(total.metrics.recall), "0.97");
    EXPECT_TRUE(r.mismatches.empty());
}

TEST(EvaluateRun, EhrFixtureTotal) {
    auto r = evaluate_run(read_adjudications(data_path("fixtures/adjudications_ehr.jsonl")));
    const auto& total = row(r, "ehr", "TOTAL");
    EXPECT_EQ(total.tally, (ConfusionTally{"TOTAL", 70, 53, 0, 2, 15}));
    EXPECT_DOUBLE_EQ(*total.metrics.accuracy, 53.0 / 70.0);
    EXPECT_EQ(display2(total.metrics.accuracy), "0.76");
    EXPECT_EQ(display2(row(r, "ehr", "PFS [months]").metrics.recall), "0.14");
    EXPECT_EQ(r.rows.size(), 11u);
    EXPECT_TRUE(r.mismatches.empty());
}

TEST(EvaluateRun, TotalsEqualSumOfRows) {
    auto recs = read_adjudications(data_path("fixtures/adjudications_ehr.jsonl"));
    auto lit = read_adjudications(data_path("fixtures/adjudications_literature.jsonl"));
    recs.insert(recs.end(), lit.begin(), lit.end());
    auto r = evaluate_run(recs);
    std::map<std::string, ConfusionTally> sums;
    for (const auto& x : r.rows) {
        if (x.tally.attribute == "TOTAL") {
            auto s = sums[x.source];
            s.attribute = "TOTAL";
            EXPECT_EQ(x.tally, s) << x.source;
            continue;
        }
        auto& s = sums[x.source];
        s.observations += x.tally.observations;
        s.tp += x.tally.tp;
        s.tn += x.tally.tn;
        s.fp += x.tally.fp;
        s.fn += x.tally.fn;
    }
    EXPECT_EQ(sums.size(), 2u);
}

TEST(EvaluateRun, EmptyAndConflicts) {
    EXPECT_TRUE(evaluate_run({}).rows.empty());
    AdjudicationRecord a{"ehr", "case-1", "Age", "65", "65", Verdict::tp, "r1", ""};
    auto b = a;
    b.verdict = Verdict::fn;
    b.reviewer = "r2";
    try {
        evaluate_run({a, b});
        FAIL() << "expected ConflictingVerdicts";
    } catch (const ConflictingVerdicts& e) {
        EXPECT_EQ(e.conflicts(), std::vector<std::string>{"ehr/case-1/Age"});
    }
    // Agreeing repeats count once.
    auto r = evaluate_run({a, a});
    EXPECT_EQ(r.rows.front().tally.observations, 1);
}

TEST(EvaluateRun, FlagsVerdictsThatDisagreeWithScoring) {
    AdjudicationRecord a{"ehr", "case-1", "Age", "65", "70", Verdict::tp, "r1", ""};
    auto r = evaluate_run({a});
    ASSERT_EQ(r.mismatches.size(), 1u);
    EXPECT_EQ(r.mismatches[0].rescored, Verdict::fn);
}

TEST(EvaluateRun, CsvMirrorsImportedTableForLiterature) {
    auto r = evaluate_run(read_adjudications(data_path("fixtures/adjudications_literature.jsonl")));
    auto csv = report_to_csv(r);
    EXPECT_NE(csv.find("literature,TOTAL,352,225,120,0,7,0.98,1.00,0.97,0.98"), std::string::npos);
    EXPECT_TRUE(lint_metrics_table(csv).empty());
}

TEST(Adjudication, FileRoundTripAndErrors) {
    TempDir dir;
    auto path = dir.path() / "adj.jsonl";
    AdjudicationRecord a{"literature", "pub-001", "Gender", std::nullopt, "female", Verdict::fn, "r1", "missed"};
    append_adjudication(path, a);
    append_adjudication(path, a);
    auto back = read_adjudications(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], a);
    std::ofstream(path, std::ios::app) << "{\"source\":\"ehr\"}\n";
    try {
        read_adjudications(path);
        FAIL();
    } catch (const DecodeError& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
    }
    EXPECT_THROW(read_adjudications(dir.path() / "missing.jsonl"), IoError);
}

TEST(Linter, FlagsInconsistentImportedRows) {
    auto findings = lint_metrics_table(slurp(data_path("reference/extraction_metrics_table.csv")));
    std::set<std::string> rows;
    for (const auto& f : findings) rows.insert(f.source + "/" + f.attribute);
    EXPECT_EQ(rows, (std::set<std::string>{"EHR/Age", "EHR/Previous treatments",
                                           "EHR/Study treatment response", "EHR/TOTAL"}));
    bool prev_recall = false;
    for (const auto& f : findings) {
        if (f.attribute == "Previous treatments" && f.column == "recall") {
            prev_recall = true;
            EXPECT_EQ(f.reported, "1.00");
            EXPECT_EQ(f.recomputed, "0.29");
        }
    }
    EXPECT_TRUE(prev_recall);
}

TEST(Linter, CountMismatchAndMalformed) {
    auto f = lint_metrics_table("source,attribute,observations,tp,tn,fp,fn,accuracy,precision,recall,f1\n"
                                "X,A,10,1,1,1,1,,,,\n");
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].column, "observations");
    EXPECT_THROW(lint_metrics_table("source,attribute\nX,A\n"), DecodeError);
    EXPECT_THROW(lint_metrics_table("source,attribute,observations,tp,tn,fp,fn,accuracy,precision,recall,f1\n"
                                    "X,A,ten,1,1,1,1,,,,\n"),
                 DecodeError);
}
