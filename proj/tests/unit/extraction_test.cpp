/**
 * @file extraction_test.cpp
 * @brief Prompts, privacy guard, JSON contract, merge rules and job runs.
 */

#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "oncotwin/extraction.hpp"
#include "test_support.hpp"

using namespace oncotwin;
using oncotwin::testing::data_path;
using oncotwin::testing::TempDir;

namespace {

const std::string kPromptDir = data_path("prompts");

std::vector<SourceDocument> mock_corpus() {
    auto entries = read_manifest(data_path("mock_corpus/manifest.jsonl"));
    return ingest_manifest(entries, data_path("mock_corpus"), nullptr);
}

LlmBackendSpec mock_spec(std::string dir = data_path("mock_corpus/replies")) {
    LlmBackendSpec s;
    s.kind = BackendKind::mock;
    s.endpoint = std::move(dir);
    s.model_name = "mock";
    return s;
}

ExtractionJob job_for(const std::vector<SourceDocument>& docs, std::uint64_t seed = 7) {
    ExtractionJob job;
    for (const auto& d : docs) job.doc_ids.push_back(d.doc_id);
    job.backend = mock_spec();
    job.seed = seed;
    return job;
}

// Counts calls so tests can assert nothing crossed the wire.
class CountingBackend final : public LlmBackend {
public:
    explicit CountingBackend(LlmBackendSpec s, std::string reply = "{}")
        : LlmBackend(std::move(s)), reply_(std::move(reply)) {}
    std::string complete(const BackendRequest&) override {
        ++calls;
        return reply_;
    }
    std::atomic<int> calls{0};

private:
    std::string reply_;
};

void write_reply(const std::filesystem::path& dir, const std::string& doc_id, const Json& output) {
    std::ofstream out(dir / (doc_id + ".json"));
    out << Json{{"output", output.is_string() ? output.get<std::string>() : output.dump()}}.dump();
}

const char* kCaseOneNote =
    "Tumorboard 2021. 77-year-old woman, uterine carcinosarcoma (UCS).\n"
    "PD-L1 CPS: 41, TPS: 3%, IC: 40%. TMB 6.3 Mut/Mb. pMMR (3.6%). HER2 positive.\n"
    "Line 3: radiotherapy + pembrolizumab (off-label). Partial response.\n";

}  // namespace

TEST(SchemaTest, KeySets) {
    EXPECT_EQ(schema("ehr-v1").keys.size(), 10U);
    EXPECT_EQ(schema("literature-v1").keys.size(), 12U);
    EXPECT_TRUE(schema("literature-v1").has_key("n"));
    EXPECT_FALSE(schema("ehr-v1").has_key("n"));
    EXPECT_THROW(schema("v0"), NotFoundError);
}

TEST(PromptTest, CaseOneNoteEmbedsEveryKey) {
    auto doc = ingest_text(kCaseOneNote, Origin::ehr);
    auto tmpl = load_prompt_template(kPromptDir, "ehr-v1");
    auto examples = load_prompt_examples(kPromptDir, "ehr-v1");
    ASSERT_FALSE(examples.empty());
    auto prompt = build_prompt(doc, tmpl, examples, schema("ehr-v1"), 100000);
    for (const auto& k : schema("ehr-v1").keys) {
        EXPECT_NE(prompt.find("\"" + k.name + "\""), std::string::npos) << k.name;
    }
    EXPECT_NE(prompt.find(examples[0].output), std::string::npos);
    EXPECT_NE(prompt.find(doc.text), std::string::npos);
    EXPECT_EQ(prompt.find("{{"), std::string::npos);
    EXPECT_EQ(prompt, build_prompt(doc, tmpl, examples, schema("ehr-v1"), 100000));
}

TEST(PromptTest, ZeroShotAndDocumentBracesLeftAlone) {
    auto doc = ingest_text("Note with {{keys}} literally inside.", Origin::ehr);
    auto tmpl = load_prompt_template(kPromptDir, "ehr-v1");
    auto prompt = build_prompt(doc, tmpl, {}, schema("ehr-v1"), 100000);
    EXPECT_NE(prompt.find("Note with {{keys}} literally inside."), std::string::npos);
    EXPECT_EQ(prompt.find("Example 1"), std::string::npos);
}

TEST(PromptTest, LongestPublicationFitsWithoutChunking) {
    SourceDocument doc;
    doc.doc_id = "longest";
    doc.origin = Origin::literature;
    doc.text.assign(934513, 'a');
    auto tmpl = load_prompt_template(kPromptDir, "literature-v1");
    auto examples = load_prompt_examples(kPromptDir, "literature-v1");
    auto prompt = build_prompt(doc, tmpl, examples, schema("literature-v1"), 1000000);
    EXPECT_NE(prompt.find(doc.text), std::string::npos);
}

TEST(PromptTest, OversizeNamesDocAndOverflow) {
    SourceDocument doc;
    doc.doc_id = "big-doc";
    doc.text.assign(5000, 'x');
    PromptTemplate tmpl{"t", "{{document}}"};
    try {
        build_prompt(doc, tmpl, {}, schema("ehr-v1"), 4000);
        FAIL();
    } catch (const PromptTooLargeError& e) {
        EXPECT_EQ(e.doc_id(), "big-doc");
        EXPECT_EQ(e.overflow(), 1000U);
        EXPECT_NE(std::string(e.what()).find("big-doc"), std::string::npos);
    }
    doc.text.clear();
    EXPECT_THROW(build_prompt(doc, tmpl, {}, schema("ehr-v1"), 4000), DomainError);
}

TEST(PrivacyTest, ExhaustiveMatrix) {
    int blocked = 0;
    for (auto origin : {Origin::ehr, Origin::literature}) {
        for (auto kind : {BackendKind::local, BackendKind::cloud, BackendKind::mock}) {
            for (auto tier : {PrivacyTier::phi_allowed, PrivacyTier::public_only}) {
                LlmBackendSpec spec;
                spec.kind = kind;
                spec.privacy_tier = tier;
                const bool must_block = origin == Origin::ehr &&
                                        (tier == PrivacyTier::public_only || kind == BackendKind::cloud);
                CountingBackend backend(spec);
                SourceDocument doc = ingest_text("text", origin);
                if (must_block) {
                    EXPECT_THROW(check_privacy(origin, spec), PrivacyError);
                    EXPECT_THROW(invoke_backend(backend, doc, "p"), PrivacyError);
                    EXPECT_EQ(backend.calls, 0);
                    ++blocked;
                } else {
                    EXPECT_NO_THROW(invoke_backend(backend, doc, "p"));
                    EXPECT_EQ(backend.calls, 1);
                }
            }
        }
    }
    EXPECT_EQ(blocked, 4);
}

TEST(PrivacyTest, GuardFiresForEveryEhrDocAndAbortsJob) {
    auto docs = mock_corpus();
    LlmBackendSpec spec = mock_spec();
    spec.kind = BackendKind::cloud;
    spec.privacy_tier = PrivacyTier::public_only;
    CountingBackend backend(spec);
    for (const auto& d : docs) {
        ASSERT_EQ(d.origin, Origin::ehr);
        EXPECT_THROW(invoke_backend(backend, d, "p"), PrivacyError);
    }
    EXPECT_THROW(run_job(job_for(docs), docs, backend, kPromptDir), PrivacyError);
    EXPECT_EQ(backend.calls, 0);
}

TEST(ContractTest, ValidLiteratureObject) {
    Json j = Json::object();
    for (const auto& k : schema("literature-v1").keys) j[k.name] = "x";
    auto r = enforce_contract(j.dump(), "literature-v1");
    ASSERT_TRUE(r.parsed);
    EXPECT_FALSE(r.repair_applied);
    EXPECT_FALSE(r.quarantine_reason);
    EXPECT_EQ(r.parsed->size(), 12U);
}

TEST(ContractTest, MechanicalRepairs) {
    auto fenced = enforce_contract("```json\n{\"diagnosis\": \"UCS\"}\n```", "ehr-v1");
    ASSERT_TRUE(fenced.parsed);
    EXPECT_TRUE(fenced.repair_applied);
    EXPECT_EQ((*fenced.parsed)["diagnosis"], "UCS");

    auto chatty = enforce_contract("Here you go: {\"age\": \"60\"} Hope this helps.", "ehr-v1");
    ASSERT_TRUE(chatty.parsed);
    EXPECT_TRUE(chatty.repair_applied);

    auto commas = enforce_contract("{\"age\": \"60\", \"race\": [\"a\",],}", "ehr-v1");
    ASSERT_TRUE(commas.parsed);
    EXPECT_EQ(commas.repairs, std::vector<std::string>{"trailing_commas"});

    auto quotes = enforce_contract("{'age': '60', 'gender': 'female'}", "ehr-v1");
    ASSERT_TRUE(quotes.parsed);
    EXPECT_EQ((*quotes.parsed)["gender"], "female");
    EXPECT_EQ(quotes.repairs, std::vector<std::string>{"single_quotes"});
}

TEST(ContractTest, QuarantineReasons) {
    auto refusal = enforce_contract("I cannot help", "ehr-v1");
    EXPECT_FALSE(refusal.parsed);
    EXPECT_EQ(refusal.quarantine_reason, "no object found");

    auto broken = enforce_contract("{\"age\": \"60\" \"race\"", "ehr-v1");
    EXPECT_FALSE(broken.parsed);
    ASSERT_TRUE(broken.quarantine_reason);
    EXPECT_FALSE(broken.repair_applied);

    EXPECT_TRUE(enforce_contract("[1, 2]", "ehr-v1").quarantine_reason);
}

TEST(ContractTest, UnknownKeysMoveUnderOthers) {
    auto r = enforce_contract(R"({"diagnosis":"UCS","ecog":"1","stage":"IVB"})", "ehr-v1");
    ASSERT_TRUE(r.parsed);
    EXPECT_FALSE(r.parsed->contains("ecog"));
    EXPECT_EQ((*r.parsed)["others"]["ecog"], "1");
    EXPECT_EQ((*r.parsed)["others"]["stage"], "IVB");
}

TEST(ContractTest, NeverThrowsAndParsedIffNotQuarantined) {
    std::mt19937_64 rng(5);
    const std::string alphabet = "{}[]\"':,` \nabc123json";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(0, 40);
    for (int i = 0; i < 3000; ++i) {
        std::string s;
        for (int k = len(rng); k > 0; --k) s.push_back(alphabet[pick(rng)]);
        RawExtraction r;
        ASSERT_NO_THROW(r = enforce_contract(s, "ehr-v1")) << s;
        EXPECT_NE(r.parsed.has_value(), r.quarantine_reason.has_value()) << s;
    }
}

TEST(MergeTest, LatestDocumentWinsWithWarning) {
    std::vector<RawExtraction> outs(3);
    const char* payloads[] = {R"({"age":"66","diagnosis":"UCS","previous treatments":"carboplatin"})",
                              R"({"age":null,"previous treatments":["carboplatin","doxorubicin"]})",
                              R"({"age":"77","biomarkers":{"pd-l1":"CPS: 41"}})"};
    for (int i = 0; i < 3; ++i) {
        outs[i] = enforce_contract(payloads[i], "ehr-v1");
        outs[i].doc_id = "doc-" + std::to_string(i + 1);
    }
    auto rec = merge_extractions("p1", Origin::ehr, outs, "ehr-v1");
    ASSERT_TRUE(rec.twin.age);
    EXPECT_EQ(rec.twin.age->low, 77);
    ASSERT_EQ(rec.warnings.size(), 1U);
    EXPECT_NE(rec.warnings[0].find("age"), std::string::npos);
    EXPECT_EQ(rec.provenance["age"], std::vector<std::string>{"doc-3"});
    ASSERT_EQ(rec.twin.previous_treatments.size(), 2U);
    EXPECT_EQ(rec.provenance["previous treatments"], (std::vector<std::string>{"doc-1", "doc-2"}));
    EXPECT_EQ(rec.provenance["biomarkers.pd-l1"], std::vector<std::string>{"doc-3"});
    EXPECT_EQ(rec.twin.source, Source::institutional);
}

TEST(MergeTest, DiagnosisOnlyDocIsSparseButValid) {
    std::vector<RawExtraction> outs{enforce_contract(R"({"diagnosis":"UCS"})", "ehr-v1")};
    outs[0].doc_id = "d";
    auto rec = merge_extractions("p", Origin::ehr, outs, "ehr-v1");
    EXPECT_EQ(rec.attributes, 1U);
    EXPECT_EQ(rec.validation.error_count(), 0U);
    EXPECT_EQ(rec.validation.warning_count(), 9U);
}

TEST(MergeTest, AllQuarantinedFails) {
    std::vector<RawExtraction> outs{enforce_contract("nope", "ehr-v1")};
    outs[0].doc_id = "d";
    EXPECT_THROW(merge_extractions("p", Origin::ehr, outs, "ehr-v1"), ExtractionFailure);
}

TEST(ExtractRecordTest, CaseOneThroughMockBackend) {
    TempDir dir;
    auto doc = ingest_text(kCaseOneNote, Origin::ehr, {nullptr, false, std::string("case-1")});
    write_reply(dir.path(), doc.doc_id,
                Json{{"age", "77"},
                     {"diagnosis", "UCS"},
                     {"biomarkers",
                      {{"pd-l1", "CPS: 41, TPS: 3%, IC: 40%"}, {"tmb/mb", "6.3"}, {"msi/mss", "pMMR (3.6%)"}, {"others", "HER2 positive"}}},
                     {"study treatment", "Radiotherapy + pembrolizumab (off-label)"}});
    MockBackend backend(mock_spec(dir.str()));
    ExtractionJob job;
    job.doc_ids = {doc.doc_id};
    std::vector<SourceDocument> docs{doc};
    auto rec = extract_record(docs, job, backend, kPromptDir);
    EXPECT_EQ(rec.twin.id, "case-1");
    EXPECT_EQ(rec.twin.diagnosis, "UCS");
    EXPECT_DOUBLE_EQ(*rec.twin.biomarkers.pdl1->cps, 41.0);
    EXPECT_EQ(rec.twin.biomarkers.mmr, MmrStatus::pMMR);
    EXPECT_DOUBLE_EQ(*rec.twin.biomarkers.tmb, 6.3);
    EXPECT_EQ(rec.twin.biomarkers.tmb_class, TmbClass::intermediate);
    // Every extracted value is a substring of the source document.
    for (const char* v : {"77", "UCS", "CPS: 41, TPS: 3%, IC: 40%", "6.3", "pMMR (3.6%)"}) {
        EXPECT_NE(doc.text.find(v), std::string::npos) << v;
    }
}

TEST(RunJobTest, MockCorpusEndToEnd) {
    auto docs = mock_corpus();
    MockBackend backend(mock_spec());
    auto result = run_job(job_for(docs), docs, backend, kPromptDir);
    EXPECT_EQ(result.report.subjects, 10U);
    EXPECT_EQ(result.report.extracted, 9U);
    EXPECT_EQ(result.report.quarantined, 1U);
    EXPECT_EQ(result.report.repairs, 2U);
    const auto& last = std::get<QuarantineRecord>(result.items.back());
    EXPECT_EQ(last.subject, "subj-10");
    EXPECT_NE(last.reason.find("no object found"), std::string::npos);
    EXPECT_EQ(last.doc_ids.size(), 2U);

    std::map<std::string, Json> truth;
    std::ifstream in(data_path("mock_corpus/ground_truth.jsonl"));
    for (std::string line; std::getline(in, line);) {
        auto j = Json::parse(line);
        truth[j["subject"]] = j["attributes"];
    }
    for (const auto& item : result.items) {
        const auto* rec = std::get_if<ExtractedRecord>(&item);
        if (!rec) continue;
        ASSERT_TRUE(truth.count(rec->twin.id)) << rec->twin.id;
        const auto& gt = truth[rec->twin.id];
        EXPECT_EQ(rec->twin.diagnosis, gt["diagnosis"]);
        EXPECT_EQ(rec->twin.study_treatment, gt["study treatment"]);
        EXPECT_EQ(rec->twin.pfs->raw, gt["PFS"]);
        EXPECT_EQ(rec->twin.os->raw, gt["OS"]);
        EXPECT_EQ(rec->twin.biomarkers.pdl1_raw, gt["biomarkers"]["pd-l1"]);
        for (const auto& [attr, from] : rec->provenance) EXPECT_FALSE(from.empty()) << attr;
    }
}

TEST(RunJobTest, ByteDeterministicAcrossRunsAndWidths) {
    auto docs = mock_corpus();
    MockBackend a(mock_spec()), b(mock_spec()), c(mock_spec());
    auto job = job_for(docs, 42);
    auto first = job_result_to_json(run_job(job, docs, a, kPromptDir)).dump();
    auto second = job_result_to_json(run_job(job, docs, b, kPromptDir)).dump();
    job.width = 4;
    auto wide = job_result_to_json(run_job(job, docs, c, kPromptDir)).dump();
    EXPECT_EQ(first, second);
    EXPECT_EQ(first, wide);
}

TEST(RunJobTest, EmptyManifest) {
    MockBackend backend(mock_spec());
    auto result = run_job(ExtractionJob{}, {}, backend, kPromptDir);
    EXPECT_TRUE(result.items.empty());
    EXPECT_EQ(result.report, JobReport{});
}

TEST(RunJobTest, TransientFailuresRetryThenQuarantine) {
    auto docs = mock_corpus();
    auto spec = mock_spec();
    spec.retries = 50;
    MockBackend flaky(spec, 0.5, 3);
    auto ok = run_job(job_for(docs), docs, flaky, kPromptDir);
    EXPECT_EQ(ok.report.extracted, 9U);

    spec.retries = 1;
    MockBackend dead(spec, 1.0, 3);
    auto none = run_job(job_for(docs), docs, dead, kPromptDir);
    EXPECT_EQ(none.report.extracted, 0U);
    EXPECT_EQ(none.report.quarantined, 10U);
    EXPECT_NE(std::get<QuarantineRecord>(none.items[0]).reason.find("2 attempts"), std::string::npos);
}

TEST(RunJobTest, EhrDocWithoutPatientHintIsQuarantined) {
    TempDir dir;
    auto doc = ingest_text("Diagnosis: UCS", Origin::ehr);
    write_reply(dir.path(), doc.doc_id, Json{{"diagnosis", "UCS"}});
    MockBackend backend(mock_spec(dir.str()));
    ExtractionJob job;
    job.doc_ids = {doc.doc_id};
    std::vector<SourceDocument> docs{doc};
    auto r = run_job(job, docs, backend, kPromptDir);
    EXPECT_EQ(r.report.quarantined, 1U);
}

TEST(RunJobTest, LiteratureAttributeCount) {
    TempDir dir;
    std::vector<SourceDocument> docs;
    for (int i = 0; i < 25; ++i) {
        auto doc = ingest_text("Publication " + std::to_string(i), Origin::literature);
        Json out = Json::object();
        out["n"] = "1";
        out["age"] = "60";
        out["gender"] = "female";
        out["race"] = "Asian";
        out["diagnosis"] = "UCS";
        out["biomarkers"] = {{"pd-l1", "positive"}};
        out["previous treatments"] = "carboplatin";
        out["study treatment"] = "Pembrolizumab";
        out["study treatment response"] = {{"treatment response", "PR"}};
        out["PFS"] = "4";
        out["OS"] = "9.9 (deceased)";
        out["main recommendation"] = "consider ICI";
        write_reply(dir.path(), doc.doc_id, out);
        docs.push_back(doc);
    }
    auto job = job_for(docs);
    job.backend = mock_spec(dir.str());
    MockBackend backend(job.backend);
    auto r = run_job(job, docs, backend, kPromptDir);
    EXPECT_EQ(r.report.extracted, 25U);
    EXPECT_EQ(r.report.attributes, 25U * 12U);
}

TEST(HttpBackendTest, WireContractAndTransportErrors) {
    httplib::Server svr;
    Json seen;
    svr.Post("/v1/generate", [&](const httplib::Request& req, httplib::Response& res) {
        seen = Json::parse(req.body);
        res.set_content(Json{{"output", "{\"diagnosis\":\"UCS\"}"}}.dump(), "application/json");
    });
    svr.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    int port = svr.bind_to_any_port("127.0.0.1");
    std::thread t([&] { svr.listen_after_bind(); });
    svr.wait_until_ready();

    LlmBackendSpec spec;
    spec.kind = BackendKind::local;
    spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/generate";
    spec.model_name = "gemma";
    spec.timeout = std::chrono::milliseconds(2000);
    HttpBackend backend(spec);
    auto doc = ingest_text("note", Origin::ehr);
    EXPECT_EQ(invoke_backend(backend, doc, "PROMPT"), "{\"diagnosis\":\"UCS\"}");
    EXPECT_EQ(seen["model"], "gemma");
    EXPECT_EQ(seen["input"], "PROMPT");
    EXPECT_EQ(seen["response_format"], "json_object");
    EXPECT_EQ(seen.size(), 3U);

    spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/broken";
    spec.retries = 1;
    HttpBackend broken(spec);
    EXPECT_THROW(invoke_backend(broken, doc, "p"), TransportError);
    svr.stop();
    t.join();

    spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/generate";
    HttpBackend down(spec);
    try {
        invoke_backend(down, doc, "p");
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_NE(std::string(e.what()).find("2 attempts"), std::string::npos);
    }
    spec.endpoint = "ftp://nowhere";
    EXPECT_THROW(HttpBackend{spec}, ConfigError);
}

TEST(RateLimitTest, SpacesRequests) {
    LlmBackendSpec spec;
    spec.max_requests_per_second = 20;
    CountingBackend backend(spec);
    auto doc = ingest_text("t", Origin::literature);
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) invoke_backend(backend, doc, "p");
    EXPECT_GE(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(190));
}
