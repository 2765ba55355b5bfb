// Command-line front end: ingestion, extraction, the store, matching,
// statistics, evaluation, recommendations and the HTTP service.
//
// Exit codes: 0 success, 1 data or runtime error, 2 usage error.

#include <csignal>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "oncotwin/analytics.hpp"
#include "oncotwin/config.hpp"
#include "oncotwin/evaluation.hpp"
#include "oncotwin/extraction.hpp"
#include "oncotwin/ingestion.hpp"
#include "oncotwin/matcher.hpp"
#include "oncotwin/recommender.hpp"
#include "oncotwin/service.hpp"
#include "oncotwin/store.hpp"

using namespace oncotwin;

namespace {

struct UsageError : Error {
    using Error::Error;
};

enum class Format { json, table };

struct Globals {
    std::string config_file;
    std::string store;
    Format format = Format::table;
};

Globals g;

Config load() {
    auto c = load_config(g.config_file.empty() ? std::nullopt
                                               : std::optional<std::filesystem::path>(g.config_file));
    if (!g.store.empty()) c.store_path = g.store;
    return c;
}

using Row = std::vector<std::string>;

void print_table(const Row& header, const std::vector<Row>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    auto line = [&](const Row& r) {
        std::string out;
        for (std::size_t i = 0; i < r.size(); ++i) {
            out += r[i];
            if (i + 1 < r.size()) out += std::string(width[i] - r[i].size() + 2, ' ');
        }
        std::cout << out << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
}

/// JSON goes out as stable pretty-printed text; tables are advisory.
void emit(const Json& j, const std::function<void()>& table) {
    if (g.format == Format::json) {
        std::cout << j.dump(2) << "\n";
    } else {
        table();
    }
}

std::string cell(const Json& v) {
    if (v.is_null()) return "-";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::ostringstream s;
        s << v.get<double>();
        return s.str();
    }
    return v.dump();
}

void print_kv(const Json& j, const std::string& prefix = "") {
    std::vector<Row> rows;
    std::function<void(const Json&, const std::string&)> walk = [&](const Json& x, const std::string& p) {
        for (const auto& [k, v] : x.items()) {
            auto key = p.empty() ? k : p + "." + k;
            if (v.is_object() && !v.empty()) {
                walk(v, key);
            } else {
                rows.push_back({key, cell(v)});
            }
        }
    };
    walk(j, prefix);
    print_table({"key", "value"}, rows);
}

std::string today() {
    std::time_t t = std::time(nullptr);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", std::gmtime(&t));
    return buf;
}

Origin origin_arg(const std::string& s) {
    try {
        return origin_from_string(s);
    } catch (const Error&) {
        throw UsageError("unknown origin '" + s + "' (ehr or literature)");
    }
}

std::unique_ptr<TwinStore> open_store(const Config& c, TwinStore::Mode mode) {
    return TwinStore::open(c.store_path, mode);
}

void twin_table(const std::vector<DigitalTwin>& twins) {
    std::vector<Row> rows;
    for (const auto& t : twins) {
        auto v = [&](const char* f) { return cell(std::visit([](const auto& x) -> Json {
                                                   if constexpr (std::is_same_v<std::decay_t<decltype(x)>, std::monostate>) {
                                                       return nullptr;
                                                   } else {
                                                       return x;
                                                   }
                                               },
                                               field_value(t, f))); };
        rows.push_back({t.id, v("source"), v("diagnosis"), v("cps"), v("tmb"), v("mmr"), v("treatment_line"),
                        v("response"), t.pfs ? t.pfs->raw : "-", t.os ? t.os->raw : "-"});
    }
    print_table({"id", "source", "diagnosis", "cps", "tmb", "mmr", "line", "response", "pfs", "os"}, rows);
}

Json twins_json(const std::vector<DigitalTwin>& twins) {
    Json out = Json::array();
    for (const auto& t : twins) out.push_back(encode_twin(t));
    return out;
}

// ---------------------------------------------------------------- commands

struct IngestArgs {
    std::vector<std::string> files;
    std::string manifest;
    std::string origin;
    std::string patient;
    std::string write_manifest;
    bool dehyphenate = false;
    unsigned width = 1;
};

int cmd_ingest(const IngestArgs& a) {
    auto cfg = load();
    std::unique_ptr<OcrAdapter> ocr;
    if (!cfg.ocr_command.empty()) {
        ocr = std::make_unique<CommandOcr>(split_command(cfg.ocr_command),
                                           std::chrono::seconds(cfg.ocr_timeout_seconds));
    }
    std::vector<ManifestEntry> entries;
    if (!a.manifest.empty()) {
        if (!a.files.empty()) throw UsageError("give files or --manifest, not both");
        auto listed = read_manifest(a.manifest);
        auto docs = ingest_manifest(listed, std::filesystem::path(a.manifest).parent_path(), ocr.get(), a.width);
        entries = listed;
    } else {
        if (a.files.empty()) throw UsageError("nothing to ingest: give files or --manifest");
        if (a.origin.empty()) throw UsageError("--origin is required when ingesting files");
        IngestOptions opts;
        opts.ocr = ocr.get();
        opts.dehyphenate = a.dehyphenate;
        if (!a.patient.empty()) opts.patient_hint = a.patient;
        for (const auto& f : a.files) entries.push_back(manifest_entry(ingest(f, origin_arg(a.origin), opts), f));
    }
    if (!a.write_manifest.empty()) write_manifest(a.write_manifest, entries);
    Json docs = Json::array();
    for (const auto& e : entries) docs.push_back(Json::parse(encode_manifest_line(e)));
    Json out = {{"documents", docs}};
    if (!entries.empty()) {
        auto s = corpus_stats(entries);
        out["stats"] = {{"count", s.count}, {"median_pages", s.median_pages},
                        {"median_chars", s.median_chars}, {"max_chars", s.max_chars}};
    }
    emit(out, [&] {
        std::vector<Row> rows;
        for (const auto& e : entries) {
            rows.push_back({e.doc_id.substr(0, 12), std::string(to_string(e.origin)), std::string(to_string(e.media)),
                            std::to_string(e.pages), std::to_string(e.chars), e.path});
        }
        print_table({"doc_id", "origin", "media", "pages", "chars", "path"}, rows);
    });
    return 0;
}

struct ExtractArgs {
    std::string manifest = std::string(ONCOTWIN_DATA_DIR) + "/mock_corpus/manifest.jsonl";
    std::string backend = "mock";
    std::string origin;
    std::uint64_t seed = 0;
    unsigned width = 1;
    bool put = false;
};

int cmd_extract(const ExtractArgs& a) {
    auto cfg = load();
    auto spec = cfg.backend(backend_kind_from_string(a.backend));
    std::optional<Origin> only;
    if (!a.origin.empty()) {
        only = origin_arg(a.origin);
        // Refuse before reading a single document.
        check_privacy(*only, spec);
    }
    auto listed = read_manifest(a.manifest);
    std::vector<ManifestEntry> entries;
    for (const auto& e : listed) {
        if (only && e.origin != *only) continue;
        check_privacy(e.origin, spec);
        entries.push_back(e);
    }
    auto docs = ingest_manifest(entries, std::filesystem::path(a.manifest).parent_path(), nullptr, a.width);
    ExtractionJob job;
    for (const auto& e : entries) job.doc_ids.push_back(e.doc_id);
    job.backend = spec;
    job.seed = a.seed;
    job.width = a.width;
    auto backend = make_backend(spec, a.seed);
    auto result = run_job(job, docs, *backend, cfg.prompt_dir);
    Json out = job_result_to_json(result);
    if (a.put) {
        auto store = open_store(cfg, TwinStore::Mode::read_write);
        Json stored = Json::array();
        for (const auto& item : result.items) {
            if (const auto* r = std::get_if<ExtractedRecord>(&item)) {
                store->put(r->twin, "extraction");
                stored.push_back(r->twin.id);
            }
        }
        out["stored"] = stored;
    }
    emit(out, [&] {
        std::vector<Row> rows;
        for (const auto& item : result.items) {
            if (const auto* r = std::get_if<ExtractedRecord>(&item)) {
                rows.push_back({r->twin.id, "extracted", std::to_string(r->attributes) + " attributes"});
            } else {
                const auto& q = std::get<QuarantineRecord>(item);
                rows.push_back({q.subject, "quarantined", q.reason});
            }
        }
        print_table({"subject", "status", "detail"}, rows);
        const auto& r = result.report;
        std::cout << r.subjects << " subjects, " << r.extracted << " extracted, " << r.quarantined
                  << " quarantined, " << r.repairs << " repaired\n";
    });
    return 0;
}

int cmd_validate(const std::string& file) {
    auto twins = read_twins_file(file);
    Json out = Json::array();
    bool clean = true;
    std::vector<Row> rows;
    for (const auto& t : twins) {
        auto rep = validate_twin(t);
        clean = clean && rep.admissible();
        Json findings = Json::array();
        for (const auto& f : rep.findings) {
            auto sev = f.severity == Severity::error ? "error" : "warning";
            findings.push_back({{"field", f.field}, {"severity", sev}, {"message", f.message}});
            rows.push_back({t.id, sev, f.field, f.message});
        }
        out.push_back({{"id", t.id}, {"admissible", rep.admissible()}, {"findings", findings}});
    }
    emit(out, [&] {
        print_table({"id", "severity", "field", "message"}, rows);
        std::cout << twins.size() << " records, " << (clean ? "all admissible" : "some rejected") << "\n";
    });
    return clean ? 0 : 1;
}

int cmd_store_put(const std::string& file) {
    auto cfg = load();
    auto twins = read_twins_file(file);
    auto store = open_store(cfg, TwinStore::Mode::read_write);
    Json ids = Json::array();
    for (const auto& t : twins) ids.push_back(store->put(t, "cli"));
    emit(Json{{"stored", ids}, {"count", store->count()}},
         [&] { std::cout << ids.size() << " records stored; store holds " << store->count() << "\n"; });
    return 0;
}

int cmd_store_get(const std::string& id, bool history) {
    auto store = open_store(load(), TwinStore::Mode::read_only);
    auto snap = store->snapshot();
    if (history) {
        const auto& h = snap->history(id);
        emit(twins_json(h), [&] { twin_table(h); });
    } else {
        const auto& t = snap->get(id);
        emit(encode_twin(t), [&] { print_kv(encode_twin(t)); });
    }
    return 0;
}

int cmd_store_query(const std::string& pred) {
    auto store = open_store(load(), TwinStore::Mode::read_only);
    auto twins = store->query(parse_predicate(pred));
    emit(twins_json(twins), [&] { twin_table(twins); });
    return 0;
}

std::vector<DigitalTwin> load_pool(const Config& cfg, const std::string& twins_file, const std::string& query) {
    std::vector<DigitalTwin> pool;
    if (!twins_file.empty()) {
        pool = read_twins_file(twins_file);
        if (!query.empty()) {
            auto p = parse_predicate(query);
            std::erase_if(pool, [&](const DigitalTwin& t) { return !matches(t, p); });
        }
    } else {
        pool = open_store(cfg, TwinStore::Mode::read_only)->query(parse_predicate(query));
    }
    return pool;
}

struct MatchArgs {
    std::string spec_file;
    std::string twins;
    std::string query;
    std::optional<double> min_cps;
    std::optional<double> max_tmb;
    bool no_ici = false;
};

EligibilitySpec spec_of(const Config& cfg, const MatchArgs& a) {
    auto spec = cfg.eligibility;
    if (!a.spec_file.empty()) {
        std::ifstream in(a.spec_file);
        if (!in) throw IoError("cannot read " + a.spec_file);
        spec = spec_from_json(Json::parse(in));
    }
    if (a.min_cps) spec.min_cps = *a.min_cps;
    if (a.max_tmb) spec.max_tmb_exclusive = *a.max_tmb;
    if (a.no_ici) spec.require_ici_treatment = false;
    check_spec(spec);
    return spec;
}

int cmd_match(const MatchArgs& a) {
    auto cfg = load();
    auto spec = spec_of(cfg, a);
    auto pool = load_pool(cfg, a.twins, a.query);
    auto stages = cohort_funnel(pool, spec);
    Json results = Json::array();
    for (const auto& t : pool) results.push_back(match_result_to_json(evaluate_eligibility(t, spec)));
    emit(Json{{"spec", spec_to_json(spec)}, {"stages", funnel_to_json(stages)}, {"results", results}}, [&] {
        std::vector<Row> rows;
        for (const auto& s : stages) {
            std::string ids;
            for (const auto& id : s.ids) ids += (ids.empty() ? "" : " ") + id;
            rows.push_back({s.name, std::to_string(s.ids.size()), ids});
        }
        print_table({"stage", "count", "ids"}, rows);
    });
    return 0;
}

int cmd_summarize(const std::string& source, const std::string& query, const std::string& twins) {
    auto cfg = load();
    std::string q = query;
    if (!source.empty()) {
        if (!source_from_string(source)) throw UsageError("unknown source '" + source + "'");
        q = "source == " + source + (q.empty() ? "" : " AND " + q);
    }
    auto pool = load_pool(cfg, twins, q);
    auto j = summary_to_json(summarize(pool));
    emit(j, [&] { print_kv(j); });
    return 0;
}

int cmd_evaluate(const std::vector<std::string>& files, const std::string& lint) {
    Json out = Json::object();
    std::optional<EvaluationReport> report;
    if (!files.empty()) {
        std::vector<AdjudicationRecord> recs;
        for (const auto& f : files) {
            auto part = read_adjudications(f);
            recs.insert(recs.end(), part.begin(), part.end());
        }
        report = evaluate_run(recs);
        out["report"] = report_to_json(*report);
    }
    std::vector<LintFinding> findings;
    if (!lint.empty()) {
        std::ifstream in(lint);
        if (!in) throw IoError("cannot read " + lint);
        std::stringstream ss;
        ss << in.rdbuf();
        findings = lint_metrics_table(ss.str());
        Json lj = Json::array();
        for (const auto& f : findings) {
            lj.push_back({{"line", f.line}, {"source", f.source}, {"attribute", f.attribute}, {"column", f.column},
                          {"reported", f.reported}, {"recomputed", f.recomputed}});
        }
        out["lint"] = lj;
    }
    if (files.empty() && lint.empty()) throw UsageError("give adjudication files and/or --lint");
    emit(out, [&] {
        if (report) std::cout << report_to_csv(*report);
        if (!lint.empty()) {
            std::vector<Row> rows;
            for (const auto& f : findings) {
                rows.push_back({std::to_string(f.line), f.source, f.attribute, f.column, f.reported, f.recomputed});
            }
            if (report) std::cout << "\n";
            print_table({"line", "source", "attribute", "column", "reported", "recomputed"}, rows);
        }
    });
    return 0;
}

int cmd_sample_size(double z, std::int64_t n, double e, double p, std::size_t draw, std::uint64_t seed) {
    auto size = sample_size(z, n, e, p);
    Json out = {{"Z", z}, {"N", n}, {"e", e}, {"P", p}, {"n", size}};
    std::vector<std::string> sample;
    if (draw) {
        std::vector<std::string> ids;
        for (std::int64_t i = 0; i < n; ++i) ids.push_back("item-" + std::to_string(i));
        sample = draw_sample(ids, std::min<std::size_t>(draw, ids.size()), seed);
        out["sample"] = sample;
    }
    emit(out, [&] {
        std::cout << size << "\n";
        for (const auto& s : sample) std::cout << s << "\n";
    });
    return 0;
}

struct RecommendArgs {
    std::string id;
    std::string twin_file;
    std::string region;
    std::string as_of;
    std::string override_json;
    bool allow_off_label = false;
    // letter only
    std::string recommendation;
    std::string analog;
    std::string date;
};

DigitalTwin subject_twin(const Config& cfg, const RecommendArgs& a) {
    DigitalTwin t;
    if (!a.twin_file.empty()) {
        bool found = false;
        for (auto& x : read_twins_file(a.twin_file)) {
            if (x.id == a.id) {
                t = std::move(x);
                found = true;
            }
        }
        if (!found) throw NotFoundError("no twin '" + a.id + "' in " + a.twin_file);
    } else {
        t = open_store(cfg, TwinStore::Mode::read_only)->get(a.id);
    }
    if (!a.override_json.empty()) t = apply_overrides(t, overrides_from_json(Json::parse(a.override_json)));
    return t;
}

RecommendContext context_of(const Config& cfg, const RecommendArgs& a) {
    auto ctx = cfg.recommend;
    if (!a.region.empty()) ctx.region = a.region;
    if (!a.as_of.empty()) ctx.as_of = a.as_of;
    if (a.allow_off_label) ctx.allow_off_label = true;
    if (!ctx.as_of) ctx.as_of = today().substr(0, 7);
    return ctx;
}

int cmd_recommend(const RecommendArgs& a) {
    auto cfg = load();
    auto twin = subject_twin(cfg, a);
    auto recs = recommend(twin, load_kb(cfg.kb_path), context_of(cfg, a));
    Json arr = Json::array();
    for (const auto& r : recs) arr.push_back(recommendation_to_json(r));
    emit(Json{{"twin_id", twin.id}, {"recommendations", arr}}, [&] {
        std::vector<Row> rows;
        for (const auto& r : recs) {
            std::string notes;
            for (const auto& n : r.gating_notes) notes += (notes.empty() ? "" : "; ") + n;
            rows.push_back({r.entry.id, r.entry.biomarker, std::string(to_string(r.entry.action_kind)),
                            std::string(to_string(r.entry.evidence_level)), r.entry.action, notes});
        }
        print_table({"id", "biomarker", "kind", "evidence", "action", "notes"}, rows);
    });
    return 0;
}

int cmd_letter(const RecommendArgs& a) {
    auto cfg = load();
    auto twin = subject_twin(cfg, a);
    std::string date = a.date.empty() ? today() : a.date;
    std::string text;
    if (!a.analog.empty()) {
        auto store = open_store(cfg, TwinStore::Mode::read_only);
        auto r = whatif(twin, {}, cfg.eligibility, *store->snapshot(), subject_spec(cfg.eligibility));
        if (r.reason) throw DomainError(*r.reason);
        text = coverage_letter(twin, analog_recommendation(twin, a.analog, r.summary), date, r.summary);
    } else {
        if (a.recommendation.empty()) throw UsageError("give --recommendation <kb id> or --analog <therapy>");
        auto recs = recommend(twin, load_kb(cfg.kb_path), context_of(cfg, a));
        auto it = std::find_if(recs.begin(), recs.end(),
                               [&](const Recommendation& r) { return r.entry.id == a.recommendation; });
        if (it == recs.end()) {
            throw NotFoundError("recommendation '" + a.recommendation + "' does not apply to " + twin.id);
        }
        text = coverage_letter(twin, *it, date);
    }
    emit(Json{{"twin_id", twin.id}, {"letter", text}}, [&] { std::cout << text; });
    return 0;
}

Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

int cmd_serve(const std::string& bind, int port) {
    auto cfg = load();
    if (!bind.empty()) cfg.server_bind = bind;
    if (port >= 0) cfg.server_port = port;
    std::shared_ptr<TwinStore> store = open_store(cfg, TwinStore::Mode::read_write);
    auto kb = load_kb(cfg.kb_path);
    for (const auto& w : kb.warnings) std::cerr << "warning: " << w << "\n";
    Service service(cfg, store, std::move(kb));
    int actual = cfg.server_port;
    if (actual == 0) {
        actual = service.bind_any_port(cfg.server_bind);
        if (actual < 0) throw IoError("cannot bind " + cfg.server_bind);
    } else if (!service.bind(cfg.server_bind, actual)) {
        throw IoError("cannot bind " + cfg.server_bind + ":" + std::to_string(actual));
    }
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving " << store->count() << " twins on http://" << cfg.server_bind << ":" << actual << "/v1\n";
    service.listen_after_bind();
    g_service = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Oncology digital-twin toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    std::map<std::string, Format> formats = {{"json", Format::json}, {"table", Format::table}};
    app.add_option("--config", g.config_file, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--store", g.store, "store directory (overrides store.path)");
    app.add_option("--format", g.format, "output format")->transform(CLI::CheckedTransformer(formats));

    std::function<int()> action;

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "normalize documents and print manifest entries");
    ingest->add_option("files", ingest_args.files, "documents to ingest");
    ingest->add_option("--manifest", ingest_args.manifest, "ingest and verify a manifest instead");
    ingest->add_option("--origin", ingest_args.origin, "ehr or literature");
    ingest->add_option("--patient", ingest_args.patient, "patient hint for EHR documents");
    ingest->add_option("--write-manifest", ingest_args.write_manifest, "write the entries to this file");
    ingest->add_option("--width", ingest_args.width, "parallel documents")->check(CLI::PositiveNumber);
    ingest->add_flag("--dehyphenate", ingest_args.dehyphenate, "join words split across lines");
    ingest->callback([&] { action = [&] { return cmd_ingest(ingest_args); }; });

    ExtractArgs extract_args;
    auto* extract = app.add_subcommand("extract", "run structured extraction over a manifest");
    extract->add_option("--manifest", extract_args.manifest, "corpus manifest");
    extract->add_option("--backend", extract_args.backend, "model backend")
        ->check(CLI::IsMember({"local", "cloud", "mock"}));
    extract->add_option("--origin", extract_args.origin, "only documents of this origin");
    extract->add_option("--seed", extract_args.seed, "seed for mock failure injection");
    extract->add_option("--width", extract_args.width, "parallel subjects")->check(CLI::PositiveNumber);
    extract->add_flag("--put", extract_args.put, "store the extracted twins");
    extract->callback([&] { action = [&] { return cmd_extract(extract_args); }; });

    std::string validate_file;
    auto* validate = app.add_subcommand("validate", "validate a file of twin records");
    validate->add_option("file", validate_file, "JSON lines file")->required()->check(CLI::ExistingFile);
    validate->callback([&] { action = [&] { return cmd_validate(validate_file); }; });

    auto* store = app.add_subcommand("store", "read and write the twin store");
    store->require_subcommand(1);
    std::string put_file, get_id, query_text;
    bool history = false;
    auto* put = store->add_subcommand("put", "validate and append records");
    put->add_option("file", put_file, "JSON lines file")->required()->check(CLI::ExistingFile);
    put->callback([&] { action = [&] { return cmd_store_put(put_file); }; });
    auto* get = store->add_subcommand("get", "print one twin");
    get->add_option("id", get_id)->required();
    get->add_flag("--history", history, "every stored version");
    get->callback([&] { action = [&] { return cmd_store_get(get_id, history); }; });
    auto* query = store->add_subcommand("query", "list twins matching a predicate");
    query->add_option("predicate", query_text, "e.g. \"source == literature AND cps >= 40\"");
    query->callback([&] { action = [&] { return cmd_store_query(query_text); }; });

    MatchArgs match_args;
    auto* match = app.add_subcommand("match", "run the eligibility funnel");
    match->add_option("--spec", match_args.spec_file, "eligibility spec JSON")->check(CLI::ExistingFile);
    match->add_option("--twins", match_args.twins, "candidate file instead of the store")->check(CLI::ExistingFile);
    match->add_option("--query", match_args.query, "restrict candidates");
    match->add_option("--min-cps", match_args.min_cps);
    match->add_option("--max-tmb", match_args.max_tmb, "exclusive TMB ceiling");
    match->add_flag("--no-ici", match_args.no_ici, "drop the checkpoint-inhibitor requirement");
    match->callback([&] { action = [&] { return cmd_match(match_args); }; });

    std::string sum_source, sum_query, sum_twins;
    auto* summ = app.add_subcommand("summarize", "cohort outcome statistics");
    summ->add_option("--source", sum_source, "institutional or literature");
    summ->add_option("--query", sum_query, "restrict the cohort");
    summ->add_option("--twins", sum_twins, "twin file instead of the store")->check(CLI::ExistingFile);
    summ->callback([&] { action = [&] { return cmd_summarize(sum_source, sum_query, sum_twins); }; });

    std::vector<std::string> eval_files;
    std::string lint_file;
    auto* eval = app.add_subcommand("evaluate", "metrics from adjudication files");
    eval->add_option("files", eval_files, "adjudication JSON lines")->check(CLI::ExistingFile);
    eval->add_option("--lint", lint_file, "check an imported metrics table")->check(CLI::ExistingFile);
    eval->callback([&] { action = [&] { return cmd_evaluate(eval_files, lint_file); }; });

    double z = 1.96, e = 0.05, p = 0.5;
    std::int64_t n = 0;
    std::size_t draw = 0;
    std::uint64_t draw_seed = 0;
    auto* ss = app.add_subcommand("sample-size", "review sample size with finite-population correction");
    ss->add_option("--Z", z, "z score");
    ss->add_option("--N", n, "population size")->required();
    ss->add_option("--e", e, "margin of error");
    ss->add_option("--P", p, "expected proportion");
    ss->add_option("--draw", draw, "also draw this many item ids");
    ss->add_option("--seed", draw_seed, "seed for --draw");
    ss->callback([&] { action = [&] { return cmd_sample_size(z, n, e, p, draw, draw_seed); }; });

    RecommendArgs rec_args;
    auto add_subject = [&](CLI::App* c) {
        c->add_option("id", rec_args.id, "twin id")->required();
        c->add_option("--twins", rec_args.twin_file, "twin file instead of the store")->check(CLI::ExistingFile);
        c->add_option("--region", rec_args.region, "patient region for trial filtering");
        c->add_option("--as-of", rec_args.as_of, "YYYY-MM reference date for stale findings");
        c->add_option("--override", rec_args.override_json, "JSON object of what-if overrides");
        c->add_flag("--allow-off-label", rec_args.allow_off_label, "surface closed-trial regimens off-label");
    };
    auto* rec = app.add_subcommand("recommend", "knowledge-base recommendations for a twin");
    add_subject(rec);
    rec->callback([&] { action = [&] { return cmd_recommend(rec_args); }; });
    auto* letter = app.add_subcommand("letter", "cost-coverage request letter");
    add_subject(letter);
    letter->add_option("--recommendation", rec_args.recommendation, "knowledge-base entry id, e.g. her2-1");
    letter->add_option("--analog", rec_args.analog, "therapy backed by the analog cohort instead");
    letter->add_option("--date", rec_args.date, "letter date (default today)");
    letter->callback([&] { action = [&] { return cmd_letter(rec_args); }; });

    std::string bind;
    int port = -1;
    auto* serve = app.add_subcommand("serve", "run the HTTP service");
    serve->add_option("--bind", bind, "address (default from config, loopback)");
    serve->add_option("--port", port, "port, 0 for any");
    serve->callback([&] { action = [&] { return cmd_serve(bind, port); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return 2;
    }
    try {
        return action();
    } catch (const UsageError& ex) {
        std::cerr << "usage error: " << ex.what() << "\n";
        return 2;
    } catch (const ValidationFailed& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        for (const auto& f : ex.report().findings) std::cerr << "  " << f.field << ": " << f.message << "\n";
        return 1;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
