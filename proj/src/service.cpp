#include "oncotwin/service.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "oncotwin/evaluation.hpp"
#include "oncotwin/ingestion.hpp"
#include "oncotwin/matcher.hpp"

namespace oncotwin {

ApiError::ApiError(int status, std::string code, const std::string& message, Json detail)
    : Error(message), status(status), code(std::move(code)), detail(std::move(detail)) {}

Json api_error_body(const ApiError& e) {
    return Json{{"error", {{"status", e.status}, {"code", e.code}, {"message", e.what()}, {"detail", e.detail}}}};
}

namespace {

ApiError bad_request(const std::string& msg) { return ApiError(400, "bad_request", msg); }
ApiError not_found(const std::string& msg) { return ApiError(404, "not_found", msg); }

Json findings_json(const ValidationReport& r) {
    Json out = Json::array();
    for (const auto& f : r.findings) {
        out.push_back(Json{{"field", f.field},
                           {"severity", f.severity == Severity::error ? "error" : "warning"},
                           {"message", f.message}});
    }
    return out;
}

Json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
        return Json::parse(req.body);
    } catch (const Json::exception& e) {
        throw bad_request(std::string("request body is not JSON: ") + e.what());
    }
}

void reply(httplib::Response& res, const Json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

struct Job {
    std::string status = "queued";  // queued, running, done, failed
    Json result;
    std::string error;
};

}  // namespace

struct Service::Impl {
    Config config;
    std::shared_ptr<TwinStore> store;
    KnowledgeBase kb;
    httplib::Server http;

    std::mutex jobs_mu;
    std::map<std::string, Job> jobs;
    std::vector<std::thread> workers;
    std::atomic<int> next_job{1};

    Impl(Config c, std::shared_ptr<TwinStore> s, KnowledgeBase k)
        : config(std::move(c)), store(std::move(s)), kb(std::move(k)) {}

    DigitalTwin twin_from_body(const Json& body, const StoreSnapshot& snap) {
        if (body.contains("twin")) {
            try {
                return decode_twin(body["twin"]);
            } catch (const DecodeError& e) {
                throw ApiError(422, "invalid_twin", e.what());
            }
        }
        if (!body.contains("id") || !body["id"].is_string()) throw bad_request("give 'id' or 'twin'");
        auto id = body["id"].get<std::string>();
        if (!snap.contains(id)) throw not_found("no twin '" + id + "'");
        return snap.get(id);
    }

    EligibilitySpec spec_from_body(const Json& body, const char* key = "spec") {
        if (!body.contains(key)) return config.eligibility;
        try {
            return spec_from_json(body[key]);
        } catch (const DomainError& e) {
            throw ApiError(422, "invalid_spec", e.what());
        }
    }

    WhatIfOverrides overrides_from_body(const Json& body) {
        if (!body.contains("overrides")) return {};
        try {
            return overrides_from_json(body["overrides"]);
        } catch (const Error& e) {
            throw ApiError(422, "invalid_override", e.what());
        }
    }

    void routes() {
        http.Get("/v1/healthz", [this](const httplib::Request&, httplib::Response& res) {
            reply(res, Json{{"status", "ok"}, {"schema", std::string(store->schema_version())},
                            {"twins", store->count()}});
        });

        http.Get("/v1/twins", [this](const httplib::Request& req, httplib::Response& res) {
            Predicate pred;
            if (req.has_param("query")) {
                try {
                    pred = parse_predicate(req.get_param_value("query"));
                } catch (const QueryError& e) {
                    throw bad_request(e.what());
                }
            }
            Json twins = Json::array();
            for (const auto& t : store->snapshot()->query(pred)) twins.push_back(encode_twin(t));
            reply(res, Json{{"count", twins.size()}, {"twins", twins}});
        });

        http.Get(R"(/v1/twins/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            auto id = req.matches[1].str();
            auto snap = store->snapshot();
            if (!snap->contains(id)) throw not_found("no twin '" + id + "'");
            reply(res, encode_twin(snap->get(id)));
        });

        http.Post("/v1/twins", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req);
            DigitalTwin t;
            try {
                t = decode_twin(body);
            } catch (const DecodeError& e) {
                throw ApiError(422, "invalid_twin", e.what());
            }
            if (t.id.empty()) throw ApiError(422, "invalid_twin", "record needs an id", Json::array({{{"field", "id"}}}));
            try {
                store->put(t, "api");
            } catch (const ValidationFailed& e) {
                throw ApiError(422, "validation_failed", "record failed validation", findings_json(e.report()));
            }
            auto snap = store->snapshot();
            reply(res, Json{{"id", t.id}, {"version", snap->history(t.id).size()}}, 201);
        });

        http.Post(R"(/v1/twins/([^/]+)/outcome)", [this](const httplib::Request& req, httplib::Response& res) {
            auto id = req.matches[1].str();
            auto body = parse_body(req);
            if (!store->snapshot()->contains(id)) throw not_found("no twin '" + id + "'");
            OutcomeUpdate update;
            try {
                update = outcome_from_json(body);
                store->record_outcome(id, update, "api");
            } catch (const ValidationFailed& e) {
                throw ApiError(422, "validation_failed", "outcome failed validation", findings_json(e.report()));
            } catch (const DomainError& e) {
                throw ApiError(422, "invalid_outcome", e.what());
            }
            reply(res, encode_twin(store->get(id)));
        });

        http.Post("/v1/match", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req);
            auto spec = spec_from_body(body);
            auto snap = store->snapshot();
            std::vector<DigitalTwin> pool;
            if (body.contains("twins")) {
                try {
                    for (const auto& j : body["twins"]) pool.push_back(decode_twin(j));
                } catch (const DecodeError& e) {
                    throw ApiError(422, "invalid_twin", e.what());
                }
            } else if (body.contains("ids")) {
                for (const auto& id : body["ids"]) {
                    auto s = id.get<std::string>();
                    if (!snap->contains(s)) throw not_found("no twin '" + s + "'");
                    pool.push_back(snap->get(s));
                }
            } else {
                pool = snap->all();
            }
            Json results = Json::array();
            for (const auto& t : pool) results.push_back(match_result_to_json(evaluate_eligibility(t, spec)));
            reply(res, Json{{"spec", spec_to_json(spec)}, {"stages", funnel_to_json(cohort_funnel(pool, spec))},
                            {"results", results}});
        });

        http.Post("/v1/whatif", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req);
            auto snap = store->snapshot();
            auto twin = twin_from_body(body, *snap);
            auto spec = spec_from_body(body);
            auto subject = body.contains("subject_spec") ? spec_from_body(body, "subject_spec")
                                                         : subject_spec(config.eligibility);
            reply(res, whatif_to_json(whatif(twin, overrides_from_body(body), spec, *snap, subject)));
        });

        http.Post("/v1/recommend", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req);
            auto snap = store->snapshot();
            auto twin = apply_overrides(twin_from_body(body, *snap), overrides_from_body(body));
            RecommendContext ctx = config.recommend;
            if (body.contains("context")) {
                const auto& c = body["context"];
                try {
                    if (c.contains("region")) {
                        ctx.region = c["region"].is_null() ? std::nullopt
                                                           : std::optional(c["region"].get<std::string>());
                    }
                    if (c.contains("allow_off_label")) ctx.allow_off_label = c["allow_off_label"].get<bool>();
                    if (c.contains("as_of")) {
                        ctx.as_of = c["as_of"].is_null() ? std::nullopt
                                                         : std::optional(c["as_of"].get<std::string>());
                    }
                } catch (const Json::exception& e) {
                    throw ApiError(422, "invalid_context", e.what());
                }
            }
            Json recs = Json::array();
            for (const auto& r : recommend(twin, kb, ctx)) recs.push_back(recommendation_to_json(r));
            reply(res, Json{{"twin_id", twin.id}, {"recommendations", recs}});
        });

        http.Post("/v1/evaluate", [](const httplib::Request& req, httplib::Response& res) {
            std::vector<AdjudicationRecord> recs;
            try {
                auto body = Json::parse(req.body);
                const Json& rows = body.is_array() ? body : body.at("adjudications");
                for (const auto& r : rows) recs.push_back(adjudication_from_json(r));
            } catch (const Json::exception& e) {
                throw bad_request(std::string("expected {\"adjudications\": [...]}: ") + e.what());
            } catch (const DecodeError& e) {
                throw ApiError(422, "invalid_adjudication", e.what());
            }
            try {
                reply(res, report_to_json(evaluate_run(recs)));
            } catch (const ConflictingVerdicts& e) {
                throw ApiError(409, "conflicting_verdicts", e.what(), e.conflicts());
            }
        });

        http.Get("/v1/kb", [this](const httplib::Request&, httplib::Response& res) {
            Json entries = Json::array();
            for (const auto& e : kb.entries) entries.push_back(kb_entry_to_json(e));
            reply(res, Json{{"entries", entries}, {"warnings", kb.warnings}});
        });

        http.Post("/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) {
            reply(res, start_job(parse_body(req)), 202);
        });

        http.Get(R"(/v1/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(jobs_mu);
            auto it = jobs.find(req.matches[1].str());
            if (it == jobs.end()) throw not_found("no job '" + req.matches[1].str() + "'");
            const auto& j = it->second;
            reply(res, Json{{"id", it->first}, {"status", j.status}, {"result", j.result},
                            {"error", j.error.empty() ? Json(nullptr) : Json(j.error)}});
        });

        http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const ApiError& e) {
                reply(res, api_error_body(e), e.status);
            } catch (const NotFoundError& e) {
                reply(res, api_error_body(not_found(e.what())), 404);
            } catch (const std::exception& e) {
                reply(res, api_error_body(ApiError(500, "internal", e.what())), 500);
            }
        });
    }

    /// Body: {"manifest": path, "backend": "mock", "seed": 0, "put": false}.
    /// The privacy guard runs before the job is accepted.
    Json start_job(const Json& body) {
        if (!body.contains("manifest") || !body["manifest"].is_string()) throw bad_request("give 'manifest'");
        std::filesystem::path manifest = body["manifest"].get<std::string>();
        ExtractionJob job;
        try {
            job.backend = config.backend(backend_kind_from_string(body.value("backend", std::string("mock"))));
            job.seed = body.value("seed", std::uint64_t{0});
        } catch (const ConfigError& e) {
            throw ApiError(422, "invalid_job", e.what());
        } catch (const Json::exception& e) {
            throw ApiError(422, "invalid_job", e.what());
        }
        bool put = body.value("put", false);
        std::vector<ManifestEntry> entries;
        try {
            entries = read_manifest(manifest);
            for (const auto& e : entries) check_privacy(e.origin, job.backend);
        } catch (const PrivacyError& e) {
            throw ApiError(422, "privacy_blocked", e.what());
        } catch (const Error& e) {
            throw ApiError(422, "invalid_manifest", e.what());
        }
        for (const auto& e : entries) job.doc_ids.push_back(e.doc_id);

        std::string id = "job-" + std::to_string(next_job++);
        {
            std::lock_guard lock(jobs_mu);
            jobs[id] = Job{};
        }
        std::lock_guard lock(jobs_mu);
        workers.emplace_back([this, id, job, entries = std::move(entries), manifest, put] {
            set_status(id, "running");
            try {
                auto docs = ingest_manifest(entries, manifest.parent_path(), nullptr);
                auto backend = make_backend(job.backend, job.seed);
                auto result = run_job(job, docs, *backend, config.prompt_dir);
                Json out = job_result_to_json(result);
                if (put) {
                    Json stored = Json::array();
                    for (const auto& item : result.items) {
                        if (const auto* rec = std::get_if<ExtractedRecord>(&item)) {
                            store->put(rec->twin, "extraction");
                            stored.push_back(rec->twin.id);
                        }
                    }
                    out["stored"] = stored;
                }
                std::lock_guard lock(jobs_mu);
                jobs[id].status = "done";
                jobs[id].result = std::move(out);
            } catch (const std::exception& e) {
                std::lock_guard lock(jobs_mu);
                jobs[id].status = "failed";
                jobs[id].error = e.what();
            }
        });
        return Json{{"id", id}, {"status", "queued"}};
    }

    void set_status(const std::string& id, const std::string& status) {
        std::lock_guard lock(jobs_mu);
        jobs[id].status = status;
    }
};

Service::Service(Config config, std::shared_ptr<TwinStore> store, KnowledgeBase kb)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(store), std::move(kb))) {
    impl_->routes();
}

Service::~Service() {
    stop();
    drain_jobs();
}

int Service::bind_any_port(const std::string& host) { return impl_->http.bind_to_any_port(host); }

bool Service::bind(const std::string& host, int port) { return impl_->http.bind_to_port(host, port); }

bool Service::listen_after_bind() { return impl_->http.listen_after_bind(); }

void Service::stop() {
    if (impl_->http.is_running()) impl_->http.stop();
}

void Service::drain_jobs() {
    std::vector<std::thread> done;
    {
        std::lock_guard lock(impl_->jobs_mu);
        done.swap(impl_->workers);
    }
    for (auto& w : done) w.join();
}

}  // namespace oncotwin
