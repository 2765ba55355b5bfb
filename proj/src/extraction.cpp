/**
 * @file extraction.cpp
 * @brief Prompt rendering, backends, contract repair and attribute merge.
 */

#include "oncotwin/extraction.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "oncotwin/parsers.hpp"
#include "text.hpp"

namespace oncotwin {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- schema

namespace {

std::vector<SchemaKey> patient_keys() {
    return {
        {"age", "age at diagnosis in years, or an age range for cohorts", {}},
        {"gender", "gender of the patient(s)", {}},
        {"race", "race or ethnicity as stated", {}},
        {"diagnosis", "tumor entity, abbreviated where common (UCS, OCS, CESC)", {}},
        {"biomarkers", "biomarker results",
         {"pd-l1", "tmb/mb", "msi/mss", "others"}},
        {"previous treatments", "treatments before the study treatment, in order", {}},
        {"study treatment", "the immune checkpoint inhibitor regimen", {}},
        {"study treatment response", "response to the study treatment",
         {"treatment response", "adverse effects"}},
        {"PFS", "progression-free survival in months; mark ongoing follow-up", {}},
        {"OS", "overall survival in months; mark alive or deceased", {}},
    };
}

const ExtractionSchema& ehr_schema() {
    static const ExtractionSchema s{"ehr-v1", patient_keys()};
    return s;
}

const ExtractionSchema& literature_schema() {
    static const ExtractionSchema s = [] {
        ExtractionSchema out{"literature-v1", {}};
        out.keys.push_back({"n", "number of patients the results refer to", {}});
        for (auto& k : patient_keys()) out.keys.push_back(std::move(k));
        out.keys.push_back({"main recommendation", "the authors' main clinical recommendation", {}});
        return out;
    }();
    return s;
}

}  // namespace

bool ExtractionSchema::has_key(std::string_view k) const {
    return std::any_of(keys.begin(), keys.end(), [&](const SchemaKey& s) { return s.name == k; });
}

const ExtractionSchema& schema(std::string_view version) {
    if (version == "ehr-v1") return ehr_schema();
    if (version == "literature-v1") return literature_schema();
    throw NotFoundError("unknown schema version: " + std::string(version));
}

std::string_view default_schema_for(Origin origin) {
    return origin == Origin::ehr ? "ehr-v1" : "literature-v1";
}

// ---------------------------------------------------------------- prompts

namespace {

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

}  // namespace

PromptTemplate load_prompt_template(const fs::path& dir, const std::string& id) {
    auto path = dir / (id + ".txt");
    if (!fs::exists(path)) throw NotFoundError("prompt template not found: " + path.string());
    return {id, read_all(path)};
}

std::vector<PromptExample> load_prompt_examples(const fs::path& dir, const std::string& id) {
    auto path = dir / (id + ".examples.jsonl");
    std::vector<PromptExample> out;
    if (!fs::exists(path)) return out;
    std::istringstream in(read_all(path));
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        auto j = Json::parse(line);
        out.push_back({j.at("input").get<std::string>(), j.at("output").get<std::string>()});
    }
    return out;
}

PromptTooLargeError::PromptTooLargeError(std::string doc_id, std::size_t overflow)
    : Error("prompt for " + doc_id + " exceeds the context window by " +
            std::to_string(overflow) + " characters"),
      doc_id_(std::move(doc_id)),
      overflow_(overflow) {}

std::string render_key_list(const ExtractionSchema& s) {
    std::string out;
    for (const auto& k : s.keys) {
        out += "\"" + k.name + "\": " + k.description;
        if (!k.subkeys.empty()) {
            out += " (object with keys";
            for (std::size_t i = 0; i < k.subkeys.size(); ++i) {
                out += (i ? ", \"" : " \"") + k.subkeys[i] + "\"";
            }
            out += ")";
        }
        out += "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

std::string build_prompt(const SourceDocument& doc, const PromptTemplate& tmpl,
                         std::span<const PromptExample> examples, const ExtractionSchema& s,
                         std::size_t max_context_chars) {
    if (text::trim(doc.text).empty()) throw DomainError(doc.doc_id + ": document text is empty");
    std::string ex;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        ex += "Example " + std::to_string(i + 1) + " input:\n" + examples[i].input + "\n";
        ex += "Example " + std::to_string(i + 1) + " output:\n" + examples[i].output + "\n";
    }
    if (!ex.empty()) ex.pop_back();
    // The document goes in last so that braces inside it are never expanded.
    std::string out = tmpl.text;
    replace_all(out, "{{keys}}", render_key_list(s));
    replace_all(out, "{{examples}}", ex);
    auto pos = out.find("{{document}}");
    if (pos == std::string::npos) {
        out += "\n" + doc.text;
    } else {
        out.replace(pos, 12, doc.text);
    }
    auto len = count_code_points(out);
    if (len > max_context_chars) throw PromptTooLargeError(doc.doc_id, len - max_context_chars);
    return out;
}

// ---------------------------------------------------------------- backends

std::string_view to_string(BackendKind k) {
    switch (k) {
        case BackendKind::local: return "local";
        case BackendKind::cloud: return "cloud";
        case BackendKind::mock: return "mock";
    }
    return "mock";
}

std::string_view to_string(PrivacyTier t) {
    return t == PrivacyTier::phi_allowed ? "phi_allowed" : "public_only";
}

BackendKind backend_kind_from_string(std::string_view s) {
    if (s == "local") return BackendKind::local;
    if (s == "cloud") return BackendKind::cloud;
    if (s == "mock") return BackendKind::mock;
    throw ConfigError("unknown backend kind: " + std::string(s));
}

PrivacyTier privacy_tier_from_string(std::string_view s) {
    if (s == "phi_allowed") return PrivacyTier::phi_allowed;
    if (s == "public_only") return PrivacyTier::public_only;
    throw ConfigError("unknown privacy tier: " + std::string(s));
}

void check_privacy(Origin origin, const LlmBackendSpec& spec) {
    if (origin != Origin::ehr) return;
    if (spec.privacy_tier == PrivacyTier::public_only || spec.kind == BackendKind::cloud) {
        throw PrivacyError("refusing to send an EHR document to " +
                           std::string(to_string(spec.kind)) + " backend '" + spec.model_name +
                           "' (" + std::string(to_string(spec.privacy_tier)) + ")");
    }
}

void LlmBackend::pace() {
    if (spec_.max_requests_per_second <= 0) return;
    auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / spec_.max_requests_per_second));
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(pace_mu_);
        auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_slot_);
        next_slot_ = slot + interval;
    }
    std::this_thread::sleep_until(slot);
}

MockBackend::MockBackend(LlmBackendSpec spec, double failure_rate, std::uint64_t seed)
    : LlmBackend(std::move(spec)), failure_rate_(failure_rate), seed_(seed) {}

std::string MockBackend::complete(const BackendRequest& req) {
    if (failure_rate_ > 0) {
        int attempt;
        {
            std::lock_guard lock(mu_);
            attempt = attempts_[req.doc_id]++;
        }
        // FNV-1a over the doc id, mixed with seed and attempt.
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : req.doc_id) h = (h ^ c) * 1099511628211ULL;
        std::mt19937_64 rng(h ^ (seed_ * 0x9E3779B97F4A7C15ULL) ^ static_cast<std::uint64_t>(attempt));
        if (std::uniform_real_distribution<double>(0, 1)(rng) < failure_rate_) {
            throw TransportError("mock: injected transient failure for " + req.doc_id);
        }
    }
    auto path = fs::path(spec().endpoint) / (req.doc_id + ".json");
    if (!fs::exists(path)) throw TransportError("mock: no canned reply for " + req.doc_id);
    auto j = Json::parse(read_all(path), nullptr, false);
    if (j.is_discarded() || !j.contains("output") || !j["output"].is_string()) {
        throw TransportError("mock: malformed canned reply " + path.string());
    }
    return j["output"].get<std::string>();
}

HttpBackend::HttpBackend(LlmBackendSpec spec) : LlmBackend(std::move(spec)) {
    const auto& ep = this->spec().endpoint;
    if (!(ep.starts_with("http://") || ep.starts_with("https://"))) {
        throw ConfigError("backend endpoint must be an http(s) URL: " + ep);
    }
}

std::string HttpBackend::complete(const BackendRequest& req) {
    const auto& ep = spec().endpoint;
    auto host_start = ep.find("://") + 3;
    auto path_start = ep.find('/', host_start);
    std::string base = path_start == std::string::npos ? ep : ep.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : ep.substr(path_start);

    httplib::Client cli(base);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(spec().timeout).count();
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(spec().timeout).count() % 1000000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);

    Json body = Json::object();
    body["model"] = req.model;
    body["input"] = req.input;
    body["response_format"] = "json_object";
    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res) throw TransportError(ep + ": " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw TransportError(ep + ": HTTP status " + std::to_string(res->status));
    }
    auto j = Json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("output") || !j["output"].is_string()) {
        throw TransportError(ep + ": response lacks an \"output\" string");
    }
    return j["output"].get<std::string>();
}

std::unique_ptr<LlmBackend> make_backend(const LlmBackendSpec& spec, std::uint64_t seed) {
    if (spec.kind == BackendKind::mock) return std::make_unique<MockBackend>(spec, 0.0, seed);
    return std::make_unique<HttpBackend>(spec);
}

std::string invoke_backend(LlmBackend& backend, const SourceDocument& doc,
                           const std::string& prompt) {
    check_privacy(doc.origin, backend.spec());
    BackendRequest req{backend.spec().model_name, prompt, doc.doc_id};
    const int attempts = std::max(0, backend.spec().retries) + 1;
    std::string last;
    for (int i = 0; i < attempts; ++i) {
        backend.pace();
        try {
            return backend.complete(req);
        } catch (const TransportError& e) {
            last = e.what();
        }
    }
    throw TransportError(last + " (after " + std::to_string(attempts) + " attempts)");
}

// ---------------------------------------------------------------- contract

namespace {

std::optional<Json> parse_object(const std::string& s, std::string* error) {
    try {
        auto j = Json::parse(s);
        if (!j.is_object()) {
            *error = "top-level value is not an object";
            return std::nullopt;
        }
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        *error = e.what();
        return std::nullopt;
    }
}

std::string strip_fences(const std::string& s) {
    std::string body = s;
    auto open = body.find("```");
    if (open != std::string::npos) {
        auto eol = body.find('\n', open);
        auto close = body.rfind("```");
        if (eol != std::string::npos && close > eol) body = body.substr(eol + 1, close - eol - 1);
    }
    auto first = body.find('{');
    auto last = body.rfind('}');
    if (first == std::string::npos) return {};
    if (last == std::string::npos || last < first) return body.substr(first);
    return body.substr(first, last - first + 1);
}

// Removes a comma whose next non-space character closes an object or array.
std::string drop_trailing_commas(const std::string& s) {
    std::string out;
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_str) {
            out.push_back(c);
            if (c == '\\' && i + 1 < s.size()) out.push_back(s[++i]);
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        if (c == ',') {
            auto j = s.find_first_not_of(" \t\r\n", i + 1);
            if (j != std::string::npos && (s[j] == '}' || s[j] == ']')) continue;
        }
        out.push_back(c);
    }
    return out;
}

std::string single_to_double_quotes(const std::string& s) {
    std::string out = s;
    bool in_double = false;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == '\\') {
            ++i;
            continue;
        }
        if (out[i] == '"') in_double = !in_double;
        else if (out[i] == '\'' && !in_double) out[i] = '"';
    }
    return out;
}

void move_unknown_keys(Json& j, const ExtractionSchema& s) {
    Json extra = Json::object();
    for (auto it = j.begin(); it != j.end();) {
        if (s.has_key(it.key()) || it.key() == "others") {
            ++it;
            continue;
        }
        extra[it.key()] = it.value();
        it = j.erase(it);
    }
    if (extra.empty()) return;
    if (!j.contains("others") || !j["others"].is_object()) {
        Json prev = j.contains("others") ? j["others"] : Json(nullptr);
        j["others"] = Json::object();
        if (!prev.is_null()) j["others"]["others"] = prev;
    }
    for (auto& [k, v] : extra.items()) j["others"][k] = v;
}

}  // namespace

RawExtraction enforce_contract(std::string_view payload, std::string_view schema_version) {
    RawExtraction r;
    r.payload = std::string(payload);
    const ExtractionSchema* s = nullptr;
    try {
        s = &schema(schema_version);
    } catch (const Error& e) {
        r.quarantine_reason = e.what();
        return r;
    }

    std::string err;
    auto parsed = parse_object(r.payload, &err);
    if (!parsed) {
        using Pass = std::pair<const char*, std::string (*)(const std::string&)>;
        const Pass passes[] = {{"strip_fences", strip_fences},
                               {"trailing_commas", drop_trailing_commas},
                               {"single_quotes", single_to_double_quotes}};
        std::string cur = r.payload;
        for (const auto& [name, fn] : passes) {
            auto next = fn(cur);
            if (next.empty()) {
                r.quarantine_reason = "no object found";
                return r;
            }
            if (next != cur) r.repairs.emplace_back(name);
            cur = std::move(next);
            parsed = parse_object(cur, &err);
            if (parsed) break;
        }
    }
    if (!parsed) {
        r.repairs.clear();
        r.quarantine_reason = "invalid JSON after repairs: " + err;
        return r;
    }
    r.repair_applied = !r.repairs.empty();
    move_unknown_keys(*parsed, *s);
    r.parsed = std::move(parsed);
    return r;
}

// ---------------------------------------------------------------- merge

namespace {

// Normalizes model scalars to strings; null and "unknown" spellings vanish.
std::optional<Json> scalar_value(const Json& v) {
    if (v.is_null()) return std::nullopt;
    if (v.is_string()) {
        auto s = std::string(text::trim(v.get<std::string>()));
        if (s.empty() || is_unknown_token(s)) return std::nullopt;
        return Json(s);
    }
    if (v.is_number()) return Json(text::format_number(v.get<double>()));
    if (v.is_boolean()) return Json(v.get<bool>() ? "yes" : "no");
    return v;  // structured values pass through untouched
}

// Splits list-valued attributes into items.
std::vector<Json> list_items(const Json& v) {
    std::vector<Json> out;
    if (v.is_null()) return out;
    if (v.is_array()) {
        for (const auto& e : v) {
            if (auto s = scalar_value(e)) out.push_back(*s);
        }
        return out;
    }
    if (auto s = scalar_value(v); s && s->is_string()) {
        for (auto& piece : text::split_top_level(s->get<std::string>(), ";\n")) {
            if (!is_unknown_token(piece)) out.emplace_back(piece);
        }
    } else if (s) {
        out.push_back(*s);
    }
    return out;
}

std::string comparable(const Json& v) {
    return v.is_string() ? text::lower(text::squash(v.get<std::string>())) : v.dump();
}

bool is_list_attribute(const std::string& path) {
    return path == "previous treatments" || path == "biomarkers.others";
}

class Merger {
public:
    Merger(ExtractedRecord& rec) : rec_(rec) {}

    void add(const std::string& path, const Json& value, const std::string& doc_id) {
        if (is_list_attribute(path)) {
            auto& items = lists_[path];
            for (auto& item : list_items(value)) {
                auto key = comparable(item);
                if (std::none_of(items.begin(), items.end(),
                                 [&](const Json& x) { return comparable(x) == key; })) {
                    items.push_back(item);
                }
                note(path, doc_id);
            }
            return;
        }
        auto v = scalar_value(value);
        if (!v) return;
        auto it = scalars_.find(path);
        if (it != scalars_.end() && comparable(it->second) != comparable(*v)) {
            rec_.warnings.push_back("conflicting values for " + path + ": " + it->second.dump() +
                                    " from " + rec_.provenance[path].back() + ", " + v->dump() +
                                    " from " + doc_id + "; kept the latest");
        }
        scalars_[path] = *v;
        rec_.provenance[path] = {doc_id};
    }

    std::optional<Json> get(const std::string& path) const {
        if (is_list_attribute(path)) {
            auto it = lists_.find(path);
            if (it == lists_.end() || it->second.empty()) return std::nullopt;
            return Json(it->second);
        }
        auto it = scalars_.find(path);
        if (it == scalars_.end()) return std::nullopt;
        return it->second;
    }

private:
    void note(const std::string& path, const std::string& doc_id) {
        auto& docs = rec_.provenance[path];
        if (std::find(docs.begin(), docs.end(), doc_id) == docs.end()) docs.push_back(doc_id);
    }

    ExtractedRecord& rec_;
    std::map<std::string, Json> scalars_;
    std::map<std::string, std::vector<Json>> lists_;
};

}  // namespace

ExtractedRecord merge_extractions(const std::string& subject, Origin origin,
                                  std::span<const RawExtraction> outputs,
                                  std::string_view schema_version) {
    const auto& s = schema(schema_version);
    ExtractedRecord rec;
    Merger m(rec);
    std::size_t parsed = 0;
    for (const auto& out : outputs) {
        if (!out.parsed) {
            rec.warnings.push_back("document " + out.doc_id + " quarantined: " +
                                   out.quarantine_reason.value_or("unknown"));
            continue;
        }
        ++parsed;
        if (out.repair_applied) ++rec.repairs;
        const Json& j = *out.parsed;
        for (const auto& key : s.keys) {
            auto it = j.find(key.name);
            if (it == j.end() || it->is_null()) continue;
            if (key.subkeys.empty()) {
                m.add(key.name, *it, out.doc_id);
                continue;
            }
            if (!it->is_object()) {
                // A bare string where an object was expected lands in the
                // first free-text slot.
                m.add(key.name + "." + (key.name == "biomarkers" ? "others" : key.subkeys.front()),
                      *it, out.doc_id);
                continue;
            }
            for (const auto& sub : key.subkeys) {
                if (auto sit = it->find(sub); sit != it->end()) {
                    m.add(key.name + "." + sub, *sit, out.doc_id);
                }
            }
        }
    }
    if (parsed == 0) {
        std::string why;
        for (const auto& out : outputs) {
            if (!why.empty()) why += "; ";
            why += out.doc_id.substr(0, 12) + ": " + out.quarantine_reason.value_or("unknown");
        }
        throw ExtractionFailure("all documents quarantined (" + why + ")");
    }

    Json j = Json::object();
    j["id"] = subject;
    j["source"] = origin == Origin::ehr ? "institutional" : "literature";
    j["source_ref"] = origin == Origin::ehr ? subject : outputs.front().doc_id;
    for (const auto& key : s.keys) {
        if (key.subkeys.empty()) {
            auto v = m.get(key.name);
            j[key.name] = v ? *v : Json(nullptr);
            if (v) ++rec.attributes;
            continue;
        }
        Json obj = Json::object();
        bool any = false;
        for (const auto& sub : key.subkeys) {
            auto v = m.get(key.name + "." + sub);
            obj[sub] = v ? *v : Json(nullptr);
            any = any || v.has_value();
        }
        j[key.name] = any ? obj : Json(nullptr);
        if (any) ++rec.attributes;
    }
    try {
        rec.twin = decode_twin(j);
    } catch (const DecodeError& e) {
        throw ExtractionFailure(std::string("extracted record does not decode: ") + e.what());
    }
    if (rec.twin.biomarkers.tmb && *rec.twin.biomarkers.tmb >= 0) {
        rec.twin.biomarkers.tmb_class = tmb_class(*rec.twin.biomarkers.tmb);
    }
    rec.twin.adjudication = Adjudication::unreviewed;
    rec.validation = validate_twin(rec.twin);
    return rec;
}

// ---------------------------------------------------------------- jobs

ExtractedRecord extract_record(std::span<const SourceDocument> docs, const ExtractionJob& job,
                               LlmBackend& backend, const fs::path& prompt_dir) {
    if (docs.empty()) throw ExtractionFailure("no documents for subject");
    const Origin origin = docs.front().origin;
    const std::string subject =
        origin == Origin::ehr ? docs.front().patient_hint.value_or("") : "lit-" + docs.front().doc_id.substr(0, 12);
    for (const auto& d : docs) {
        if (d.origin != origin || (origin == Origin::ehr && d.patient_hint != docs.front().patient_hint)) {
            throw ExtractionFailure("documents for one subject must share origin and patient");
        }
    }
    if (origin == Origin::ehr && subject.empty()) {
        throw ExtractionFailure("EHR document " + docs.front().doc_id + " has no patient_hint");
    }
    const std::string version =
        job.schema_version.empty() ? std::string(default_schema_for(origin)) : job.schema_version;
    const auto& s = schema(version);
    const std::string tmpl_id = job.prompt_template_id.empty() ? version : job.prompt_template_id;
    auto tmpl = load_prompt_template(prompt_dir, tmpl_id);
    auto examples = load_prompt_examples(prompt_dir, tmpl_id);

    std::vector<RawExtraction> outputs;
    for (const auto& doc : docs) {
        RawExtraction raw;
        try {
            auto prompt = build_prompt(doc, tmpl, examples, s, backend.spec().max_context_chars);
            raw = enforce_contract(invoke_backend(backend, doc, prompt), version);
        } catch (const PromptTooLargeError& e) {
            raw.quarantine_reason = e.what();
        } catch (const TransportError& e) {
            raw.quarantine_reason = std::string("transport: ") + e.what();
        }
        raw.doc_id = doc.doc_id;
        outputs.push_back(std::move(raw));
    }
    auto rec = merge_extractions(subject, origin, outputs, version);
    if (!rec.validation.admissible()) {
        for (const auto& f : rec.validation.findings) {
            if (f.severity == Severity::error) {
                throw ExtractionFailure("validation failed on " + f.field + ": " + f.message);
            }
        }
    }
    return rec;
}

JobResult run_job(const ExtractionJob& job, std::span<const SourceDocument> corpus,
                  LlmBackend& backend, const fs::path& prompt_dir) {
    std::map<std::string, const SourceDocument*> by_id;
    for (const auto& d : corpus) by_id.emplace(d.doc_id, &d);

    struct Subject {
        std::string name;
        std::vector<SourceDocument> docs;
        std::optional<std::string> problem;
    };
    std::vector<Subject> subjects;
    std::map<std::string, std::size_t> index;
    for (const auto& id : job.doc_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw NotFoundError("document not in corpus: " + id);
        const auto& doc = *it->second;
        std::string name;
        std::optional<std::string> problem;
        if (doc.origin == Origin::ehr) {
            if (!doc.patient_hint) {
                name = "unassigned-" + doc.doc_id.substr(0, 12);
                problem = "EHR document without patient_hint";
            } else {
                name = *doc.patient_hint;
            }
        } else {
            name = "lit-" + doc.doc_id.substr(0, 12);
        }
        auto [pos, fresh] = index.emplace(name, subjects.size());
        if (fresh) subjects.push_back({name, {}, problem});
        subjects[pos->second].docs.push_back(doc);
    }

    auto work = [&](const Subject& subj) -> JobItem {
        std::vector<std::string> ids;
        for (const auto& d : subj.docs) ids.push_back(d.doc_id);
        if (subj.problem) return QuarantineRecord{subj.name, ids, *subj.problem};
        try {
            return extract_record(subj.docs, job, backend, prompt_dir);
        } catch (const ExtractionFailure& e) {
            return QuarantineRecord{subj.name, ids, e.what()};
        }
    };

    JobResult result;
    result.items.reserve(subjects.size());
    const unsigned width = std::max(1u, job.width);
    for (std::size_t i = 0; i < subjects.size(); i += width) {
        std::vector<std::future<JobItem>> batch;
        for (std::size_t k = i; k < std::min(subjects.size(), i + width); ++k) {
            batch.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async, work,
                                       std::cref(subjects[k])));
        }
        for (auto& f : batch) result.items.push_back(f.get());
    }

    auto& rep = result.report;
    rep.subjects = subjects.size();
    for (const auto& item : result.items) {
        if (const auto* rec = std::get_if<ExtractedRecord>(&item)) {
            ++rep.extracted;
            rep.repairs += rec->repairs;
            rep.attributes += rec->attributes;
        } else {
            ++rep.quarantined;
        }
    }
    return result;
}

Json report_to_json(const JobReport& r) {
    Json j = Json::object();
    j["subjects"] = r.subjects;
    j["extracted"] = r.extracted;
    j["quarantined"] = r.quarantined;
    j["repairs"] = r.repairs;
    j["attributes"] = r.attributes;
    return j;
}

Json job_result_to_json(const JobResult& r) {
    Json items = Json::array();
    for (const auto& item : r.items) {
        Json j = Json::object();
        if (const auto* rec = std::get_if<ExtractedRecord>(&item)) {
            j["subject"] = rec->twin.id;
            j["twin"] = encode_twin(rec->twin);
            Json prov = Json::object();
            for (const auto& [k, v] : rec->provenance) prov[k] = v;
            j["provenance"] = std::move(prov);
            j["warnings"] = rec->warnings;
            Json findings = Json::array();
            for (const auto& f : rec->validation.findings) {
                findings.push_back({{"severity", f.severity == Severity::error ? "error" : "warning"},
                                    {"field", f.field},
                                    {"message", f.message}});
            }
            j["validation"] = std::move(findings);
            j["attributes"] = rec->attributes;
        } else {
            const auto& q = std::get<QuarantineRecord>(item);
            j["subject"] = q.subject;
            j["doc_ids"] = q.doc_ids;
            j["quarantine_reason"] = q.reason;
        }
        items.push_back(std::move(j));
    }
    Json out = Json::object();
    out["report"] = report_to_json(r.report);
    out["items"] = std::move(items);
    return out;
}

}  // namespace oncotwin
