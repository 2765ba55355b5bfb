/**
 * @file extraction.hpp
 * @brief Schema-constrained LLM extraction: prompts, backends, JSON contract
 *        enforcement, per-subject merge and the job runner.
 */
#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "oncotwin/codec.hpp"
#include "oncotwin/ingestion.hpp"
#include "oncotwin/model.hpp"
#include "oncotwin/validate.hpp"

namespace oncotwin {

// ---------------------------------------------------------------- schema

struct SchemaKey {
    std::string name;
    std::string description;
    std::vector<std::string> subkeys;  // non-empty for object-valued keys
};

/// A pinned key set. "ehr-v1" has the ten patient attributes;
/// "literature-v1" adds "n" and "main recommendation".
struct ExtractionSchema {
    std::string version;
    std::vector<SchemaKey> keys;

    bool has_key(std::string_view k) const;
};

/// Throws NotFoundError for unknown versions.
const ExtractionSchema& schema(std::string_view version);
std::string_view default_schema_for(Origin origin);

// ---------------------------------------------------------------- prompts

struct PromptExample {
    std::string input;
    std::string output;
};

/// Template text with {{keys}}, {{examples}} and {{document}} placeholders.
struct PromptTemplate {
    std::string id;
    std::string text;
};

/// Loads `<dir>/<id>.txt` and, when present, `<dir>/<id>.examples.jsonl`.
PromptTemplate load_prompt_template(const std::filesystem::path& dir, const std::string& id);
std::vector<PromptExample> load_prompt_examples(const std::filesystem::path& dir,
                                                const std::string& id);

class PromptTooLargeError : public Error {
public:
    PromptTooLargeError(std::string doc_id, std::size_t overflow);
    const std::string& doc_id() const { return doc_id_; }
    std::size_t overflow() const { return overflow_; }

private:
    std::string doc_id_;
    std::size_t overflow_;
};

std::string render_key_list(const ExtractionSchema& s);

/// Deterministic. Throws PromptTooLargeError when the prompt exceeds
/// `max_context_chars` (code points) and DomainError on empty text.
std::string build_prompt(const SourceDocument& doc, const PromptTemplate& tmpl,
                         std::span<const PromptExample> examples, const ExtractionSchema& s,
                         std::size_t max_context_chars);

// ---------------------------------------------------------------- backends

enum class BackendKind { local, cloud, mock };
enum class PrivacyTier { phi_allowed, public_only };

std::string_view to_string(BackendKind k);
std::string_view to_string(PrivacyTier t);
BackendKind backend_kind_from_string(std::string_view s);
PrivacyTier privacy_tier_from_string(std::string_view s);

struct LlmBackendSpec {
    BackendKind kind = BackendKind::mock;
    std::string endpoint;  // http(s) URL, or the canned reply directory for mock
    std::string model_name;
    std::size_t max_context_chars = 1'000'000;
    PrivacyTier privacy_tier = PrivacyTier::phi_allowed;
    int retries = 2;
    std::chrono::milliseconds timeout{120'000};
    double max_requests_per_second = 0;  // 0 = unlimited
};

/// Retryable failure: connection refused, timeout, non-2xx status.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Fatal: a document would cross the privacy boundary.
class PrivacyError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Throws PrivacyError when `origin` may not be sent to `spec`. EHR text
/// requires a phi_allowed tier on a non-cloud backend.
void check_privacy(Origin origin, const LlmBackendSpec& spec);

struct BackendRequest {
    std::string model;
    std::string input;
    std::string doc_id;  // not sent over the wire; keys mock replies
};

class LlmBackend {
public:
    explicit LlmBackend(LlmBackendSpec spec) : spec_(std::move(spec)) {}
    virtual ~LlmBackend() = default;

    const LlmBackendSpec& spec() const { return spec_; }

    /// One attempt. Throws TransportError on retryable failure.
    virtual std::string complete(const BackendRequest& req) = 0;

    /// Blocks until the per-backend request rate allows another call.
    void pace();

private:
    LlmBackendSpec spec_;
    std::mutex pace_mu_;
    std::chrono::steady_clock::time_point next_slot_{};
};

/// Canned replies: `<endpoint>/<doc_id>.json` holding {"output": "..."}.
/// A missing reply is a TransportError. `failure_rate` injects seeded
/// transient failures for retry tests.
class MockBackend final : public LlmBackend {
public:
    explicit MockBackend(LlmBackendSpec spec, double failure_rate = 0, std::uint64_t seed = 0);
    std::string complete(const BackendRequest& req) override;

private:
    double failure_rate_;
    std::uint64_t seed_;
    std::map<std::string, int> attempts_;
    std::mutex mu_;
};

/// POSTs {model, input, response_format: "json_object"} to the endpoint and
/// reads {"output": ...}.
class HttpBackend final : public LlmBackend {
public:
    explicit HttpBackend(LlmBackendSpec spec);
    std::string complete(const BackendRequest& req) override;
};

std::unique_ptr<LlmBackend> make_backend(const LlmBackendSpec& spec, std::uint64_t seed = 0);

/// Privacy check, then up to spec.retries + 1 attempts with the rate limit
/// applied per attempt.
std::string invoke_backend(LlmBackend& backend, const SourceDocument& doc,
                           const std::string& prompt);

// ---------------------------------------------------------------- contract

struct RawExtraction {
    std::string doc_id;
    std::string payload;
    std::optional<Json> parsed;
    bool repair_applied = false;
    std::vector<std::string> repairs;  // names of the passes that were needed
    std::optional<std::string> quarantine_reason;
};

/// Never throws. Strict parse, then cumulative repairs (strip fences, drop
/// trailing commas, single to double quotes), then quarantine. Keys outside
/// the schema move under "others".
RawExtraction enforce_contract(std::string_view payload, std::string_view schema_version);

// ---------------------------------------------------------------- records

/// Attribute name ("age", "biomarkers.pd-l1", ...) to the doc_ids whose
/// output supplied the value.
using AttributeProvenance = std::map<std::string, std::vector<std::string>>;

struct ExtractedRecord {
    DigitalTwin twin;
    AttributeProvenance provenance;
    std::vector<std::string> warnings;  // merge conflicts
    ValidationReport validation;
    std::size_t attributes = 0;         // schema keys with a value
    std::size_t repairs = 0;            // documents that needed JSON repair
};

struct QuarantineRecord {
    std::string subject;
    std::vector<std::string> doc_ids;
    std::string reason;
};

class ExtractionFailure : public Error {
public:
    using Error::Error;
};

/// Merges per-document outputs in order: later documents win for scalars
/// (with a warning when values differ), lists are unioned, object keys merge
/// one sub-key at a time. Throws ExtractionFailure when nothing parsed.
ExtractedRecord merge_extractions(const std::string& subject, Origin origin,
                                  std::span<const RawExtraction> outputs,
                                  std::string_view schema_version);

struct ExtractionJob {
    std::vector<std::string> doc_ids;  // processing order; must all be in the corpus
    LlmBackendSpec backend;
    std::string prompt_template_id;    // empty = schema version
    std::string schema_version;        // empty = by origin
    std::uint64_t seed = 0;
    unsigned width = 1;
};

/// Runs the pipeline for one subject. Throws ExtractionFailure when every
/// document is quarantined.
ExtractedRecord extract_record(std::span<const SourceDocument> docs, const ExtractionJob& job,
                               LlmBackend& backend, const std::filesystem::path& prompt_dir);

struct JobReport {
    std::size_t subjects = 0;
    std::size_t extracted = 0;
    std::size_t quarantined = 0;
    std::size_t repairs = 0;
    std::size_t attributes = 0;

    bool operator==(const JobReport&) const = default;
};

using JobItem = std::variant<ExtractedRecord, QuarantineRecord>;

struct JobResult {
    std::vector<JobItem> items;  // subject order of first appearance
    JobReport report;
};

/// EHR documents group by patient_hint, literature documents stand alone.
/// Per-subject failures become quarantine records; PrivacyError aborts.
JobResult run_job(const ExtractionJob& job, std::span<const SourceDocument> corpus,
                  LlmBackend& backend, const std::filesystem::path& prompt_dir);

Json report_to_json(const JobReport& r);
Json job_result_to_json(const JobResult& r);

}  // namespace oncotwin
