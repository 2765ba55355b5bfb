/**
 * @file store.hpp
 * @brief Append-only twin repository.
 *
 * Directory layout:
 *   twins.log   one JSON line per write: {"schema","op","id","version","record"}
 *   twins.idx   id -> byte offset of the latest version, tagged with the log size
 *   audit.log   one JSON line per write describing what changed
 *   twins.lock  advisory lock held by the single writer
 *
 * A final log line without its newline is a torn write and is ignored; a
 * writer truncates it away on open.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "oncotwin/codec.hpp"
#include "oncotwin/model.hpp"
#include "oncotwin/query.hpp"
#include "oncotwin/validate.hpp"

namespace oncotwin {

inline constexpr std::string_view kStoreSchema = "twin-v1";

class StoreError : public Error {
public:
    using Error::Error;
};

/// Another process holds the writer lock.
class StoreLockedError : public StoreError {
public:
    using StoreError::StoreError;
};

/// put() refused a record with validation errors.
class ValidationFailed : public Error {
public:
    explicit ValidationFailed(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

/// Immutable view: every version of every record at one point in time.
class StoreSnapshot {
public:
    using History = std::vector<DigitalTwin>;  // oldest first

    std::size_t count() const { return records_.size(); }
    /// Latest version. Throws NotFoundError.
    const DigitalTwin& get(const std::string& id) const;
    const History& history(const std::string& id) const;
    bool contains(const std::string& id) const { return records_.count(id) != 0; }
    /// Latest versions sorted by id.
    std::vector<DigitalTwin> all() const;
    std::vector<DigitalTwin> query(const Predicate& p) const;

private:
    friend class TwinStore;
    std::map<std::string, std::shared_ptr<const History>> records_;
};

/// Fields record_outcome may change. Absent members are left alone.
struct OutcomeUpdate {
    std::optional<CensoredDuration> pfs;
    std::optional<CensoredDuration> os;
    std::optional<ResponseRecord> study_response;
    std::optional<std::vector<TreatmentEvent>> previous_treatments;

    bool empty() const { return !pfs && !os && !study_response && !previous_treatments; }
};

/// Accepts the codec's key names ("PFS", "OS", "study treatment response",
/// "previous treatments"); any other key is a DomainError.
OutcomeUpdate outcome_from_json(const Json& j);

class TwinStore {
public:
    enum class Mode { read_only, read_write };

    /// Creates the directory in read_write mode. Throws StoreLockedError when
    /// another writer is active and StoreError on a corrupt log.
    static std::unique_ptr<TwinStore> open(const std::filesystem::path& dir,
                                           Mode mode = Mode::read_write);
    ~TwinStore();
    TwinStore(const TwinStore&) = delete;
    TwinStore& operator=(const TwinStore&) = delete;

    /// Validates, appends and fsyncs. Returns the id. Re-putting an existing
    /// id adds a version.
    std::string put(const DigitalTwin& twin, const std::string& actor = "api");

    /// Appends a version with the update applied and an audit entry.
    std::string record_outcome(const std::string& id, const OutcomeUpdate& update,
                               const std::string& actor = "api");

    std::shared_ptr<const StoreSnapshot> snapshot() const;

    std::size_t count() const { return snapshot()->count(); }
    DigitalTwin get(const std::string& id) const { return snapshot()->get(id); }
    std::vector<DigitalTwin> query(const Predicate& p) const { return snapshot()->query(p); }

    /// Byte offset of the latest version's log line, from the index.
    std::optional<std::uint64_t> offset_of(const std::string& id) const;

    const std::filesystem::path& path() const { return dir_; }
    std::string_view schema_version() const { return kStoreSchema; }
    std::size_t torn_bytes_discarded() const { return torn_bytes_; }

    /// Writes twins.idx now (it is also refreshed every few writes and on close).
    void flush_index();

private:
    TwinStore() = default;
    void load();
    void append(const std::string& op, const DigitalTwin& twin, const std::string& actor,
                const std::vector<std::string>& fields);

    std::filesystem::path dir_;
    Mode mode_ = Mode::read_only;
    int log_fd_ = -1;
    int lock_fd_ = -1;
    std::uint64_t log_size_ = 0;
    std::size_t torn_bytes_ = 0;
    std::size_t writes_since_index_ = 0;
    std::map<std::string, std::uint64_t> offsets_;
    std::uint64_t audit_seq_ = 0;

    mutable std::mutex mu_;  // guards snap_ and the writer state
    std::shared_ptr<const StoreSnapshot> snap_;
};

}  // namespace oncotwin
