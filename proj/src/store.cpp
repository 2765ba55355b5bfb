/**
 * @file store.cpp
 * @brief Log replay, torn-write recovery, appends and the offset index.
 */

#include "oncotwin/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>

namespace oncotwin {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kIndexEvery = 32;

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_all(int fd, const std::string& data, const fs::path& what) {
    std::size_t done = 0;
    while (done < data.size()) {
        auto n = ::write(fd, data.data() + done, data.size() - done);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0) throw IoError("write failed on " + what.string() + ": " + std::strerror(errno));
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) throw IoError("fsync failed on " + what.string());
}

std::string first_error(const ValidationReport& r) {
    for (const auto& f : r.findings) {
        if (f.severity == Severity::error) return f.field + ": " + f.message;
    }
    return "validation failed";
}

}  // namespace

ValidationFailed::ValidationFailed(ValidationReport report)
    : Error("record rejected: " + first_error(report)), report_(std::move(report)) {}

// ---------------------------------------------------------------- snapshot

const DigitalTwin& StoreSnapshot::get(const std::string& id) const {
    return history(id).back();
}

const StoreSnapshot::History& StoreSnapshot::history(const std::string& id) const {
    auto it = records_.find(id);
    if (it == records_.end()) throw NotFoundError("no twin with id '" + id + "'");
    return *it->second;
}

std::vector<DigitalTwin> StoreSnapshot::all() const {
    std::vector<DigitalTwin> out;
    out.reserve(records_.size());
    for (const auto& [id, h] : records_) out.push_back(h->back());
    return out;
}

std::vector<DigitalTwin> StoreSnapshot::query(const Predicate& p) const {
    std::vector<DigitalTwin> out;
    for (const auto& [id, h] : records_) {
        if (matches(h->back(), p)) out.push_back(h->back());
    }
    return out;
}

// ---------------------------------------------------------------- outcome updates

OutcomeUpdate outcome_from_json(const Json& j) {
    if (!j.is_object()) throw DomainError("outcome update must be an object");
    Json probe = Json::object();
    OutcomeUpdate u;
    for (const auto& [key, value] : j.items()) {
        std::string k = key;
        if (k == "pfs") k = "PFS";
        if (k == "os") k = "OS";
        if (k == "study_response") k = "study treatment response";
        if (k == "previous_treatments") k = "previous treatments";
        if (k != "PFS" && k != "OS" && k != "study treatment response" && k != "previous treatments") {
            throw DomainError("field '" + key + "' cannot be changed by an outcome update");
        }
        if (value.is_null()) throw DomainError("outcome field '" + key + "' must not be null");
        probe[k] = value;
    }
    DigitalTwin t;
    try {
        t = decode_twin(probe);
    } catch (const DecodeError& e) {
        throw DomainError(std::string("malformed outcome update: ") + e.what());
    }
    if (probe.contains("PFS")) u.pfs = t.pfs;
    if (probe.contains("OS")) u.os = t.os;
    if (probe.contains("study treatment response")) u.study_response = t.study_response;
    if (probe.contains("previous treatments")) u.previous_treatments = t.previous_treatments;
    return u;
}

// ---------------------------------------------------------------- store

std::unique_ptr<TwinStore> TwinStore::open(const fs::path& dir, Mode mode) {
    std::unique_ptr<TwinStore> s(new TwinStore());
    s->dir_ = dir;
    s->mode_ = mode;
    if (mode == Mode::read_write) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create store directory " + dir.string() + ": " + ec.message());
        auto lock_path = dir / "twins.lock";
        s->lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (s->lock_fd_ < 0) throw IoError("cannot open " + lock_path.string());
        if (::flock(s->lock_fd_, LOCK_EX | LOCK_NB) != 0) {
            throw StoreLockedError("store " + dir.string() + " is locked by another writer");
        }
    } else if (!fs::is_directory(dir)) {
        throw NotFoundError("no store at " + dir.string());
    }
    s->load();
    if (mode == Mode::read_write) {
        auto log_path = dir / "twins.log";
        s->log_fd_ = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (s->log_fd_ < 0) throw IoError("cannot open " + log_path.string());
    }
    return s;
}

TwinStore::~TwinStore() {
    if (mode_ == Mode::read_write && log_fd_ >= 0) {
        try {
            flush_index();
        } catch (const std::exception&) {
            // The index is advisory; it is rebuilt on the next open.
        }
    }
    if (log_fd_ >= 0) ::close(log_fd_);
    if (lock_fd_ >= 0) ::close(lock_fd_);
}

void TwinStore::load() {
    auto snap = std::make_shared<StoreSnapshot>();
    auto log_path = dir_ / "twins.log";
    std::string data;
    if (fs::exists(log_path)) {
        std::ifstream in(log_path, std::ios::binary);
        if (!in) throw IoError("cannot read " + log_path.string());
        data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    std::map<std::string, std::vector<DigitalTwin>> histories;
    std::size_t pos = 0;
    while (pos < data.size()) {
        auto nl = data.find('\n', pos);
        if (nl == std::string::npos) {
            torn_bytes_ = data.size() - pos;
            break;
        }
        std::string_view line(data.data() + pos, nl - pos);
        try {
            auto j = Json::parse(line);
            auto schema = j.at("schema").get<std::string>();
            if (schema != kStoreSchema) {
                throw StoreError("record schema '" + schema + "' needs migration to " +
                                 std::string(kStoreSchema));
            }
            auto id = j.at("id").get<std::string>();
            auto version = j.at("version").get<std::size_t>();
            auto& h = histories[id];
            if (version != h.size() + 1) throw StoreError("version gap for '" + id + "'");
            h.push_back(decode_twin(j.at("record")));
            offsets_[id] = pos;
        } catch (const StoreError&) {
            throw;
        } catch (const std::exception& e) {
            throw StoreError("corrupt record at byte " + std::to_string(pos) + " of " +
                             log_path.string() + ": " + e.what());
        }
        pos = nl + 1;
    }
    log_size_ = data.size() - torn_bytes_;
    if (torn_bytes_ > 0 && mode_ == Mode::read_write) {
        if (::truncate(log_path.c_str(), static_cast<off_t>(log_size_)) != 0) {
            throw IoError("cannot truncate torn record in " + log_path.string());
        }
    }
    for (auto& [id, h] : histories) {
        snap->records_[id] = std::make_shared<const StoreSnapshot::History>(std::move(h));
    }
    snap_ = std::move(snap);

    // Audit sequence continues from the existing audit log.
    auto audit_path = dir_ / "audit.log";
    audit_seq_ = 0;
    if (fs::exists(audit_path)) {
        std::ifstream in(audit_path);
        for (std::string l; std::getline(in, l);) ++audit_seq_;
    }

    if (mode_ == Mode::read_write) {
        bool stale = true;
        std::ifstream idx(dir_ / "twins.idx");
        std::string header;
        if (idx && std::getline(idx, header)) {
            auto h = Json::parse(header, nullptr, false);
            stale = h.is_discarded() || h.value("log_bytes", std::uint64_t{0}) != log_size_;
        }
        if (stale) flush_index();
    }
}

void TwinStore::flush_index() {
    std::lock_guard lock(mu_);
    if (mode_ != Mode::read_write) return;
    auto tmp = dir_ / "twins.idx.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        Json h = Json::object();
        h["schema"] = kStoreSchema;
        h["log_bytes"] = log_size_;
        out << h.dump() << '\n';
        for (const auto& [id, off] : offsets_) {
            Json e = Json::object();
            e["id"] = id;
            e["offset"] = off;
            out << e.dump() << '\n';
        }
        if (!out) throw IoError("cannot write " + tmp.string());
    }
    fs::rename(tmp, dir_ / "twins.idx");
    writes_since_index_ = 0;
}

std::optional<std::uint64_t> TwinStore::offset_of(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = offsets_.find(id);
    if (it == offsets_.end()) return std::nullopt;
    return it->second;
}

std::shared_ptr<const StoreSnapshot> TwinStore::snapshot() const {
    std::lock_guard lock(mu_);
    return snap_;
}

void TwinStore::append(const std::string& op, const DigitalTwin& twin, const std::string& actor,
                       const std::vector<std::string>& fields) {
    if (mode_ != Mode::read_write) throw StoreError("store opened read-only");
    bool reindex = false;
    {
        std::lock_guard lock(mu_);
        auto next = std::make_shared<StoreSnapshot>(*snap_);
        auto it = next->records_.find(twin.id);
        auto history = it == next->records_.end()
                           ? std::make_shared<StoreSnapshot::History>()
                           : std::make_shared<StoreSnapshot::History>(*it->second);
        const std::size_t version = history->size() + 1;

        Json rec = Json::object();
        rec["schema"] = kStoreSchema;
        rec["op"] = op;
        rec["id"] = twin.id;
        rec["version"] = version;
        rec["record"] = encode_twin(twin);
        write_all(log_fd_, rec.dump() + "\n", dir_ / "twins.log");
        offsets_[twin.id] = log_size_;
        log_size_ += rec.dump().size() + 1;

        Json audit = Json::object();
        audit["seq"] = ++audit_seq_;
        audit["at"] = utc_now();
        audit["actor"] = actor;
        audit["op"] = op;
        audit["id"] = twin.id;
        audit["version"] = version;
        audit["fields"] = fields;
        auto audit_path = dir_ / "audit.log";
        int afd = ::open(audit_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (afd < 0) throw IoError("cannot open " + audit_path.string());
        try {
            write_all(afd, audit.dump() + "\n", audit_path);
        } catch (...) {
            ::close(afd);
            throw;
        }
        ::close(afd);

        history->push_back(twin);
        next->records_[twin.id] = std::move(history);
        snap_ = std::move(next);
        reindex = ++writes_since_index_ >= kIndexEvery;
    }
    if (reindex) flush_index();
}

std::string TwinStore::put(const DigitalTwin& twin, const std::string& actor) {
    auto report = validate_twin(twin);
    if (!report.admissible()) throw ValidationFailed(std::move(report));
    append("put", twin, actor, {});
    return twin.id;
}

std::string TwinStore::record_outcome(const std::string& id, const OutcomeUpdate& update,
                                      const std::string& actor) {
    if (update.empty()) throw DomainError("outcome update changes nothing");
    DigitalTwin t = snapshot()->get(id);
    std::vector<std::string> fields;
    if (update.pfs) {
        t.pfs = update.pfs;
        fields.emplace_back("PFS");
    }
    if (update.os) {
        t.os = update.os;
        fields.emplace_back("OS");
    }
    if (update.study_response) {
        t.study_response = update.study_response;
        fields.emplace_back("study treatment response");
    }
    if (update.previous_treatments) {
        t.previous_treatments = *update.previous_treatments;
        fields.emplace_back("previous treatments");
    }
    auto report = validate_twin(t);
    if (!report.admissible()) throw ValidationFailed(std::move(report));
    append("outcome", t, actor, fields);
    return id;
}

}  // namespace oncotwin
