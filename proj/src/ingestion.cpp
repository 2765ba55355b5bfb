/**
 * @file ingestion.cpp
 * @brief Document ingestion, the external OCR command and manifest I/O.
 */

#include "oncotwin/ingestion.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <openssl/evp.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

#include "oncotwin/codec.hpp"
#include "oncotwin/stats.hpp"
#include "text.hpp"

namespace oncotwin {

namespace fs = std::filesystem;

std::string_view to_string(Origin o) { return o == Origin::ehr ? "ehr" : "literature"; }

std::string_view to_string(Media m) {
    switch (m) {
        case Media::text: return "text";
        case Media::pdf: return "pdf";
        case Media::image: return "image";
    }
    return "text";
}

Origin origin_from_string(std::string_view s) {
    if (s == "ehr") return Origin::ehr;
    if (s == "literature") return Origin::literature;
    throw DomainError("unknown origin: " + std::string(s));
}

Media media_from_string(std::string_view s) {
    if (s == "text") return Media::text;
    if (s == "pdf") return Media::pdf;
    if (s == "image") return Media::image;
    throw DomainError("unknown media: " + std::string(s));
}

Media media_for_path(const fs::path& p) {
    auto ext = text::lower(p.extension().string());
    if (ext == ".pdf") return Media::pdf;
    for (const char* e : {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".pgm", ".ppm", ".bmp"}) {
        if (ext == e) return Media::image;
    }
    return Media::text;
}

std::string PassthroughOcr::recognize(std::string_view bytes, Media) { return std::string(bytes); }

std::vector<std::string> split_command(std::string_view command) {
    std::vector<std::string> argv;
    std::istringstream in{std::string(command)};
    for (std::string tok; in >> tok;) argv.push_back(tok);
    return argv;
}

namespace {

std::optional<fs::path> find_executable(const std::string& name) {
    if (name.find('/') != std::string::npos) {
        if (::access(name.c_str(), X_OK) == 0) return fs::path(name);
        return std::nullopt;
    }
    const char* path = std::getenv("PATH");
    std::string dirs = path ? path : "/usr/bin:/bin";
    std::size_t start = 0;
    while (start <= dirs.size()) {
        auto end = dirs.find(':', start);
        if (end == std::string::npos) end = dirs.size();
        fs::path candidate = fs::path(dirs.substr(start, end - start)) / name;
        if (::access(candidate.c_str(), X_OK) == 0) return candidate;
        start = end + 1;
    }
    return std::nullopt;
}

// Temporary file removed on scope exit.
struct ScratchFile {
    fs::path path;
    ~ScratchFile() {
        std::error_code ec;
        fs::remove(path, ec);
    }
};

std::string extension_for(Media m) {
    switch (m) {
        case Media::pdf: return ".pdf";
        case Media::image: return ".png";
        case Media::text: return ".txt";
    }
    return ".bin";
}

}  // namespace

CommandOcr::CommandOcr(std::vector<std::string> argv_template, std::chrono::seconds timeout)
    : argv_(std::move(argv_template)), timeout_(timeout) {
    if (argv_.empty()) throw ConfigError("ocr.command is empty");
    bool has_input = std::any_of(argv_.begin(), argv_.end(), [](const std::string& a) {
        return a.find("{input}") != std::string::npos;
    });
    if (!has_input) throw ConfigError("ocr.command lacks an {input} placeholder");
    if (timeout_.count() <= 0) throw ConfigError("ocr.timeout_seconds must be positive");
}

std::string CommandOcr::recognize(std::string_view bytes, Media media) {
    const std::string& name = argv_.front();
    auto exe = find_executable(name);
    if (!exe) throw OcrError("ocr command not found: " + name);

    std::random_device rd;
    ScratchFile input{fs::temp_directory_path() /
                      ("oncotwin-ocr-" + std::to_string(rd()) + extension_for(media))};
    {
        std::ofstream out(input.path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw OcrError(name + ": cannot stage input");
    }

    std::vector<std::string> args;
    for (auto a : argv_) {
        for (auto pos = a.find("{input}"); pos != std::string::npos; pos = a.find("{input}")) {
            a.replace(pos, 7, input.path.string());
        }
        args.push_back(std::move(a));
    }
    std::vector<char*> cargv;
    for (auto& a : args) cargv.push_back(a.data());
    cargv.push_back(nullptr);

    int pipefd[2];
    if (::pipe(pipefd) != 0) throw OcrError(name + ": pipe failed");
    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        throw OcrError(name + ": fork failed");
    }
    if (pid == 0) {
        ::dup2(pipefd[1], STDOUT_FILENO);
        int devnull = ::open("/dev/null", O_WRONLY);
        if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        ::execv(exe->c_str(), cargv.data());
        ::_exit(127);
    }
    ::close(pipefd[1]);

    std::string output;
    auto deadline = std::chrono::steady_clock::now() + timeout_;
    bool timed_out = false;
    char buf[65536];
    for (;;) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            timed_out = true;
            break;
        }
        pollfd pfd{pipefd[0], POLLIN, 0};
        int r = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) {
            timed_out = r == 0;
            break;
        }
        auto n = ::read(pipefd[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    ::close(pipefd[0]);
    if (timed_out) ::kill(pid, SIGKILL);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) {
        throw OcrError(name + ": timed out after " + std::to_string(timeout_.count()) + "s");
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        throw OcrError(name + ": exited with status " + std::to_string(code));
    }
    return output;
}

std::string normalize_text(std::string_view s) {
    std::string lf;
    lf.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            lf.push_back('\n');
            if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
        } else {
            lf.push_back(s[i]);
        }
    }
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("NFC normalizer unavailable");
    auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(lf.data(), static_cast<int32_t>(lf.size())));
    auto norm = nfc->normalize(u, status);
    if (U_FAILURE(status)) throw Error("NFC normalization failed");
    std::string out;
    norm.toUTF8String(out);
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::size_t count_code_points(std::string_view utf8) {
    return static_cast<std::size_t>(std::count_if(utf8.begin(), utf8.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

namespace {

std::string dehyphenate(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '-' && i + 1 < s.size() && s[i + 1] == '\n' && i > 0 &&
            std::isalpha(static_cast<unsigned char>(s[i - 1])) && i + 2 < s.size() &&
            std::islower(static_cast<unsigned char>(s[i + 2]))) {
            ++i;
            continue;
        }
        out.push_back(s[i]);
    }
    return out;
}

SourceDocument finish(std::string doc_id, std::string_view raw_text, Media media, Origin origin,
                      const IngestOptions& opts) {
    SourceDocument d;
    d.doc_id = std::move(doc_id);
    d.origin = origin;
    d.media = media;
    d.text = normalize_text(raw_text);
    if (opts.dehyphenate) d.text = dehyphenate(d.text);
    if (text::trim(d.text).empty()) throw IngestionError(d.doc_id + ": document has no text");
    d.chars = count_code_points(d.text);
    d.pages = 1 + static_cast<int>(std::count(d.text.begin(), d.text.end(), '\f'));
    if (!d.text.empty() && d.text.back() == '\f') --d.pages;
    d.patient_hint = opts.patient_hint;
    return d;
}

}  // namespace

SourceDocument ingest_text(std::string_view raw, Origin origin, const IngestOptions& opts) {
    auto norm = normalize_text(raw);
    return finish(sha256_hex(norm), norm, Media::text, origin, opts);
}

SourceDocument ingest(const fs::path& path, Origin origin, const IngestOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IngestionError("cannot read " + path.string());
    if (bytes.empty()) throw IngestionError(path.string() + ": empty file");

    Media media = media_for_path(path);
    if (media == Media::text) {
        try {
            return ingest_text(bytes, origin, opts);
        } catch (const IngestionError& e) {
            throw IngestionError(path.string() + ": " + e.what());
        }
    }
    std::string doc_id = sha256_hex(bytes);
    if (!opts.ocr) throw IngestionError(doc_id + ": no OCR adapter configured for " + path.string());
    std::string text;
    try {
        text = opts.ocr->recognize(bytes, media);
    } catch (const OcrError& e) {
        throw IngestionError(doc_id + ": " + e.what());
    }
    return finish(std::move(doc_id), text, media, origin, opts);
}

ManifestEntry manifest_entry(const SourceDocument& doc, std::string path) {
    return {doc.doc_id, doc.origin, doc.media, doc.pages, doc.chars, std::move(path),
            doc.patient_hint};
}

std::string encode_manifest_line(const ManifestEntry& e) {
    Json j;
    j["doc_id"] = e.doc_id;
    j["origin"] = to_string(e.origin);
    j["media"] = to_string(e.media);
    j["pages"] = e.pages;
    j["chars"] = e.chars;
    j["path"] = e.path;
    if (e.patient_hint) j["patient_hint"] = *e.patient_hint;
    return j.dump();
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read manifest " + path.string());
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            auto j = Json::parse(line);
            ManifestEntry e;
            e.doc_id = j.at("doc_id").get<std::string>();
            e.origin = origin_from_string(j.at("origin").get<std::string>());
            e.media = media_from_string(j.value("media", std::string("text")));
            e.pages = j.value("pages", 0);
            e.chars = j.value("chars", std::size_t{0});
            e.path = j.value("path", std::string());
            if (j.contains("patient_hint") && j["patient_hint"].is_string()) {
                e.patient_hint = j["patient_hint"].get<std::string>();
            }
            if (e.pages < 0) throw DomainError("negative pages");
            out.push_back(std::move(e));
        } catch (const std::exception& ex) {
            throw DecodeError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    for (const auto& e : entries) out << encode_manifest_line(e) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

namespace {

template <typename Doc>
CorpusStats stats_of(std::span<const Doc> docs) {
    if (docs.empty()) throw DomainError("corpus_stats of empty corpus");
    std::vector<double> pages, chars;
    CorpusStats s;
    s.count = docs.size();
    for (const auto& d : docs) {
        pages.push_back(d.pages);
        chars.push_back(static_cast<double>(d.chars));
        s.max_chars = std::max(s.max_chars, d.chars);
    }
    s.median_pages = median(pages);
    s.median_chars = median(chars);
    return s;
}

}  // namespace

CorpusStats corpus_stats(std::span<const ManifestEntry> docs) { return stats_of(docs); }
CorpusStats corpus_stats(std::span<const SourceDocument> docs) { return stats_of(docs); }

std::map<std::string, std::size_t> documents_per_subject(std::span<const ManifestEntry> docs) {
    std::map<std::string, std::size_t> counts;
    for (const auto& d : docs) {
        if (d.patient_hint) ++counts[*d.patient_hint];
    }
    return counts;
}

std::vector<SourceDocument> ingest_manifest(std::span<const ManifestEntry> entries,
                                            const fs::path& base, OcrAdapter* ocr,
                                            unsigned width) {
    auto one = [&](const ManifestEntry& e) {
        IngestOptions opts;
        opts.ocr = ocr;
        opts.patient_hint = e.patient_hint;
        auto doc = ingest(base / e.path, e.origin, opts);
        if (e.media == Media::text && !e.doc_id.empty() && doc.doc_id != e.doc_id) {
            throw IngestionError(e.path + ": content hash " + doc.doc_id +
                                 " does not match manifest doc_id " + e.doc_id);
        }
        return doc;
    };
    std::vector<SourceDocument> out;
    out.reserve(entries.size());
    width = std::max(1u, width);
    for (std::size_t i = 0; i < entries.size(); i += width) {
        std::vector<std::future<SourceDocument>> batch;
        for (std::size_t k = i; k < std::min(entries.size(), i + width); ++k) {
            batch.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async,
                                       one, std::cref(entries[k])));
        }
        for (auto& f : batch) out.push_back(f.get());
    }
    return out;
}

}  // namespace oncotwin
