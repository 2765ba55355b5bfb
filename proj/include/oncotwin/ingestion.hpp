/**
 * @file ingestion.hpp
 * @brief Source documents, the OCR adapter seam and corpus statistics.
 */
#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oncotwin/error.hpp"

namespace oncotwin {

enum class Origin { ehr, literature };
enum class Media { text, pdf, image };

std::string_view to_string(Origin o);
std::string_view to_string(Media m);
Origin origin_from_string(std::string_view s);
Media media_from_string(std::string_view s);

/// Guesses media from the file extension; unknown extensions are text.
Media media_for_path(const std::filesystem::path& p);

struct SourceDocument {
    std::string doc_id;
    Origin origin = Origin::literature;
    Media media = Media::text;
    std::string text;
    int pages = 0;
    std::size_t chars = 0;  // Unicode code points in `text`
    std::optional<std::string> patient_hint;
};

class IngestionError : public Error {
public:
    using Error::Error;
};

/// External OCR failure. The message names the command.
class OcrError : public Error {
public:
    using Error::Error;
};

/// Bytes in, UTF-8 text out. Pages are separated by form feeds.
class OcrAdapter {
public:
    virtual ~OcrAdapter() = default;
    virtual std::string recognize(std::string_view bytes, Media media) = 0;
};

/// Returns the bytes unchanged. Used by tests and for pre-extracted text.
class PassthroughOcr final : public OcrAdapter {
public:
    std::string recognize(std::string_view bytes, Media media) override;
};

/// Runs an external command. The argv template must contain "{input}",
/// which is replaced by a temporary file holding the bytes; stdout is the
/// recognized text.
class CommandOcr final : public OcrAdapter {
public:
    CommandOcr(std::vector<std::string> argv_template, std::chrono::seconds timeout);

    std::string recognize(std::string_view bytes, Media media) override;

    const std::vector<std::string>& argv_template() const { return argv_; }

private:
    std::vector<std::string> argv_;
    std::chrono::seconds timeout_;
};

/// Splits a command string on whitespace ("tesseract {input} stdout").
std::vector<std::string> split_command(std::string_view command);

/// NFC plus LF line endings. Invalid UTF-8 is replaced with U+FFFD.
std::string normalize_text(std::string_view s);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

std::size_t count_code_points(std::string_view utf8);

struct IngestOptions {
    OcrAdapter* ocr = nullptr;  // required for pdf and image media
    bool dehyphenate = false;   // joins "treat-\nment" when set
    std::optional<std::string> patient_hint;
};

/// Reads `path` without modifying it. Text documents are keyed by the hash
/// of their normalized text, scanned ones by the hash of the file bytes.
SourceDocument ingest(const std::filesystem::path& path, Origin origin,
                      const IngestOptions& opts = {});

/// Same as ingest() for text already in memory.
SourceDocument ingest_text(std::string_view text, Origin origin,
                           const IngestOptions& opts = {});

/// One line of a corpus manifest.
struct ManifestEntry {
    std::string doc_id;
    Origin origin = Origin::literature;
    Media media = Media::text;
    int pages = 0;
    std::size_t chars = 0;
    std::string path;
    std::optional<std::string> patient_hint;

    bool operator==(const ManifestEntry&) const = default;
};

ManifestEntry manifest_entry(const SourceDocument& doc, std::string path);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
std::string encode_manifest_line(const ManifestEntry& e);

struct CorpusStats {
    std::size_t count = 0;
    double median_pages = 0;
    double median_chars = 0;
    std::size_t max_chars = 0;

    bool operator==(const CorpusStats&) const = default;
};

/// Throws DomainError on an empty corpus.
CorpusStats corpus_stats(std::span<const ManifestEntry> docs);
CorpusStats corpus_stats(std::span<const SourceDocument> docs);

/// Documents per patient_hint; entries without a hint are ignored.
std::map<std::string, std::size_t> documents_per_subject(std::span<const ManifestEntry> docs);

/// Ingests every manifest entry relative to `base`, up to `width` at a time.
/// Output order matches the manifest.
std::vector<SourceDocument> ingest_manifest(std::span<const ManifestEntry> entries,
                                            const std::filesystem::path& base,
                                            OcrAdapter* ocr, unsigned width = 1);

}  // namespace oncotwin
