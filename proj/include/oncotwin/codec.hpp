/**
 * @file codec.hpp
 * @brief Canonical record serialization.
 *
 * Key names follow the extraction schema ("n", "age", "gender", "race",
 * "diagnosis", "biomarkers" {"pd-l1", "tmb/mb", "msi/mss", "others"},
 * "previous treatments", "study treatment", "study treatment response"
 * {"treatment response", "adverse effects"}, "PFS", "OS"), extended with
 * "id", "source", "source_ref", "treatment line", "tmb class",
 * "main recommendation", "similarity" and "adjudication". Clinical strings
 * are carried verbatim; decoding re-parses them.
 */
#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "oncotwin/error.hpp"
#include "oncotwin/model.hpp"

namespace oncotwin {

using Json = nlohmann::ordered_json;

class DecodeError : public Error {
public:
    using Error::Error;
};

Json encode_twin(const DigitalTwin& twin);
DigitalTwin decode_twin(const Json& j);

/// One compact JSON document (no trailing newline).
std::string encode_twin_line(const DigitalTwin& twin);
DigitalTwin decode_twin_line(std::string_view line);

/// Reads one record per line; blank lines are skipped. Throws DecodeError
/// naming the line number on malformed input.
std::vector<DigitalTwin> read_twins_file(const std::string& path);

/// Builds the typed biomarker panel from the schema's string fields.
BiomarkerPanel panel_from_strings(const std::string& pdl1, const std::string& tmb,
                                  const std::string& mmr);

/// Splits a free-text "others" string ("HER2-positive, ER 80%") into markers.
std::vector<OtherMarker> split_other_markers(std::string_view s);

}  // namespace oncotwin
