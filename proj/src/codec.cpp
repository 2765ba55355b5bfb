#include "oncotwin/codec.hpp"

#include <fstream>

#include "oncotwin/parsers.hpp"
#include "text.hpp"

namespace oncotwin {

namespace {

Json nullable(const std::optional<std::string>& s) {
    return s ? Json(*s) : Json(nullptr);
}

Json encode_response(const std::optional<ResponseRecord>& r) {
    if (!r) return nullptr;
    Json j = Json::object();
    j["treatment response"] = r->raw.empty() ? render_response(*r) : r->raw;
    j["adverse effects"] = nullable(r->adverse_effects);
    return j;
}

Json encode_duration(const std::optional<CensoredDuration>& d) {
    if (!d) return nullptr;
    return d->raw.empty() ? render_duration(*d) : d->raw;
}

std::optional<std::string> opt_string(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw DecodeError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::optional<int> opt_int(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (it->is_number_integer()) return it->get<int>();
    if (it->is_string()) {
        auto s = it->get<std::string>();
        if (is_unknown_token(s)) return std::nullopt;
        try {
            std::size_t used = 0;
            int v = std::stoi(s, &used);
            if (used == text::trim(s).size()) return v;
        } catch (const std::exception&) {
        }
    }
    throw DecodeError(std::string("field '") + key + "' must be an integer");
}

ResponseRecord decode_response_string(const std::string& raw) {
    auto parsed = parse_response(raw);
    ResponseRecord r = parsed.value.value_or(ResponseRecord{});
    r.raw = raw;
    return r;
}

std::optional<ResponseRecord> decode_response(const Json& j) {
    if (j.is_null()) return std::nullopt;
    if (j.is_string()) return decode_response_string(j.get<std::string>());
    if (!j.is_object()) throw DecodeError("'study treatment response' must be an object");
    auto raw = opt_string(j, "treatment response").value_or("");
    ResponseRecord r = decode_response_string(raw);
    r.adverse_effects = opt_string(j, "adverse effects");
    return r;
}

std::optional<CensoredDuration> decode_duration(const Json& j, const char* key) {
    auto raw = opt_string(j, key);
    if (!raw) return std::nullopt;
    auto parsed = parse_duration(*raw);
    CensoredDuration d;
    if (parsed.value) d = *parsed.value;
    d.raw = *raw;
    // Censoring marker holds even when the grammar gave up.
    if (!parsed.value &&
        (raw->find('>') != std::string::npos || text::contains_ci(*raw, "(ongoing)"))) {
        d.censored = true;
    }
    return d;
}

Json encode_others(const std::vector<OtherMarker>& others) {
    Json arr = Json::array();
    for (const auto& o : others) {
        Json m = Json::object();
        m["name"] = o.name;
        m["detail"] = o.detail;
        if (o.observed) m["observed"] = *o.observed;
        arr.push_back(std::move(m));
    }
    return arr;
}

std::vector<OtherMarker> decode_others(const Json& j) {
    if (j.is_null()) return {};
    if (j.is_string()) return split_other_markers(j.get<std::string>());
    if (!j.is_array()) throw DecodeError("'others' must be a list or a string");
    std::vector<OtherMarker> out;
    for (const auto& m : j) {
        if (m.is_string()) {
            auto split = split_other_markers(m.get<std::string>());
            out.insert(out.end(), split.begin(), split.end());
            continue;
        }
        if (!m.is_object()) throw DecodeError("'others' entries must be objects");
        OtherMarker o;
        o.name = opt_string(m, "name").value_or("");
        o.detail = opt_string(m, "detail").value_or("");
        o.observed = opt_string(m, "observed");
        out.push_back(std::move(o));
    }
    return out;
}

}  // namespace

std::vector<OtherMarker> split_other_markers(std::string_view s) {
    std::vector<OtherMarker> out;
    if (is_unknown_token(s) || text::lower(text::trim(s)) == "none") return out;
    for (const auto& piece : text::split_top_level(s, ",;\n")) {
        OtherMarker m;
        if (auto colon = piece.find(':'); colon != std::string::npos) {
            m.name = std::string(text::trim(std::string_view(piece).substr(0, colon)));
            m.detail = std::string(text::trim(std::string_view(piece).substr(colon + 1)));
        } else {
            // "HER2-positive" / "ER positive" / "POLE-mutated"
            auto cut = piece.find_first_of(" ");
            auto dash = piece.find('-');
            static constexpr std::string_view kStates[] = {"positive", "negative", "mutated",
                                                           "amplified", "low", "high"};
            if (dash != std::string::npos && dash < cut) {
                auto suffix = text::lower(std::string_view(piece).substr(dash + 1));
                for (auto st : kStates) {
                    if (suffix.rfind(st, 0) == 0) {
                        cut = dash;
                        break;
                    }
                }
            }
            if (cut == std::string::npos) {
                m.name = piece;
            } else {
                m.name = std::string(text::trim(std::string_view(piece).substr(0, cut)));
                m.detail = std::string(text::trim(std::string_view(piece).substr(cut + 1)));
            }
        }
        if (!m.name.empty()) out.push_back(std::move(m));
    }
    return out;
}

BiomarkerPanel panel_from_strings(const std::string& pdl1, const std::string& tmb,
                                  const std::string& mmr) {
    BiomarkerPanel b;
    b.pdl1_raw = pdl1;
    b.tmb_raw = tmb;
    b.mmr_raw = mmr;
    if (!pdl1.empty()) {
        auto p = parse_pdl1(pdl1);
        if (p.value && *p.value) b.pdl1 = **p.value;
    }
    if (!tmb.empty()) {
        auto p = parse_tmb(tmb);
        if (p.value && *p.value) b.tmb = **p.value;
    }
    if (!mmr.empty()) {
        auto p = parse_mmr(mmr);
        if (p.value) {
            b.mmr = p.value->mmr;
            b.msi_fraction = p.value->msi_fraction;
        }
    }
    return b;
}

Json encode_twin(const DigitalTwin& t) {
    Json j = Json::object();
    j["id"] = t.id;
    j["source"] = std::string(to_string(t.source));
    j["source_ref"] = t.source_ref;
    j["n"] = t.sample_size ? Json(*t.sample_size) : Json(nullptr);
    if (t.age) {
        j["age"] = t.age->raw.empty() ? render_age(*t.age) : t.age->raw;
    } else {
        j["age"] = nullptr;
    }
    j["gender"] = nullable(t.gender);
    j["race"] = nullable(t.race);
    j["diagnosis"] = t.diagnosis;

    const auto& b = t.biomarkers;
    if (b.empty()) {
        j["biomarkers"] = nullptr;
    } else {
        Json bj = Json::object();
        if (!b.pdl1_raw.empty()) bj["pd-l1"] = b.pdl1_raw;
        else if (b.pdl1) bj["pd-l1"] = render_pdl1(*b.pdl1);
        else bj["pd-l1"] = nullptr;
        if (!b.tmb_raw.empty()) bj["tmb/mb"] = b.tmb_raw;
        else if (b.tmb) bj["tmb/mb"] = render_tmb(*b.tmb);
        else bj["tmb/mb"] = nullptr;
        bj["tmb class"] = b.tmb_class ? Json(std::string(to_string(*b.tmb_class))) : Json(nullptr);
        if (!b.mmr_raw.empty()) bj["msi/mss"] = b.mmr_raw;
        else if (b.mmr) bj["msi/mss"] = render_mmr({b.mmr, b.msi_fraction});
        else bj["msi/mss"] = nullptr;
        bj["others"] = encode_others(b.others);
        j["biomarkers"] = std::move(bj);
    }

    if (t.previous_treatments.empty()) {
        j["previous treatments"] = nullptr;
    } else {
        Json arr = Json::array();
        for (const auto& ev : t.previous_treatments) {
            Json e = Json::object();
            e["line"] = ev.line ? Json(*ev.line) : Json(nullptr);
            e["description"] = ev.description;
            e["response"] = ev.response ? Json(ev.response->raw.empty()
                                                   ? render_response(*ev.response)
                                                   : ev.response->raw)
                                        : Json(nullptr);
            arr.push_back(std::move(e));
        }
        j["previous treatments"] = std::move(arr);
    }
    j["study treatment"] = t.study_treatment.empty() ? Json(nullptr) : Json(t.study_treatment);
    j["treatment line"] = t.treatment_line ? Json(*t.treatment_line) : Json(nullptr);
    j["study treatment response"] = encode_response(t.study_response);
    j["PFS"] = encode_duration(t.pfs);
    j["OS"] = encode_duration(t.os);
    j["main recommendation"] = nullable(t.main_recommendation);
    Json sim = Json::array();
    for (auto s : t.similarity) sim.push_back(std::string(to_string(s)));
    j["similarity"] = std::move(sim);
    j["adjudication"] = std::string(to_string(t.adjudication));
    return j;
}

DigitalTwin decode_twin(const Json& j) {
    if (!j.is_object()) throw DecodeError("record must be a JSON object");
    DigitalTwin t;
    t.id = opt_string(j, "id").value_or("");
    if (auto s = opt_string(j, "source")) {
        auto src = source_from_string(*s);
        if (!src) throw DecodeError("unknown source '" + *s + "'");
        t.source = *src;
    }
    t.source_ref = opt_string(j, "source_ref").value_or("");
    t.sample_size = opt_int(j, "n");
    if (auto age = opt_string(j, "age")) {
        auto parsed = parse_age(*age);
        AgeValue a = parsed.value.value_or(AgeValue{});
        a.raw = *age;
        t.age = a;
    }
    t.gender = opt_string(j, "gender");
    t.race = opt_string(j, "race");
    t.diagnosis = opt_string(j, "diagnosis").value_or("");

    if (auto it = j.find("biomarkers"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw DecodeError("'biomarkers' must be an object");
        const auto& bj = *it;
        t.biomarkers = panel_from_strings(opt_string(bj, "pd-l1").value_or(""),
                                          opt_string(bj, "tmb/mb").value_or(""),
                                          opt_string(bj, "msi/mss").value_or(""));
        if (auto cls = opt_string(bj, "tmb class")) {
            auto parsed = tmb_class_from_string(*cls);
            if (!parsed) throw DecodeError("unknown tmb class '" + *cls + "'");
            t.biomarkers.tmb_class = parsed;
        }
        if (auto o = bj.find("others"); o != bj.end()) t.biomarkers.others = decode_others(*o);
    }

    if (auto it = j.find("previous treatments"); it != j.end() && !it->is_null()) {
        if (it->is_string()) {
            for (const auto& piece : text::split_top_level(it->get<std::string>(), ";\n")) {
                TreatmentEvent ev;
                ev.description = piece;
                t.previous_treatments.push_back(std::move(ev));
            }
        } else if (it->is_array()) {
            for (const auto& e : *it) {
                TreatmentEvent ev;
                if (e.is_string()) {
                    ev.description = e.get<std::string>();
                } else if (e.is_object()) {
                    ev.line = opt_int(e, "line");
                    ev.description = opt_string(e, "description").value_or("");
                    if (auto r = opt_string(e, "response")) ev.response = decode_response_string(*r);
                } else {
                    throw DecodeError("'previous treatments' entries must be objects");
                }
                t.previous_treatments.push_back(std::move(ev));
            }
        } else {
            throw DecodeError("'previous treatments' must be a list or a string");
        }
    }
    t.study_treatment = opt_string(j, "study treatment").value_or("");
    t.treatment_line = opt_int(j, "treatment line");
    if (auto it = j.find("study treatment response"); it != j.end()) {
        t.study_response = decode_response(*it);
    }
    t.pfs = decode_duration(j, "PFS");
    t.os = decode_duration(j, "OS");
    t.main_recommendation = opt_string(j, "main recommendation");
    if (auto it = j.find("similarity"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw DecodeError("'similarity' must be a list");
        for (const auto& s : *it) {
            if (!s.is_string()) throw DecodeError("'similarity' entries must be strings");
            auto v = similarity_from_string(s.get<std::string>());
            if (!v) throw DecodeError("unknown similarity criterion '" + s.get<std::string>() + "'");
            t.similarity.push_back(*v);
        }
    }
    if (auto a = opt_string(j, "adjudication")) {
        auto v = adjudication_from_string(*a);
        if (!v) throw DecodeError("unknown adjudication state '" + *a + "'");
        t.adjudication = *v;
    }
    return t;
}

std::string encode_twin_line(const DigitalTwin& twin) { return encode_twin(twin).dump(); }

DigitalTwin decode_twin_line(std::string_view line) {
    Json j;
    try {
        j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DecodeError(std::string("malformed record: ") + e.what());
    }
    return decode_twin(j);
}

}  // namespace oncotwin

namespace oncotwin {

std::vector<DigitalTwin> read_twins_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<DigitalTwin> out;
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(decode_twin_line(line));
        } catch (const DecodeError& e) {
            throw DecodeError(path + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace oncotwin
