#include "oncotwin/recommender.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "oncotwin/parsers.hpp"
#include "text.hpp"

namespace oncotwin {

namespace {

template <typename E, std::size_t N>
std::optional<E> enum_from(std::string_view s, const E (&all)[N]) {
    for (auto v : all) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

constexpr Condition kConditions[] = {Condition::positive, Condition::negative, Condition::elevated,
                                     Condition::not_determined, Condition::any};
constexpr ActionKind kKinds[] = {ActionKind::treatment, ActionKind::confirmatory_test,
                                 ActionKind::trial_referral, ActionKind::monitoring};
constexpr EvidenceLevel kLevels[] = {EvidenceLevel::phase_3,     EvidenceLevel::phase_2,
                                     EvidenceLevel::phase_1,     EvidenceLevel::case_report,
                                     EvidenceLevel::retrospective, EvidenceLevel::preclinical};

std::optional<std::string> opt_str(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw KbError(std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

std::string req_str(const Json& j, const char* key) {
    auto v = opt_str(j, key);
    if (!v || text::trim(*v).empty()) throw KbError(std::string("missing '") + key + "'");
    return *v;
}

template <typename E, std::size_t N>
E req_enum(const Json& j, const char* key, const E (&all)[N]) {
    auto s = req_str(j, key);
    auto v = enum_from(s, all);
    if (!v) throw KbError(std::string("unknown ") + key + " '" + s + "'");
    return *v;
}

KnowledgeEntry entry_from_json(const Json& j) {
    if (!j.is_object()) throw KbError("row must be an object");
    KnowledgeEntry e;
    e.biomarker = req_str(j, "biomarker");
    e.condition = req_enum(j, "condition", kConditions);
    e.action_kind = req_enum(j, "action_kind", kKinds);
    e.action = req_str(j, "action");
    e.evidence_level = req_enum(j, "evidence_level", kLevels);
    e.expected_response = opt_str(j, "expected_response").value_or("");
    e.region = opt_str(j, "region");
    e.trial_id = opt_str(j, "trial_id");
    if (auto it = j.find("recruiting"); it != j.end() && !it->is_null()) {
        if (!it->is_boolean()) throw KbError("'recruiting' must be a boolean");
        e.recruiting = it->get<bool>();
    }
    e.reference = req_str(j, "reference");
    e.note = opt_str(j, "note");
    if (e.action_kind == ActionKind::trial_referral && !e.trial_id) {
        throw KbError("trial_referral row needs a trial_id");
    }
    return e;
}

/// Months between two "YYYY-MM[...]" stamps, b - a.
std::optional<int> months_between(std::string_view a, std::string_view b) {
    auto ym = [](std::string_view s) -> std::optional<std::pair<int, int>> {
        if (s.size() < 7 || s[4] != '-') return std::nullopt;
        try {
            int y = std::stoi(std::string(s.substr(0, 4)));
            int m = std::stoi(std::string(s.substr(5, 2)));
            if (m < 1 || m > 12) return std::nullopt;
            return std::pair{y, m};
        } catch (const std::logic_error&) {
            return std::nullopt;
        }
    };
    auto x = ym(a), y = ym(b);
    if (!x || !y) return std::nullopt;
    return (y->first - x->first) * 12 + (y->second - x->second);
}

MarkerState state_from_detail(std::string_view detail) {
    auto d = text::lower(text::trim(detail));
    if (d.empty() || d.find("not determined") != std::string::npos || is_unknown_token(d)) {
        return MarkerState::not_determined;
    }
    if (d.find("negative") != std::string::npos || d.find("score 0") != std::string::npos ||
        d == "0" || d.rfind("0%", 0) == 0 || d.rfind("0 %", 0) == 0) {
        return MarkerState::negative;
    }
    if (d.find("elevated") != std::string::npos) return MarkerState::elevated;
    return MarkerState::positive;
}

bool fires(Condition c, MarkerState s) {
    switch (c) {
        case Condition::positive:
        case Condition::elevated:
            return s == MarkerState::positive || s == MarkerState::elevated;
        case Condition::negative: return s == MarkerState::negative;
        case Condition::not_determined: return s == MarkerState::not_determined;
        case Condition::any: return true;
    }
    return false;
}

/// Drug-like tokens of an action ("pembrolizumab", "letrozole").
std::vector<std::string> drug_tokens(std::string_view action) {
    static const std::vector<std::string> suffixes = {"mab", "nib", "zole", "taxel", "platin",
                                                      "tecan", "rubicin", "parib", "tansine"};
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= 6) {
            for (const auto& s : suffixes) {
                if (cur.size() > s.size() && cur.compare(cur.size() - s.size(), s.size(), s) == 0) {
                    out.push_back(cur);
                    break;
                }
            }
        }
        cur.clear();
    };
    for (char c : text::lower(action)) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            cur += c;
        } else {
            flush();
        }
    }
    flush();
    return out;
}

bool same_region(std::string_view a, std::string_view b) {
    return text::lower(text::squash(a)) == text::lower(text::squash(b));
}

std::string condition_phrase(const KnowledgeEntry& e, const MarkerReading& r) {
    if (r.state == MarkerState::not_determined) {
        return e.biomarker + " has not been determined for this patient";
    }
    std::string s = r.evidence;
    if (r.observed) s += " (observed " + *r.observed + ")";
    return s;
}

std::string age_band(const DigitalTwin& t) {
    if (!t.age || !t.age->low) return "age not recorded";
    int lo = *t.age->low / 10 * 10;
    return std::to_string(lo) + "-" + std::to_string(lo + 9) + " years";
}

std::string opt_num(const std::optional<double>& v, const char* unit) {
    return v ? text::format_number(*v) + unit : "n/a";
}

std::string range_text(const std::optional<Range>& r) {
    return r ? text::format_number(r->low) + "-" + text::format_number(r->high) : "n/a";
}

}  // namespace

std::string_view to_string(Condition v) {
    switch (v) {
        case Condition::positive: return "positive";
        case Condition::negative: return "negative";
        case Condition::elevated: return "elevated";
        case Condition::not_determined: return "not_determined";
        case Condition::any: return "any";
    }
    return "any";
}

std::string_view to_string(ActionKind v) {
    switch (v) {
        case ActionKind::treatment: return "treatment";
        case ActionKind::confirmatory_test: return "confirmatory_test";
        case ActionKind::trial_referral: return "trial_referral";
        case ActionKind::monitoring: return "monitoring";
    }
    return "treatment";
}

std::string_view to_string(EvidenceLevel v) {
    switch (v) {
        case EvidenceLevel::phase_3: return "phase_3";
        case EvidenceLevel::phase_2: return "phase_2";
        case EvidenceLevel::phase_1: return "phase_1";
        case EvidenceLevel::case_report: return "case_report";
        case EvidenceLevel::retrospective: return "retrospective";
        case EvidenceLevel::preclinical: return "preclinical";
    }
    return "preclinical";
}

std::string_view to_string(MarkerState s) {
    switch (s) {
        case MarkerState::positive: return "positive";
        case MarkerState::negative: return "negative";
        case MarkerState::elevated: return "elevated";
        case MarkerState::not_determined: return "not_determined";
    }
    return "not_determined";
}

KnowledgeBase parse_kb(std::string_view text, const std::string& origin) {
    KnowledgeBase kb;
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, int> per_marker;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        KnowledgeEntry e;
        try {
            e = entry_from_json(Json::parse(line));
        } catch (const Json::exception& ex) {
            throw KbError(origin + ":" + std::to_string(n) + ": " + ex.what());
        } catch (const KbError& ex) {
            throw KbError(origin + ":" + std::to_string(n) + ": " + ex.what());
        }
        auto key = normalize_marker(e.biomarker);
        if (!seen.insert({key, text::lower(e.action)}).second) {
            throw KbError(origin + ":" + std::to_string(n) + ": duplicate entry for " + e.biomarker + " / " +
                          e.action);
        }
        e.id = key + "-" + std::to_string(++per_marker[key]);
        kb.entries.push_back(std::move(e));
    }
    if (kb.entries.empty()) kb.warnings.push_back(origin + ": knowledge base is empty");
    return kb;
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read knowledge base " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_kb(ss.str(), path.string());
}

Json kb_entry_to_json(const KnowledgeEntry& e) {
    auto opt = [](const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); };
    return Json{{"id", e.id},
                {"biomarker", e.biomarker},
                {"condition", std::string(to_string(e.condition))},
                {"action_kind", std::string(to_string(e.action_kind))},
                {"action", e.action},
                {"evidence_level", std::string(to_string(e.evidence_level))},
                {"expected_response", e.expected_response},
                {"region", opt(e.region)},
                {"trial_id", opt(e.trial_id)},
                {"recruiting", e.recruiting ? Json(*e.recruiting) : Json(nullptr)},
                {"reference", e.reference},
                {"note", opt(e.note)}};
}

std::string normalize_marker(std::string_view name) {
    std::string s(name);
    for (std::string_view greek : {"\xCE\xB1", "\xCE\x91"}) {  // α, Α
        for (auto at = s.find(greek); at != std::string::npos; at = s.find(greek)) {
            s.replace(at, greek.size(), "alpha");
        }
    }
    std::string out;
    for (char c : text::lower(s)) {
        if (std::isalnum(static_cast<unsigned char>(c))) out += c;
    }
    static const std::map<std::string, std::string> synonyms = {
        {"estrogenreceptor", "er"},      {"oestrogenreceptor", "er"},
        {"progesteronereceptor", "pr"},  {"her2neu", "her2"},
        {"erbb2", "her2"},               {"folatereceptoralpha", "fralpha"},
        {"pdl1", "pdl1"},                {"ca125", "ca125"},
    };
    if (auto it = synonyms.find(out); it != synonyms.end()) return it->second;
    return out;
}

MarkerReading marker_state(const DigitalTwin& twin, std::string_view biomarker) {
    const auto key = normalize_marker(biomarker);
    const auto& b = twin.biomarkers;
    MarkerReading r;
    if (key == "pdl1") {
        if (b.pdl1) {
            const auto& p = *b.pdl1;
            bool pos = (p.cps && *p.cps >= 1) || (p.tps && *p.tps > 0) ||
                       (p.qualitative && *p.qualitative == Qualitative::positive);
            r.state = pos ? MarkerState::positive : MarkerState::negative;
            r.evidence = "PD-L1: " + (b.pdl1_raw.empty() ? render_pdl1(p) : b.pdl1_raw);
        }
        return r;
    }
    if (key == "tmb") {
        if (b.tmb) {
            r.state = b.tmb_class == TmbClass::high ? MarkerState::positive : MarkerState::negative;
            r.evidence = "TMB: " + render_tmb(*b.tmb) + " mut/Mb";
        }
        return r;
    }
    if (key == "mmr" || key == "dmmr" || key == "msi" || key == "msih") {
        if (b.mmr) {
            r.state = *b.mmr == MmrStatus::dMMR ? MarkerState::positive : MarkerState::negative;
            r.evidence = "MMR: " + std::string(to_string(*b.mmr));
        }
        return r;
    }
    for (const auto& m : b.others) {
        if (normalize_marker(m.name) != key) continue;
        auto s = state_from_detail(m.detail);
        if (s == MarkerState::not_determined) continue;
        r.state = s;
        r.evidence = m.name + ": " + m.detail;
        r.observed = m.observed;
        if (s != MarkerState::negative) break;  // any positive reading wins
    }
    return r;
}

std::vector<Recommendation> recommend(const DigitalTwin& twin, const KnowledgeBase& kb,
                                      const RecommendContext& ctx) {
    std::vector<std::string> exposures;
    for (const auto& e : twin.previous_treatments) exposures.push_back(text::lower(e.description));
    if (!twin.study_treatment.empty()) exposures.push_back(text::lower(twin.study_treatment));

    std::vector<Recommendation> out;
    for (const auto& e : kb.entries) {
        auto reading = marker_state(twin, e.biomarker);
        if (!fires(e.condition, reading.state)) continue;
        Recommendation rec{e, "", {}};
        if (e.trial_id) {
            bool closed = e.recruiting == false;
            if (closed && !ctx.allow_off_label) continue;
            if (!closed && e.region && ctx.region && !same_region(*e.region, *ctx.region)) continue;
            if (closed) {
                rec.gating_notes.push_back("trial " + *e.trial_id +
                                           " is no longer recruiting; consider the regimen off-label");
            }
            if (!ctx.region && (!closed || e.action_kind == ActionKind::trial_referral)) {
                rec.gating_notes.push_back("location unverified" +
                                           (e.region ? ": trial site is in " + *e.region : std::string()));
            }
        }
        if (reading.observed && ctx.as_of) {
            auto age = months_between(*reading.observed, *ctx.as_of);
            if (age && *age > ctx.stale_after_months) {
                rec.gating_notes.push_back(e.biomarker + " finding dates from " + *reading.observed +
                                           "; confirm with a new biopsy before acting");
            }
        }
        for (const auto& drug : drug_tokens(e.action)) {
            bool seen = std::any_of(exposures.begin(), exposures.end(),
                                    [&](const std::string& x) { return x.find(drug) != std::string::npos; });
            if (seen) rec.gating_notes.push_back("patient has already received " + drug);
        }
        rec.rationale = condition_phrase(e, reading) + ". " + e.action + " (" +
                        std::string(to_string(e.evidence_level)) + ", " + e.reference + ")";
        if (!e.expected_response.empty()) rec.rationale += ": " + e.expected_response;
        if (e.note) rec.rationale += " " + *e.note;
        out.push_back(std::move(rec));
    }
    std::stable_sort(out.begin(), out.end(), [](const Recommendation& a, const Recommendation& b) {
        if (a.entry.evidence_level != b.entry.evidence_level) {
            return a.entry.evidence_level < b.entry.evidence_level;
        }
        return a.entry.action_kind < b.entry.action_kind;
    });
    return out;
}

Json recommendation_to_json(const Recommendation& r) {
    return Json{{"entry", kb_entry_to_json(r.entry)},
                {"rationale", r.rationale},
                {"gating_notes", r.gating_notes},
                {"rank_key", Json::array({std::string(to_string(r.entry.evidence_level)),
                                          std::string(to_string(r.entry.action_kind))})}};
}

Recommendation analog_recommendation(const DigitalTwin& twin, const std::string& therapy,
                                     const CohortSummary& analogs) {
    KnowledgeEntry e;
    e.id = "analog-cohort";
    e.biomarker = "PD-L1";
    e.condition = Condition::positive;
    e.action_kind = ActionKind::treatment;
    e.action = therapy;
    e.evidence_level = EvidenceLevel::retrospective;
    e.expected_response = "analog cohort of " + std::to_string(analogs.n) + ": median PFS " +
                          opt_num(analogs.pfs.median, " months") + ", median OS " +
                          opt_num(analogs.os.median, " months");
    e.reference = "institutional analog cohort (n=" + std::to_string(analogs.n) + ")";
    auto reading = marker_state(twin, "PD-L1");
    Recommendation r{e, condition_phrase(e, reading) + ". " + therapy + " supported by analog outcomes", {}};
    return r;
}

std::string coverage_letter(const DigitalTwin& twin, const Recommendation& rec, const std::string& date,
                            const std::optional<CohortSummary>& analogs) {
    const auto& e = rec.entry;
    const auto& b = twin.biomarkers;
    std::ostringstream o;
    o << "---\n"
      << "twin: " << twin.id << "\n"
      << "date: " << date << "\n"
      << "recommendation: " << e.id << "\n"
      << "---\n\n"
      << "Request for cost coverage: " << e.action << "\n\n"
      << "Patient\n"
      << "  " << age_band(twin) << ", " << twin.gender.value_or("gender not recorded") << "\n"
      << "  Diagnosis: " << (twin.diagnosis.empty() ? "not recorded" : twin.diagnosis) << "\n";
    if (twin.treatment_line) o << "  Current line of therapy: " << *twin.treatment_line << "\n";
    if (!twin.previous_treatments.empty()) {
        o << "  Previous treatments:\n";
        for (const auto& t : twin.previous_treatments) o << "    - " << t.description << "\n";
    }
    o << "\nBiomarker evidence\n";
    if (b.pdl1) o << "  PD-L1: " << (b.pdl1_raw.empty() ? render_pdl1(*b.pdl1) : b.pdl1_raw) << "\n";
    if (b.tmb) o << "  TMB: " << render_tmb(*b.tmb) << " mut/Mb\n";
    if (b.mmr) o << "  MMR: " << (b.mmr_raw.empty() ? std::string(to_string(*b.mmr)) : b.mmr_raw) << "\n";
    for (const auto& m : b.others) {
        o << "  " << m.name << ": " << m.detail;
        if (m.observed) o << " (observed " << *m.observed << ")";
        o << "\n";
    }
    o << "\nRationale\n  " << rec.rationale << "\n";
    if (!rec.gating_notes.empty()) {
        o << "\nConditions\n";
        for (const auto& n : rec.gating_notes) o << "  - " << n << "\n";
    }
    o << "\nExpected response\n  " << (e.expected_response.empty() ? "not stated" : e.expected_response)
      << "\n\nReference\n  " << e.reference << "\n";
    if (analogs) {
        const auto& s = *analogs;
        o << "\nOutcomes in comparable patients (n=" << s.n << ")\n"
          << "  Median PFS: " << opt_num(s.pfs.median, " months") << " (range " << range_text(s.pfs.range)
          << ", " << s.pfs.n_censored << " censored)\n"
          << "  Median OS: " << opt_num(s.os.median, " months") << " (range " << range_text(s.os.range)
          << ", " << s.os.n_censored << " censored)\n";
        if (!s.best_response.empty()) {
            o << "  Best response:";
            for (const auto& [k, v] : s.best_response) o << " " << k << " " << v << ";";
            o << "\n";
        }
    }
    return o.str();
}

}  // namespace oncotwin
