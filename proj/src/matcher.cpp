#include "oncotwin/matcher.hpp"

#include <algorithm>
#include <cmath>

#include "oncotwin/parsers.hpp"
#include "oncotwin/validate.hpp"
#include "text.hpp"

namespace oncotwin {

namespace {

RuleOutcome cps_rule(const DigitalTwin& t, const EligibilitySpec& spec, std::string& why) {
    const auto& p = t.biomarkers.pdl1;
    if (!p || !p->cps) {
        why = p && p->qualitative ? "PD-L1 reported only as " + std::string(to_string(*p->qualitative))
                                  : "no PD-L1 CPS";
        return RuleOutcome::unknown;
    }
    if (*p->cps >= spec.min_cps) return RuleOutcome::pass;
    why = "CPS " + text::format_number(*p->cps) + " below " + text::format_number(spec.min_cps);
    return RuleOutcome::fail;
}

RuleOutcome tmb_rule(const DigitalTwin& t, const EligibilitySpec& spec, std::string& why) {
    const auto& tmb = t.biomarkers.tmb;
    if (!tmb) {
        why = "no TMB value";
        return RuleOutcome::unknown;
    }
    if (*tmb < spec.max_tmb_exclusive) return RuleOutcome::pass;
    why = "TMB " + text::format_number(*tmb) + " not below " + text::format_number(spec.max_tmb_exclusive);
    return RuleOutcome::fail;
}

RuleOutcome mmr_rule(const DigitalTwin& t, const EligibilitySpec& spec, std::string& why) {
    const auto& mmr = t.biomarkers.mmr;
    if (!mmr) {
        why = "no MMR status";
        return RuleOutcome::unknown;
    }
    if (*mmr == spec.required_mmr) return RuleOutcome::pass;
    why = std::string(to_string(*mmr)) + " but " + std::string(to_string(spec.required_mmr)) +
          " required";
    return RuleOutcome::fail;
}

RuleOutcome similarity_rule(const DigitalTwin& t, const EligibilitySpec& spec, std::string& why) {
    if (t.similarity.empty()) {
        why = "no similarity criteria recorded";
        return RuleOutcome::unknown;
    }
    for (auto s : t.similarity) {
        if (spec.similarity.count(s)) return RuleOutcome::pass;
    }
    why = "no enabled similarity criterion met";
    return RuleOutcome::fail;
}

RuleOutcome ici_rule(const DigitalTwin& t, const EligibilitySpec&, std::string& why) {
    if (t.study_treatment.empty()) {
        why = "no study treatment";
        return RuleOutcome::unknown;
    }
    if (is_ici_treatment(t.study_treatment)) return RuleOutcome::pass;
    why = "study treatment is not a checkpoint inhibitor";
    return RuleOutcome::fail;
}

using Rule = RuleOutcome (*)(const DigitalTwin&, const EligibilitySpec&, std::string&);

struct RuleDef {
    std::string_view name;
    Rule fn;
    bool (*enabled)(const EligibilitySpec&);
};

constexpr bool always(const EligibilitySpec&) { return true; }

const std::vector<RuleDef>& rules() {
    static const std::vector<RuleDef> defs = {
        {kRuleCps, cps_rule, always},
        {kRuleTmb, tmb_rule, always},
        {kRuleMmr, mmr_rule, always},
        {kRuleSimilarity, similarity_rule, [](const EligibilitySpec& s) { return s.similarity_filter; }},
        {kRuleIci, ici_rule, [](const EligibilitySpec& s) { return s.require_ici_treatment; }},
    };
    return defs;
}

bool passes(const MatchResult& r, std::initializer_list<std::string_view> names) {
    for (auto n : names) {
        auto it = r.per_rule.find(std::string(n));
        if (it != r.per_rule.end() && it->second != RuleOutcome::pass) return false;
    }
    return true;
}

}  // namespace

void check_spec(const EligibilitySpec& spec) {
    if (!(spec.min_cps > 0) || !std::isfinite(spec.min_cps)) {
        throw DomainError("min_cps must be positive");
    }
    if (!(spec.max_tmb_exclusive > 0) || !std::isfinite(spec.max_tmb_exclusive)) {
        throw DomainError("max_tmb_exclusive must be positive");
    }
    if (spec.similarity_filter && spec.similarity.empty()) {
        throw DomainError("similarity filtering is on but no criterion is enabled");
    }
}

EligibilitySpec spec_from_json(const Json& j) {
    if (!j.is_object()) throw DomainError("eligibility spec must be an object");
    EligibilitySpec s;
    for (const auto& [k, v] : j.items()) {
        try {
            if (k == "min_cps") {
                s.min_cps = v.get<double>();
            } else if (k == "max_tmb_exclusive") {
                s.max_tmb_exclusive = v.get<double>();
            } else if (k == "required_mmr") {
                auto m = mmr_from_string(v.get<std::string>());
                if (!m) throw DomainError("unknown MMR status '" + v.get<std::string>() + "'");
                s.required_mmr = *m;
            } else if (k == "similarity_filter") {
                s.similarity_filter = v.get<bool>();
            } else if (k == "similarity") {
                s.similarity.clear();
                for (const auto& e : v) {
                    auto c = similarity_from_string(e.get<std::string>());
                    if (!c) throw DomainError("unknown similarity criterion '" + e.get<std::string>() + "'");
                    s.similarity.insert(*c);
                }
            } else if (k == "require_ici_treatment") {
                s.require_ici_treatment = v.get<bool>();
            } else {
                throw DomainError("unknown eligibility key '" + k + "'");
            }
        } catch (const Json::exception&) {
            throw DomainError("eligibility key '" + k + "' has the wrong type");
        }
    }
    check_spec(s);
    return s;
}

Json spec_to_json(const EligibilitySpec& spec) {
    Json sim = Json::array();
    for (auto s : spec.similarity) sim.push_back(std::string(to_string(s)));
    return Json{{"min_cps", spec.min_cps},
                {"max_tmb_exclusive", spec.max_tmb_exclusive},
                {"required_mmr", std::string(to_string(spec.required_mmr))},
                {"similarity_filter", spec.similarity_filter},
                {"similarity", sim},
                {"require_ici_treatment", spec.require_ici_treatment}};
}

std::string_view to_string(RuleOutcome r) {
    switch (r) {
        case RuleOutcome::pass: return "pass";
        case RuleOutcome::fail: return "fail";
        case RuleOutcome::unknown: return "unknown";
    }
    return "unknown";
}

MatchResult evaluate_eligibility(const DigitalTwin& twin, const EligibilitySpec& spec) {
    MatchResult r;
    r.twin_id = twin.id;
    r.passed = true;
    for (const auto& def : rules()) {
        if (!def.enabled(spec)) continue;
        std::string why;
        auto outcome = def.fn(twin, spec, why);
        r.per_rule[std::string(def.name)] = outcome;
        if (outcome != RuleOutcome::pass) {
            r.passed = false;
            r.reasons.push_back(std::string(def.name) + ": " +
                                (outcome == RuleOutcome::unknown ? "unknown, " : "") + why);
        }
    }
    return r;
}

Json match_result_to_json(const MatchResult& r) {
    Json rules = Json::object();
    for (const auto& [k, v] : r.per_rule) rules[k] = std::string(to_string(v));
    return Json{{"id", r.twin_id}, {"passed", r.passed}, {"per_rule", rules}, {"reasons", r.reasons}};
}

std::vector<FunnelStage> cohort_funnel(const std::vector<DigitalTwin>& twins,
                                       const EligibilitySpec& spec) {
    check_spec(spec);
    std::vector<FunnelStage> stages = {
        {"all", {}}, {"cps", {}}, {"tmb+mmr", {}}, {"similarity", {}}, {"ici", {}}};
    for (const auto& t : twins) {
        auto r = evaluate_eligibility(t, spec);
        stages[0].ids.push_back(t.id);
        if (!passes(r, {kRuleCps})) continue;
        stages[1].ids.push_back(t.id);
        if (!passes(r, {kRuleTmb, kRuleMmr})) continue;
        stages[2].ids.push_back(t.id);
        if (!passes(r, {kRuleSimilarity})) continue;
        stages[3].ids.push_back(t.id);
        if (!passes(r, {kRuleIci})) continue;
        stages[4].ids.push_back(t.id);
    }
    return stages;
}

Json funnel_to_json(const std::vector<FunnelStage>& stages) {
    Json out = Json::array();
    for (const auto& s : stages) {
        out.push_back(Json{{"stage", s.name}, {"count", s.ids.size()}, {"ids", s.ids}});
    }
    return out;
}

WhatIfOverrides overrides_from_json(const Json& j) {
    if (!j.is_object()) throw DomainError("overrides must be an object");
    WhatIfOverrides o;
    auto str = [](const Json& v, const std::string& k) {
        if (!v.is_string()) throw DomainError("override '" + k + "' must be a string");
        return v.get<std::string>();
    };
    auto num = [](const Json& v, const std::string& k) {
        if (!v.is_number()) throw DomainError("override '" + k + "' must be a number");
        return v.get<double>();
    };
    for (const auto& [k, v] : j.items()) {
        if (k == "cps") {
            o.cps = num(v, k);
        } else if (k == "tmb") {
            o.tmb = num(v, k);
        } else if (k == "mmr") {
            auto m = mmr_from_string(str(v, k));
            if (!m) throw DomainError("unknown MMR status '" + v.get<std::string>() + "'");
            o.mmr = *m;
        } else if (k == "pd-l1") {
            o.pdl1 = str(v, k);
        } else if (k == "tmb/mb") {
            o.tmb_text = str(v, k);
        } else if (k == "msi/mss") {
            o.mmr_text = str(v, k);
        } else if (k == "study treatment") {
            o.study_treatment = str(v, k);
        } else if (k == "treatment line") {
            if (!v.is_number_integer()) throw DomainError("override 'treatment line' must be an integer");
            o.treatment_line = v.get<int>();
        } else if (k == "others" || k == "previous treatments") {
            // Reuse the record decoder so overrides accept the stored shapes.
            Json shell = {{"id", "override"}};
            if (k == "others") {
                shell["biomarkers"] = {{"others", v}};
                o.others = decode_twin(shell).biomarkers.others;
            } else {
                shell["previous treatments"] = v;
                o.previous_treatments = decode_twin(shell).previous_treatments;
            }
        } else {
            throw DomainError("field '" + k + "' cannot be overridden");
        }
    }
    return o;
}

DigitalTwin apply_overrides(DigitalTwin t, const WhatIfOverrides& o) {
    auto& b = t.biomarkers;
    if (o.pdl1) {
        auto p = parse_pdl1(*o.pdl1);
        b.pdl1 = p.value.value_or(std::nullopt);
        b.pdl1_raw = *o.pdl1;
    }
    if (o.cps) {
        if (!b.pdl1) b.pdl1 = PdL1Score{};
        b.pdl1->cps = *o.cps;
        b.pdl1_raw.clear();
    }
    if (o.tmb_text) {
        b.tmb = parse_tmb(*o.tmb_text).value.value_or(std::nullopt);
        b.tmb_raw = *o.tmb_text;
    }
    if (o.tmb) {
        b.tmb = *o.tmb;
        b.tmb_raw.clear();
    }
    if (o.tmb_text || o.tmb) {
        b.tmb_class = b.tmb ? std::optional(tmb_class(*b.tmb)) : std::nullopt;
    }
    if (o.mmr_text) {
        auto m = parse_mmr(*o.mmr_text).value.value_or(MmrReading{});
        b.mmr = m.mmr;
        b.msi_fraction = m.msi_fraction;
        b.mmr_raw = *o.mmr_text;
    }
    if (o.mmr) {
        b.mmr = *o.mmr;
        b.mmr_raw.clear();
    }
    if (o.others) b.others = *o.others;
    if (o.study_treatment) t.study_treatment = *o.study_treatment;
    if (o.treatment_line) t.treatment_line = *o.treatment_line;
    if (o.previous_treatments) t.previous_treatments = *o.previous_treatments;
    return t;
}

EligibilitySpec subject_spec(EligibilitySpec spec) {
    spec.require_ici_treatment = false;
    return spec;
}

WhatIfResult whatif(const DigitalTwin& twin, const WhatIfOverrides& overrides,
                    const EligibilitySpec& spec, const StoreSnapshot& snapshot,
                    const EligibilitySpec& subject) {
    check_spec(spec);
    check_spec(subject);
    WhatIfResult out;
    out.modified = apply_overrides(twin, overrides);
    out.subject = evaluate_eligibility(out.modified, subject);
    if (!out.subject.passed) {
        std::string why = "subject is not eligible";
        for (const auto& r : out.subject.reasons) why += "; " + r;
        out.reason = why;
        out.summary = summarize(std::vector<DigitalTwin>{});
        return out;
    }
    std::vector<DigitalTwin> analogs;
    for (auto& t : snapshot.all()) {
        if (t.id == twin.id) continue;
        if (evaluate_eligibility(t, spec).passed) analogs.push_back(std::move(t));
    }
    for (const auto& a : analogs) out.analog_ids.push_back(a.id);
    out.summary = summarize(analogs);
    return out;
}

Json whatif_to_json(const WhatIfResult& r) {
    return Json{{"twin", encode_twin(r.modified)},
                {"subject", match_result_to_json(r.subject)},
                {"analogs", r.analog_ids},
                {"summary", summary_to_json(r.summary)},
                {"reason", r.reason ? Json(*r.reason) : Json(nullptr)}};
}

}  // namespace oncotwin
