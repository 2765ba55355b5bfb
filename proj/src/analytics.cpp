#include "oncotwin/analytics.hpp"

#include "oncotwin/parsers.hpp"
#include "text.hpp"

namespace oncotwin {

namespace {

void set_stats(std::vector<double>& xs, std::optional<double>& med, std::optional<Range>& rng) {
    if (xs.empty()) return;
    med = median(xs);
    rng = range_of(xs);
}

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json range_json(const std::optional<Range>& r) {
    return r ? Json::array({r->low, r->high}) : Json(nullptr);
}

Json censored_json(const CensoredSummary& c) {
    return Json{{"median", opt_json(c.median)},
                {"range", range_json(c.range)},
                {"n_known", c.n_known},
                {"n_censored", c.n_censored},
                {"n_unknown", c.n_unknown}};
}

}  // namespace

CensoredSummary censored_summary(std::span<const CensoredDuration> durations,
                                 CensoringPolicy policy) {
    CensoredSummary out;
    std::vector<double> xs;
    for (const auto& d : durations) {
        if (!d.months) {
            ++out.n_unknown;
            continue;
        }
        ++out.n_known;
        if (d.censored) {
            ++out.n_censored;
            if (policy == CensoringPolicy::exclude_censored) continue;
        }
        xs.push_back(*d.months);
    }
    set_stats(xs, out.median, out.range);
    return out;
}

LineStats line_stats(std::span<const DigitalTwin> twins) {
    LineStats out;
    std::vector<double> xs;
    for (const auto& t : twins) {
        if (t.treatment_line) {
            xs.push_back(*t.treatment_line);
        } else {
            ++out.excluded;
        }
    }
    out.n = xs.size();
    if (!xs.empty()) out.mean = mean(xs);
    set_stats(xs, out.median, out.range);
    return out;
}

std::string_view to_string(VitalStatus v) {
    switch (v) {
        case VitalStatus::alive: return "alive";
        case VitalStatus::deceased: return "deceased";
        case VitalStatus::unknown: return "unknown";
    }
    return "unknown";
}

VitalStatus vital_status(const DigitalTwin& twin) {
    if (!twin.os) return VitalStatus::unknown;
    auto raw = text::lower(twin.os->raw);
    for (const char* w : {"deceased", "died", "dead"}) {
        if (raw.find(w) != std::string::npos) return VitalStatus::deceased;
    }
    for (const char* w : {"alive", "ongoing", "censored"}) {
        if (raw.find(w) != std::string::npos) return VitalStatus::alive;
    }
    if (twin.os->censored && twin.os->months) return VitalStatus::alive;
    return VitalStatus::unknown;
}

CohortSummary summarize(std::span<const DigitalTwin> twins, CensoringPolicy policy) {
    CohortSummary s;
    s.n = twins.size();
    std::vector<CensoredDuration> pfs, os;
    std::vector<double> cps, tmb;
    for (const auto& t : twins) {
        pfs.push_back(t.pfs.value_or(CensoredDuration{}));
        os.push_back(t.os.value_or(CensoredDuration{}));
        const auto& b = t.biomarkers;
        if (b.pdl1 && b.pdl1->cps) cps.push_back(*b.pdl1->cps);
        if (b.tmb) tmb.push_back(*b.tmb);
        if (t.study_response && !t.study_response->categories.empty()) {
            const auto& r = *t.study_response;
            ++s.best_response[std::string(to_string(r.categories.front()))];
            ResponseRecord seq{r.categories, std::nullopt, ""};
            ++s.trajectories[render_response(seq)];
        } else {
            ++s.best_response["unknown"];
            ++s.trajectories["unknown"];
        }
        ++s.vital_status[std::string(to_string(vital_status(t)))];
    }
    s.pfs = censored_summary(pfs, policy);
    s.os = censored_summary(os, policy);
    s.lines = line_stats(twins);
    set_stats(cps, s.median_cps, s.cps_range);
    set_stats(tmb, s.median_tmb, s.tmb_range);
    return s;
}

Json summary_to_json(const CohortSummary& s) {
    Json j;
    j["n"] = s.n;
    j["pfs"] = censored_json(s.pfs);
    j["os"] = censored_json(s.os);
    j["treatment_line"] = Json{{"mean", opt_json(s.lines.mean)},
                               {"median", opt_json(s.lines.median)},
                               {"range", range_json(s.lines.range)},
                               {"n", s.lines.n},
                               {"excluded", s.lines.excluded}};
    j["cps"] = Json{{"median", opt_json(s.median_cps)}, {"range", range_json(s.cps_range)}};
    j["tmb"] = Json{{"median", opt_json(s.median_tmb)}, {"range", range_json(s.tmb_range)}};
    j["best_response"] = s.best_response;
    j["trajectories"] = s.trajectories;
    j["vital_status"] = s.vital_status;
    return j;
}

}  // namespace oncotwin
