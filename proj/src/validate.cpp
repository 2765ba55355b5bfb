#include "oncotwin/validate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "oncotwin/error.hpp"
#include "oncotwin/parsers.hpp"
#include "text.hpp"

namespace oncotwin {

std::size_t ValidationReport::error_count() const {
    return static_cast<std::size_t>(std::count_if(
        findings.begin(), findings.end(),
        [](const Finding& f) { return f.severity == Severity::error; }));
}

std::size_t ValidationReport::warning_count() const {
    return findings.size() - error_count();
}

TmbClass tmb_class(double tmb) {
    if (!std::isfinite(tmb) || tmb < 0.0) {
        throw DomainError("tmb must be finite and non-negative");
    }
    if (tmb < 5.0) return TmbClass::low;
    if (tmb < 15.0) return TmbClass::intermediate;
    return TmbClass::high;
}

namespace {

struct Collector {
    ValidationReport report;

    void error(std::string field, std::string message) {
        report.findings.push_back({std::move(field), Severity::error, std::move(message)});
    }
    void warning(std::string field, std::string message) {
        report.findings.push_back({std::move(field), Severity::warning, std::move(message)});
    }
};

bool in_unit_interval(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

void check_duration(Collector& c, const std::string& field,
                    const std::optional<CensoredDuration>& d) {
    if (!d) {
        c.warning(field, "not reported");
        return;
    }
    if (d->months && (!std::isfinite(*d->months) || *d->months < 0.0)) {
        c.error(field, "months must be finite and non-negative");
    }
    const bool marker = d->raw.find('>') != std::string::npos ||
                        text::contains_ci(d->raw, "(ongoing)");
    if (marker && !d->censored) c.error(field, "censoring marker present but not censored");
    if (!d->months) {
        if (d->raw.empty() || is_unknown_token(d->raw) ||
            parse_duration(d->raw).confidence != Confidence::failed) {
            c.warning(field, "no numeric duration");
        } else {
            c.warning(field, "unparsed duration prose: " + d->raw);
        }
    }
}

}  // namespace

ValidationReport validate_twin(const DigitalTwin& t) {
    Collector c;

    if (t.id.empty()) c.error("id", "empty id");
    if (text::trim(t.diagnosis).empty()) c.error("diagnosis", "empty diagnosis");

    if (t.source == Source::institutional) {
        if (t.sample_size) c.error("n", "sample size is only defined for literature records");
        if (t.main_recommendation) {
            c.error("main recommendation", "only defined for literature records");
        }
    } else if (t.sample_size && *t.sample_size < 1) {
        c.error("n", "sample size must be at least 1");
    }

    if (!t.age) {
        c.warning("age", "not reported");
    } else {
        const auto& a = *t.age;
        if ((a.low && *a.low < 0) || (a.high && a.low && *a.high < *a.low) ||
            (a.high.has_value() != a.low.has_value())) {
            c.error("age", "invalid age bounds");
        }
        if (!a.known()) c.warning("age", "unknown");
    }
    if (!t.gender) c.warning("gender", "not reported");
    if (!t.race) c.warning("race", "not reported");

    const auto& b = t.biomarkers;
    if (b.empty()) {
        c.warning("biomarkers", "not reported");
    } else {
        if (b.pdl1) {
            const auto& p = *b.pdl1;
            if (p.empty()) c.error("biomarkers.pd-l1", "no PD-L1 field present");
            if (p.cps && (!std::isfinite(*p.cps) || *p.cps < 0.0)) {
                c.error("biomarkers.pd-l1", "CPS must be non-negative");
            }
            if (p.tps && !in_unit_interval(*p.tps)) c.error("biomarkers.pd-l1", "TPS outside [0,1]");
            if (p.ic && !in_unit_interval(*p.ic)) c.error("biomarkers.pd-l1", "IC outside [0,1]");
            if (p.qualitative == Qualitative::negative && p.cps && *p.cps > 0.0) {
                c.error("biomarkers.pd-l1", "negative PD-L1 contradicts CPS > 0");
            }
        }
        if (b.tmb) {
            if (!std::isfinite(*b.tmb) || *b.tmb < 0.0) {
                c.error("biomarkers.tmb/mb", "TMB must be finite and non-negative");
            } else if (b.tmb_class && *b.tmb_class != tmb_class(*b.tmb)) {
                c.error("biomarkers.tmb class",
                        std::string("class ") + std::string(to_string(*b.tmb_class)) +
                            " does not match TMB " + text::format_number(*b.tmb) + " (" +
                            std::string(to_string(tmb_class(*b.tmb))) + ")");
            }
        }
        if (b.msi_fraction && !in_unit_interval(*b.msi_fraction)) {
            c.error("biomarkers.msi/mss", "MSI fraction outside [0,1]");
        }
        for (const auto& o : b.others) {
            if (text::trim(o.name).empty()) c.error("biomarkers.others", "marker without a name");
        }
    }

    if (t.previous_treatments.empty()) {
        c.warning("previous treatments", "not reported");
    } else {
        std::optional<int> last;
        std::set<int> lines;
        bool all_lined = true;
        for (const auto& ev : t.previous_treatments) {
            if (text::trim(ev.description).empty()) {
                c.error("previous treatments", "treatment without description");
            }
            if (!ev.line) {
                all_lined = false;
                continue;
            }
            if (*ev.line < 1) c.error("previous treatments", "line numbers start at 1");
            if (last && *ev.line <= *last) {
                c.error("previous treatments", "line numbers must strictly increase");
            }
            last = ev.line;
            lines.insert(*ev.line);
        }
        if (t.treatment_line && all_lined &&
            *t.treatment_line != static_cast<int>(lines.size()) + 1) {
            c.warning("treatment line", "does not follow the documented prior lines");
        }
    }
    if (t.treatment_line && *t.treatment_line < 1) {
        c.error("treatment line", "treatment line must be positive");
    }

    if (text::trim(t.study_treatment).empty()) c.warning("study treatment", "not reported");
    if (!t.study_response) {
        c.warning("study treatment response", "not reported");
    } else if (t.study_response->categories.empty() && !t.study_response->raw.empty() &&
               !is_unknown_token(t.study_response->raw)) {
        c.warning("study treatment response", "no response category recognized");
    }

    check_duration(c, "PFS", t.pfs);
    check_duration(c, "OS", t.os);
    return c.report;
}

}  // namespace oncotwin
