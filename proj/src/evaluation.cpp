#include "oncotwin/evaluation.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "oncotwin/parsers.hpp"
#include "text.hpp"

namespace oncotwin {

namespace {

std::optional<std::string> opt_str(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw DecodeError(std::string("'") + key + "' must be a string or null");
    return it->get<std::string>();
}

std::string req_str(const Json& j, const char* key) {
    auto v = opt_str(j, key);
    if (!v) throw DecodeError(std::string("missing '") + key + "'");
    return *v;
}

bool absent(const std::optional<std::string>& v) {
    return !v || text::trim(*v).empty() || is_unknown_token(*v);
}

template <typename T, typename Render>
std::string via_parser(const ParseOutcome<T>& p, std::string_view raw, Render render) {
    if (!p.ok() || !p.value) return text::lower(text::squash(raw));
    return render(*p.value);
}

std::string canonical(std::string_view attribute, std::string_view value) {
    auto a = text::lower(attribute);
    if (text::starts_with_ci(a, "pfs") || text::starts_with_ci(a, "os")) {
        return via_parser(parse_duration(value), value, render_duration);
    }
    if (a == "age") return via_parser(parse_age(value), value, render_age);
    if (a.find("response") != std::string::npos) {
        return via_parser(parse_response(value), value, render_response);
    }
    if (a == "sample size" || a == "n") {
        auto s = text::trim(value);
        if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
            return std::to_string(std::stoll(std::string(s)));
        }
    }
    return text::lower(text::squash(value));
}

std::string key_of(const AdjudicationRecord& r) {
    return r.source + "/" + r.subject + "/" + r.attribute;
}

Json opt_metric(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw DecodeError("unterminated quote");
    out.push_back(std::move(cur));
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Portable bounded draw: rejection sampling keeps results identical across
/// standard libraries, unlike std::uniform_int_distribution.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        std::uint64_t x = rng();
        if (x < limit) return x % bound;
    }
}

}  // namespace

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::tp: return "tp";
        case Verdict::tn: return "tn";
        case Verdict::fp: return "fp";
        case Verdict::fn: return "fn";
    }
    return "tn";
}

std::optional<Verdict> verdict_from_string(std::string_view s) {
    for (auto v : {Verdict::tp, Verdict::tn, Verdict::fp, Verdict::fn}) {
        if (s == to_string(v)) return v;
    }
    return std::nullopt;
}

Json adjudication_to_json(const AdjudicationRecord& r) {
    auto opt = [](const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); };
    return Json{{"source", r.source},       {"subject", r.subject},
                {"attribute", r.attribute}, {"extracted", opt(r.extracted)},
                {"gold", opt(r.gold)},      {"verdict", std::string(to_string(r.verdict))},
                {"reviewer", r.reviewer},   {"note", r.note}};
}

AdjudicationRecord adjudication_from_json(const Json& j) {
    if (!j.is_object()) throw DecodeError("adjudication must be an object");
    AdjudicationRecord r;
    r.source = req_str(j, "source");
    r.subject = req_str(j, "subject");
    r.attribute = req_str(j, "attribute");
    r.extracted = opt_str(j, "extracted");
    r.gold = opt_str(j, "gold");
    auto v = req_str(j, "verdict");
    auto verdict = verdict_from_string(v);
    if (!verdict) throw DecodeError("unknown verdict '" + v + "'");
    r.verdict = *verdict;
    r.reviewer = opt_str(j, "reviewer").value_or("");
    r.note = opt_str(j, "note").value_or("");
    return r;
}

std::vector<AdjudicationRecord> read_adjudications(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<AdjudicationRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(adjudication_from_json(Json::parse(line)));
        } catch (const std::exception& e) {
            throw DecodeError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void append_adjudication(const std::filesystem::path& path, const AdjudicationRecord& r) {
    std::string line = adjudication_to_json(r).dump() + "\n";
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot open " + path.string());
    ::flock(fd, LOCK_EX);
    bool ok = ::write(fd, line.data(), line.size()) == static_cast<ssize_t>(line.size());
    ::flock(fd, LOCK_UN);
    ::close(fd);
    if (!ok) throw IoError("short write to " + path.string());
}

Verdict score(std::string_view attribute, const std::optional<std::string>& extracted,
              const std::optional<std::string>& gold) {
    bool has_gold = !absent(gold);
    bool has_extracted = !absent(extracted);
    if (!has_gold) return has_extracted ? Verdict::fp : Verdict::tn;
    if (!has_extracted) return Verdict::fn;
    return canonical(attribute, *extracted) == canonical(attribute, *gold) ? Verdict::tp : Verdict::fn;
}

void ConfusionTally::add(Verdict v) {
    ++observations;
    switch (v) {
        case Verdict::tp: ++tp; break;
        case Verdict::tn: ++tn; break;
        case Verdict::fp: ++fp; break;
        case Verdict::fn: ++fn; break;
    }
}

Metrics metrics(const ConfusionTally& t) {
    if (t.observations <= 0) throw DomainError("metrics need at least one observation");
    if (t.tp < 0 || t.tn < 0 || t.fp < 0 || t.fn < 0 || t.tp + t.tn + t.fp + t.fn != t.observations) {
        throw DomainError("confusion counts do not add up to observations for '" + t.attribute + "'");
    }
    Metrics m;
    m.accuracy = double(t.tp + t.tn) / double(t.observations);
    if (t.tp + t.fp > 0) m.precision = double(t.tp) / double(t.tp + t.fp);
    if (t.tp + t.fn > 0) m.recall = double(t.tp) / double(t.tp + t.fn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0) {
        m.f1 = 2 * *m.precision * *m.recall / (*m.precision + *m.recall);
    }
    return m;
}

double round2(double x) {
    // The epsilon keeps exact halves such as 0.125 from falling below the
    // boundary after binary rounding.
    return std::floor(x * 100 + 0.5 + 1e-9) / 100;
}

std::string display2(const std::optional<double>& x) {
    if (!x) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", round2(*x));
    return buf;
}

std::int64_t sample_size(double z, std::int64_t population, double e, double p) {
    if (!(z > 0) || !std::isfinite(z)) throw DomainError("Z must be positive");
    if (population < 1) throw DomainError("N must be at least 1");
    if (!(e > 0 && e < 1)) throw DomainError("e must lie in (0, 1)");
    if (!(p > 0 && p < 1)) throw DomainError("P must lie in (0, 1)");
    double n0 = z * z * p * (1 - p) / (e * e);
    double n = n0 / (1 + (n0 - 1) / double(population));
    // Guard against 1.0000000001 style representation error before ceil.
    return static_cast<std::int64_t>(std::ceil(n - 1e-9));
}

std::vector<std::string> draw_sample(std::vector<std::string> population, std::size_t n,
                                     std::uint64_t seed) {
    if (n > population.size()) {
        throw DomainError("sample of " + std::to_string(n) + " exceeds population of " +
                          std::to_string(population.size()));
    }
    std::sort(population.begin(), population.end());
    if (std::adjacent_find(population.begin(), population.end()) != population.end()) {
        throw DomainError("population ids must be distinct");
    }
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first n slots end up a uniform sample.
    for (std::size_t i = 0; i < n; ++i) {
        auto j = i + bounded(rng, population.size() - i);
        std::swap(population[i], population[j]);
    }
    population.resize(n);
    return population;
}

ConflictingVerdicts::ConflictingVerdicts(std::vector<std::string> conflicts)
    : Error([&] {
          std::string msg = "conflicting verdicts:";
          for (const auto& c : conflicts) msg += " " + c;
          return msg;
      }()),
      conflicts_(std::move(conflicts)) {}

EvaluationReport evaluate_run(const std::vector<AdjudicationRecord>& records) {
    std::map<std::string, Verdict> seen;
    std::set<std::string> conflicts;
    for (const auto& r : records) {
        auto key = key_of(r);
        auto [it, fresh] = seen.emplace(key, r.verdict);
        if (!fresh && it->second != r.verdict) conflicts.insert(key);
    }
    if (!conflicts.empty()) throw ConflictingVerdicts({conflicts.begin(), conflicts.end()});

    EvaluationReport report;
    std::vector<std::string> sources;
    std::map<std::string, std::vector<std::string>> attrs;
    std::map<std::pair<std::string, std::string>, ConfusionTally> tallies;
    std::set<std::string> counted;
    for (const auto& r : records) {
        // Agreeing repeats of one judgement count once.
        if (!counted.insert(key_of(r)).second) continue;
        if (std::find(sources.begin(), sources.end(), r.source) == sources.end()) sources.push_back(r.source);
        auto& list = attrs[r.source];
        if (std::find(list.begin(), list.end(), r.attribute) == list.end()) list.push_back(r.attribute);
        auto& t = tallies[{r.source, r.attribute}];
        t.attribute = r.attribute;
        t.add(r.verdict);
        auto rescored = score(r.attribute, r.extracted, r.gold);
        if (rescored != r.verdict) report.mismatches.push_back({r, rescored});
    }
    for (const auto& s : sources) {
        ConfusionTally total;
        total.attribute = "TOTAL";
        for (const auto& a : attrs[s]) {
            const auto& t = tallies[{s, a}];
            report.rows.push_back({s, t, metrics(t)});
            total.observations += t.observations;
            total.tp += t.tp;
            total.tn += t.tn;
            total.fp += t.fp;
            total.fn += t.fn;
        }
        report.rows.push_back({s, total, metrics(total)});
    }
    return report;
}

Json report_to_json(const EvaluationReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        const auto& t = row.tally;
        const auto& m = row.metrics;
        rows.push_back(Json{{"source", row.source},
                            {"attribute", t.attribute},
                            {"observations", t.observations},
                            {"tp", t.tp},
                            {"tn", t.tn},
                            {"fp", t.fp},
                            {"fn", t.fn},
                            {"accuracy", opt_metric(m.accuracy)},
                            {"precision", opt_metric(m.precision)},
                            {"recall", opt_metric(m.recall)},
                            {"f1", opt_metric(m.f1)},
                            {"display", {{"accuracy", display2(m.accuracy)},
                                         {"precision", display2(m.precision)},
                                         {"recall", display2(m.recall)},
                                         {"f1", display2(m.f1)}}}});
    }
    Json mism = Json::array();
    for (const auto& x : r.mismatches) {
        mism.push_back(Json{{"record", adjudication_to_json(x.record)},
                            {"rescored", std::string(to_string(x.rescored))}});
    }
    return Json{{"rows", rows}, {"verdict_mismatches", mism}};
}

std::string report_to_csv(const EvaluationReport& r) {
    std::ostringstream out;
    out << "source,attribute,observations,tp,tn,fp,fn,accuracy,precision,recall,f1\n";
    for (const auto& row : r.rows) {
        const auto& t = row.tally;
        const auto& m = row.metrics;
        out << csv_field(row.source) << ',' << csv_field(t.attribute) << ',' << t.observations << ','
            << t.tp << ',' << t.tn << ',' << t.fp << ',' << t.fn << ',' << display2(m.accuracy) << ','
            << display2(m.precision) << ',' << display2(m.recall) << ',' << display2(m.f1) << '\n';
    }
    return out.str();
}

std::vector<LintFinding> lint_metrics_table(std::string_view csv) {
    std::vector<LintFinding> out;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t n = 0;
    std::map<std::string, std::size_t> col;
    const std::vector<std::string> required = {"source", "attribute", "observations", "tp", "tn", "fp",
                                               "fn", "accuracy", "precision", "recall", "f1"};
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (col.empty()) {
            for (std::size_t i = 0; i < cells.size(); ++i) col[text::lower(text::trim(cells[i]))] = i;
            for (const auto& r : required) {
                if (!col.count(r)) throw DecodeError("metrics table header lacks '" + r + "'");
            }
            continue;
        }
        if (cells.size() < col.size()) {
            throw DecodeError("line " + std::to_string(n) + ": expected " + std::to_string(col.size()) +
                              " cells, got " + std::to_string(cells.size()));
        }
        auto cell = [&](const std::string& name) { return std::string(text::trim(cells[col[name]])); };
        ConfusionTally t;
        t.attribute = cell("attribute");
        try {
            t.observations = std::stoll(cell("observations"));
            t.tp = std::stoll(cell("tp"));
            t.tn = std::stoll(cell("tn"));
            t.fp = std::stoll(cell("fp"));
            t.fn = std::stoll(cell("fn"));
        } catch (const std::logic_error&) {
            throw DecodeError("line " + std::to_string(n) + ": counts must be integers");
        }
        LintFinding base{n, cell("source"), t.attribute, "", "", ""};
        if (t.tp + t.tn + t.fp + t.fn != t.observations) {
            auto f = base;
            f.column = "observations";
            f.reported = cell("observations");
            f.recomputed = std::to_string(t.tp + t.tn + t.fp + t.fn);
            out.push_back(f);
            continue;
        }
        if (t.observations == 0) continue;
        auto m = metrics(t);
        const std::pair<const char*, std::optional<double>> checks[] = {
            {"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
        for (const auto& [name, value] : checks) {
            auto reported = cell(name);
            auto recomputed = display2(value);
            bool same = reported == recomputed;
            if (!same && !reported.empty() && value) {
                try {
                    same = std::abs(std::stod(reported) - round2(*value)) < 1e-9;
                } catch (const std::logic_error&) {
                }
            }
            if (!same) {
                auto f = base;
                f.column = name;
                f.reported = reported;
                f.recomputed = recomputed;
                out.push_back(f);
            }
        }
    }
    return out;
}

}  // namespace oncotwin
