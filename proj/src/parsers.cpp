#include "oncotwin/parsers.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>

#include "text.hpp"

namespace oncotwin {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

/// Cursor over a lower-cased, squashed string.
struct Scanner {
    std::string_view s;
    std::size_t pos = 0;

    [[nodiscard]] bool done() const { return pos >= s.size(); }
    [[nodiscard]] std::string_view rest() const { return s.substr(std::min(pos, s.size())); }

    void skip_spaces() {
        while (!done() && s[pos] == ' ') ++pos;
    }

    bool eat(std::string_view token) {
        if (rest().substr(0, token.size()) == token) {
            pos += token.size();
            return true;
        }
        return false;
    }

    /// Unsigned decimal with '.' or ',' as the decimal mark.
    std::optional<double> number() {
        std::size_t start = pos;
        std::string digits;
        while (!done() && is_digit(s[pos])) digits.push_back(s[pos++]);
        if (digits.empty()) {
            pos = start;
            return std::nullopt;
        }
        if (!done() && (s[pos] == '.' || s[pos] == ',') && pos + 1 < s.size() &&
            is_digit(s[pos + 1])) {
            digits.push_back('.');
            ++pos;
            while (!done() && is_digit(s[pos])) digits.push_back(s[pos++]);
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
        if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
            pos = start;
            return std::nullopt;
        }
        return v;
    }
};

template <typename T>
ParseOutcome<T> success(T value, std::string_view raw, Confidence c = Confidence::exact,
                        std::optional<std::string> note = std::nullopt) {
    ParseOutcome<T> out;
    out.value = std::move(value);
    out.confidence = c;
    out.raw = std::string(raw);
    out.note = std::move(note);
    return out;
}

template <typename T>
ParseOutcome<T> failure(std::string_view raw, std::string note) {
    ParseOutcome<T> out;
    out.confidence = Confidence::failed;
    out.raw = std::string(raw);
    out.note = std::move(note);
    return out;
}

/// Normalized form used by every grammar: squashed, lower-cased, with the
/// common Unicode dashes and comparison signs folded to ASCII.
std::string normalize(std::string_view s) {
    std::string t = text::squash(s);
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kFold{{
        {"\xE2\x80\x93", "-"},   // en dash
        {"\xE2\x80\x94", "-"},   // em dash
        {"\xE2\x89\xA5", ">="},  // greater-than or equal
        {"\xE2\x89\xA4", "<="},  // less-than or equal
        {"\xC2\xA0", " "},       // no-break space
    }};
    for (const auto& [from, to] : kFold) {
        std::size_t at = 0;
        while ((at = t.find(from, at)) != std::string::npos) {
            t.replace(at, from.size(), to);
            at += to.size();
        }
    }
    return text::lower(text::squash(t));
}

std::string format_percent(double fraction) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.10g", fraction * 100.0);
    return std::string(buf.data());
}

}  // namespace

std::string_view to_string(Confidence c) {
    switch (c) {
        case Confidence::exact: return "exact";
        case Confidence::inferred: return "inferred";
        case Confidence::failed: return "failed";
    }
    return "failed";
}

bool is_unknown_token(std::string_view s) {
    static constexpr std::array<std::string_view, 12> kUnknown{
        "n/a", "na", "n.a.", "n.a", "-", "unknown", "not reported", "nr",
        "not available", "?", "n/r", "not known"};
    const auto t = normalize(s);
    for (auto u : kUnknown) {
        if (t == u) return true;
    }
    return false;
}

// --- durations -------------------------------------------------------------

ParseOutcome<CensoredDuration> parse_duration(std::string_view s) {
    const std::string t = normalize(s);
    if (t.empty()) return failure<CensoredDuration>(s, "empty duration");

    const bool marker_censored = t.find('>') != std::string::npos ||
                                 t.find("(ongoing)") != std::string::npos;

    std::string core = t;
    bool censored = false;
    bool odd_annotation = false;
    // Peel trailing parenthetical annotations: "(ongoing)", "(deceased)", ...
    while (!core.empty() && core.back() == ')') {
        auto open = core.rfind('(');
        if (open == std::string::npos) break;
        std::string note(text::trim(std::string_view(core).substr(open + 1, core.size() - open - 2)));
        if (note.find("ongoing") != std::string::npos || note.find("alive") != std::string::npos ||
            note.find("censored") != std::string::npos) {
            censored = true;
        } else if (note.find("deceased") != std::string::npos ||
                   note.find("died") != std::string::npos || note.find("dead") != std::string::npos) {
            // Event observed; not censored.
        } else {
            odd_annotation = true;
        }
        core = std::string(text::trim(std::string_view(core).substr(0, open)));
    }

    CensoredDuration d;
    d.raw = std::string(s);
    const auto confidence = odd_annotation ? Confidence::inferred : Confidence::exact;
    std::optional<std::string> note;
    if (odd_annotation) note = "unrecognized annotation ignored";

    if (is_unknown_token(core)) {
        d.censored = censored || marker_censored;
        return success(d, s, confidence, note);
    }

    Scanner sc{core};
    if (sc.eat(">=") || sc.eat(">")) censored = true;
    if (sc.eat("<")) return failure<CensoredDuration>(s, "upper bounds are not durations");
    sc.skip_spaces();
    auto value = sc.number();
    if (!value) return failure<CensoredDuration>(s, "no numeric duration");
    sc.skip_spaces();
    for (std::string_view unit : {"months", "month", "mos", "mo", "m"}) {
        if (sc.rest() == unit) {
            sc.pos = core.size();
            break;
        }
    }
    if (!sc.done()) return failure<CensoredDuration>(s, "unexpected text after duration");

    d.months = *value;
    d.censored = censored || marker_censored;
    return success(d, s, confidence, note);
}

std::string render_duration(const CensoredDuration& d) {
    if (!d.months) return d.censored ? "- (ongoing)" : "n/a";
    return (d.censored ? ">" : "") + text::format_number(*d.months);
}

// --- PD-L1 -----------------------------------------------------------------

ParseOutcome<std::optional<PdL1Score>> parse_pdl1(std::string_view s) {
    const std::string t = normalize(s);
    if (t.empty()) return failure<std::optional<PdL1Score>>(s, "empty PD-L1 string");
    if (is_unknown_token(t)) return success(std::optional<PdL1Score>{}, s);

    PdL1Score score;
    bool inferred = false;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i > 0 && is_alnum(t[i - 1])) continue;
        std::string_view key;
        for (std::string_view k : {"cps", "tps", "ic"}) {
            if (t.compare(i, k.size(), k) == 0 &&
                (i + k.size() >= t.size() || !is_alnum(t[i + k.size()]))) {
                key = k;
                break;
            }
        }
        if (key.empty()) continue;

        Scanner sc{t, i + key.size()};
        sc.skip_spaces();
        if (!sc.eat(":")) sc.eat("=");
        sc.skip_spaces();
        bool below = false;
        bool above = false;
        if (sc.eat("<=") || sc.eat("<")) below = true;
        else if (sc.eat(">=") || sc.eat(">")) above = true;
        sc.skip_spaces();
        auto v = sc.number();
        if (!v) continue;
        sc.skip_spaces();
        sc.eat("%");
        double value = *v;
        if (below) value *= 0.9;
        if (below || above) inferred = true;
        if (key == "cps") score.cps = value;
        else if (key == "tps") score.tps = value / 100.0;
        else score.ic = value / 100.0;
        i = sc.pos - 1;
    }

    // Whole-word qualitative reading.
    auto has_word = [&](std::string_view w) {
        for (std::size_t at = t.find(w); at != std::string::npos; at = t.find(w, at + 1)) {
            bool left = at == 0 || !is_alnum(t[at - 1]);
            bool right = at + w.size() >= t.size() || !is_alnum(t[at + w.size()]);
            if (left && right) return true;
        }
        return false;
    };
    const bool neg = has_word("negative");
    const bool pos = has_word("positive");
    if (neg && pos) return failure<std::optional<PdL1Score>>(s, "both positive and negative");
    if (neg) score.qualitative = Qualitative::negative;
    if (pos) score.qualitative = Qualitative::positive;

    if (score.empty()) return failure<std::optional<PdL1Score>>(s, "no PD-L1 reading found");
    if (inferred) {
        return success(std::optional<PdL1Score>{score}, s, Confidence::inferred,
                       std::string("bound mapped to a point value"));
    }
    return success(std::optional<PdL1Score>{score}, s);
}

std::string render_pdl1(const PdL1Score& p) {
    std::string out;
    auto append = [&](std::string piece) {
        if (!out.empty()) out += ", ";
        out += piece;
    };
    if (p.cps) append("CPS: " + text::format_number(*p.cps));
    if (p.tps) append("TPS: " + format_percent(*p.tps) + "%");
    if (p.ic) append("IC: " + format_percent(*p.ic) + "%");
    if (p.qualitative) append(std::string(to_string(*p.qualitative)));
    return out.empty() ? "n/a" : out;
}

// --- MMR -------------------------------------------------------------------

ParseOutcome<MmrReading> parse_mmr(std::string_view s) {
    const std::string t = normalize(s);
    if (t.empty()) return failure<MmrReading>(s, "empty MMR string");
    if (is_unknown_token(t)) return success(MmrReading{}, s);

    auto has = [&](std::string_view w) { return t.find(w) != std::string::npos; };
    const bool proficient = has("pmmr") || has("mss") || has("proficient") || has("msi-l");
    const bool deficient = has("dmmr") || has("msi-h") || has("msi high") || has("deficient");
    if (proficient == deficient) {
        return failure<MmrReading>(s, proficient ? "contradictory MMR status" : "no MMR status");
    }

    MmrReading r;
    r.mmr = proficient ? MmrStatus::pMMR : MmrStatus::dMMR;
    if (auto open = t.find('('); open != std::string::npos) {
        Scanner sc{t, open + 1};
        sc.skip_spaces();
        if (auto v = sc.number()) {
            sc.skip_spaces();
            sc.eat("%");
            r.msi_fraction = *v / 100.0;
        }
    }
    return success(r, s);
}

std::string render_mmr(const MmrReading& m) {
    if (!m.mmr) return "n/a";
    std::string out(to_string(*m.mmr));
    if (m.msi_fraction) out += " (" + format_percent(*m.msi_fraction) + "%)";
    return out;
}

// --- age -------------------------------------------------------------------

ParseOutcome<AgeValue> parse_age(std::string_view s) {
    std::string t = normalize(s);
    AgeValue age;
    age.raw = std::string(s);
    if (t.empty()) return failure<AgeValue>(s, "empty age");
    if (is_unknown_token(t)) return success(age, s);

    Scanner sc{t};
    if (sc.eat("range")) {
        sc.skip_spaces();
        sc.eat(":");
        sc.skip_spaces();
    }
    auto read_int = [&]() -> std::optional<int> {
        auto start = sc.pos;
        auto v = sc.number();
        if (!v) return std::nullopt;
        if (*v != static_cast<double>(static_cast<long long>(*v)) || *v > 150.0) {
            sc.pos = start;
            return std::nullopt;
        }
        return static_cast<int>(*v);
    };
    auto first = read_int();
    if (first) {
        sc.skip_spaces();
        std::optional<int> second;
        if (sc.eat("-") || sc.eat("to")) {
            sc.skip_spaces();
            second = read_int();
            if (!second) return failure<AgeValue>(s, "incomplete age range");
            sc.skip_spaces();
        }
        for (std::string_view unit : {"years", "year", "yrs", "y"}) {
            if (sc.rest() == unit) {
                sc.pos = t.size();
                break;
            }
        }
        if (sc.done()) {
            age.low = *first;
            age.high = second.value_or(*first);
            if (*age.high < *age.low) return failure<AgeValue>(s, "descending age range");
            return success(age, s);
        }
    }

    // Fallback: the first "a-b" range anywhere in prose.
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!is_digit(t[i]) || (i > 0 && is_digit(t[i - 1]))) continue;
        Scanner inner{t, i};
        sc = inner;
        auto lo = read_int();
        sc.skip_spaces();
        if (!lo || !sc.eat("-")) continue;
        sc.skip_spaces();
        auto hi = read_int();
        if (hi && *hi >= *lo) {
            age.low = *lo;
            age.high = *hi;
            return success(age, s, Confidence::inferred, std::string("range taken from prose"));
        }
    }
    return failure<AgeValue>(s, "no age found");
}

std::string render_age(const AgeValue& a) {
    if (!a.low) return "n/a";
    if (a.exact()) return std::to_string(*a.low);
    return std::to_string(*a.low) + "-" + std::to_string(a.high.value_or(*a.low));
}

// --- TMB -------------------------------------------------------------------

ParseOutcome<std::optional<double>> parse_tmb(std::string_view s) {
    std::string t = normalize(s);
    if (t.empty()) return failure<std::optional<double>>(s, "empty TMB");
    if (is_unknown_token(t)) return success(std::optional<double>{}, s);

    if (auto open = t.find('('); open != std::string::npos && t.back() == ')') {
        t = std::string(text::trim(std::string_view(t).substr(0, open)));
    }
    Scanner sc{t};
    auto v = sc.number();
    if (!v) return failure<std::optional<double>>(s, "no numeric TMB");
    sc.skip_spaces();
    for (std::string_view unit : {"mutations/megabase", "mutations/mb", "muts/mb", "mut/mb", "/mb"}) {
        if (sc.rest() == unit) {
            sc.pos = t.size();
            break;
        }
    }
    if (!sc.done()) return failure<std::optional<double>>(s, "unexpected text after TMB");
    return success(std::optional<double>{*v}, s);
}

std::string render_tmb(double tmb) { return text::format_number(tmb); }

// --- response --------------------------------------------------------------

ParseOutcome<ResponseRecord> parse_response(std::string_view s) {
    std::string t = normalize(s);
    ResponseRecord r;
    r.raw = std::string(s);
    if (t.empty()) return failure<ResponseRecord>(s, "empty response");
    if (is_unknown_token(t)) return success(r, s);

    for (std::string_view arrow : {"->", "\xE2\x86\x92", " then "}) {
        std::size_t at = 0;
        while ((at = t.find(arrow, at)) != std::string::npos) t.replace(at, arrow.size(), ",");
    }
    static constexpr std::array<std::pair<std::string_view, ResponseCategory>, 11> kNames{{
        {"cr", ResponseCategory::CR},
        {"complete response", ResponseCategory::CR},
        {"pr", ResponseCategory::PR},
        {"partial response", ResponseCategory::PR},
        {"sd", ResponseCategory::SD},
        {"stable disease", ResponseCategory::SD},
        {"mr", ResponseCategory::MR},
        {"mixed response", ResponseCategory::MR},
        {"pd", ResponseCategory::PD},
        {"progressive disease", ResponseCategory::PD},
        {"progression", ResponseCategory::PD},
    }};
    for (const auto& token : text::split_top_level(t, ",;/")) {
        bool matched = false;
        for (const auto& [name, cat] : kNames) {
            if (token == name) {
                r.categories.push_back(cat);
                matched = true;
                break;
            }
        }
        if (!matched) return failure<ResponseRecord>(s, "unknown response category: " + token);
    }
    if (r.categories.empty()) return failure<ResponseRecord>(s, "no response category");
    return success(r, s);
}

std::string render_response(const ResponseRecord& r) {
    if (r.categories.empty()) return "n/a";
    std::string out;
    for (auto c : r.categories) {
        if (!out.empty()) out += ", ";
        out += to_string(c);
    }
    return out;
}

}  // namespace oncotwin
