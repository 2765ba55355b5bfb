#include "oncotwin/query.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "oncotwin/parsers.hpp"
#include "text.hpp"

namespace oncotwin {

namespace {

enum class Kind { number, text };

const std::map<std::string, Kind, std::less<>>& field_kinds() {
    static const std::map<std::string, Kind, std::less<>> kinds = {
        {"id", Kind::text},           {"source", Kind::text},
        {"source_ref", Kind::text},   {"n", Kind::number},
        {"age", Kind::number},        {"gender", Kind::text},
        {"race", Kind::text},         {"diagnosis", Kind::text},
        {"cps", Kind::number},        {"tps", Kind::number},
        {"ic", Kind::number},         {"pdl1", Kind::text},
        {"tmb", Kind::number},        {"tmb_class", Kind::text},
        {"mmr", Kind::text},          {"msi", Kind::number},
        {"markers", Kind::text},      {"previous_treatments", Kind::text},
        {"study_treatment", Kind::text}, {"ici", Kind::text},
        {"treatment_line", Kind::number}, {"response", Kind::text},
        {"pfs", Kind::number},        {"pfs_censored", Kind::text},
        {"os", Kind::number},         {"os_censored", Kind::text},
        {"main_recommendation", Kind::text}, {"similarity", Kind::text},
        {"adjudication", Kind::text},
    };
    return kinds;
}

Kind kind_of(std::string_view field) {
    auto it = field_kinds().find(field);
    if (it == field_kinds().end()) throw QueryError("unknown field '" + std::string(field) + "'");
    return it->second;
}

std::optional<double> to_number(std::string_view s) {
    s = text::trim(s);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

struct Token {
    enum Type { word, op, quoted } type;
    std::string text;
};

bool is_op_char(char c) { return c == '=' || c == '!' || c == '<' || c == '>' || c == '~'; }

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '"') {
            auto end = s.find('"', i + 1);
            if (end == std::string_view::npos) throw QueryError("unterminated quote in predicate");
            out.push_back({Token::quoted, std::string(s.substr(i + 1, end - i - 1))});
            i = end + 1;
        } else if (is_op_char(c)) {
            std::size_t n = (i + 1 < s.size() && s[i + 1] == '=') ? 2 : 1;
            out.push_back({Token::op, std::string(s.substr(i, n))});
            i += n;
        } else {
            std::size_t j = i;
            while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) &&
                   !is_op_char(s[j]) && s[j] != '"') {
                ++j;
            }
            out.push_back({Token::word, std::string(s.substr(i, j - i))});
            i = j;
        }
    }
    return out;
}

CompareOp op_from(const std::string& s) {
    if (s == "==") return CompareOp::eq;
    if (s == "!=") return CompareOp::ne;
    if (s == ">=") return CompareOp::ge;
    if (s == "<=") return CompareOp::le;
    if (s == ">") return CompareOp::gt;
    if (s == "<") return CompareOp::lt;
    if (s == "~") return CompareOp::contains;
    throw QueryError("unknown operator '" + s + "'");
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ", ";
        out += p;
    }
    return out;
}

FieldValue opt_num(const std::optional<double>& v) {
    return v ? FieldValue(*v) : FieldValue(std::monostate{});
}

FieldValue opt_text(const std::optional<std::string>& v) {
    return v && !v->empty() ? FieldValue(*v) : FieldValue(std::monostate{});
}

}  // namespace

const std::vector<std::string>& query_fields() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [k, v] : field_kinds()) out.push_back(k);
        return out;
    }();
    return names;
}

FieldValue field_value(const DigitalTwin& t, std::string_view f) {
    kind_of(f);
    const auto& b = t.biomarkers;
    auto pd = [&](auto member) -> std::optional<double> {
        return b.pdl1 ? (*b.pdl1).*member : std::nullopt;
    };
    if (f == "id") return t.id;
    if (f == "source") return std::string(to_string(t.source));
    if (f == "source_ref") return opt_text(t.source_ref);
    if (f == "n") return t.sample_size ? FieldValue(double(*t.sample_size)) : FieldValue{};
    if (f == "age") return t.age && t.age->low ? FieldValue(double(*t.age->low)) : FieldValue{};
    if (f == "gender") return opt_text(t.gender);
    if (f == "race") return opt_text(t.race);
    if (f == "diagnosis") return opt_text(t.diagnosis);
    if (f == "cps") return opt_num(pd(&PdL1Score::cps));
    if (f == "tps") return opt_num(pd(&PdL1Score::tps));
    if (f == "ic") return opt_num(pd(&PdL1Score::ic));
    if (f == "pdl1") {
        if (b.pdl1 && b.pdl1->qualitative) return std::string(to_string(*b.pdl1->qualitative));
        return {};
    }
    if (f == "tmb") return opt_num(b.tmb);
    if (f == "tmb_class") {
        if (b.tmb_class) return std::string(to_string(*b.tmb_class));
        return {};
    }
    if (f == "mmr") return b.mmr ? FieldValue(std::string(to_string(*b.mmr))) : FieldValue{};
    if (f == "msi") return opt_num(b.msi_fraction);
    if (f == "markers") {
        std::vector<std::string> names;
        for (const auto& m : b.others) names.push_back(m.name + " " + m.detail);
        return names.empty() ? FieldValue{} : FieldValue(join(names));
    }
    if (f == "previous_treatments") {
        std::vector<std::string> d;
        for (const auto& e : t.previous_treatments) d.push_back(e.description);
        return d.empty() ? FieldValue{} : FieldValue(join(d));
    }
    if (f == "study_treatment") return opt_text(t.study_treatment);
    if (f == "ici") {
        if (t.study_treatment.empty()) return {};
        return std::string(is_ici_treatment(t.study_treatment) ? "true" : "false");
    }
    if (f == "treatment_line") return t.treatment_line ? FieldValue(double(*t.treatment_line)) : FieldValue{};
    if (f == "response") {
        if (!t.study_response || t.study_response->categories.empty()) return {};
        return render_response(*t.study_response);
    }
    if (f == "pfs") return t.pfs ? opt_num(t.pfs->months) : FieldValue{};
    if (f == "os") return t.os ? opt_num(t.os->months) : FieldValue{};
    if (f == "pfs_censored") return t.pfs ? FieldValue(std::string(t.pfs->censored ? "true" : "false")) : FieldValue{};
    if (f == "os_censored") return t.os ? FieldValue(std::string(t.os->censored ? "true" : "false")) : FieldValue{};
    if (f == "main_recommendation") return opt_text(t.main_recommendation);
    if (f == "similarity") {
        std::vector<std::string> s;
        for (auto v : t.similarity) s.emplace_back(to_string(v));
        return s.empty() ? FieldValue{} : FieldValue(join(s));
    }
    if (f == "adjudication") return std::string(to_string(t.adjudication));
    throw QueryError("unknown field '" + std::string(f) + "'");
}

Predicate parse_predicate(std::string_view text) {
    Predicate p;
    auto toks = tokenize(text);
    if (toks.empty()) return p;
    std::vector<Term> conj;
    std::size_t i = 0;
    for (;;) {
        if (i + 3 > toks.size()) {
            throw QueryError("incomplete term in predicate");
        }
        const auto& f = toks[i];
        const auto& o = toks[i + 1];
        const auto& v = toks[i + 2];
        if (f.type != Token::word) throw QueryError("expected a field name, got '" + f.text + "'");
        if (o.type != Token::op) throw QueryError("expected an operator after '" + f.text + "'");
        if (v.type == Token::op) throw QueryError("expected a value after '" + o.text + "'");
        Term t{f.text, op_from(o.text), v.text};
        Kind k = kind_of(t.field);
        if (k == Kind::number && t.op == CompareOp::contains) {
            throw QueryError("'~' does not apply to numeric field '" + t.field + "'");
        }
        if (k == Kind::number && !to_number(t.value)) {
            throw QueryError("field '" + t.field + "' needs a numeric value, got '" + t.value + "'");
        }
        if (k == Kind::text && t.op != CompareOp::eq && t.op != CompareOp::ne &&
            t.op != CompareOp::contains) {
            throw QueryError("ordering operators do not apply to text field '" + t.field + "'");
        }
        conj.push_back(std::move(t));
        i += 3;
        if (i == toks.size()) break;
        auto joiner = text::lower(toks[i].text);
        if (toks[i].type != Token::word || (joiner != "and" && joiner != "or")) {
            throw QueryError("expected AND or OR, got '" + toks[i].text + "'");
        }
        if (joiner == "or") {
            p.any_of.push_back(std::move(conj));
            conj.clear();
        }
        ++i;
        if (i == toks.size()) throw QueryError("predicate ends with " + joiner);
    }
    p.any_of.push_back(std::move(conj));
    return p;
}

namespace {

bool eval(const DigitalTwin& t, const Term& term) {
    auto v = field_value(t, term.field);
    if (std::holds_alternative<std::monostate>(v)) return false;
    if (const double* x = std::get_if<double>(&v)) {
        double y = *to_number(term.value);
        switch (term.op) {
            case CompareOp::eq: return *x == y;
            case CompareOp::ne: return *x != y;
            case CompareOp::ge: return *x >= y;
            case CompareOp::le: return *x <= y;
            case CompareOp::gt: return *x > y;
            case CompareOp::lt: return *x < y;
            case CompareOp::contains: return false;
        }
        return false;
    }
    auto s = text::lower(std::get<std::string>(v));
    auto want = text::lower(term.value);
    switch (term.op) {
        case CompareOp::eq: return s == want;
        case CompareOp::ne: return s != want;
        case CompareOp::contains: return s.find(want) != std::string::npos;
        default: return false;
    }
}

}  // namespace

bool matches(const DigitalTwin& t, const Predicate& p) {
    if (p.empty()) return true;
    return std::any_of(p.any_of.begin(), p.any_of.end(), [&](const std::vector<Term>& conj) {
        return std::all_of(conj.begin(), conj.end(), [&](const Term& term) { return eval(t, term); });
    });
}

}  // namespace oncotwin
