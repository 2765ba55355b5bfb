// Small string helpers shared by the library sources.
#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace oncotwin::text {

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string_view trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
    return lower(haystack).find(lower(needle)) != std::string::npos;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && lower(s.substr(0, prefix.size())) == lower(prefix);
}

/// Collapses runs of whitespace to one space and trims.
inline std::string squash(std::string_view s) {
    std::string out;
    bool pending = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

/// Splits on any of `seps` at parenthesis depth zero; trims each piece and
/// drops empty ones.
inline std::vector<std::string> split_top_level(std::string_view s, std::string_view seps) {
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(' || c == '[') ++depth;
        if ((c == ')' || c == ']') && depth > 0) --depth;
        if (depth == 0 && seps.find(c) != std::string_view::npos) {
            auto t = trim(cur);
            if (!t.empty()) parts.emplace_back(t);
            cur.clear();
            continue;
        }
        cur.push_back(c);
    }
    auto t = trim(cur);
    if (!t.empty()) parts.emplace_back(t);
    return parts;
}

/// Shortest decimal rendering that reads back to the same double ("3.3", "30").
std::string format_number(double v);

}  // namespace oncotwin::text
