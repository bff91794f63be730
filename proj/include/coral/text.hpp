#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace coral {

inline std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

// Markdown tokenization used for graph nodes and the vocabulary: lowercase,
// split on whitespace and punctuation, drop tokens with no alphanumerics.
// "Load the data!!" -> ["load", "the", "data"].
inline std::vector<std::string> tokenize_markdown(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80 || c == '_') {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

// Whitespace tokenization for the markdown keyword heuristics: lowercase,
// split on whitespace, strip leading/trailing punctuation so emphasis and
// headers don't hide a keyword ("**Random Forest!**" -> ["random","forest"]).
// Interior punctuation stays ("cross-validation" is one token).
inline std::vector<std::string> whitespace_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto is_word_char = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
    auto flush = [&] {
        size_t b = 0, e = cur.size();
        while (b < e && !is_word_char(static_cast<unsigned char>(cur[b]))) ++b;
        while (e > b && !is_word_char(static_cast<unsigned char>(cur[e - 1]))) --e;
        if (e > b) tokens.push_back(cur.substr(b, e - b));
        cur.clear();
    };
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return tokens;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace coral
