#include "adaprompt/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace adaprompt {

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char to_lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
char to_upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

std::string lowercase(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), to_lower);
    return out;
}

/// Position just past the last case-insensitive occurrence of `anchor`.
std::optional<std::size_t> after_last_anchor(std::string_view text, std::string_view anchor) {
    if (anchor.empty() || text.size() < anchor.size()) {
        return std::nullopt;
    }
    const auto haystack = lowercase(text);
    const auto needle = lowercase(anchor);
    const auto pos = haystack.rfind(needle);
    if (pos == std::string::npos) {
        return std::nullopt;
    }
    return pos + needle.size();
}

// ---- numeric ---------------------------------------------------------------

/// Canonical strings of every decimal literal in reading order. A comma is a
/// thousands separator only when followed by exactly three digits.
std::vector<std::string> numeric_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i])) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        std::string literal;
        while (i < text.size()) {
            if (is_digit(text[i])) {
                literal.push_back(text[i++]);
            } else if (text[i] == ',' && i + 3 < text.size() && is_digit(text[i + 1]) &&
                       is_digit(text[i + 2]) && is_digit(text[i + 3]) &&
                       (i + 4 >= text.size() || !is_digit(text[i + 4]))) {
                ++i;
            } else {
                break;
            }
        }
        if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
            literal.push_back(text[i++]);
            while (i < text.size() && is_digit(text[i])) {
                literal.push_back(text[i++]);
            }
        }
        bool negative = false;
        if (start >= 1 && text[start - 1] == '-') {
            negative = start == 1 || !is_alnum(text[start - 2]);
        } else if (start >= 2 && text[start - 1] == '$' && text[start - 2] == '-') {
            negative = start == 2 || !is_alnum(text[start - 3]);
        }
        if (negative) {
            literal.insert(literal.begin(), '-');
        }
        if (auto canonical = canonical_decimal(literal)) {
            out.push_back(std::move(*canonical));
        }
    }
    return out;
}

// ---- multiple choice -------------------------------------------------------

struct LetterHit {
    std::string label;
    bool parenthesized = false;
};

bool has_label(const Question& question, char upper) {
    return std::any_of(question.choices.begin(), question.choices.end(),
                       [&](const Choice& c) { return c.label.size() == 1 && c.label[0] == upper; });
}

/// Standalone option letters: not glued to other letters. Lowercase letters
/// count only when wrapped as "(c)".
std::vector<LetterHit> letter_hits(std::string_view text, const Question& question) {
    std::vector<LetterHit> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (!is_alpha(c)) {
            continue;
        }
        const bool prev_alpha = i > 0 && is_alnum(text[i - 1]);
        const bool next_alpha = i + 1 < text.size() && is_alnum(text[i + 1]);
        if (prev_alpha || next_alpha) {
            continue;
        }
        const bool open = i > 0 && text[i - 1] == '(';
        const bool close = i + 1 < text.size() && text[i + 1] == ')';
        const bool upper = std::isupper(static_cast<unsigned char>(c)) != 0;
        if (!upper && !(open && close)) {
            continue;
        }
        const char label = to_upper(c);
        if (!has_label(question, label)) {
            continue;
        }
        out.push_back({std::string(1, label), open || close});
    }
    return out;
}

std::string strip_edges(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && !is_alnum(text[b])) ++b;
    while (e > b && !is_alnum(text[e - 1])) --e;
    return std::string(text.substr(b, e - b));
}

std::optional<std::string> match_choice_text(std::string_view segment, const Question& question) {
    const auto body = lowercase(strip_edges(segment));
    std::optional<std::string> best;
    std::size_t best_len = 0;
    for (const auto& choice : question.choices) {
        const auto needle = lowercase(strip_edges(choice.text));
        if (needle.empty() || needle.size() <= best_len) {
            continue;
        }
        if (body.compare(0, needle.size(), needle) == 0 &&
            (body.size() == needle.size() || !is_alnum(body[needle.size()]))) {
            best = choice.label;
            best_len = needle.size();
        }
    }
    return best;
}

// ---- words -----------------------------------------------------------------

std::vector<std::string> words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) {
            auto stripped = strip_edges(text.substr(start, i - start));
            if (!stripped.empty()) {
                out.push_back(std::move(stripped));
            }
        }
    }
    return out;
}

std::optional<std::string> boolean_of(const std::string& word) {
    const auto w = lowercase(word);
    if (w == "yes" || w == "true") return std::string("yes");
    if (w == "no" || w == "false") return std::string("no");
    return std::nullopt;
}

std::vector<std::string> alpha_runs(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_alpha(text[i])) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < text.size() && is_alpha(text[i])) ++i;
        out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

NormalizedAnswer concat_answer(TaskKind kind, const std::string& word) {
    if (word.empty() || !std::all_of(word.begin(), word.end(), is_alpha)) {
        return NormalizedAnswer::invalid(kind);
    }
    return NormalizedAnswer::of(kind, lowercase(word));
}

/// Reads the first value of the right shape from text following the anchor.
NormalizedAnswer first_value(std::string_view segment, const Question& question, TaskKind kind) {
    switch (kind) {
    case TaskKind::Numeric: {
        auto tokens = numeric_tokens(segment);
        if (!tokens.empty()) return NormalizedAnswer::of(kind, tokens.front());
        break;
    }
    case TaskKind::MultipleChoice: {
        auto hits = letter_hits(segment, question);
        if (!hits.empty()) return NormalizedAnswer::of(kind, hits.front().label);
        if (auto label = match_choice_text(segment, question)) return NormalizedAnswer::of(kind, *label);
        break;
    }
    case TaskKind::Boolean: {
        for (const auto& run : alpha_runs(segment)) {
            if (auto b = boolean_of(run)) return NormalizedAnswer::of(kind, *b);
        }
        break;
    }
    case TaskKind::StringConcat: {
        auto ws = words(segment);
        if (!ws.empty()) return concat_answer(kind, ws.front());
        break;
    }
    }
    return NormalizedAnswer::invalid(kind);
}

NormalizedAnswer last_value(std::string_view text, const Question& question, TaskKind kind) {
    switch (kind) {
    case TaskKind::Numeric: {
        auto tokens = numeric_tokens(text);
        if (!tokens.empty()) return NormalizedAnswer::of(kind, tokens.back());
        break;
    }
    case TaskKind::MultipleChoice: {
        auto hits = letter_hits(text, question);
        for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
            if (it->parenthesized) return NormalizedAnswer::of(kind, it->label);
        }
        if (!hits.empty()) return NormalizedAnswer::of(kind, hits.back().label);
        break;
    }
    case TaskKind::Boolean: {
        auto runs = alpha_runs(text);
        for (auto it = runs.rbegin(); it != runs.rend(); ++it) {
            if (auto b = boolean_of(*it)) return NormalizedAnswer::of(kind, *b);
        }
        break;
    }
    case TaskKind::StringConcat: {
        auto ws = words(text);
        if (!ws.empty()) return concat_answer(kind, ws.back());
        break;
    }
    }
    return NormalizedAnswer::invalid(kind);
}

} // namespace

std::optional<std::string> canonical_decimal(std::string_view literal) {
    bool negative = false;
    if (!literal.empty() && (literal.front() == '-' || literal.front() == '+')) {
        negative = literal.front() == '-';
        literal.remove_prefix(1);
    }
    const auto dot = literal.find('.');
    std::string_view integer = literal.substr(0, dot);
    std::string_view fraction = dot == std::string_view::npos ? std::string_view{} : literal.substr(dot + 1);
    if (integer.empty() && !fraction.empty()) {
        integer = "0";
    }
    if (integer.empty() || !std::all_of(integer.begin(), integer.end(), is_digit) ||
        !std::all_of(fraction.begin(), fraction.end(), is_digit) ||
        (dot != std::string_view::npos && fraction.empty())) {
        return std::nullopt;
    }
    while (integer.size() > 1 && integer.front() == '0') integer.remove_prefix(1);
    while (!fraction.empty() && fraction.back() == '0') fraction.remove_suffix(1);
    std::string out;
    if (negative && !(integer == "0" && fraction.empty())) {
        out.push_back('-');
    }
    out.append(integer);
    if (!fraction.empty()) {
        out.push_back('.');
        out.append(fraction);
    }
    return out;
}

NormalizedAnswer extract_answer(std::string_view raw, const Question& question) {
    ExtractionRule rule;
    rule.kind = question.kind;
    return extract_answer(raw, question, rule);
}

NormalizedAnswer extract_answer(std::string_view raw, const Question& question, const ExtractionRule& rule) {
    if (auto after = after_last_anchor(raw, rule.anchor_phrase)) {
        return first_value(raw.substr(*after), question, rule.kind);
    }
    if (rule.fallback == Fallback::LastValueInText) {
        return last_value(raw, question, rule.kind);
    }
    return NormalizedAnswer::invalid(rule.kind);
}

NormalizedAnswer normalize_answer_text(std::string_view text, const Question& question) {
    if (question.kind == TaskKind::MultipleChoice) {
        // A bare letter typed by an annotator may be lowercase.
        while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
        while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
        if (text.size() == 1 && is_alpha(text[0])) {
            const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
            return has_label(question, upper) ? NormalizedAnswer::of(question.kind, std::string(1, upper))
                                              : NormalizedAnswer::invalid(question.kind);
        }
    }
    return first_value(text, question, question.kind);
}

bool answers_equal(const NormalizedAnswer& a, const NormalizedAnswer& b) {
    return a == b;
}

} // namespace adaprompt
