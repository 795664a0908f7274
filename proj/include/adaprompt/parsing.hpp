#pragma once

#include "adaprompt/domain.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace adaprompt {

enum class Fallback { LastValueInText, None };

struct ExtractionRule {
    TaskKind kind = TaskKind::Numeric;
    std::string anchor_phrase = std::string(kAnswerAnchor);
    Fallback fallback = Fallback::LastValueInText;
};

/// Pulls the final answer out of a free-text completion.
///
/// The text after the last (case-insensitive) anchor phrase is normalized per
/// task kind. Without an anchor the fallback scans the whole text for the last
/// value of the right shape. Never throws: anything unreadable becomes the
/// invalid sentinel of the question's kind.
///
///   Numeric         currency, thousands separators and '%' are dropped; the
///                   canonical form is the minimal decimal ("12.50" -> "12.5").
///   MultipleChoice  one uppercase label of the question, "(c)" accepted.
///   Boolean         "yes" / "no"; true/false map onto them.
///   StringConcat    lowercase letters with quotes and punctuation stripped.
NormalizedAnswer extract_answer(std::string_view raw, const Question& question);
NormalizedAnswer extract_answer(std::string_view raw, const Question& question, const ExtractionRule& rule);

/// Normalizes a bare answer value (a gold label or an annotator's input)
/// with the same per-kind rules, reading the first value in the text.
NormalizedAnswer normalize_answer_text(std::string_view text, const Question& question);

/// Minimal decimal form of a plain decimal literal such as "-0012.500";
/// nullopt when the input is not one.
std::optional<std::string> canonical_decimal(std::string_view literal);

bool answers_equal(const NormalizedAnswer& a, const NormalizedAnswer& b);

} // namespace adaprompt
