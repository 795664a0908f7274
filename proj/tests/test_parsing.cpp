#include "adaprompt/parsing.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace adaprompt;

namespace {

Question of_kind(TaskKind kind) {
    Question q{"q", "text", kind, {}, std::nullopt};
    if (kind == TaskKind::MultipleChoice) {
        q.choices = {{"A", "apple"}, {"B", "banana"}, {"C", "cherry"}, {"D", "date"}};
    }
    return q;
}

} // namespace

TEST_CASE("fixture corpus") {
    const auto cases = testing::parser_cases();
    REQUIRE(cases.size() >= 40);
    for (const auto& c : cases) {
        INFO("raw: " << c.raw);
        const auto answer = extract_answer(c.raw, c.question);
        CHECK(answer.kind == c.question.kind);
        CHECK(answer.valid == c.expected_valid);
        if (c.expected_valid) CHECK(answer.canonical == *c.expected_canonical);
    }
}

TEST_CASE("canonical decimals") {
    CHECK(canonical_decimal("12.50") == "12.5");
    CHECK(canonical_decimal("-0012.500") == "-12.5");
    CHECK(canonical_decimal("3.000") == "3");
    CHECK(canonical_decimal("-0") == "0");
    CHECK(canonical_decimal("0.0") == "0");
    CHECK(canonical_decimal(".5") == "0.5");
    CHECK_FALSE(canonical_decimal("1e5").has_value());
    CHECK_FALSE(canonical_decimal("abc").has_value());
    CHECK_FALSE(canonical_decimal("").has_value());
}

TEST_CASE("numeric formatting variants normalize to one canonical form") {
    const auto q = of_kind(TaskKind::Numeric);
    const auto expected = NormalizedAnswer::of(TaskKind::Numeric, "1200");
    for (const char* raw : {"The answer is 1200.", "The answer is 1,200.", "The answer is $1,200.00.",
                            "The answer is 1200.0 dollars", "the answer is 1,200", "The answer is: $1200"}) {
        INFO(raw);
        CHECK(extract_answer(raw, q) == expected);
    }
}

TEST_CASE("the last anchor wins and no fallback applies after an anchor") {
    const auto q = of_kind(TaskKind::Numeric);
    CHECK(extract_answer("The answer is 3. Actually the answer is 4.", q).canonical == "4");
    CHECK_FALSE(extract_answer("We get 9 but the answer is unclear", q).valid);
    ExtractionRule strict{TaskKind::Numeric, std::string(kAnswerAnchor), Fallback::None};
    CHECK_FALSE(extract_answer("so we get 9", q, strict).valid);
    CHECK(extract_answer("so we get 9", q).canonical == "9");
}

TEST_CASE("custom anchor phrase") {
    const auto q = of_kind(TaskKind::Numeric);
    ExtractionRule rule{TaskKind::Numeric, "Final:", Fallback::None};
    CHECK(extract_answer("steps 1 2 3. Final: 17", q, rule).canonical == "17");
}

TEST_CASE("multiple choice accepts labels and option text after the anchor") {
    const auto q = of_kind(TaskKind::MultipleChoice);
    CHECK(extract_answer("The answer is (d).", q).canonical == "D");
    CHECK(extract_answer("The answer is banana.", q).canonical == "B");
    CHECK_FALSE(extract_answer("The answer is (E).", q).valid);
    CHECK(extract_answer("I would pick (C)", q).canonical == "C");
}

TEST_CASE("normalize_answer_text reads bare annotator input") {
    CHECK(normalize_answer_text("$1,234", of_kind(TaskKind::Numeric)).canonical == "1234");
    CHECK(normalize_answer_text("c", of_kind(TaskKind::MultipleChoice)).canonical == "C");
    CHECK(normalize_answer_text("Yes", of_kind(TaskKind::Boolean)).canonical == "yes");
    CHECK(normalize_answer_text("\"Ab\"", of_kind(TaskKind::StringConcat)).canonical == "ab");
    CHECK_FALSE(normalize_answer_text("", of_kind(TaskKind::Numeric)).valid);
    CHECK_FALSE(normalize_answer_text("perhaps", of_kind(TaskKind::Boolean)).valid);
}

TEST_CASE("invalid answers of a kind share one bucket") {
    const auto q = of_kind(TaskKind::Numeric);
    CHECK(extract_answer("no idea", q) == extract_answer("The answer is unknowable", q));
    CHECK(extract_answer("no idea", q) == NormalizedAnswer::invalid(TaskKind::Numeric));
}
