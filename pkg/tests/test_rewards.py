import math

import pytest
from hypothesis import given, strategies as st

from chartkit.rewards import (
    AnswerKind,
    FormatError,
    FormatViolation,
    GoldAnswer,
    RewardConfig,
    accuracy_reward,
    format_reward,
    levenshtein,
    numeric_reward,
    parse_number,
    parse_response,
    string_reward,
    total_reward,
)


class TestParseResponse:
    def test_minimal_well_formed(self):
        parsed = parse_response("<think>sum bars</think><answer>42</answer>")
        assert parsed.think == "sum bars"
        assert parsed.answer == "42"

    def test_surrounding_whitespace_ok(self):
        parsed = parse_response("  <think>a</think>\n\n<answer>b</answer>\n")
        assert (parsed.think, parsed.answer) == ("a", "b")

    def test_missing_answer(self):
        with pytest.raises(FormatError) as exc:
            parse_response("<think>a</think>")
        assert exc.value.violation is FormatViolation.MISSING_ANSWER

    def test_missing_think(self):
        with pytest.raises(FormatError) as exc:
            parse_response("<answer>a</answer>")
        assert exc.value.violation is FormatViolation.MISSING_THINK

    def test_duplicate_think(self):
        with pytest.raises(FormatError) as exc:
            parse_response("<think>a</think><think>b</think><answer>c</answer>")
        assert exc.value.violation is FormatViolation.DUPLICATE_TAG

    def test_duplicate_answer(self):
        with pytest.raises(FormatError) as exc:
            parse_response("<think>a</think><answer>b</answer><answer>c</answer>")
        assert exc.value.violation is FormatViolation.DUPLICATE_TAG

    def test_extra_content(self):
        with pytest.raises(FormatError) as exc:
            parse_response("preamble <think>a</think><answer>b</answer>")
        assert exc.value.violation is FormatViolation.EXTRA_CONTENT

    def test_wrong_order_rejected(self):
        with pytest.raises(FormatError) as exc:
            parse_response("<answer>b</answer><think>a</think>")
        assert exc.value.violation is FormatViolation.EXTRA_CONTENT

    def test_wrong_order_allowed_when_relaxed(self):
        parsed = parse_response("<answer>b</answer><think>a</think>", enforce_order=False)
        assert (parsed.think, parsed.answer) == ("a", "b")

    def test_empty_spans(self):
        with pytest.raises(FormatError) as exc:
            parse_response("<think>   </think><answer>b</answer>")
        assert exc.value.violation is FormatViolation.EMPTY_SPAN

    def test_reserialized_round_trip(self):
        parsed = parse_response("<think> multi\nline </think><answer> x y </answer>")
        again = parse_response(
            f"<think>{parsed.think}</think><answer>{parsed.answer}</answer>"
        )
        assert again == parsed


class TestFormatReward:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("<think>x</think><answer>y</answer>", 1.0),
            ("answer is y", 0.0),
            ("<answer>y</answer><think>x</think>", 0.0),
        ],
    )
    def test_examples(self, text, expected):
        assert format_reward(text) == expected

    @given(st.text(max_size=80))
    def test_consistent_with_parser(self, text):
        try:
            parse_response(text)
            ok = True
        except FormatError:
            ok = False
        assert format_reward(text) == (1.0 if ok else 0.0)


class TestNumericReward:
    @pytest.mark.parametrize(
        "pred,gold,tol,expected",
        [
            ("104", 100.0, 0.05, 1.0),
            ("106", 100.0, 0.05, 0.0),
            ("95", 100.0, 0.05, 1.0),  # boundary inclusive
            ("105", 100.0, 0.05, 1.0),
            ("not a number", 100.0, 0.05, 0.0),
            ("0", 0.0, 0.05, 1.0),
            ("1e-12", 0.0, 0.05, 1.0),
            ("0.5", 0.0, 0.05, 0.0),
        ],
    )
    def test_examples(self, pred, gold, tol, expected):
        assert numeric_reward(pred, gold, tol) == expected

    @pytest.mark.parametrize(
        "pred,value",
        [
            ("$1,234", 1234.0),
            ("  42 ", 42.0),
            ("45%", 45.0),
            ("1.5e3", 1500.0),
            ("-3.25", -3.25),
            ("€ 99", 99.0),
        ],
    )
    def test_canonicalization(self, pred, value):
        assert parse_number(pred) == value

    @pytest.mark.parametrize("pred", ["", "two", "$", "1.2.3", "1e", "4 2"])
    def test_non_numeric(self, pred):
        assert parse_number(pred) is None

    def test_scale_invariance(self):
        for c in (0.001, 0.5, 3.0, 1e6):
            assert numeric_reward(str(104 * c), 100 * c, 0.05) == 1.0
            assert numeric_reward(str(106 * c), 100 * c, 0.05) == 0.0

    def test_rejects_nonpositive_tol(self):
        with pytest.raises(ValueError):
            numeric_reward("1", 1.0, 0.0)


class TestStringReward:
    def test_case_insensitive_exact(self):
        assert string_reward("Paris", "paris") == 1.0

    def test_one_edit(self):
        assert string_reward("cat", "cut") == pytest.approx(2 / 3, abs=1e-9)

    def test_empty_vs_nonempty(self):
        assert string_reward("", "abc") == 0.0

    def test_both_empty(self):
        assert string_reward("", "   ") == 1.0

    @given(st.text(max_size=20), st.text(max_size=20))
    def test_symmetric_and_bounded(self, a, b):
        r = string_reward(a, b)
        assert r == string_reward(b, a)
        assert 0.0 <= r <= 1.0

    @given(st.text(max_size=20))
    def test_self_is_one(self, a):
        assert string_reward(a, a) == 1.0

    def test_levenshtein_basics(self):
        assert levenshtein("", "") == 0
        assert levenshtein("abc", "") == 3
        assert levenshtein("kitten", "sitting") == 3


class TestGoldAnswer:
    def test_numeric_classification(self):
        gold = GoldAnswer.from_raw(" $1,200 ")
        assert gold.kind is AnswerKind.NUMERIC
        assert gold.value == 1200.0

    def test_text_classification(self):
        assert GoldAnswer.from_raw("blue bar").kind is AnswerKind.TEXT


class TestAccuracyAndTotal:
    cfg = RewardConfig()

    def test_numeric_within_tolerance(self):
        gold = GoldAnswer.from_raw("4.0")
        assert accuracy_reward("<think>t</think><answer>3.9</answer>", gold, self.cfg) == 1.0

    def test_format_gate(self):
        gold = GoldAnswer.from_raw("4.0")
        assert accuracy_reward("no tags 4.0", gold, self.cfg) == 0.0

    def test_text_partial_credit(self):
        gold = GoldAnswer.from_raw("blue car")
        score = accuracy_reward("<think>t</think><answer>blue bar</answer>", gold, self.cfg)
        # one substitution over max length 8
        assert score == pytest.approx(1 - 1 / 8, abs=1e-9)

    def test_total_exact_match(self):
        gold = GoldAnswer.from_raw("7")
        out = total_reward("<think>t</think><answer>7</answer>", gold, self.cfg)
        assert (out.format, out.accuracy, out.total, out.parse_ok) == (1.0, 1.0, 2.0, True)

    def test_total_malformed(self):
        out = total_reward("nope", GoldAnswer.from_raw("7"), self.cfg)
        assert (out.format, out.accuracy, out.total, out.parse_ok) == (0.0, 0.0, 0.0, False)

    def test_total_wrong_number(self):
        out = total_reward("<think>t</think><answer>9</answer>", GoldAnswer.from_raw("7"), self.cfg)
        assert (out.format, out.accuracy, out.total) == (1.0, 0.0, 1.0)

    def test_weights(self):
        cfg = RewardConfig(w_acc=2.0, w_fmt=0.5)
        out = total_reward("<think>t</think><answer>7</answer>", GoldAnswer.from_raw("7"), cfg)
        assert out.total == pytest.approx(2.5)

    def test_deterministic(self):
        gold = GoldAnswer.from_raw("blue")
        text = "<think>look</think><answer>blu</answer>"
        assert total_reward(text, gold, self.cfg) == total_reward(text, gold, self.cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RewardConfig(rel_tol=-0.1)
        with pytest.raises(ValueError):
            RewardConfig(w_acc=-1.0)
