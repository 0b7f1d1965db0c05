import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toxsem.sentiment import (
    COMMA,
    Lexicon,
    default_lexicon,
    load_lexicon,
    micro_lexicon,
    score_review,
    score_sentence,
    split_sentences,
)

MICRO = micro_lexicon()


def sent(text, lex=MICRO):
    (tokens,) = split_sentences(text)
    return score_sentence(tokens, lex)


# --------------------------------------------------------------------------
# worked examples


def test_micro_lexicon_contents():
    assert dict(MICRO.polarity) == {"love": 0.75, "hate": -0.75, "good": 0.5, "bad": -0.5}
    assert {w for w, c in MICRO.shifters.items() if c == "negator"} == {"not", "never", "don't"}
    assert {w for w, c in MICRO.shifters.items() if c == "amplifier"} == {"very"}


def test_plain_positive_sentence():
    assert abs(sent("i love this app") - 0.375) <= 1e-9


def test_negated_sentence():
    assert abs(sent("i do not love this app") - (-0.75 / math.sqrt(6))) <= 1e-9


def test_neutral_sentence():
    assert sent("the box is rectangular") == 0.0


def test_review_average_of_identical_sentences():
    r = score_review("i love this app. i love this app.", MICRO)
    assert r.sentence_scores == (0.375, 0.375) and r.average == 0.375


def test_review_symmetric_cancellation():
    r = score_review("i love this app. i hate this app.", MICRO)
    assert r.sentence_scores == (0.375, -0.375) and r.average == 0.0


def test_empty_review():
    r = score_review("", MICRO)
    assert r.sentence_scores == () and r.average == 0.0


# --------------------------------------------------------------------------
# sentence splitting


def test_two_terminals_two_sentences():
    assert len(split_sentences("Great app. Crashes sometimes!")) == 2


def test_no_terminal_one_sentence():
    assert split_sentences("no terminal punctuation") == [["no", "terminal", "punctuation"]]


def test_empty_text_no_sentences():
    assert split_sentences("") == []
    assert split_sentences("  ...  ") == []


def test_abbreviations_and_decimals_do_not_split():
    out = split_sentences("Dr. Who rated it 2.5 stars e.g. on v1.2 builds. Fine!")
    assert len(out) == 2
    assert out[0][:2] == ["dr", "who"]


def test_terminal_runs_count_once():
    assert len(split_sentences("Wow!!! Really?? ok...")) == 3


def test_commas_kept_as_barriers():
    (tokens,) = split_sentences("bad, but ok,, fine")
    assert tokens == ["bad", COMMA, "but", "ok", COMMA, "fine"]


def test_lowercase_and_punctuation_stripped():
    assert split_sentences("I DON'T like (this)") == [["i", "don't", "like", "this"]]


# --------------------------------------------------------------------------
# shifters


def test_amplifier_multiplies():
    assert sent("very good") == pytest.approx(0.5 * 1.8 / math.sqrt(2), abs=1e-12)


def test_deamplifier_multiplies():
    lex = default_lexicon()
    w = lex.polarity["good"]
    assert sent("slightly good", lex) == pytest.approx(w * 0.2 / math.sqrt(2), abs=1e-12)


def test_double_negation_cancels():
    assert sent("not never good") == pytest.approx(0.5 / math.sqrt(3))


def test_comma_stops_the_window():
    assert sent("not, good") == pytest.approx(0.5 / math.sqrt(2))


def test_window_sizes():
    # negator 5 words before is outside the 4-word window
    assert sent("not a b c d good") > 0
    assert sent("not a b c good") < 0
    # negator 2 words after is inside, 3 words after is outside
    assert sent("good a not") < 0
    assert sent("good a b not") > 0


def test_adversative_reweights_both_sides():
    lex = default_lexicon()
    good, bad = lex.polarity["good"], lex.polarity["bad"]
    expected = (good * 0.2 + bad * 1.8) / math.sqrt(3)
    assert sent("good but bad", lex) == pytest.approx(expected, abs=1e-12)


def test_unknown_tokens_contribute_nothing():
    assert sent("🙂 zxq good") == pytest.approx(0.5 / math.sqrt(2))


# --------------------------------------------------------------------------
# properties

FILLER = ["i", "this", "app", "is", "the", "it", "was", "a"]
_word = st.sampled_from(FILLER + ["love", "hate", "good", "bad", "not", "never", "don't",
                                  "very", COMMA])
_sentence = st.lists(_word, min_size=1, max_size=14).filter(
    lambda ts: any(t != COMMA for t in ts))


def _flip(lex):
    return Lexicon({w: -v for w, v in lex.polarity.items()}, lex.shifters, lex.amplifier_weight,
                   lex.window_before, lex.window_after)


@settings(max_examples=1000)
@given(_sentence)
def test_odd_symmetry(tokens):
    assert score_sentence(tokens, _flip(MICRO)) == -score_sentence(tokens, MICRO)


@settings(max_examples=1000)
@given(st.lists(st.sampled_from(FILLER), max_size=6), st.sampled_from(["love", "hate", "good",
                                                                        "bad"]),
       st.lists(st.sampled_from(FILLER), max_size=6))
def test_single_negator_flips_sign(before, word, after):
    plain = before + [word] + after
    negated = before + ["not", word] + after
    a = score_sentence(plain, MICRO)
    b = score_sentence(negated, MICRO)
    assert math.copysign(1, a) == -math.copysign(1, b)
    assert abs(b) == pytest.approx(abs(a) * math.sqrt(len(plain)) / math.sqrt(len(negated)),
                                   rel=1e-12)


@settings(max_examples=500)
@given(st.lists(st.sampled_from(FILLER + ["love", "hate", "good", "bad", "not", "never",
                                          COMMA]), min_size=1, max_size=14)
       .filter(lambda ts: any(t != COMMA for t in ts)))
def test_bound_without_amplifiers(tokens):
    words = [t for t in tokens if t != COMMA]
    bound = sum(abs(MICRO.polarity.get(w, 0.0)) for w in words) / math.sqrt(len(words))
    assert abs(score_sentence(tokens, MICRO)) <= bound + 1e-12


@settings(max_examples=200)
@given(st.text(max_size=200))
def test_score_review_total_and_deterministic(text):
    a = score_review(text, MICRO)
    assert a == score_review(text, MICRO)
    if a.sentence_scores:
        assert a.average == pytest.approx(sum(a.sentence_scores) / len(a.sentence_scores))
    else:
        assert a.average == 0.0


# --------------------------------------------------------------------------
# lexicon files


def test_load_lexicon_formats():
    lex = load_lexicon(io.StringIO("# c\n\nGood\t0.5\nbad,-0.5\nnot\tnegator\n"),
                       window_before=2)
    assert lex.polarity == {"good": 0.5, "bad": -0.5}
    assert lex.shifters == {"not": "negator"} and lex.window_before == 2


def test_lexicon_validation():
    with pytest.raises(ValueError):
        Lexicon({"x": 1.5})
    with pytest.raises(ValueError):
        Lexicon({}, {"x": "booster"})
    with pytest.raises(ValueError):
        Lexicon({}, window_before=-1)
    with pytest.raises(ValueError, match="two shifter classes"):
        load_lexicon(io.StringIO("so\tamplifier\nso\tnegator\n"))


def test_default_lexicon_loads():
    lex = default_lexicon()
    assert len(lex.polarity) > 100
    assert set(lex.shifters.values()) == {"negator", "amplifier", "deamplifier", "adversative"}
