import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forgeryqa.metrics import bleu4, detection_metrics, parse_authenticity


def test_parse_real_and_fake_answers():
    assert parse_authenticity("It is a real face.") == "real"
    assert parse_authenticity("This is an example of a fake face. The mouth looks off.") == "fake"


def test_parse_ambiguous_cases():
    assert parse_authenticity("") == "ambiguous"
    assert parse_authenticity("real or fake, who knows") == "ambiguous"
    assert parse_authenticity("The lighting is dim.") == "ambiguous"


def test_parse_is_token_level():
    assert parse_authenticity("surreal colors everywhere") == "ambiguous"
    assert parse_authenticity("REAL face") == "real"


def test_detection_all_correct():
    pairs = [("fake", True), ("real", False), ("fake", True)]
    m = detection_metrics(pairs)
    assert m.acc == 1.0 and m.f1 == 1.0 and m.precision == 1.0 and m.recall == 1.0


def test_detection_half_correct_oracle():
    # [fake, fake, real, real] vs [fake, real, fake, real]
    pairs = [("fake", True), ("fake", False), ("real", True), ("real", False)]
    m = detection_metrics(pairs)
    assert (m.tp, m.fp, m.fn, m.tn) == (1, 1, 1, 1)
    assert m.acc == 0.5 and m.precision == 0.5 and m.recall == 0.5 and m.f1 == 0.5


def test_detection_degenerate_no_positives():
    m = detection_metrics([("real", False), ("real", False)])
    assert m.recall == 0.0 and m.f1 == 0.0 and m.acc == 1.0


def test_detection_empty_rejected():
    with pytest.raises(ValueError):
        detection_metrics([])


def test_ambiguous_scored_incorrect_but_not_fp():
    m = detection_metrics([("ambiguous", False), ("real", False)])
    assert m.fp == 0 and m.tn == 1
    assert m.acc == 0.5
    assert m.ambiguous == 1
    m2 = detection_metrics([("ambiguous", True), ("fake", True)])
    assert m2.fn == 1 and m2.tp == 1
    assert m2.recall == 0.5


@settings(max_examples=150, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["real", "fake", "ambiguous"]), st.booleans()
        ),
        min_size=1,
        max_size=60,
    )
)
def test_detection_matches_brute_force(pairs):
    m = detection_metrics(pairs)
    # independent oracle following the documented convention
    tp = sum(1 for p, t in pairs if p == "fake" and t)
    fp = sum(1 for p, t in pairs if p == "fake" and not t)
    tn = sum(1 for p, t in pairs if p == "real" and not t)
    fn = sum(1 for p, t in pairs if p in ("real", "ambiguous") and t)
    assert (m.tp, m.fp, m.tn, m.fn) == (tp, fp, tn, fn)
    assert m.acc == pytest.approx((tp + tn) / len(pairs))
    assert m.precision == pytest.approx(tp / (tp + fp) if tp + fp else 0.0)
    assert m.recall == pytest.approx(tp / (tp + fn) if tp + fn else 0.0)
    expected_f1 = (
        2 * m.precision * m.recall / (m.precision + m.recall)
        if (m.precision + m.recall) > 0
        else 0.0
    )
    assert m.f1 == pytest.approx(expected_f1)


def test_bleu_identity_is_one():
    text = "the face in this image looks completely natural to me"
    assert bleu4(text, [text]) == pytest.approx(1.0, abs=1e-12)


def test_bleu_no_unigram_overlap_is_zero():
    assert bleu4("alpha beta gamma delta", ["one two three four"]) == 0.0


def test_bleu_empty_candidate_is_zero():
    assert bleu4("", ["anything here"]) == 0.0


def test_bleu_hand_computed_case():
    # candidate: "the cat sat on the mat", reference: "the cat is on the mat"
    # p1 = 5/6, p2 = 3/5, p3 = 1/4, p4 smoothed = 1/4, BP = 1 (c == r) so
    # bleu = (5/6 * 3/5 * 1/4 * 1/4) ** 0.25 = (1/32) ** 0.25 = 2 ** -1.25
    value = bleu4("the cat sat on the mat", ["the cat is on the mat"])
    assert value == pytest.approx(2.0 ** -1.25, abs=1e-9)


def test_bleu_brevity_penalty():
    # candidate is a 4-token prefix of an 8-token reference: precisions are
    # all 1, so bleu = BP = exp(1 - 8/4)
    ref = "one two three four five six seven eight"
    value = bleu4("one two three four", [ref])
    assert value == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_bleu_permutation_sensitive():
    ref = "the quick brown fox jumps over the lazy dog today"
    reordered = "dog lazy the over jumps fox brown quick the today"
    assert bleu4(ref, [ref]) > bleu4(reordered, [ref])


def test_bleu_multiple_references_take_max_counts():
    refs = ["the cat is here", "a dog was there"]
    assert bleu4("the cat is here", refs) == pytest.approx(1.0, abs=1e-12)
