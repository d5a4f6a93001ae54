import pytest
from hypothesis import given
from hypothesis import strategies as st

from protorecon.parsimony import Candidate
from protorecon.ranker import (
    RankerConfig,
    brevity_penalty,
    classify_edits,
    consonant_runs,
    edit_penalty,
    pds_from_counts,
    pds_score,
    rank_candidates,
    structural_adjust,
)

from oracles import mp_pds

ANOM_REFLEXES = [tuple("an"), tuple("ano"), tuple("ano"), ("ɐ̃", "w")]


def test_pds_worked_value():
    assert pds_from_counts(5, 2, 3, 1) == pytest.approx(-3.924743, abs=5e-7)
    assert pds_from_counts(5, 2, 3, 1) == pytest.approx(float(mp_pds(5, 2, 3, 1)), abs=1e-9)


@pytest.mark.parametrize("n", range(1, 9))
def test_pds_unanimity(n):
    assert pds_score(tuple("ano"), [tuple("ano")] * n) == -n


def test_classify_conditioned_edit():
    ec = classify_edits(tuple("anom"), tuple("ano"))
    assert (ec.m, ec.cond) == (1, 1)
    assert ec.script == [("del", 3, "m", "", "o", "")]


def test_classify_counts_distinct_types():
    ec = classify_edits(tuple("aa"), tuple("oo"))
    assert ec.m == 1
    assert classify_edits(tuple("aa"), tuple("oo"), count_tokens=True).m == 2


def test_single_segment_edit_is_unconditioned():
    ec = classify_edits(("a",), ("o",))
    assert (ec.m, ec.cond) == (1, 0)


def test_brevity_and_edit_penalties():
    assert brevity_penalty(tuple("ano"), ANOM_REFLEXES) == pytest.approx(-5 * abs(3 - 2.5))
    assert edit_penalty(tuple("ano"), ANOM_REFLEXES) == pytest.approx(-5 * (1 + 0 + 0 + 3) / 4)


def test_structural_terms(table):
    assert structural_adjust(tuple("ano"), ANOM_REFLEXES, table) == 0
    # no vowel, shorter than every reflex
    assert structural_adjust(("n",), ANOM_REFLEXES, table) == pytest.approx(-6.0 - 2.0)
    # invalid word-initial velar nasal
    assert structural_adjust(("ŋ", "a"), [("ŋ", "a")], table) == pytest.approx(-1.0)
    # four-consonant run
    assert structural_adjust(tuple("astrpa"), [tuple("astrpa")], table) == pytest.approx(-0.6)
    long = tuple("a" * 15)
    assert structural_adjust(long, [long], table) == pytest.approx(-0.4 * 3)


def test_length_mismatch_beyond_slack(table):
    d = structural_adjust(tuple("anoanoa"), [tuple("an")], table)
    assert d == pytest.approx(-0.3 * (7 - 2 - 2))


def test_consonant_runs(table):
    assert consonant_runs(tuple("abstrak"), table) == [4, 1]


def test_rank_anom(table):
    cands = [Candidate(tuple("ano"), 4.0), Candidate(tuple("an"), 4.0), Candidate(("ɐ̃", "w"), 6.0)]
    ranked = rank_candidates(cands, ANOM_REFLEXES, table)
    assert ranked[0].form == tuple("ano")
    scores = [c.score_components["score"] for c in ranked]
    assert scores == sorted(scores, reverse=True)
    assert set(ranked[0].score_components) >= {"pds", "brevity", "edit", "structural", "score"}


def test_similarity_filter_falls_back(table):
    cands = [Candidate(tuple("kkk"), 1.0)]
    assert rank_candidates(cands, [tuple("ano")], table)[0].form == tuple("kkk")


def test_config_validation():
    with pytest.raises(ValueError):
        RankerConfig(b=1)
    with pytest.raises(ValueError):
        RankerConfig(h=0)


@given(st.integers(1, 12), st.data())
def test_pds_matches_arbitrary_precision(n, data):
    loss = data.draw(st.integers(0, n))
    m = data.draw(st.integers(0, 20))
    cond = data.draw(st.integers(0, m))
    assert pds_from_counts(n, loss, m, cond) == pytest.approx(float(mp_pds(n, loss, m, cond)), abs=1e-9)
