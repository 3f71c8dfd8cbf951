import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GHZ3, ket_state, small_cyc
from photonsearch.cyclo import I, INV_SQRT2, ONE, ZERO, CycNum, phase
from photonsearch.elements import (
    BeamSplitter,
    DovePrism,
    Hologram,
    ParitySorter,
    PhaseShifter,
    Reflection,
    rules_of,
)
from photonsearch.state import (
    CutoffCounter,
    CutoffError,
    DetectionSpec,
    ModeLabel,
    PhotonicState,
    exact_rank,
    fidelity,
    inner,
    norm_squared,
    postselect,
    srv,
    substitute,
)

A, B, C, D = range(4)


def st_of(*terms):
    return PhotonicState({tuple(t): ONE for t in terms})


def test_substitute_single_photon_linearity():
    rules = {(A, 0): (((B, 0), INV_SQRT2), ((A, 0), I * INV_SQRT2))}
    out = substitute(st_of([(A, 0)]), rules)
    assert out[((B, 0),)] == INV_SQRT2
    assert out[((A, 0),)] == I * INV_SQRT2


def test_hong_ou_mandel_cancellation():
    out = substitute(st_of([(A, 0), (B, 0)]), rules_of(BeamSplitter(A, B)))
    half_i = I * CycNum.parse("1/2")
    assert out.terms == {((A, 0), (A, 0)): half_i, ((B, 0), (B, 0)): half_i}
    assert ((A, 0), (B, 0)) not in out.terms


def test_substitute_empty_rules_is_identity():
    assert substitute(GHZ3, {}) == GHZ3


def test_cutoff_policy_counts_or_raises():
    s = st_of([(A, 2)])
    counter = CutoffCounter()
    out = substitute(s, rules_of(Hologram(A, 1)), cutoff=2, counter=counter)
    assert out.is_empty() and counter.dropped == 1
    with pytest.raises(CutoffError):
        substitute(s, rules_of(Hologram(A, 1)), cutoff=2, strict=True)


@pytest.mark.parametrize(
    "term, survives",
    [
        ([(A, 0), (B, 1), (C, 2), (D, 0)], True),
        ([(A, 0), (A, 1), (C, 2), (D, 0)], False),
        ([(A, 0), (B, 1), (C, 2), (D, 1)], False),
    ],
)
def test_postselect(term, survives):
    det = DetectionSpec(D, 0, (A, B, C))
    out = postselect(st_of(term), det)
    assert out.is_empty() != survives
    if survives:
        assert list(out) == [((A, 0), (B, 1), (C, 2))]
        assert out.order == 3


@pytest.mark.parametrize(
    "kets, expected",
    [
        ([(0, 0, 0), (1, 1, 1), (2, 2, 2)], (3, 3, 3)),
        ([(0, 0, 0), (1, 1, 1), (2, 2, 1)], (3, 3, 2)),
        ([(0, 0, 0), (1, 0, 1), (2, 1, 0), (3, 1, 1)], (4, 2, 2)),
        ([(0, 0, 0)], (1, 1, 1)),
    ],
)
def test_srv_examples(kets, expected):
    assert srv(ket_state(*kets)) == expected


def test_srv_rejects_bunched_terms():
    with pytest.raises(ValueError):
        srv(st_of([(A, 0), (A, 1), (B, 0)]))


@pytest.mark.parametrize(
    "state, target, expected",
    [
        (GHZ3, GHZ3, 1.0),
        (ket_state((0, 0, 0)), ket_state((1, 1, 1)), 0.0),
        (ket_state((0, 0, 0), (1, 1, 1)), GHZ3, 2 / 3),
    ],
)
def test_fidelity_examples(state, target, expected):
    assert fidelity(state, target) == pytest.approx(expected, abs=1e-12)


def test_fidelity_of_empty_state_raises():
    with pytest.raises(ValueError, match="empty state"):
        fidelity(PhotonicState(order=3), GHZ3)


def test_text_round_trip_and_format():
    s = ket_state((0, 0, 0), (1, 1, 1), amps=[ONE, I])
    assert s.text() == "(1) |a:0 b:0 c:0⟩ + (ζ²) |a:1 b:1 c:1⟩"
    assert PhotonicState.parse(s.text()) == s
    assert PhotonicState.parse("|a:0 b:0 c:0> + |a:1 b:1 c:1>") == ket_state((0, 0, 0), (1, 1, 1))
    assert str(ModeLabel.parse("d:-2")) == "d:-2"


def test_detection_spec_validation():
    with pytest.raises(ValueError):
        DetectionSpec(A, 0, (A, B, C))
    det = DetectionSpec.parse("trigger=d:0 coincidence=a,b,c")
    assert det == DetectionSpec(D, 0, (A, B, C))
    assert DetectionSpec.parse(det.text()) == det


# -- properties -------------------------------------------------------------------

UNITARY = [
    BeamSplitter(A, B),
    Reflection(A),
    DovePrism(B, 3),
    PhaseShifter(A, 5),
    ParitySorter(A, B),
    Hologram(A, 0),
]

mode = st.tuples(st.sampled_from([A, B]), st.integers(-1, 1))
two_photon = st.dictionaries(st.lists(mode, min_size=2, max_size=2).map(tuple), small_cyc(2), min_size=1, max_size=5)


@settings(max_examples=60, deadline=None)
@given(two_photon, st.sampled_from(UNITARY))
def test_unitary_rules_preserve_norm_exactly(terms, element):
    s = PhotonicState(terms, order=2)
    out = substitute(s, rules_of(element, cutoff=2), cutoff=2)
    assert norm_squared(out) == norm_squared(s)


slot_state = st.dictionaries(
    st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3)), small_cyc(3), min_size=1, max_size=8
).map(PhotonicState.from_slots)


@settings(max_examples=80, deadline=None)
@given(slot_state, st.permutations(range(4)), st.integers(0, 2), st.integers(0, 7), st.data())
def test_srv_invariances(state, perm, slot, k, data):
    if state.is_empty():
        return
    base = srv(state)
    relabeled = PhotonicState.from_slots(
        {tuple(perm[m] if i == slot else m for i, (_, m) in enumerate(t)): a for t, a in state.items()}
    )
    assert srv(relabeled) == base
    key = data.draw(st.sampled_from(list(state)))
    twisted = PhotonicState({t: (a * phase(k) if t == key else a) for t, a in state.items()})
    assert srv(twisted) == base


@settings(max_examples=80, deadline=None)
@given(st.lists(st.lists(small_cyc(2), min_size=3, max_size=3), min_size=1, max_size=4))
def test_exact_rank_matches_numpy_on_small_matrices(rows):
    m = np.array([[x.to_complex() for x in r] for r in rows])
    assert exact_rank(rows) == np.linalg.matrix_rank(m, tol=1e-9)


def test_exact_rank_of_zero_matrix():
    assert exact_rank([[ZERO, ZERO], [ZERO, ZERO]]) == 0


def test_postselect_commutes_with_untouched_substitution():
    s = PhotonicState(
        {
            ((A, 0), (B, 1), (C, 0), (D, 0)): ONE,
            ((A, 1), (B, -1), (C, 1), (D, 0)): I,
            ((A, 0), (B, 0), (C, 1), (D, 1)): ONE,
        }
    )
    det = DetectionSpec(D, 0, (A, B, C))
    rules = rules_of(BeamSplitter(A, B))
    lhs = postselect(substitute(s, rules), det)
    rhs = substitute(postselect(s, det).scale(ONE), rules)
    rhs = PhotonicState({t: a for t, a in rhs.items() if len({p for p, _ in t}) == 3}, order=3)
    assert lhs == rhs


def test_inner_uses_bosonic_factor():
    s = st_of([(A, 0), (A, 0)])
    assert inner(s, s) == CycNum(2)
