import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GHZ3, ket_state, small_cyc
from photonsearch.cyclo import ONE, phase
from photonsearch.elements import BeamSplitter, Spdc
from photonsearch.objectives import (
    GatePattern,
    GhzPattern,
    SrvRegistry,
    SrvScan,
    SrvTarget,
    TargetState,
    certificate_from_json,
    cheap_state_check,
    gate_match,
    ghz_match,
    match_gate_table,
    parse_objective,
    srv_objective,
)
from photonsearch.setup import Setup
from photonsearch.state import DetectionSpec, PhotonicState, srv


@pytest.mark.parametrize(
    "kets, dims, expected",
    [
        ([(0, 0, 0), (1, 1, 1), (2, 2, 2)], 3, True),
        ([(0, 0, 0), (1, 1, 1)], 3, False),
        ([(0, 0, 0), (0, 1, 1), (0, 2, 2)], 3, False),
    ],
)
def test_cheap_state_check_examples(kets, dims, expected):
    assert cheap_state_check(ket_state(*kets), dims) is expected


def test_ghz_match_on_ghz3():
    cert = ghz_match(GHZ3, 3)
    assert cert.slot_modes == ((0, 1, 2),) * 3
    assert cert.mavericks == ()


def test_ghz_match_rejects_332_state():
    assert ghz_match(ket_state((0, 0, 0), (1, 1, 1), (2, 2, 1)), 3) is None


def test_ghz_match_with_one_maverick():
    state = ket_state((0, 0, 0), (1, 1, 1), (2, 2, 2), (3, 0, 1))
    cert = ghz_match(state, 3, allow_mavericks=True)
    assert cert is not None
    assert cert.mavericks == (((3, 0, 1), (0,)),)
    assert ghz_match(state, 3, allow_mavericks=False) is None


def test_maverick_without_outside_mode_blocks_match():
    # (0,1,2) reuses core modes in every slot: no filter removes it
    assert ghz_match(ket_state((0, 0, 0), (1, 1, 1), (2, 2, 2), (0, 1, 2)), 3) is None


def test_strict_core_has_full_srv():
    cert = ghz_match(GHZ3, 3, allow_mavericks=False)
    assert srv(cert.core_state()) == (3, 3, 3)


def test_srv_objective_examples():
    assert srv_objective(GHZ3, SrvTarget(frozenset([(3, 3, 3)]))) == ((3, 3, 3), True)
    assert srv_objective(ket_state((0, 0, 0)), SrvScan()) is None
    reg = SrvRegistry([(4, 2, 2)])
    s422 = ket_state((0, 0, 0), (1, 0, 1), (2, 1, 0), (3, 1, 1))
    assert srv_objective(s422, SrvScan(), reg) == ((4, 2, 2), False)


def test_registry_reports_novelty_once():
    reg = SrvRegistry()
    assert reg.insert((3, 3, 2)) is True
    assert reg.insert((3, 3, 2)) is False
    assert reg.counts() == {(3, 3, 2): 2}
    assert (3, 3, 2) in reg.snapshot()


def test_target_state_objective():
    obj = TargetState(GHZ3, 0.99)
    assert obj.check_state(GHZ3).fidelity == pytest.approx(1.0)
    assert obj.check_state(ket_state((0, 0, 0), (1, 1, 1))) is None


@pytest.mark.parametrize("text", ["ghz:3", "ghz:2:strict", "srv:4,2,2/3,3,2", "srvscan", "gate:2,3"])
def test_objective_text_round_trip(text):
    assert parse_objective(text).text() == text


@pytest.mark.parametrize("text", ["ghz", "ghz:1", "nope", "srv:", "gate:2"])
def test_bad_objective_text(text):
    with pytest.raises(ValueError):
        parse_objective(text)


def test_certificates_json_round_trip():
    cert = ghz_match(ket_state((0, 0, 0), (1, 1, 1), (2, 2, 2), (3, 0, 1), amps=[ONE, phase(3), ONE, ONE]), 3)
    data = json.loads(json.dumps(cert.to_json()))
    assert certificate_from_json(data) == cert
    gate = match_gate_table({(0, t): (0, t) for t in range(3)} | {(1, t): (1, (t + 1) % 3) for t in range(3)},
                            [0, 1], [0, 1, 2])
    assert certificate_from_json(json.loads(json.dumps(gate.to_json()))) == gate


# -- invariance and soundness ---------------------------------------------------------

slot_state = st.dictionaries(
    st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3)), small_cyc(2), min_size=1, max_size=6
).map(PhotonicState.from_slots)


@settings(max_examples=150, deadline=None)
@given(slot_state, st.integers(2, 3))
def test_cheap_check_is_sound(state, dims):
    if state.is_empty() or cheap_state_check(state, dims):
        return
    assert ghz_match(state, dims) is None
    assert min(srv(state)) < dims


@settings(max_examples=80, deadline=None)
@given(slot_state, st.permutations(range(4)), st.integers(0, 2), st.integers(0, 7), st.booleans())
def test_ghz_match_invariances(state, perm, slot, k, mav):
    if state.is_empty():
        return
    found = ghz_match(state, 2, mav) is not None
    relabeled = PhotonicState.from_slots(
        {tuple(perm[m] if i == slot else m for i, (_, m) in enumerate(t)): a for t, a in state.items()}
    )
    first = next(iter(state))
    twisted = PhotonicState({t: a * phase(k) if t == first else a for t, a in state.items()})
    assert (ghz_match(relabeled, 2, mav) is not None) == found
    assert (ghz_match(twisted, 2, mav) is not None) == found


# -- gates ---------------------------------------------------------------------

A, B = 0, 1


def _oracle(shift_when_odd):
    def run(state):
        out = {}
        for term, amp in state.items():
            (_, c), (_, t) = sorted(term)
            t2 = t + shift_when_odd(c) if c % 2 else t
            out[((A, c), (B, t2))] = amp
        return PhotonicState(out)

    return run


def test_parity_controlled_shift_oracle_matches():
    pattern = GatePattern(2, 3, control_modes=(0, 1), target_modes=(-1, 0, 1))
    cert = gate_match(_oracle(lambda c: 1), pattern)
    assert cert is not None
    assert cert.control_out == ((0, 0, 0), (1, 1, 1))
    assert cert.target_out == ((-1, 0, 1), (0, 1, 2))


def test_identity_setup_is_not_a_gate():
    setup = Setup((0, 1, 2, 3), (Spdc(0, 2, 3), Spdc(1, 3, 3)), (), DetectionSpec(3, 0, (0, 1, 2)))
    assert gate_match(setup, GatePattern()) is None


def test_output_collision_is_not_a_gate():
    def collide(state):
        out = {}
        for term, amp in state.items():
            (_, c), (_, t) = sorted(term)
            t2 = (t + 1 if c % 2 else t) if t != 1 else 0
            out[((A, c), (B, t2))] = amp
        return PhotonicState(out)

    pattern = GatePattern(2, 3, control_modes=(0, 1), target_modes=(-1, 0, 1))
    assert gate_match(collide, pattern) is None


def test_gate_on_real_setup_runs():
    # a beam splitter produces superpositions, which the single-term rule rejects
    setup = Setup((0, 1, 2, 3), (Spdc(0, 2, 3), Spdc(1, 3, 3)), (BeamSplitter(0, 1),), DetectionSpec(3, 0, (0, 1, 2)))
    assert gate_match(setup, GatePattern()) is None
    assert GatePattern().evaluate(setup) is None


def test_ghz_objective_evaluates_setup():
    trunc = (Spdc(0, 1, 2, (0, 1)), Spdc(2, 3, 2, (0, 1)))
    setup = Setup((0, 1, 2, 3), trunc, (BeamSplitter(1, 3),), DetectionSpec(3, 0, (0, 1, 2)))
    assert GhzPattern(2).evaluate(setup) is not None
    assert GhzPattern(3).evaluate(setup) is None
