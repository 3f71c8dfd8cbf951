import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonsearch.cyclo import ONE, ZERO
from photonsearch.elements import (
    BeamSplitter,
    Composite,
    DovePrism,
    Hologram,
    ParitySorter,
    PhaseShifter,
    Reflection,
    Spdc,
    default_toolbox,
    parse_element,
)
from photonsearch.objectives import SrvTarget, ghz_match
from photonsearch.search import SearchConfig, random_setup
from photonsearch.setup import (
    Setup,
    format_setup,
    mixes_pairs,
    parse_setup,
    render_setup,
    simplify,
    simulate,
    to_composite,
)
from photonsearch.state import DetectionSpec, PhotonicState, exact_rank, srv

A, B, C, D = range(4)
PATHS = (A, B, C, D)
DET = DetectionSpec(D, 0, (A, B, C))
DIM1 = (Spdc(A, B, 1), Spdc(C, D, 1))
DIM3 = (Spdc(A, B, 3), Spdc(C, D, 3))
TRUNC = (parse_element("SPDC[a,b,oam=0..1]"), parse_element("SPDC[c,d,oam=0..1]"))


def make(sources, *elements, detection=DET):
    return Setup(PATHS, sources, elements, detection)


def test_dim1_no_elements():
    assert simulate(make(DIM1)) == PhotonicState({((A, 0), (B, 0), (C, 0)): ONE})


def test_dim1_parity_sorter_is_identity_on_even_modes():
    assert simulate(make(DIM1, ParitySorter(B, C))) == simulate(make(DIM1))


def test_two_dim_ghz_witness_from_truncated_sources():
    state = simulate(make(TRUNC, BeamSplitter(B, D)))
    assert len(state) == 2
    cert = ghz_match(state, dims=2, allow_mavericks=False)
    assert cert is not None
    assert srv(state) == (2, 2, 2)


def test_parity_sorter_between_crystals_gives_product_term():
    # only the |000> coincidence survives the sorter when oam is in {0, 1}
    state = simulate(make(TRUNC, ParitySorter(B, C)))
    assert srv(state) == (1, 1, 1)


@pytest.mark.parametrize("method", ["fast", "reference"])
def test_methods_agree_on_witness(method):
    assert simulate(make(TRUNC, BeamSplitter(B, D)), method=method) == simulate(make(TRUNC, BeamSplitter(B, D)))


@pytest.mark.parametrize(
    "elements, expected",
    [
        ((), False),
        ((BeamSplitter(B, C),), True),
        ((BeamSplitter(A, B),), False),
        ((Reflection(A), DovePrism(C, 1)), False),
        ((BeamSplitter(A, B), ParitySorter(B, C)), True),
        ((Composite("x", (BeamSplitter(A, D),)),), True),
    ],
)
def test_mixes_pairs_examples(elements, expected):
    assert mixes_pairs(make(DIM3, *elements)) is expected


def _crystal_product(state):
    """Coefficient matrix between crystal-1 slots (a, b) and crystal-2 slot (c) has rank <= 1."""
    rows = sorted({(t[0][1], t[1][1]) for t in state})
    cols = sorted({t[2][1] for t in state})
    m = [[state.terms.get(((A, r[0]), (B, r[1]), (C, c)), ZERO) for c in cols] for r in rows]
    return exact_rank(m) <= 1


def test_mixes_pairs_soundness_exhaustive():
    pool = [BeamSplitter(*p) for p in itertools.combinations(PATHS, 2)]
    pool += [ParitySorter(*p) for p in itertools.combinations(PATHS, 2)]
    checked = 0
    for n in range(4):
        for chain in itertools.product(pool, repeat=n):
            setup = make(DIM3, *chain)
            if mixes_pairs(setup):
                continue
            state = simulate(setup)
            assert state.is_empty() or _crystal_product(state), format_setup(setup)
            checked += 1
    assert checked > 50


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fast_and_reference_simulation_agree(seed):
    cfg = SearchConfig(max_elements=6, toolbox=default_toolbox())
    setup = random_setup(cfg, np.random.default_rng(seed))
    assert simulate(setup, "fast") == simulate(setup, "reference")


def test_fast_path_handles_double_emission_flag():
    s = Setup(PATHS, DIM3, (BeamSplitter(A, C), Hologram(B, 1)), DET, double_emission=False)
    assert simulate(s, "fast") == simulate(s, "reference")


def test_simplify_removes_trailing_phase_shifter():
    base = make(DIM3, BeamSplitter(B, C))
    target = SrvTarget(frozenset([srv(simulate(base))]))
    assert simplify(base.with_elements(base.elements + (PhaseShifter(A, 3),)), target) == base


def test_simplify_fixpoint_on_minimal_setup():
    base = make(DIM3, BeamSplitter(B, C))
    target = SrvTarget(frozenset([srv(simulate(base))]))
    assert simplify(base, target) == base


def test_simplify_removes_redundant_reflections_on_unused_path():
    base = make(DIM3, BeamSplitter(B, C))
    padded = make(DIM3, Reflection(D), BeamSplitter(B, C), Reflection(D))
    target = SrvTarget(frozenset([srv(simulate(base))]))
    assert simplify(padded, target) == base


def test_simplify_requires_satisfied_objective():
    with pytest.raises(ValueError):
        simplify(make(DIM3), SrvTarget(frozenset([(3, 3, 3)])))


def test_to_composite_matches_sequential_chain():
    chain = (BeamSplitter(A, C), DovePrism(B, 2), ParitySorter(B, D))
    setup = make(DIM3, *chain)
    wrapped = make(DIM3, to_composite(setup, "w"))
    assert simulate(wrapped, "reference") == simulate(setup, "reference")
    assert simulate(make(DIM3, to_composite(make(DIM3), "id"))) == simulate(make(DIM3))
    single = to_composite(make(DIM3, BeamSplitter(A, B)), "bs")
    assert simulate(make(DIM3, single)) == simulate(make(DIM3, BeamSplitter(A, B)))


def test_setup_file_round_trip():
    setup = make(TRUNC, BeamSplitter(B, D), Hologram(C, -1), Composite("x", (ParitySorter(A, B),)))
    text = format_setup(setup)
    assert parse_setup(text) == setup
    assert format_setup(parse_setup(text)) == text


@pytest.mark.parametrize(
    "text",
    [
        "paths: a b c d\nsource: SPDC[a,b,dim=3]\nsource: SPDC[c,d,dim=3]\n",
        "paths: a b c d\nsource: SPDC[a,b,dim=3]\nsource: SPDC[b,c,dim=3]\ndetect: trigger=d:0 coincidence=a,b,c\n",
        "paths: a b c d\nsource: SPDC[a,b,dim=3]\nsource: SPDC[c,d,dim=3]\ndetect: trigger=d:0 coincidence=a,b,c\nBS[a,e]\n",
        "paths: a b c d\nsource: SPDC[a,b,dim=3]\nsource: SPDC[c,d,dim=3]\ndetect: trigger=d:0 coincidence=a,b,c\nHolo[a,+9]\n",
    ],
)
def test_invalid_setup_files(text):
    with pytest.raises(ValueError):
        parse_setup(text)


def test_render_has_one_row_per_path():
    out = render_setup(make(DIM3, BeamSplitter(A, C), DovePrism(B, 2)))
    lines = out.splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("a ") and "[BS]" in lines[0] and "[BS]" in lines[2]
    assert "T(0)" in lines[3]
