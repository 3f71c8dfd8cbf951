import cmath
from fractions import Fraction

import pytest
from hypothesis import given, settings

from conftest import small_cyc
from photonsearch.cyclo import I, INV_SQRT2, ONE, SQRT2, ZERO, ZETA, CycNum, add, conj, mul, phase, to_complex


def test_add_examples():
    assert add(ZETA, ZETA**3).coeffs == (0, 1, 0, 1)
    assert add(SQRT2, ZETA**3 - ZETA) == ZERO
    assert add(I, I).coeffs == (0, 0, 2, 0)


def test_mul_examples():
    assert mul(I, I) == -ONE
    assert mul(SQRT2, SQRT2) == CycNum(2)
    assert mul(phase(3), phase(5)) == ONE


def test_conj_examples():
    assert conj(I) == -I
    assert conj(SQRT2) == SQRT2
    assert conj(phase(1)) == phase(7)


@pytest.mark.parametrize(
    "value, expected",
    [(SQRT2, 2**0.5), (phase(2), 1j), (INV_SQRT2, 0.5**0.5)],
)
def test_to_complex_examples(value, expected):
    assert abs(to_complex(value) - expected) < 1e-15


@pytest.mark.parametrize("k", range(8))
def test_phase_round_trip(k):
    assert abs(to_complex(phase(k)) - cmath.exp(1j * k * cmath.pi / 4)) < 1e-15


def test_zeta_fourth_power_is_minus_one():
    assert ZETA**4 == -ONE
    assert ZETA**8 == ONE


def test_canonical_reduction():
    x = CycNum(Fraction(2, 4), Fraction(-3, 6))
    assert x.numerators == (1, -1, 0, 0) and x.denominator == 2
    assert CycNum.from_ints((0, 0, 0, 0), 7).denominator == 1
    assert hash(CycNum(Fraction(1, 2))) == hash(CycNum.from_ints((2, 0, 0, 0), 4))


def test_division_and_inverse():
    x = CycNum(1, 2, -1, 3)
    assert x * x.inverse() == ONE
    assert (x / SQRT2) * SQRT2 == x
    with pytest.raises(ZeroDivisionError):
        ZERO.inverse()


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1", ONE),
        ("i", I),
        ("1/2ζ - 1/2ζ³", INV_SQRT2),
        ("(1) + (0)ζ + (0)ζ² + (0)ζ³", ONE),
        ("-z^2", -I),
    ],
)
def test_parse(text, expected):
    assert CycNum.parse(text) == expected


@given(small_cyc())
def test_render_and_str_round_trip(x):
    assert CycNum.parse(x.render()) == x
    assert CycNum.parse(str(x)) == x
    assert CycNum.from_json(x.to_json()) == x


@settings(max_examples=200)
@given(small_cyc(), small_cyc(), small_cyc())
def test_field_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + b == b + a and a * b == b * a
    assert a - a == ZERO


@given(small_cyc(), small_cyc())
def test_to_complex_is_multiplicative(a, b):
    assert abs(to_complex(a * b) - to_complex(a) * to_complex(b)) < 1e-12 * max(1, abs(to_complex(a * b)))


@given(small_cyc())
def test_times_conjugate_is_real_nonnegative(a):
    z = to_complex(a * conj(a))
    assert abs(z.imag) < 1e-12
    assert abs(z.real - abs(to_complex(a)) ** 2) < 1e-12 * max(1, z.real)


@given(small_cyc())
def test_conj_is_an_involutive_automorphism(a):
    assert conj(conj(a)) == a
    assert conj(a * ZETA) == conj(a) * conj(ZETA)
