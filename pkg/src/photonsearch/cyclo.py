"""Exact arithmetic in the cyclotomic field Q(zeta_8).

Every amplitude produced by the optical toolbox (1/sqrt(2) from beam
splitters, i from reflections, the eight phases exp(i k pi/4)) lies in
Q(zeta) with zeta = exp(i pi/4).  Elements are stored as four integer
numerators over a shared positive denominator, always reduced, in the basis
{1, zeta, zeta^2, zeta^3} with zeta^4 = -1.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Union

__all__ = [
    "CycNum",
    "ZERO",
    "ONE",
    "ZETA",
    "I",
    "SQRT2",
    "INV_SQRT2",
    "phase",
    "add",
    "mul",
    "conj",
    "to_complex",
]

_R = math.sqrt(0.5)

Scalar = Union[int, Fraction]


def _reduce(n0: int, n1: int, n2: int, n3: int, d: int):
    if d < 0:
        n0, n1, n2, n3, d = -n0, -n1, -n2, -n3, -d
    if d != 1:
        g = math.gcd(n0, n1, n2, n3, d)
        if g != 1:
            n0 //= g
            n1 //= g
            n2 //= g
            n3 //= g
            d //= g
    return n0, n1, n2, n3, d


class CycNum:
    """An element c0 + c1*zeta + c2*zeta^2 + c3*zeta^3 of Q(zeta_8)."""

    __slots__ = ("_n", "_d", "_hash")

    def __init__(self, c0: Scalar = 0, c1: Scalar = 0, c2: Scalar = 0, c3: Scalar = 0):
        if type(c0) is int and type(c1) is int and type(c2) is int and type(c3) is int:
            self._n = (c0, c1, c2, c3)
            self._d = 1
        else:
            fr = [Fraction(c) for c in (c0, c1, c2, c3)]
            d = math.lcm(*(f.denominator for f in fr))
            n = [f.numerator * (d // f.denominator) for f in fr]
            *nn, d = _reduce(n[0], n[1], n[2], n[3], d)
            self._n = tuple(nn)
            self._d = d
        self._hash = None

    @classmethod
    def _raw(cls, n0: int, n1: int, n2: int, n3: int, d: int) -> CycNum:
        obj = object.__new__(cls)
        n0, n1, n2, n3, d = _reduce(n0, n1, n2, n3, d)
        obj._n = (n0, n1, n2, n3)
        obj._d = d
        obj._hash = None
        return obj

    @classmethod
    def from_ints(cls, numerators: tuple[int, int, int, int], denominator: int = 1) -> CycNum:
        if denominator == 0:
            raise ZeroDivisionError("zero denominator")
        return cls._raw(*numerators, denominator)

    # -- accessors -------------------------------------------------------

    @property
    def numerators(self) -> tuple[int, int, int, int]:
        return self._n

    @property
    def denominator(self) -> int:
        return self._d

    @property
    def coeffs(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        d = self._d
        return tuple(Fraction(n, d) for n in self._n)  # type: ignore[return-value]

    c0 = property(lambda self: Fraction(self._n[0], self._d))
    c1 = property(lambda self: Fraction(self._n[1], self._d))
    c2 = property(lambda self: Fraction(self._n[2], self._d))
    c3 = property(lambda self: Fraction(self._n[3], self._d))

    def is_zero(self) -> bool:
        n = self._n
        return not (n[0] or n[1] or n[2] or n[3])

    def __bool__(self) -> bool:
        return not self.is_zero()

    def is_rational(self) -> bool:
        n = self._n
        return not (n[1] or n[2] or n[3])

    # -- arithmetic ------------------------------------------------------

    @staticmethod
    def _coerce(other) -> CycNum | None:
        if isinstance(other, CycNum):
            return other
        if isinstance(other, (int, Fraction)):
            return CycNum(other)
        return None

    def __add__(self, other) -> CycNum:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a, da = self._n, self._d
        b, db = o._n, o._d
        if da == db:
            return CycNum._raw(a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3], da)
        return CycNum._raw(
            a[0] * db + b[0] * da,
            a[1] * db + b[1] * da,
            a[2] * db + b[2] * da,
            a[3] * db + b[3] * da,
            da * db,
        )

    __radd__ = __add__

    def __neg__(self) -> CycNum:
        a = self._n
        obj = object.__new__(CycNum)
        obj._n = (-a[0], -a[1], -a[2], -a[3])
        obj._d = self._d
        obj._hash = None
        return obj

    def __pos__(self) -> CycNum:
        return self

    def __sub__(self, other) -> CycNum:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other) -> CycNum:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other) -> CycNum:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a0, a1, a2, a3 = self._n
        b0, b1, b2, b3 = o._n
        return CycNum._raw(
            a0 * b0 - a1 * b3 - a2 * b2 - a3 * b1,
            a0 * b1 + a1 * b0 - a2 * b3 - a3 * b2,
            a0 * b2 + a1 * b1 + a2 * b0 - a3 * b3,
            a0 * b3 + a1 * b2 + a2 * b1 + a3 * b0,
            self._d * o._d,
        )

    __rmul__ = __mul__

    def galois(self, j: int) -> CycNum:
        """Apply the automorphism zeta -> zeta**j, j odd."""
        j %= 8
        if j % 2 == 0:
            raise ValueError("Galois exponent must be odd")
        n0, n1, n2, n3 = self._n
        if j == 1:
            return self
        if j == 3:
            return CycNum._raw(n0, n3, -n2, n1, self._d)
        if j == 5:
            return CycNum._raw(n0, -n1, n2, -n3, self._d)
        return CycNum._raw(n0, -n3, -n2, -n1, self._d)

    def conj(self) -> CycNum:
        return self.galois(7)

    def norm(self) -> Fraction:
        """Field norm down to Q: the product of all four Galois conjugates."""
        p = self * self.galois(3) * self.galois(5) * self.galois(7)
        return p.c0

    def inverse(self) -> CycNum:
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero in Q(zeta_8)")
        rest = self.galois(3) * self.galois(5) * self.galois(7)
        nrm = (self * rest).c0
        return rest * CycNum(1 / nrm)

    def __truediv__(self, other) -> CycNum:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o.is_rational():
            if o._n[0] == 0:
                raise ZeroDivisionError("division by zero in Q(zeta_8)")
            a = self._n
            return CycNum._raw(a[0] * o._d, a[1] * o._d, a[2] * o._d, a[3] * o._d, self._d * o._n[0])
        return self * o.inverse()

    def __rtruediv__(self, other) -> CycNum:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k: int) -> CycNum:
        if k < 0:
            return self.inverse() ** (-k)
        out, base = ONE, self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def abs2(self) -> CycNum:
        """|a|^2 as an exact (real) field element."""
        return self * self.conj()

    # -- comparison / hashing --------------------------------------------

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self._n == o._n and self._d == o._d

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._n, self._d))
        return self._hash

    # -- numerics / text -------------------------------------------------

    def to_complex(self) -> complex:
        n0, n1, n2, n3 = self._n
        d = self._d
        re_ = n0 + _R * (n1 - n3)
        im_ = n2 + _R * (n1 + n3)
        return complex(re_ / d, im_ / d)

    def __complex__(self) -> complex:
        return self.to_complex()

    def render(self) -> str:
        """Full form '(c0) + (c1)ζ + (c2)ζ² + (c3)ζ³'."""
        c = self.coeffs
        return f"({c[0]}) + ({c[1]})ζ + ({c[2]})ζ² + ({c[3]})ζ³"

    def __str__(self) -> str:
        parts = []
        for c, sym in zip(self.coeffs, ("", "ζ", "ζ²", "ζ³")):
            if c == 0:
                continue
            if sym and abs(c) == 1:
                mag = ""
            else:
                mag = str(abs(c))
            sign = "-" if c < 0 else "+"
            parts.append((sign, mag + sym))
        if not parts:
            return "0"
        out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self) -> str:
        return f"CycNum({self})"

    _TERM = re.compile(
        r"\s*([+-]?)\s*(\d+(?:/\d+)?)?\s*\*?\s*(ζ³|ζ²|ζ|z\^?3|z\^?2|z|i)?\s*"
    )

    _RENDERED = re.compile(
        r"^\(\s*(-?\d+(?:/\d+)?)\s*\)\s*\+\s*\(\s*(-?\d+(?:/\d+)?)\s*\)ζ\s*\+"
        r"\s*\(\s*(-?\d+(?:/\d+)?)\s*\)ζ²\s*\+\s*\(\s*(-?\d+(?:/\d+)?)\s*\)ζ³$"
    )

    @classmethod
    def parse(cls, text: str) -> CycNum:
        """Inverse of ``str`` and ``render``; also accepts ``z``, ``z^2``, ``z3`` and ``i``."""
        s = text.strip()
        full = cls._RENDERED.match(s)
        if full:
            return cls(*(Fraction(g) for g in full.groups()))
        if s.startswith("(") and s.endswith(")") and s.count("(") == 1:
            s = s[1:-1]
        if not s:
            raise ValueError("empty CycNum literal")
        total = ZERO
        pos = 0
        seen = False
        while pos < len(s):
            m = cls._TERM.match(s, pos)
            if m is None or m.end() == pos or not (m.group(2) or m.group(3)):
                raise ValueError(f"cannot parse CycNum literal {text!r}")
            sign, mag, sym = m.groups()
            if seen and not sign:
                raise ValueError(f"missing operator in {text!r}")
            coef = Fraction(mag) if mag else Fraction(1)
            if sign == "-":
                coef = -coef
            sym = (sym or "").replace("^", "")
            power = {"": 0, "ζ": 1, "z": 1, "ζ²": 2, "z2": 2, "i": 2, "ζ³": 3, "z3": 3}[sym]
            c = [0, 0, 0, 0]
            c[power] = coef
            total = total + CycNum(*c)
            pos = m.end()
            seen = True
        return total

    def to_json(self) -> list[str]:
        return [str(c) for c in self.coeffs]

    @classmethod
    def from_json(cls, data) -> CycNum:
        return cls(*(Fraction(x) for x in data))


ZERO = CycNum()
ONE = CycNum(1)
ZETA = CycNum(0, 1)
I = CycNum(0, 0, 1)
SQRT2 = CycNum(0, 1, 0, -1)
INV_SQRT2 = CycNum(0, Fraction(1, 2), 0, Fraction(-1, 2))

_PHASES = tuple(
    CycNum(*[(1 if j == k % 4 else 0) * (1 if k < 4 else -1) for j in range(4)]) for k in range(8)
)


def phase(k: int) -> CycNum:
    """exp(i k pi / 4)."""
    return _PHASES[k % 8]


def add(a: CycNum, b: CycNum) -> CycNum:
    return a + b


def mul(a: CycNum, b: CycNum) -> CycNum:
    return a * b


def conj(a: CycNum) -> CycNum:
    return a.conj()


def to_complex(a: CycNum) -> complex:
    return a.to_complex()
