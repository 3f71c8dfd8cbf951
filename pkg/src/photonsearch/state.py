"""Sparse, unnormalized multi-photon states over (path, OAM) modes.

A state is a polynomial in creation operators: each key is a sorted tuple of
modes (a monomial, repeated modes meaning bunched photons) and each value is
its exact coefficient in Q(zeta_8).  Coefficients are those of the monomial
itself, without sqrt(n!) Fock normalization; the factorials only enter inner
products and norms.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .cyclo import ONE, ZERO, CycNum

__all__ = [
    "ModeLabel",
    "PhotonicState",
    "DetectionSpec",
    "CutoffError",
    "CutoffCounter",
    "path_name",
    "path_index",
    "substitute",
    "postselect",
    "srv",
    "exact_rank",
    "inner",
    "norm_squared",
    "fidelity",
]

Mode = tuple  # (path, oam)
FockTerm = tuple  # sorted tuple of modes
Rules = Mapping[Mode, Sequence[tuple[Mode, CycNum]]]


def path_name(p: int) -> str:
    return chr(ord("a") + p)


def path_index(name: str) -> int:
    name = name.strip()
    if len(name) != 1 or not ("a" <= name <= "z"):
        raise ValueError(f"bad path name {name!r}")
    return ord(name) - ord("a")


class ModeLabel(NamedTuple):
    path: int
    oam: int

    def __str__(self) -> str:
        return f"{path_name(self.path)}:{self.oam}"

    @classmethod
    def parse(cls, text: str) -> ModeLabel:
        p, m = text.split(":")
        return cls(path_index(p), int(m))


class CutoffError(ValueError):
    """A transformation pushed a photon outside the OAM encoding space."""


@dataclass
class CutoffCounter:
    dropped: int = 0


@dataclass(frozen=True)
class DetectionSpec:
    trigger_path: int
    trigger_oam: int
    coincidence_paths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coincidence_paths", tuple(self.coincidence_paths))
        if self.trigger_path in self.coincidence_paths:
            raise ValueError("trigger path must not be a coincidence path")
        if len(set(self.coincidence_paths)) != len(self.coincidence_paths):
            raise ValueError("coincidence paths must be distinct")

    @property
    def paths(self) -> tuple[int, ...]:
        return self.coincidence_paths + (self.trigger_path,)

    def text(self) -> str:
        coinc = ",".join(path_name(p) for p in self.coincidence_paths)
        return f"trigger={path_name(self.trigger_path)}:{self.trigger_oam} coincidence={coinc}"

    @classmethod
    def parse(cls, text: str) -> DetectionSpec:
        fields = dict(part.split("=", 1) for part in text.split())
        trig = ModeLabel.parse(fields["trigger"])
        coinc = tuple(path_index(p) for p in fields["coincidence"].split(","))
        return cls(trig.path, trig.oam, coinc)


def _bosonic_factor(term: FockTerm) -> int:
    f = 1
    for n in Counter(term).values():
        if n > 1:
            f *= math.factorial(n)
    return f


class PhotonicState:
    """Immutable map from Fock monomials to exact amplitudes."""

    __slots__ = ("_terms", "_order")

    def __init__(self, terms: Mapping | Iterable | None = None, order: int | None = None):
        acc: dict = {}
        items = terms.items() if isinstance(terms, Mapping) else (terms or ())
        for key, amp in items:
            key = tuple(sorted(tuple(m) for m in key))
            if not isinstance(amp, CycNum):
                amp = CycNum(amp)
            prev = acc.get(key)
            acc[key] = amp if prev is None else prev + amp
        self._terms = {k: v for k, v in sorted(acc.items()) if not v.is_zero()}
        orders = {len(k) for k in self._terms}
        if len(orders) > 1:
            raise ValueError(f"terms of mixed photon number {sorted(orders)}")
        if order is None:
            order = orders.pop() if orders else 0
        elif orders and orders != {order}:
            raise ValueError(f"terms have {orders.pop()} photons, expected {order}")
        self._order = order

    @classmethod
    def _trusted(cls, terms: dict, order: int) -> PhotonicState:
        obj = object.__new__(cls)
        obj._terms = dict(sorted((k, v) for k, v in terms.items() if not v.is_zero()))
        obj._order = order
        return obj

    @classmethod
    def from_slots(cls, kets: Mapping[tuple[int, ...], object], paths: Sequence[int] = (0, 1, 2)) -> PhotonicState:
        """Build a one-photon-per-path state from ``{(m_a, m_b, ...): amplitude}``."""
        terms = {}
        for oams, amp in kets.items():
            if len(oams) != len(paths):
                raise ValueError("ket length does not match number of paths")
            terms[tuple(zip(paths, oams))] = amp
        return cls(terms, order=len(paths))

    @property
    def order(self) -> int:
        return self._order

    @property
    def terms(self) -> Mapping:
        return MappingProxyType(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator:
        return iter(self._terms)

    def items(self):
        return self._terms.items()

    def __getitem__(self, key) -> CycNum:
        return self._terms.get(tuple(sorted(key)), ZERO)

    def is_empty(self) -> bool:
        return not self._terms

    def paths(self) -> tuple[int, ...]:
        return tuple(sorted({p for k in self._terms for p, _ in k}))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhotonicState):
            return NotImplemented
        return self._order == other._order and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self._order, tuple(self._terms.items())))

    def scale(self, c: CycNum) -> PhotonicState:
        return PhotonicState._trusted({k: v * c for k, v in self._terms.items()}, self._order)

    def __add__(self, other: PhotonicState) -> PhotonicState:
        if self.is_empty():
            return other
        if other.is_empty():
            return self
        if self._order != other._order:
            raise ValueError("cannot add states of different photon number")
        acc = dict(self._terms)
        for k, v in other.items():
            acc[k] = acc[k] + v if k in acc else v
        return PhotonicState._trusted(acc, self._order)

    def to_vector(self, basis: Sequence[FockTerm]) -> np.ndarray:
        return np.array([self[k].to_complex() for k in basis], dtype=complex)

    def text(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for key, amp in self._terms.items():
            ket = " ".join(f"{path_name(p)}:{m}" for p, m in key)
            parts.append(f"({amp}) |{ket}⟩")
        return " + ".join(parts)

    __str__ = text

    def __repr__(self) -> str:
        return f"PhotonicState({self.text()})"

    _KET = re.compile(r"(?:\(([^()]*)\)\s*)?\|([^⟩>|]*)[⟩>]")

    @classmethod
    def parse(cls, text: str) -> PhotonicState:
        """Read the canonical text form; a missing coefficient means 1."""
        s = text.strip()
        if s == "0":
            return cls()
        terms = []
        pos = 0
        while True:
            m = cls._KET.match(s, pos)
            if m is None:
                raise ValueError(f"cannot parse state near {s[pos:pos + 20]!r}")
            coef = CycNum.parse(m.group(1)) if m.group(1) is not None else ONE
            modes = tuple(tuple(ModeLabel.parse(tok)) for tok in m.group(2).split())
            terms.append((modes, coef))
            pos = m.end()
            rest = s[pos:].lstrip()
            if not rest:
                break
            if not rest.startswith("+"):
                raise ValueError(f"expected '+' between terms near {rest[:20]!r}")
            pos = len(s) - len(rest) + 1
            while pos < len(s) and s[pos].isspace():
                pos += 1
        return cls(terms)


def substitute(
    state: PhotonicState,
    rules: Rules,
    cutoff: int | None = None,
    strict: bool = False,
    counter: CutoffCounter | None = None,
) -> PhotonicState:
    """Rewrite every creation operator by its rule and expand the products.

    Modes without a rule map to themselves.  Rule outputs with ``|oam| >
    cutoff`` are discarded (and tallied in ``counter``) unless ``strict``, in
    which case :class:`CutoffError` is raised.
    """
    images: dict = {}

    def image(mode):
        img = images.get(mode)
        if img is None:
            raw = rules.get(mode)
            if raw is None:
                img = ((mode, ONE),)
            else:
                kept = []
                for out, amp in raw:
                    if cutoff is not None and abs(out[1]) > cutoff:
                        if strict:
                            raise CutoffError(f"mode {ModeLabel(*out)} outside |m| <= {cutoff}")
                        if counter is not None:
                            counter.dropped += 1
                        continue
                    kept.append((tuple(out), amp))
                img = tuple(kept)
            images[mode] = img
        return img

    out: dict = {}
    for term, amp in state.items():
        partial = {(): amp}
        for mode in term:
            img = image(mode)
            nxt: dict = {}
            for key, a in partial.items():
                for m2, c in img:
                    k2 = tuple(sorted(key + (m2,)))
                    v = a * c
                    prev = nxt.get(k2)
                    nxt[k2] = v if prev is None else prev + v
            partial = nxt
        for k, v in partial.items():
            prev = out.get(k)
            out[k] = v if prev is None else prev + v
    return PhotonicState._trusted(out, state.order)


def postselect(state: PhotonicState, detection: DetectionSpec) -> PhotonicState:
    """Keep terms with one photon per coincidence path and the trigger in its mode."""
    trig = (detection.trigger_path, detection.trigger_oam)
    want = sorted(detection.coincidence_paths)
    n = len(want) + 1
    out = {}
    for term, amp in state.items():
        if len(term) != n or trig not in term:
            continue
        rest = list(term)
        rest.remove(trig)
        if [p for p, _ in rest] == want:
            out[tuple(rest)] = amp
    return PhotonicState._trusted(out, n - 1)


def exact_rank(matrix: Sequence[Sequence[CycNum]]) -> int:
    """Rank over Q(zeta_8) by fraction-free (Bareiss) elimination."""
    m = [list(row) for row in matrix]
    rows = len(m)
    if rows == 0:
        return 0
    cols = len(m[0])
    r = 0
    prev = ONE
    for c in range(cols):
        piv = None
        for i in range(r, rows):
            if not m[i][c].is_zero():
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        top = m[r]
        for i in range(r + 1, rows):
            row = m[i]
            lead = row[c]
            if lead.is_zero():
                if p != prev:
                    ratio = p / prev
                    for j in range(c + 1, cols):
                        if not row[j].is_zero():
                            row[j] = row[j] * ratio
                continue
            for j in range(c + 1, cols):
                row[j] = (p * row[j] - lead * top[j]) / prev
            row[c] = ZERO
        prev = p
        r += 1
        if r == rows:
            break
    return r


def _slot_layout(state: PhotonicState) -> list[tuple[int, ...]]:
    if state.is_empty():
        raise ValueError("srv of an empty state")
    paths = None
    kets = []
    for term in state:
        ps = tuple(p for p, _ in term)
        if len(set(ps)) != len(ps):
            raise ValueError("srv requires exactly one photon per path in every term")
        if paths is None:
            paths = ps
        elif ps != paths:
            raise ValueError("srv requires every term to occupy the same paths")
        kets.append(tuple(m for _, m in term))
    return kets


def coefficient_matrix(state: PhotonicState, slot: int) -> list[list[CycNum]]:
    """Rows: oam values of ``slot``; columns: joint oam values of the other slots."""
    kets = _slot_layout(state)
    amps = list(state.terms.values())
    row_keys = sorted({k[slot] for k in kets})
    col_keys = sorted({k[:slot] + k[slot + 1:] for k in kets})
    ri = {v: i for i, v in enumerate(row_keys)}
    ci = {v: i for i, v in enumerate(col_keys)}
    mat = [[ZERO] * len(col_keys) for _ in row_keys]
    for k, a in zip(kets, amps):
        mat[ri[k[slot]]][ci[k[:slot] + k[slot + 1:]]] = a
    return mat


def srv(state: PhotonicState) -> tuple[int, ...]:
    """Schmidt-rank vector (one photon vs. the rest), sorted descending."""
    kets = _slot_layout(state)
    nslots = len(kets[0])
    ranks = []
    for s in range(nslots):
        rows = {k[s] for k in kets}
        if len(rows) == 1:
            ranks.append(1)
            continue
        ranks.append(exact_rank(coefficient_matrix(state, s)))
    return tuple(sorted(ranks, reverse=True))


def inner(s: PhotonicState, t: PhotonicState) -> CycNum:
    """<s|t> with Fock normalization for bunched photons."""
    if len(s) > len(t):
        small, big, flip = t, s, True
    else:
        small, big, flip = s, t, False
    acc = ZERO
    for k, a in small.items():
        b = big.terms.get(k)
        if b is None:
            continue
        term = (b.conj() * a) if flip else (a.conj() * b)
        f = _bosonic_factor(k)
        acc = acc + (term * f if f != 1 else term)
    return acc


def norm_squared(s: PhotonicState) -> CycNum:
    return inner(s, s)


def fidelity(state: PhotonicState, target: PhotonicState) -> float:
    """|<target|state>|^2 / (<state|state><target|target>), in floating point."""
    ns = norm_squared(state).to_complex().real
    nt = norm_squared(target).to_complex().real
    if ns == 0 or nt == 0:
        raise ValueError("empty state")
    ov = inner(target, state).to_complex()
    return min(1.0, abs(ov) ** 2 / (ns * nt))
