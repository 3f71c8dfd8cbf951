"""Optical elements as single-photon substitution rules, plus the toolbox.

Conventions (fixed once; every golden value derives from them)::

    BS[a,b]     a(m) -> (b(m) + i a(-m)) / sqrt2,  b(m) -> (a(m) + i b(-m)) / sqrt2
    REFL[a]     a(m) -> i a(-m)
    Dove[a,k=K] a(m) -> phase(2 K m) a(-m)
    Holo[a,+S]  a(m) -> a(m + S)
    PS[a,k=K]   a(m) -> phase(K) a(m)
    LI[a,b]     even m untouched, odd m swaps paths a and b

``phase(k)`` is exp(i k pi/4).  A Dove prism step K corresponds to a prism
angle of K pi/8, which keeps every imprinted phase on the pi/4 lattice.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence, Union

from .cyclo import I, INV_SQRT2, ONE, phase
from .state import PhotonicState, path_index, path_name

__all__ = [
    "Spdc",
    "BeamSplitter",
    "Reflection",
    "DovePrism",
    "Hologram",
    "PhaseShifter",
    "ParitySorter",
    "Composite",
    "Element",
    "Template",
    "Toolbox",
    "default_toolbox",
    "parse_toolbox",
    "parse_element",
    "rules_of",
    "spdc_state",
]

_I_INV_SQRT2 = I * INV_SQRT2


def _p(p: int) -> str:
    return path_name(p)


@dataclass(frozen=True)
class Spdc:
    """Down-conversion crystal emitting sum_m a(m) b(-m) over its OAM range."""

    a: int
    b: int
    dim: int = 3
    oams: tuple[int, ...] | None = None

    @property
    def paths(self) -> tuple[int, int]:
        return (self.a, self.b)

    @property
    def oam_values(self) -> tuple[int, ...]:
        if self.oams is not None:
            return tuple(self.oams)
        h = self.dim // 2
        if self.dim % 2:
            return tuple(range(-h, h + 1))
        return tuple(range(-h, h))

    def text(self) -> str:
        if self.oams is not None:
            lo, hi = min(self.oams), max(self.oams)
            if tuple(self.oams) == tuple(range(lo, hi + 1)):
                return f"SPDC[{_p(self.a)},{_p(self.b)},oam={lo}..{hi}]"
            return f"SPDC[{_p(self.a)},{_p(self.b)},oam={'|'.join(map(str, self.oams))}]"
        return f"SPDC[{_p(self.a)},{_p(self.b)},dim={self.dim}]"

    def relabel(self, mapping: Mapping[int, int]) -> Spdc:
        return Spdc(mapping.get(self.a, self.a), mapping.get(self.b, self.b), self.dim, self.oams)


@dataclass(frozen=True)
class BeamSplitter:
    a: int
    b: int
    kind = "BS"

    @property
    def paths(self) -> tuple[int, ...]:
        return (self.a, self.b)

    def text(self) -> str:
        return f"BS[{_p(self.a)},{_p(self.b)}]"

    def relabel(self, mapping):
        return BeamSplitter(mapping.get(self.a, self.a), mapping.get(self.b, self.b))


@dataclass(frozen=True)
class ParitySorter:
    """Leach interferometer: routes odd OAM to the other path."""

    a: int
    b: int
    kind = "LI"

    @property
    def paths(self) -> tuple[int, ...]:
        return (self.a, self.b)

    def text(self) -> str:
        return f"LI[{_p(self.a)},{_p(self.b)}]"

    def relabel(self, mapping):
        return ParitySorter(mapping.get(self.a, self.a), mapping.get(self.b, self.b))


@dataclass(frozen=True)
class Reflection:
    path: int
    kind = "REFL"

    @property
    def paths(self) -> tuple[int, ...]:
        return (self.path,)

    def text(self) -> str:
        return f"REFL[{_p(self.path)}]"

    def relabel(self, mapping):
        return Reflection(mapping.get(self.path, self.path))


@dataclass(frozen=True)
class DovePrism:
    path: int
    k: int
    kind = "Dove"

    def __post_init__(self):
        if not 0 <= self.k <= 7:
            raise ValueError("Dove prism step k must be in 0..7")

    @property
    def paths(self) -> tuple[int, ...]:
        return (self.path,)

    def text(self) -> str:
        return f"Dove[{_p(self.path)},k={self.k}]"

    def relabel(self, mapping):
        return DovePrism(mapping.get(self.path, self.path), self.k)


@dataclass(frozen=True)
class Hologram:
    path: int
    shift: int
    kind = "Holo"

    @property
    def paths(self) -> tuple[int, ...]:
        return (self.path,)

    def text(self) -> str:
        return f"Holo[{_p(self.path)},{self.shift:+d}]"

    def relabel(self, mapping):
        return Hologram(mapping.get(self.path, self.path), self.shift)


@dataclass(frozen=True)
class PhaseShifter:
    path: int
    k: int
    kind = "PS"

    def __post_init__(self):
        if not 0 <= self.k <= 7:
            raise ValueError("phase step k must be in 0..7")

    @property
    def paths(self) -> tuple[int, ...]:
        return (self.path,)

    def text(self) -> str:
        return f"PS[{_p(self.path)},k={self.k}]"

    def relabel(self, mapping):
        return PhaseShifter(mapping.get(self.path, self.path), self.k)


@dataclass(frozen=True)
class Composite:
    """A named chain of elements applied in order, usable as one element."""

    name: str
    inner: tuple = ()
    kind = "COMP"

    def __post_init__(self):
        object.__setattr__(self, "inner", tuple(self.inner))
        if not re.fullmatch(r"[A-Za-z0-9_\-]+", self.name):
            raise ValueError(f"bad composite name {self.name!r}")

    @property
    def paths(self) -> tuple[int, ...]:
        seen: list[int] = []
        for el in self.inner:
            for p in el.paths:
                if p not in seen:
                    seen.append(p)
        return tuple(sorted(seen))

    def chain_text(self) -> str:
        return "; ".join(el.text() for el in self.inner)

    def text(self) -> str:
        return f"COMP[{self.name}]{{{self.chain_text()}}}"

    def relabel(self, mapping):
        return Composite(self.name, tuple(el.relabel(mapping) for el in self.inner))

    def flatten(self) -> tuple:
        out = []
        for el in self.inner:
            out.extend(el.flatten() if isinstance(el, Composite) else (el,))
        return tuple(out)


Element = Union[BeamSplitter, Reflection, DovePrism, Hologram, PhaseShifter, ParitySorter, Composite]
TWO_PATH = (BeamSplitter, ParitySorter)


# -- rules -------------------------------------------------------------------


def _oam_range(cutoff: int) -> range:
    return range(-cutoff, cutoff + 1)


@lru_cache(maxsize=4096)
def rules_of(element: Element, cutoff: int = 2) -> Mapping:
    """Substitution rules for every mode of ``element``'s paths with |m| <= cutoff.

    Outputs of a hologram may leave the encoding space; those are kept here and
    discarded (or rejected) by :func:`photonsearch.state.substitute`.
    """
    if isinstance(element, Spdc):
        raise TypeError("SPDC crystals generate states; they have no substitution rules")
    rules: dict = {}
    ms = _oam_range(cutoff)
    if isinstance(element, BeamSplitter):
        a, b = element.a, element.b
        for m in ms:
            rules[(a, m)] = (((b, m), INV_SQRT2), ((a, -m), _I_INV_SQRT2))
            rules[(b, m)] = (((a, m), INV_SQRT2), ((b, -m), _I_INV_SQRT2))
    elif isinstance(element, ParitySorter):
        a, b = element.a, element.b
        for m in ms:
            if m % 2:
                rules[(a, m)] = (((b, m), ONE),)
                rules[(b, m)] = (((a, m), ONE),)
            else:
                rules[(a, m)] = (((a, m), ONE),)
                rules[(b, m)] = (((b, m), ONE),)
    elif isinstance(element, Reflection):
        for m in ms:
            rules[(element.path, m)] = (((element.path, -m), I),)
    elif isinstance(element, DovePrism):
        for m in ms:
            rules[(element.path, m)] = (((element.path, -m), phase(2 * element.k * m)),)
    elif isinstance(element, Hologram):
        for m in ms:
            rules[(element.path, m)] = (((element.path, m + element.shift), ONE),)
    elif isinstance(element, PhaseShifter):
        for m in ms:
            rules[(element.path, m)] = (((element.path, m), phase(element.k)),)
    elif isinstance(element, Composite):
        rules = compose_rules([rules_of(el, cutoff) for el in element.inner], cutoff)
    else:
        raise TypeError(f"unknown element {element!r}")
    return rules


def compose_rules(rule_sets: Sequence[Mapping], cutoff: int | None = None) -> dict:
    """Rules equivalent to applying ``rule_sets`` one after another."""
    modes = set()
    for rs in rule_sets:
        modes.update(rs)
    out = {}
    for mode in sorted(modes):
        vec = {mode: ONE}
        for rs in rule_sets:
            nxt: dict = {}
            for md, amp in vec.items():
                img = rs.get(md)
                if img is None:
                    img = ((md, ONE),)
                for m2, c in img:
                    if cutoff is not None and abs(m2[1]) > cutoff:
                        continue
                    v = amp * c
                    prev = nxt.get(m2)
                    nxt[m2] = v if prev is None else prev + v
            vec = {k: v for k, v in nxt.items() if not v.is_zero()}
        out[mode] = tuple(sorted(vec.items()))
    return out


# -- sources -------------------------------------------------------------------


def _emission(crystal: Spdc) -> dict:
    return {((crystal.a, m), (crystal.b, -m)): ONE for m in crystal.oam_values}


def _product(x: Mapping, y: Mapping) -> dict:
    out: dict = {}
    for kx, ax in x.items():
        for ky, ay in y.items():
            k = tuple(sorted(kx + ky))
            v = ax * ay
            prev = out.get(k)
            out[k] = v if prev is None else prev + v
    return out


def spdc_state(
    crystals: Sequence[Spdc], order: int = 4, double_emission: bool = True, cross: bool = True
) -> PhotonicState:
    """Four-photon emission of two crystals: E1*E2 (+ E1^2 + E2^2 when enabled).

    A single crystal yields only its double emission E1^2.
    """
    if order != 4:
        raise ValueError("only four-photon emission is supported")
    crystals = list(crystals)
    if len(crystals) == 1:
        e = _emission(crystals[0])
        return PhotonicState(_product(e, e), order=4)
    if len(crystals) != 2:
        raise ValueError("expected one or two crystals")
    c1, c2 = crystals
    if set(c1.paths) & set(c2.paths):
        raise ValueError("crystals must use disjoint path pairs")
    e1, e2 = _emission(c1), _emission(c2)
    total: dict = {}
    parts = []
    if cross:
        parts.append(_product(e1, e2))
    if double_emission:
        parts += [_product(e1, e1), _product(e2, e2)]
    for part in parts:
        for k, v in part.items():
            total[k] = total[k] + v if k in total else v
    return PhotonicState(total, order=4)


# -- text syntax ---------------------------------------------------------------

_ELEMENT_RE = re.compile(r"^\s*([A-Za-z]+)\[([^\]]*)\]\s*(\{.*\})?\s*$", re.S)


def _split_top(text: str, sep: str = ";") -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def _kv(arg: str, key: str) -> int:
    k, _, v = arg.partition("=")
    if k.strip() != key or not v:
        raise ValueError(f"expected {key}=<int>, got {arg!r}")
    return int(v)


def parse_element(text: str):
    m = _ELEMENT_RE.match(text)
    if m is None:
        raise ValueError(f"cannot parse element {text!r}")
    kind, argstr, body = m.group(1), m.group(2), m.group(3)
    args = [a.strip() for a in argstr.split(",")] if argstr.strip() else []
    if kind == "COMP":
        if body is None or len(args) != 1:
            raise ValueError(f"composite needs a name and a body: {text!r}")
        inner = tuple(parse_element(t) for t in _split_top(body[1:-1]))
        return Composite(args[0], inner)
    if body is not None:
        raise ValueError(f"unexpected body in {text!r}")
    try:
        if kind == "BS" and len(args) == 2:
            return BeamSplitter(path_index(args[0]), path_index(args[1]))
        if kind == "LI" and len(args) == 2:
            return ParitySorter(path_index(args[0]), path_index(args[1]))
        if kind == "REFL" and len(args) == 1:
            return Reflection(path_index(args[0]))
        if kind == "Dove" and len(args) == 2:
            return DovePrism(path_index(args[0]), _kv(args[1], "k"))
        if kind == "PS" and len(args) == 2:
            return PhaseShifter(path_index(args[0]), _kv(args[1], "k"))
        if kind == "Holo" and len(args) == 2:
            return Hologram(path_index(args[0]), int(args[1]))
        if kind == "SPDC" and len(args) == 3:
            a, b = path_index(args[0]), path_index(args[1])
            key, _, val = args[2].partition("=")
            if key == "dim":
                return Spdc(a, b, int(val))
            if key == "oam":
                if ".." in val:
                    lo, hi = (int(x) for x in val.split(".."))
                    oams = tuple(range(lo, hi + 1))
                else:
                    oams = tuple(int(x) for x in val.split("|"))
                return Spdc(a, b, len(oams), oams)
    except ValueError as exc:
        raise ValueError(f"cannot parse element {text!r}: {exc}") from None
    raise ValueError(f"cannot parse element {text!r}")


# -- toolbox -------------------------------------------------------------------

_ARITY = {"BS": 2, "LI": 2, "REFL": 1, "Dove": 1, "Holo": 1, "PS": 1}
_DEFAULT_VALUES = {
    "Dove": tuple(range(4)),
    "Holo": (-2, -1, 1, 2),
    "PS": tuple(range(1, 8)),
}


@dataclass(frozen=True)
class Template:
    """An element kind with its discrete parameter lattice."""

    kind: str
    values: tuple[int, ...] = ()
    composite: Composite | None = None

    def __post_init__(self):
        if self.kind == "COMP":
            if self.composite is None:
                raise ValueError("composite template needs a composite")
        elif self.kind not in _ARITY:
            raise ValueError(f"unknown element kind {self.kind!r}")
        elif self.kind in _DEFAULT_VALUES and not self.values:
            object.__setattr__(self, "values", _DEFAULT_VALUES[self.kind])

    @property
    def arity(self) -> int:
        if self.composite is not None:
            return len(self.composite.paths)
        return _ARITY[self.kind]

    def build(self, paths: Sequence[int], value: int | None = None):
        k = self.kind
        if k == "BS":
            return BeamSplitter(*sorted(paths))
        if k == "LI":
            return ParitySorter(*sorted(paths))
        if k == "REFL":
            return Reflection(paths[0])
        if k == "Dove":
            return DovePrism(paths[0], value)
        if k == "Holo":
            return Hologram(paths[0], value)
        if k == "PS":
            return PhaseShifter(paths[0], value)
        formal = self.composite.paths
        return self.composite.relabel(dict(zip(formal, paths)))

    def instantiate(self, rng, paths: Sequence[int]):
        """Draw uniform parameters and an injective path assignment."""
        n = self.arity
        if n > len(paths):
            raise ValueError(f"template {self.text()} needs {n} paths")
        if n == 1:
            chosen = [paths[int(rng.integers(len(paths)))]]
        else:
            idx = rng.permutation(len(paths))[:n]
            chosen = [paths[int(i)] for i in idx]
        value = self.values[int(rng.integers(len(self.values)))] if self.values else None
        return self.build(chosen, value)

    def text(self) -> str:
        if self.composite is not None:
            return self.composite.text()
        if self.values and self.values != _DEFAULT_VALUES.get(self.kind):
            return f"{self.kind}:{'|'.join(map(str, self.values))}"
        return self.kind


@dataclass(frozen=True)
class Toolbox:
    templates: tuple[Template, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "templates", tuple(self.templates))
        if not self.templates:
            raise ValueError("toolbox must not be empty")

    def __len__(self) -> int:
        return len(self.templates)

    def __iter__(self):
        return iter(self.templates)

    def with_composite(self, comp: Composite) -> Toolbox:
        """Append ``comp`` unless an identical chain is already registered."""
        key = _canonical_chain(comp)
        for t in self.templates:
            if t.composite is not None and _canonical_chain(t.composite) == key:
                return self
        return Toolbox(self.templates + (Template("COMP", composite=comp),))

    def text(self) -> str:
        return ",".join(t.text() for t in self.templates)


def _canonical_chain(comp: Composite) -> str:
    """Chain text with paths renamed in order of first appearance."""
    order: dict[int, int] = {}
    for el in comp.flatten():
        for p in el.paths:
            order.setdefault(p, len(order))
    return Composite("x", comp.flatten()).relabel(order).chain_text()


def default_toolbox() -> Toolbox:
    return Toolbox(tuple(Template(k) for k in ("BS", "LI", "REFL", "Dove", "Holo", "PS")))


def parse_toolbox(text: str) -> Toolbox:
    """Parse ``"BS,LI,Dove:0|1|2|3,COMP[x]{BS[a,b]}"``."""
    templates = []
    for item in _split_top(text, ","):
        if item.startswith("COMP["):
            templates.append(Template("COMP", composite=parse_element(item)))
            continue
        kind, _, vals = item.partition(":")
        values = tuple(int(v) for v in vals.split("|")) if vals else ()
        templates.append(Template(kind.strip(), values))
    return Toolbox(tuple(templates))
