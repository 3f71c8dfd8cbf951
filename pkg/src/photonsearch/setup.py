"""Experiments: two crystals, an ordered element chain and a detection rule."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

from .cyclo import ONE
from .elements import (
    TWO_PATH,
    Composite,
    Hologram,
    Spdc,
    parse_element,
    rules_of,
    spdc_state,
)
from .state import (
    CutoffCounter,
    DetectionSpec,
    PhotonicState,
    path_index,
    path_name,
    postselect,
    substitute,
)

__all__ = [
    "DetectionSpec",
    "Setup",
    "simulate",
    "herald",
    "mixes_pairs",
    "simplify",
    "to_composite",
    "format_setup",
    "parse_setup",
    "render_setup",
]

DEFAULT_PATHS = (0, 1, 2, 3)


@dataclass(frozen=True)
class Setup:
    paths: tuple[int, ...]
    sources: tuple[Spdc, ...]
    elements: tuple = ()
    detection: DetectionSpec = field(default_factory=lambda: DetectionSpec(3, 0, (0, 1, 2)))
    cutoff: int = 2
    double_emission: bool = True

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "elements", tuple(self.elements))

    def validate(self, max_elements: int | None = None) -> Setup:
        if not self.paths:
            raise ValueError("setup has an empty path set")
        known = set(self.paths)
        if len(self.sources) != 2:
            raise ValueError("setup needs exactly two crystals")
        for src in self.sources:
            if not set(src.paths) <= known:
                raise ValueError(f"{src.text()} uses unknown paths")
        if set(self.sources[0].paths) & set(self.sources[1].paths):
            raise ValueError("crystals must use disjoint path pairs")
        if not set(self.detection.paths) <= known:
            raise ValueError("detection uses unknown paths")
        if max_elements is not None and len(self.elements) > max_elements:
            raise ValueError(f"{len(self.elements)} elements exceed the maximum of {max_elements}")
        for el in self.elements:
            flat = el.flatten() if isinstance(el, Composite) else (el,)
            for sub in flat:
                if not set(sub.paths) <= known:
                    raise ValueError(f"{sub.text()} uses unknown paths")
                if len(set(sub.paths)) != len(sub.paths):
                    raise ValueError(f"{sub.text()} repeats a path")
                if isinstance(sub, Hologram) and abs(sub.shift) > 2 * self.cutoff:
                    raise ValueError(f"{sub.text()} shifts beyond 2*cutoff")
        return self

    def without(self, index: int) -> Setup:
        els = self.elements[:index] + self.elements[index + 1:]
        return replace(self, elements=els)

    def with_elements(self, elements: Iterable) -> Setup:
        return replace(self, elements=tuple(elements))


# -- simulation ----------------------------------------------------------------


def source_state(setup: Setup) -> PhotonicState:
    return spdc_state(setup.sources, double_emission=setup.double_emission)


def simulate(setup: Setup, method: str = "fast", counter: CutoffCounter | None = None) -> PhotonicState:
    """The heralded three-photon state of ``setup`` (possibly empty).

    ``method="reference"`` builds the full four-photon state and substitutes
    element by element; ``"fast"`` composes the elements into one
    single-photon transfer map and only expands detectable terms.  Both give
    identical exact results.
    """
    setup.validate()
    if method == "reference":
        state = source_state(setup)
        for el in setup.elements:
            state = substitute(state, rules_of(el, setup.cutoff), cutoff=setup.cutoff, counter=counter)
        return postselect(state, setup.detection)
    if method == "fast":
        return herald(setup, counter=counter)
    raise ValueError(f"unknown simulation method {method!r}")


def transfer_map(setup: Setup, inputs: Iterable[tuple[int, int]], counter: CutoffCounter | None = None) -> dict:
    """Image of each input single-photon mode after the whole element chain."""
    cutoff = setup.cutoff
    images = {m: {m: ONE} for m in inputs}
    for el in setup.elements:
        rules = rules_of(el, cutoff)
        ep = set(el.paths)
        for src, vec in images.items():
            if not any(md[0] in ep for md in vec):
                continue
            nxt: dict = {}
            for md, amp in vec.items():
                img = rules.get(md) if md[0] in ep else None
                if img is None:
                    prev = nxt.get(md)
                    nxt[md] = amp if prev is None else prev + amp
                    continue
                for m2, c in img:
                    if abs(m2[1]) > cutoff:
                        if counter is not None:
                            counter.dropped += 1
                        continue
                    v = amp * c
                    prev = nxt.get(m2)
                    nxt[m2] = v if prev is None else prev + v
            images[src] = {k: v for k, v in nxt.items() if not v.is_zero()}
    return images


def herald(setup: Setup, counter: CutoffCounter | None = None) -> PhotonicState:
    det = setup.detection
    coinc = set(det.coincidence_paths)
    trig = (det.trigger_path, det.trigger_oam)

    src_modes = []
    for c in setup.sources:
        for m in c.oam_values:
            src_modes += [(c.a, m), (c.b, -m)]
    images = transfer_map(setup, src_modes, counter)
    detected = {
        src: [(md, a) for md, a in vec.items() if md[0] in coinc or md == trig]
        for src, vec in images.items()
    }

    # pair tables of each crystal: coefficient of x+ y+ (x, y on distinct paths)
    tables = []
    for c in setup.sources:
        table: dict = {}
        for m in c.oam_values:
            for x, u in detected[(c.a, m)]:
                for y, v in detected[(c.b, -m)]:
                    if x[0] == y[0]:
                        continue
                    key = (x, y) if x < y else (y, x)
                    w = u * v
                    prev = table.get(key)
                    table[key] = w if prev is None else prev + w
        by_paths: dict = {}
        for (x, y), w in table.items():
            if not w.is_zero():
                by_paths.setdefault((x[0], y[0]), []).append(((x, y), w))
        tables.append(by_paths)

    t = det.trigger_path
    others = list(det.coincidence_paths)
    out: dict = {}

    def accumulate(left, right, weight):
        for (k1, u) in left:
            for (k2, v) in right:
                w = u * v
                if weight != 1:
                    w = w * weight
                key = tuple(sorted(md for md in k1 + k2 if md != trig))
                prev = out.get(key)
                out[key] = w if prev is None else prev + w

    if len(others) == 3:
        k1, k2 = tables
        for i, p in enumerate(others):
            q, r = [o for j, o in enumerate(others) if j != i]
            pa = (min(t, p), max(t, p))
            pb = (min(q, r), max(q, r))
            l1, l2 = k1.get(pa, ()), k2.get(pa, ())
            r1, r2 = k1.get(pb, ()), k2.get(pb, ())
            accumulate(l1, r2, 1)
            accumulate(l2, r1, 1)
            if setup.double_emission:
                accumulate(l1, r1, 2)
                accumulate(l2, r2, 2)
        return PhotonicState._trusted(out, 3)
    # non-standard detection layouts use the general expansion
    state = substitute(source_state(setup), _chain_rules(setup), cutoff=setup.cutoff, counter=counter)
    return postselect(state, det)


def _chain_rules(setup: Setup) -> dict:
    inputs = {md for term in source_state(setup) for md in term}
    images = transfer_map(setup, inputs)
    return {src: tuple(vec.items()) for src, vec in images.items()}


# -- cheap topology criterion ----------------------------------------------------


def mixes_pairs(setup: Setup) -> bool:
    """Can some detector receive amplitude from both crystals?

    Propagates, element by element, which crystals may have populated each
    path; only two-path elements move amplitude between paths.
    """
    origin = {p: 0 for p in setup.paths}
    for bit, src in ((1, setup.sources[0]), (2, setup.sources[1])):
        for p in src.paths:
            origin[p] |= bit
    for el in setup.elements:
        flat = el.flatten() if isinstance(el, Composite) else (el,)
        for sub in flat:
            if isinstance(sub, TWO_PATH):
                joined = origin[sub.a] | origin[sub.b]
                origin[sub.a] = origin[sub.b] = joined
    return any(origin[p] == 3 for p in setup.detection.paths)


# -- simplification / promotion ------------------------------------------------------


def _predicate(objective) -> Callable[[Setup], object]:
    if hasattr(objective, "evaluate"):
        return objective.evaluate
    if callable(objective):
        return objective
    raise TypeError("objective must be callable or provide evaluate(setup)")


def simplify(setup: Setup, objective) -> Setup:
    """Greedily drop single elements while the objective stays satisfied.

    Elements are tried front to back and the first removable one goes; the
    pass restarts until no single removal survives.
    """
    ok = _predicate(objective)
    if not ok(setup):
        raise ValueError("setup does not satisfy the objective")
    current = setup
    changed = True
    while changed:
        changed = False
        for i in range(len(current.elements)):
            cand = current.without(i)
            if ok(cand):
                current = cand
                changed = True
                break
    return current


def to_composite(setup: Setup, name: str) -> Composite:
    return Composite(name, setup.elements)


# -- text I/O ----------------------------------------------------------------


def format_setup(setup: Setup) -> str:
    lines = [
        "paths: " + " ".join(path_name(p) for p in setup.paths),
        f"cutoff: {setup.cutoff}",
        f"double_emission: {'true' if setup.double_emission else 'false'}",
    ]
    lines += [f"source: {s.text()}" for s in setup.sources]
    lines.append(f"detect: {setup.detection.text()}")
    lines += [el.text() for el in setup.elements]
    return "\n".join(lines) + "\n"


def parse_setup(text: str) -> Setup:
    paths: tuple[int, ...] = DEFAULT_PATHS
    cutoff = 2
    double = True
    sources: list[Spdc] = []
    detection = None
    elements = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            head, sep, rest = line.partition(":")
            if sep and head in {"paths", "cutoff", "double_emission", "source", "detect"}:
                rest = rest.strip()
                if head == "paths":
                    paths = tuple(path_index(p) for p in rest.split())
                elif head == "cutoff":
                    cutoff = int(rest)
                elif head == "double_emission":
                    if rest not in ("true", "false"):
                        raise ValueError("double_emission must be true or false")
                    double = rest == "true"
                elif head == "source":
                    src = parse_element(rest)
                    if not isinstance(src, Spdc):
                        raise ValueError("source must be an SPDC crystal")
                    sources.append(src)
                else:
                    detection = DetectionSpec.parse(rest)
            else:
                el = parse_element(line)
                if isinstance(el, Spdc):
                    raise ValueError("crystals belong on 'source:' lines")
                elements.append(el)
        except (ValueError, KeyError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if detection is None:
        raise ValueError("missing 'detect:' line")
    return Setup(paths, tuple(sources), tuple(elements), detection, cutoff, double).validate()


def render_setup(setup: Setup) -> str:
    """ASCII diagram: one row per path, one column per element."""
    rows = {p: [f"{path_name(p)} "] for p in setup.paths}
    for src_i, src in enumerate(setup.sources, 1):
        for p in setup.paths:
            rows[p].append(f"=S{src_i}=" if p in src.paths else "-----")
    for el in setup.elements:
        label = el.name if isinstance(el, Composite) else el.kind
        extra = ""
        if hasattr(el, "k"):
            extra = str(el.k)
        elif isinstance(el, Hologram):
            extra = f"{el.shift:+d}"
        box = f"[{label}{extra}]"
        width = len(box)
        for p in setup.paths:
            rows[p].append("-" + (box if p in el.paths else "-" * width) + "-")
    det = setup.detection
    for p in setup.paths:
        if p == det.trigger_path:
            rows[p].append(f"-> T({det.trigger_oam})")
        elif p in det.coincidence_paths:
            rows[p].append("-> D")
        else:
            rows[p].append("")
    return "\n".join("".join(rows[p]) for p in setup.paths) + "\n"
