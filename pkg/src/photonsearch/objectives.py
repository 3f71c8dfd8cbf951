"""Target predicates for heralded states and for gate-like transformations.

"Orthogonal modes" throughout means distinct OAM values, i.e. the
computational basis.  Certificates record exactly what was matched so that
re-simulating a stored setup can reproduce them.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

from .cyclo import ONE, CycNum
from .state import PhotonicState, fidelity, path_name, srv, substitute
from .setup import Setup, simulate, spdc_state

__all__ = [
    "GhzCertificate",
    "SrvCertificate",
    "FidelityCertificate",
    "GateCertificate",
    "TargetState",
    "GhzPattern",
    "SrvTarget",
    "SrvScan",
    "GatePattern",
    "SrvRegistry",
    "cheap_state_check",
    "ghz_match",
    "srv_objective",
    "gate_match",
    "probe_table",
    "match_gate_table",
    "parse_objective",
    "certificate_from_json",
]


def _kets(state: PhotonicState) -> list[tuple[tuple[int, ...], CycNum]]:
    return [(tuple(m for _, m in term), amp) for term, amp in state.items()]


# -- certificates ------------------------------------------------------------


@dataclass(frozen=True)
class GhzCertificate:
    """A GHZ core plus the out-of-core terms local filters remove.

    ``filters[s]`` is the set of OAM values slot ``s`` must be projected onto;
    after filtering only the core remains, whose coefficients can then be
    equalised by mode-dependent attenuation.
    """

    dims: int
    slot_paths: tuple[int, ...]
    core_terms: tuple[tuple[tuple[int, ...], CycNum], ...]
    slot_modes: tuple[tuple[int, ...], ...]
    mavericks: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...] = ()

    kind = "ghz"

    @property
    def filters(self) -> dict[int, tuple[int, ...]]:
        return dict(zip(self.slot_paths, self.slot_modes))

    def core_state(self) -> PhotonicState:
        return PhotonicState.from_slots(dict(self.core_terms), self.slot_paths)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "dims": self.dims,
            "slot_paths": [path_name(p) for p in self.slot_paths],
            "core_terms": [[list(k), a.to_json()] for k, a in self.core_terms],
            "slot_modes": [list(s) for s in self.slot_modes],
            "mavericks": [[list(k), list(s)] for k, s in self.mavericks],
            "filters": {path_name(p): list(s) for p, s in self.filters.items()},
        }

    def summary(self) -> str:
        core = " + ".join(f"({a})|{','.join(map(str, k))}⟩" for k, a in self.core_terms)
        return f"GHZ d={self.dims}: {core}; {len(self.mavericks)} maverick term(s)"


@dataclass(frozen=True)
class SrvCertificate:
    srv: tuple[int, ...]
    kind = "srv"

    def to_json(self) -> dict:
        return {"kind": self.kind, "srv": list(self.srv)}

    def summary(self) -> str:
        return "SRV (" + ",".join(map(str, self.srv)) + ")"


@dataclass(frozen=True)
class FidelityCertificate:
    fidelity: float
    kind = "fidelity"

    def to_json(self) -> dict:
        return {"kind": self.kind, "fidelity": self.fidelity}

    def summary(self) -> str:
        return f"fidelity {self.fidelity:.12g}"


@dataclass(frozen=True)
class GateCertificate:
    """Controls (c1, c2) on targets t_i give targets tbar_i resp. tbarbar_i."""

    control_in: tuple[int, ...]
    target_in: tuple[int, ...]
    control_out: tuple[tuple[int, ...], ...]
    target_out: tuple[tuple[int, ...], ...]
    kind = "gate"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "control_in": list(self.control_in),
            "target_in": list(self.target_in),
            "control_out": [list(r) for r in self.control_out],
            "target_out": [list(r) for r in self.target_out],
        }

    def summary(self) -> str:
        return f"gate controls={self.control_in} targets={self.target_in} -> {self.target_out}"


def certificate_from_json(data: Mapping):
    kind = data["kind"]
    if kind == "srv":
        return SrvCertificate(tuple(data["srv"]))
    if kind == "fidelity":
        return FidelityCertificate(float(data["fidelity"]))
    if kind == "gate":
        return GateCertificate(
            tuple(data["control_in"]),
            tuple(data["target_in"]),
            tuple(tuple(r) for r in data["control_out"]),
            tuple(tuple(r) for r in data["target_out"]),
        )
    if kind == "ghz":
        from .state import path_index

        return GhzCertificate(
            int(data["dims"]),
            tuple(path_index(p) for p in data["slot_paths"]),
            tuple((tuple(k), CycNum.from_json(a)) for k, a in data["core_terms"]),
            tuple(tuple(s) for s in data["slot_modes"]),
            tuple((tuple(k), tuple(s)) for k, s in data["mavericks"]),
        )
    raise ValueError(f"unknown certificate kind {kind!r}")


# -- state predicates ----------------------------------------------------------


def cheap_state_check(state: PhotonicState, dims: int) -> bool:
    """Every photon slot carries at least ``dims`` distinct OAM values."""
    if state.is_empty():
        return False
    if dims <= 1:
        return True
    seen: dict[int, set] = {}
    for term in state:
        for p, m in term:
            seen.setdefault(p, set()).add(m)
    return all(len(s) >= dims for s in seen.values())


def ghz_match(state: PhotonicState, dims: int = 3, allow_mavericks: bool = True) -> GhzCertificate | None:
    """Find ``dims`` terms that are pairwise distinct in every slot.

    Without mavericks the state must consist of exactly those terms.  With
    mavericks every other term needs at least one slot whose mode lies outside
    that slot's core set, so local projections remove it.
    """
    if state.is_empty() or dims < 1:
        return None
    if not allow_mavericks and len(state) != dims:
        return None
    if len(state) < dims:
        return None
    kets = _kets(state)
    slot_paths = tuple(p for p, _ in next(iter(state)))
    nslots = len(slot_paths)
    n = len(kets)

    def compatible(i: int, chosen: list[int]) -> bool:
        ki = kets[i][0]
        for j in chosen:
            kj = kets[j][0]
            for s in range(nslots):
                if ki[s] == kj[s]:
                    return False
        return True

    def finish(chosen: list[int]) -> GhzCertificate | None:
        core = [kets[i] for i in chosen]
        modes = [frozenset(k[s] for k, _ in core) for s in range(nslots)]
        mavs = []
        chosen_set = set(chosen)
        for i in range(n):
            if i in chosen_set:
                continue
            k = kets[i][0]
            outside = tuple(s for s in range(nslots) if k[s] not in modes[s])
            if not outside:
                return None
            mavs.append((k, outside))
        return GhzCertificate(
            dims,
            slot_paths,
            tuple(core),
            tuple(tuple(sorted(m)) for m in modes),
            tuple(mavs),
        )

    def dfs(start: int, chosen: list[int]):
        if len(chosen) == dims:
            return finish(chosen)
        for i in range(start, n - (dims - len(chosen)) + 1):
            if compatible(i, chosen):
                chosen.append(i)
                cert = dfs(i + 1, chosen)
                chosen.pop()
                if cert is not None:
                    return cert
        return None

    return dfs(0, [])


class SrvRegistry:
    """Set of SRVs seen during a run; ``insert`` is atomic insert-if-absent."""

    def __init__(self, initial: Iterable[tuple[int, ...]] = ()):
        self._lock = threading.Lock()
        self._seen: dict[tuple[int, ...], int] = {}
        for s in initial:
            self._seen.setdefault(tuple(s), 0)

    def insert(self, value: tuple[int, ...]) -> bool:
        value = tuple(value)
        with self._lock:
            if value in self._seen:
                self._seen[value] += 1
                return False
            self._seen[value] = 1
            return True

    def __contains__(self, value) -> bool:
        return tuple(value) in self._seen

    def __len__(self) -> int:
        return len(self._seen)

    def snapshot(self) -> frozenset:
        with self._lock:
            return frozenset(self._seen)

    def counts(self) -> dict[tuple[int, ...], int]:
        with self._lock:
            return dict(sorted(self._seen.items(), reverse=True))

    def to_json(self) -> list:
        return [{"srv": list(k), "hits": v} for k, v in self.counts().items()]


# -- objectives ------------------------------------------------------------------


class _StateObjective:
    cheap_dims = 1
    needs_state = True

    def check_state(self, state: PhotonicState):
        raise NotImplementedError

    def evaluate(self, setup: Setup):
        state = simulate(setup)
        if state.is_empty() or not cheap_state_check(state, self.cheap_dims):
            return None
        return self.check_state(state)


@dataclass(frozen=True)
class TargetState(_StateObjective):
    state: PhotonicState
    min_fidelity: float = 1.0

    def __post_init__(self):
        if not 0 < self.min_fidelity <= 1:
            raise ValueError("min_fidelity must lie in (0, 1]")

    def check_state(self, state):
        if state.order != self.state.order:
            return None
        f = fidelity(state, self.state)
        return FidelityCertificate(f) if f >= self.min_fidelity - 1e-12 else None

    def text(self) -> str:
        return f"state:{self.min_fidelity}:{self.state.text()}"


@dataclass(frozen=True)
class GhzPattern(_StateObjective):
    dims: int = 3
    allow_mavericks: bool = True

    def __post_init__(self):
        if self.dims < 2:
            raise ValueError("GHZ dimension must be at least 2")

    @property
    def cheap_dims(self) -> int:
        return self.dims

    def check_state(self, state):
        return ghz_match(state, self.dims, self.allow_mavericks)

    def text(self) -> str:
        return f"ghz:{self.dims}" + ("" if self.allow_mavericks else ":strict")


@dataclass(frozen=True)
class SrvTarget(_StateObjective):
    targets: frozenset = field(default_factory=frozenset)
    cheap_dims = 2

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(tuple(sorted(t, reverse=True)) for t in self.targets))

    def check_state(self, state):
        hit = srv_objective(state, self)
        return SrvCertificate(hit[0]) if hit else None

    def text(self) -> str:
        return "srv:" + "/".join(",".join(map(str, t)) for t in sorted(self.targets, reverse=True))


@dataclass(frozen=True)
class SrvScan(_StateObjective):
    cheap_dims = 2

    def check_state(self, state):
        hit = srv_objective(state, self)
        return SrvCertificate(hit[0]) if hit else None

    def text(self) -> str:
        return "srvscan"


def srv_objective(state: PhotonicState, obj, registry: SrvRegistry | None = None):
    """``(srv, novel)`` on a hit, else None.

    Callers apply ``cheap_state_check(state, 2)`` first.  A scan hit needs
    every rank >= 2; the registry decides novelty.
    """
    if state.is_empty():
        return None
    value = srv(state)
    if isinstance(obj, SrvTarget):
        if value not in obj.targets:
            return None
    elif isinstance(obj, SrvScan):
        if min(value) < 2:
            return None
    else:
        raise TypeError("srv_objective needs SrvTarget or SrvScan")
    novel = registry.insert(value) if registry is not None else True
    return value, novel


# -- gates ---------------------------------------------------------------------


@dataclass(frozen=True)
class GatePattern:
    """Controlled-operation pattern probed with single-photon product inputs."""

    d_control: int = 2
    d_target: int = 3
    control_path: int = 0
    target_path: int = 1
    control_out: int | None = None
    target_out: int | None = None
    control_modes: tuple[int, ...] = (-2, -1, 0, 1, 2)
    target_modes: tuple[int, ...] = (-2, -1, 0, 1, 2)
    heralds: tuple[tuple[int, int], ...] = ()
    use_sources: bool = False
    needs_state = False
    cheap_dims = 1

    @property
    def out_paths(self) -> tuple[int, int]:
        c = self.control_path if self.control_out is None else self.control_out
        t = self.target_path if self.target_out is None else self.target_out
        return c, t

    def evaluate(self, setup: Setup):
        return gate_match(setup, self)

    def text(self) -> str:
        return f"gate:{self.d_control},{self.d_target}"


def _setup_transform(setup: Setup, pattern: GatePattern) -> Callable[[PhotonicState], PhotonicState]:
    from .setup import transfer_map

    def run(state: PhotonicState) -> PhotonicState:
        inputs = {md for term in state for md in term}
        images = transfer_map(setup, inputs)
        rules = {src: tuple(v.items()) for src, v in images.items()}
        if pattern.use_sources:
            extra = spdc_state(setup.sources, double_emission=setup.double_emission)
            inputs2 = {md for term in extra for md in term} - inputs
            images2 = transfer_map(setup, inputs2)
            rules.update({src: tuple(v.items()) for src, v in images2.items()})
            combined = [(k1 + k2, a1 * a2) for k1, a1 in state.items() for k2, a2 in extra.items()]
            state = PhotonicState(combined)
        return substitute(state, rules, cutoff=setup.cutoff)

    return run


def probe_table(transform: Callable[[PhotonicState], PhotonicState], pattern: GatePattern) -> dict:
    """Map each probe (c, t) to its heralded output (x, t') or None.

    None marks an empty or non-product output.
    """
    cp, tp = pattern.control_path, pattern.target_path
    co, to = pattern.out_paths
    heralds = sorted(tuple(h) for h in pattern.heralds)
    table = {}
    for c in pattern.control_modes:
        for t in pattern.target_modes:
            inp = PhotonicState({((cp, c), (tp, t)): ONE})
            out = transform(inp)
            hits = []
            for term, amp in out.items():
                rest = list(term)
                ok = True
                for h in heralds:
                    if h in rest:
                        rest.remove(h)
                    else:
                        ok = False
                        break
                if not ok or len(rest) != 2:
                    continue
                rest.sort(key=lambda md: (md[0] != co, md))
                if rest[0][0] == co and rest[1][0] == to and co != to:
                    hits.append((rest[0][1], rest[1][1]))
            table[(c, t)] = hits[0] if len(hits) == 1 else None
    return table


def match_gate_table(
    table: Mapping[tuple[int, int], tuple[int, int] | None],
    controls: Sequence[int],
    targets: Sequence[int],
    d_control: int = 2,
    d_target: int = 3,
) -> GateCertificate | None:
    """First choice of controls/targets whose outputs satisfy the gate pattern.

    Each control row must send the chosen targets to pairwise distinct
    outputs, and for each target the outputs of different controls differ.
    """
    for cs in combinations(controls, d_control):
        for ts in combinations(targets, d_target):
            rows = []
            ctrl_rows = []
            for c in cs:
                outs = [table.get((c, t)) for t in ts]
                if any(o is None for o in outs):
                    break
                rows.append(tuple(o[1] for o in outs))
                ctrl_rows.append(tuple(o[0] for o in outs))
            else:
                if all(len(set(r)) == d_target for r in rows) and all(
                    len({r[i] for r in rows}) == d_control for i in range(d_target)
                ):
                    return GateCertificate(tuple(cs), tuple(ts), tuple(ctrl_rows), tuple(rows))
    return None


def gate_match(setup_or_transform, pattern: GatePattern, probes: tuple[Sequence[int], Sequence[int]] | None = None):
    """Probe a setup (or any state transform) and test the gate pattern."""
    if probes is not None:
        pattern = GatePattern(
            pattern.d_control,
            pattern.d_target,
            pattern.control_path,
            pattern.target_path,
            pattern.control_out,
            pattern.target_out,
            tuple(probes[0]),
            tuple(probes[1]),
            pattern.heralds,
            pattern.use_sources,
        )
    if isinstance(setup_or_transform, Setup):
        transform = _setup_transform(setup_or_transform, pattern)
    else:
        transform = setup_or_transform
    table = probe_table(transform, pattern)
    return match_gate_table(table, pattern.control_modes, pattern.target_modes, pattern.d_control, pattern.d_target)


# -- text form -------------------------------------------------------------------


def parse_objective(text: str):
    """``ghz:3``, ``ghz:2:strict``, ``srv:3,3,2/4,2,2``, ``srvscan``, ``gate:2,3``,
    ``state:<min_fidelity>:<state text>``."""
    head, _, rest = text.strip().partition(":")
    if head == "ghz":
        parts = rest.split(":")
        if not parts[0]:
            raise ValueError("ghz objective needs a dimension")
        strict = len(parts) > 1 and parts[1] == "strict"
        return GhzPattern(int(parts[0]), allow_mavericks=not strict)
    if head == "srv":
        targets = [tuple(int(x) for x in grp.split(",")) for grp in rest.split("/") if grp]
        if not targets:
            raise ValueError("srv objective needs at least one target vector")
        return SrvTarget(frozenset(targets))
    if head == "srvscan":
        return SrvScan()
    if head == "gate":
        dc, dt = (int(x) for x in rest.split(","))
        return GatePattern(dc, dt)
    if head == "state":
        fid, _, body = rest.partition(":")
        return TargetState(PhotonicState.parse(body), float(fid))
    raise ValueError(f"unknown objective {text!r}")
