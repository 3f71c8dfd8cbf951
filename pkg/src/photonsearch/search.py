"""Random topological search over toolbox setups with staged early aborts.

Each trial draws a setup, then runs the cheap criteria before the expensive
ones::

    mixes_pairs -> simulate -> non-empty -> cheap_state_check -> objective

and every trial lands in exactly one stage counter.  Hits are simplified
before they are reported and may be promoted into the toolbox.
"""

from __future__ import annotations

import itertools
import json
import sys
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from typing import Iterator

import numpy as np

from .elements import Spdc, Template, Toolbox, default_toolbox, parse_element, parse_toolbox
from .objectives import (
    GhzPattern,
    SrvCertificate,
    SrvRegistry,
    SrvScan,
    SrvTarget,
    cheap_state_check,
    certificate_from_json,
    parse_objective,
)
from .setup import Setup, format_setup, mixes_pairs, parse_setup, simplify, simulate, to_composite
from .state import DetectionSpec, path_index, path_name

__all__ = [
    "STAGES",
    "SearchConfig",
    "SearchStats",
    "Solution",
    "random_setup",
    "enumerate_setups",
    "count_setups",
    "evaluate_trial",
    "run_search",
    "augment_toolbox",
]

SOLUTION_SCHEMA = "photonsearch.solution/1"
PHASE_STEPS = 8
STAGES = ("pruned_mixing", "empty_state", "pruned_cheap", "objective_miss", "hit")


@dataclass(frozen=True)
class SearchConfig:
    max_elements: int = 15
    cutoff: int = 2
    budget: int = 1000
    seed: int = 0
    workers: int = 1
    double_emission: bool = True
    toolbox: Toolbox = field(default_factory=default_toolbox)
    objective: object = field(default_factory=lambda: GhzPattern(3))
    augment_toolbox: bool = False
    simplify: bool = True
    paths: tuple[int, ...] = (0, 1, 2, 3)
    sources: tuple[Spdc, ...] = (Spdc(0, 1, 3), Spdc(2, 3, 3))
    detection: DetectionSpec = field(default_factory=lambda: DetectionSpec(3, 0, (0, 1, 2)))
    trigger_oams: tuple[int, ...] = (0,)
    require_mixing: bool = True
    mode: str = "random"
    chunk_size: int = 2000
    audit: bool = False
    progress_every: int = 0
    record_timing: bool = False
    stop_after: int | None = None

    phase_steps = PHASE_STEPS

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.max_elements < 1:
            raise ValueError("max_elements must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.mode not in ("random", "exhaustive"):
            raise ValueError("mode must be 'random' or 'exhaustive'")
        if not self.trigger_oams:
            raise ValueError("trigger_oams must not be empty")
        for name in ("paths", "sources", "trigger_oams"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def base_setup(self) -> Setup:
        return Setup(self.paths, self.sources, (), self.detection, self.cutoff, self.double_emission)

    def to_json(self) -> dict:
        return {
            "max_elements": self.max_elements,
            "cutoff": self.cutoff,
            "budget": self.budget,
            "seed": self.seed,
            "workers": self.workers,
            "double_emission": self.double_emission,
            "toolbox": self.toolbox.text(),
            "objective": self.objective.text(),
            "augment_toolbox": self.augment_toolbox,
            "simplify": self.simplify,
            "paths": " ".join(path_name(p) for p in self.paths),
            "sources": [s.text() for s in self.sources],
            "detection": self.detection.text(),
            "trigger_oams": list(self.trigger_oams),
            "require_mixing": self.require_mixing,
            "mode": self.mode,
            "chunk_size": self.chunk_size,
            "audit": self.audit,
            "progress_every": self.progress_every,
            "record_timing": self.record_timing,
            "stop_after": self.stop_after,
        }

    @classmethod
    def from_json(cls, data: dict) -> SearchConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(data)
        if "toolbox" in kw:
            kw["toolbox"] = parse_toolbox(kw["toolbox"])
        if "objective" in kw:
            kw["objective"] = parse_objective(kw["objective"])
        if "paths" in kw:
            p = kw["paths"]
            kw["paths"] = tuple(path_index(x) for x in (p.split() if isinstance(p, str) else p))
        if "sources" in kw:
            kw["sources"] = tuple(parse_element(s) for s in kw["sources"])
            if not all(isinstance(s, Spdc) for s in kw["sources"]):
                raise ValueError("sources must be SPDC crystals")
        if "detection" in kw:
            kw["detection"] = DetectionSpec.parse(kw["detection"])
        if "trigger_oams" in kw:
            kw["trigger_oams"] = tuple(int(x) for x in kw["trigger_oams"])
        return cls(**kw)


@dataclass
class SearchStats:
    counters: Counter = field(default_factory=Counter)
    trials: int = 0
    audit_violations: list = field(default_factory=list)
    toolbox: Toolbox | None = None
    registry: SrvRegistry | None = None
    solutions: int = 0
    elapsed: float = 0.0

    def counter_dict(self) -> dict:
        return {s: int(self.counters.get(s, 0)) for s in STAGES}


@dataclass(frozen=True)
class Solution:
    setup: Setup
    certificate: object
    trial: int
    worker: int
    seed_path: tuple[int, ...]
    wall_clock: float = 0.0
    novel: bool | None = None

    def to_json(self, include_timing: bool = False) -> dict:
        out = {
            "schema": SOLUTION_SCHEMA,
            "setup": format_setup(self.setup),
            "certificate": self.certificate.to_json(),
            "trial": self.trial,
            "worker": self.worker,
            "seed_path": list(self.seed_path),
        }
        if self.novel is not None:
            out["novel"] = self.novel
        if include_timing:
            out["wall_clock"] = round(self.wall_clock, 6)
        return out

    def to_line(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_json(include_timing), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, data: dict) -> Solution:
        if data.get("schema") != SOLUTION_SCHEMA:
            raise ValueError(f"unsupported solution schema {data.get('schema')!r}")
        return cls(
            parse_setup(data["setup"]),
            certificate_from_json(data["certificate"]),
            int(data["trial"]),
            int(data["worker"]),
            tuple(data["seed_path"]),
            float(data.get("wall_clock", 0.0)),
            data.get("novel"),
        )


# -- setup generation ------------------------------------------------------------


def random_setup(config: SearchConfig, rng: np.random.Generator, toolbox: Toolbox | None = None) -> Setup:
    """Uniform length in 1..max_elements, uniform templates, parameters and paths."""
    toolbox = toolbox or config.toolbox
    templates = toolbox.templates
    paths = config.paths
    n = int(rng.integers(1, config.max_elements + 1))
    elements = tuple(templates[int(rng.integers(len(templates)))].instantiate(rng, paths) for _ in range(n))
    detection = config.detection
    if len(config.trigger_oams) > 1:
        oam = config.trigger_oams[int(rng.integers(len(config.trigger_oams)))]
        detection = replace(detection, trigger_oam=oam)
    return Setup(paths, config.sources, elements, detection, config.cutoff, config.double_emission)


def _instances(template: Template, paths: tuple[int, ...]) -> list:
    n = template.arity
    if template.composite is not None:
        assigns = itertools.permutations(paths, n)
    elif n == 2:
        assigns = itertools.combinations(paths, 2)
    else:
        assigns = ((p,) for p in paths)
    values = template.values or (None,)
    return [template.build(list(a), v) for a in assigns for v in values]


def enumerate_setups(config: SearchConfig, toolbox: Toolbox | None = None) -> Iterator[Setup]:
    """Every setup of 0..max_elements elements, shortest first."""
    toolbox = toolbox or config.toolbox
    pool = [el for t in toolbox for el in _instances(t, config.paths)]
    base = config.base_setup()
    for n in range(config.max_elements + 1):
        for chain in itertools.product(pool, repeat=n):
            yield base.with_elements(chain)


def count_setups(config: SearchConfig, toolbox: Toolbox | None = None) -> int:
    toolbox = toolbox or config.toolbox
    k = sum(len(_instances(t, config.paths)) for t in toolbox)
    return sum(k**n for n in range(config.max_elements + 1))


# -- evaluation -----------------------------------------------------------------


def evaluate_trial(setup: Setup, objective, require_mixing: bool = True, audit: bool = False):
    """Run the staged pipeline on one setup.

    Returns ``(stage, certificate, violated)``; ``violated`` is True only in
    audit mode, when a pruned setup nevertheless satisfies the objective.
    """
    if not getattr(objective, "needs_state", True):
        cert = objective.evaluate(setup)
        return ("hit" if cert else "objective_miss"), cert, False

    def forced(state=None):
        if not audit:
            return False
        if state is None:
            state = simulate(setup)
        return bool(not state.is_empty() and _full_check(objective, state))

    if require_mixing and not mixes_pairs(setup):
        return "pruned_mixing", None, forced()
    state = simulate(setup)
    if state.is_empty():
        return "empty_state", None, False
    if not cheap_state_check(state, objective.cheap_dims):
        return "pruned_cheap", None, forced(state)
    cert = objective.check_state(state)
    return ("hit" if cert else "objective_miss"), cert, False


def _full_check(objective, state):
    try:
        return objective.check_state(state)
    except ValueError:
        return None


def _simplify_objective(objective, cert):
    # a scan hit must keep its own SRV class while being simplified
    if isinstance(objective, SrvScan) and isinstance(cert, SrvCertificate):
        return SrvTarget(frozenset([cert.srv]))
    return objective


def _run_chunk(task):
    config, toolbox, worker, trials, rng_state, known = task
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = rng_state
    counts: Counter = Counter()
    hits = []
    violations = []
    claimed = set(known)
    scan = isinstance(config.objective, SrvScan)
    if config.mode == "exhaustive":
        start = trials.start
        source = itertools.islice(enumerate_setups(config, toolbox), start, trials.stop, trials.step)
    else:
        source = (random_setup(config, rng, toolbox) for _ in trials)
    for t, setup in zip(trials, source):
        stage, cert, violated = evaluate_trial(setup, config.objective, config.require_mixing, config.audit)
        counts[stage] += 1
        if violated:
            violations.append((t, format_setup(setup)))
        if stage != "hit":
            continue
        key = cert.srv if scan else None
        if scan and key in claimed:
            hits.append((t, cert, None))
            continue
        claimed.add(key)
        found = setup
        if config.simplify:
            found = simplify(setup, _simplify_objective(config.objective, cert))
            cert = config.objective.evaluate(found)
        hits.append((t, cert, found))
    return counts, hits, violations, rng.bit_generator.state


def augment_toolbox(toolbox: Toolbox, solution: Solution, name: str | None = None) -> Toolbox:
    """Register the solution's element chain as a composite template."""
    comp = to_composite(solution.setup, name or f"sol{solution.trial}")
    return toolbox.with_composite(comp)


def run_search(
    config: SearchConfig,
    stats: SearchStats | None = None,
    registry: SrvRegistry | None = None,
) -> Iterator[Solution]:
    """Yield solutions in trial order until the budget is spent.

    Trials are dealt round-robin to ``config.workers`` independent RNG streams
    spawned from the master seed.  Work proceeds in epochs of ``chunk_size``
    trials per worker; the toolbox and SRV registry are updated between
    epochs, so a run is reproducible for a fixed (seed, workers, chunk_size).
    """
    stats = stats if stats is not None else SearchStats()
    registry = registry if registry is not None else SrvRegistry()
    stats.registry = registry
    toolbox = config.toolbox
    stats.toolbox = toolbox
    nworkers = config.workers
    total = config.budget
    if config.mode == "exhaustive":
        total = min(total, count_setups(config, toolbox))
    children = np.random.SeedSequence(config.seed).spawn(nworkers)
    rng_states = [np.random.Generator(np.random.PCG64(c)).bit_generator.state for c in children]
    started = time.perf_counter()
    pool = get_context("fork").Pool(nworkers) if nworkers > 1 else None
    scan = isinstance(config.objective, SrvScan)
    track_srv = isinstance(config.objective, (SrvScan, SrvTarget))
    next_report = config.progress_every
    emitted = 0
    try:
        trial = 0
        while trial < total:
            end = min(total, trial + config.chunk_size * nworkers)
            known = registry.snapshot() if scan else frozenset()
            tasks = [
                (config, toolbox, w, range(trial + w, end, nworkers), rng_states[w], known)
                for w in range(nworkers)
            ]
            results = pool.map(_run_chunk, tasks) if pool else [_run_chunk(t) for t in tasks]
            hits = []
            for w, (counts, whits, violations, state) in enumerate(results):
                rng_states[w] = state
                stats.counters.update(counts)
                stats.audit_violations.extend(violations)
                hits.extend((t, w, cert, found) for t, cert, found in whits)
            stats.trials = end
            hits.sort(key=lambda h: h[0])
            for t, w, cert, found in hits:
                novel = registry.insert(cert.srv) if track_srv else None
                if found is None or (scan and not novel):
                    continue
                sol = Solution(
                    found,
                    cert,
                    t,
                    w,
                    (config.seed, w, t),
                    time.perf_counter() - started,
                    novel,
                )
                if config.augment_toolbox:
                    toolbox = augment_toolbox(toolbox, sol)
                    stats.toolbox = toolbox
                stats.solutions += 1
                emitted += 1
                yield sol
                if config.stop_after is not None and emitted >= config.stop_after:
                    return
            trial = end
            if config.progress_every and trial >= next_report:
                c = stats.counter_dict()
                print(
                    f"[search] {trial}/{total} trials "
                    + " ".join(f"{k}={v}" for k, v in c.items())
                    + f" solutions={stats.solutions}",
                    file=sys.stderr,
                )
                while next_report <= trial:
                    next_report += config.progress_every
    finally:
        stats.elapsed = time.perf_counter() - started
        if pool is not None:
            pool.terminate()
            pool.join()
