"""Command-line front end.

Exit codes: 0 success, 1 negative result (no match, unconverged,
interrupted), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .block_growth import grow_until, load_target_matrix
from .objectives import (
    GateCertificate,
    GatePattern,
    GhzCertificate,
    GhzPattern,
    SrvCertificate,
    SrvRegistry,
    SrvTarget,
    parse_objective,
)
from .search import SearchConfig, SearchStats, Solution, run_search
from .setup import format_setup, parse_setup, render_setup, simplify, simulate
from .state import PhotonicState, srv

OUT_ENV = "PHOTONSEARCH_OUT"
EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    config: dict
    seed: int
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    counters: dict = field(default_factory=dict)
    trials: int = 0
    solutions: int = 0
    interrupted: bool = False
    audit_violations: int = 0
    srv_counts: dict | None = None

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "counters": self.counters,
            "trials": self.trials,
            "solutions": self.solutions,
            "interrupted": self.interrupted,
            "audit_violations": self.audit_violations,
            "srv_counts": self.srv_counts,
        }

    @classmethod
    def from_json(cls, data: dict) -> RunManifest:
        return cls(**data)

    def write(self, path: Path) -> None:
        write_atomic(path, json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "runs")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_config(args) -> SearchConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(_read(args.config))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
    overrides = {
        "seed": args.seed,
        "budget": args.budget,
        "workers": args.workers,
        "toolbox": args.toolbox,
        "objective": args.objective,
        "max_elements": args.max_elements,
        "mode": args.mode,
        "progress_every": args.progress_every,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.audit:
        data["audit"] = True
    if args.augment:
        data["augment_toolbox"] = True
    try:
        return SearchConfig.from_json(data)
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None


def cmd_search(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    sol_path = out / "solutions.jsonl"
    manifest = RunManifest(config.to_json(), config.seed)
    stats = SearchStats()
    registry = SrvRegistry()
    sol_path.write_text("", encoding="utf-8")
    try:
        with sol_path.open("a", encoding="utf-8") as fh:
            for sol in run_search(config, stats, registry):
                fh.write(sol.to_line(config.record_timing) + "\n")
                fh.flush()
                if not args.quiet:
                    print(f"trial {sol.trial}: {sol.certificate.summary()}")
    except KeyboardInterrupt:
        manifest.interrupted = True
    finally:
        manifest.finished = _now()
        manifest.counters = stats.counter_dict()
        manifest.trials = stats.trials
        manifest.solutions = stats.solutions
        manifest.audit_violations = len(stats.audit_violations)
        if len(registry):
            manifest.srv_counts = {",".join(map(str, k)): v for k, v in sorted(registry.counts().items())}
        manifest.write(out / "manifest.json")
    c = manifest.counters
    print(
        f"{manifest.trials} trials, {manifest.solutions} solutions; "
        + " ".join(f"{k}={v}" for k, v in c.items()),
        file=sys.stderr,
    )
    return EXIT_NEGATIVE if manifest.interrupted else EXIT_OK


def _objective_for(cert):
    if isinstance(cert, GhzCertificate):
        return GhzPattern(cert.dims)
    if isinstance(cert, SrvCertificate):
        return SrvTarget(frozenset([cert.srv]))
    if isinstance(cert, GateCertificate):
        return GatePattern()
    raise UsageError("cannot infer the objective of this certificate; pass --objective")


def _parse_objective(text: str):
    try:
        return parse_objective(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_setup(path: str):
    try:
        return parse_setup(_read(path))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_solutions(path: str) -> list[Solution]:
    sols = []
    for lineno, line in enumerate(_read(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            sols.append(Solution.from_json(json.loads(line)))
        except (ValueError, KeyError) as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return sols


def cmd_verify(args) -> int:
    if args.state is not None:
        try:
            state = PhotonicState.parse(args.state)
        except ValueError as exc:
            raise UsageError(f"bad state: {exc}") from None
        print(f"SRV {srv(state)}")
        if args.objective:
            obj = _parse_objective(args.objective)
            if not hasattr(obj, "check_state"):
                raise UsageError("this objective needs a setup, not a state")
            cert = obj.check_state(state)
            print(cert.summary() if cert else "no match")
            return EXIT_OK if cert else EXIT_NEGATIVE
        return EXIT_OK
    if not args.file:
        raise UsageError("verify needs a setup/solutions file or --state")
    if args.file.endswith(".jsonl"):
        ok = True
        for sol in _load_solutions(args.file):
            obj = _parse_objective(args.objective) if args.objective else _objective_for(sol.certificate)
            cert = obj.evaluate(sol.setup)
            same = cert is not None and cert.to_json() == sol.certificate.to_json()
            ok &= same
            print(f"trial {sol.trial}: " + (cert.summary() if same else "no match"))
        return EXIT_OK if ok else EXIT_NEGATIVE
    setup = _load_setup(args.file)
    obj = _parse_objective(args.objective or "ghz:3")
    cert = obj.evaluate(setup)
    print(cert.summary() if cert else "no match")
    return EXIT_OK if cert else EXIT_NEGATIVE


def cmd_srv(args) -> int:
    if args.state is not None:
        try:
            state = PhotonicState.parse(args.state)
        except ValueError as exc:
            raise UsageError(f"bad state: {exc}") from None
    elif args.file:
        state = simulate(_load_setup(args.file))
    else:
        raise UsageError("srv needs a setup file or --state")
    if state.is_empty():
        print("empty state")
        return EXIT_NEGATIVE
    if args.show_state:
        print(state.text())
    print(f"SRV {srv(state)}")
    return EXIT_OK


def cmd_simplify(args) -> int:
    setup = _load_setup(args.file)
    obj = _parse_objective(args.objective or "ghz:3")
    if not obj.evaluate(setup):
        print("no match")
        return EXIT_NEGATIVE
    text = format_setup(simplify(setup, obj))
    if args.out:
        write_atomic(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_render(args) -> int:
    sys.stdout.write(render_setup(_load_setup(args.file)))
    return EXIT_OK


def cmd_grow(args) -> int:
    if args.max_blocks < 1:
        raise UsageError("--max-blocks must be at least 1")
    if not 0 < args.threshold <= 1:
        raise UsageError("--threshold must lie in (0, 1]")
    try:
        target = load_target_matrix(args.target)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load target: {exc}") from None
    if target.shape != (2, 2):
        raise UsageError(f"target must be 2x2, got {target.shape[0]}x{target.shape[1]}")
    result = grow_until(
        target,
        threshold=args.threshold,
        max_blocks=args.max_blocks,
        restarts=args.restarts,
        seed=args.seed,
        joint=not args.new_only,
    )
    out = _out_dir(args)
    write_atomic(out / "grow.json", result.dumps() + "\n")
    write_atomic(out / "grow_trace.csv", result.trace_csv())
    if result.scale != 1.0:
        print(f"target rescaled by {result.scale:.6g}")
    status = "converged" if result.converged else "not converged"
    print(f"{status}: {result.n_blocks} block(s), fidelity {result.fidelity:.6f}")
    return EXIT_OK if result.converged else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photonsearch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("search", help="run a random search")
    s.add_argument("config", nargs="?", help="JSON file with SearchConfig keys")
    s.add_argument("--seed", type=int)
    s.add_argument("--budget", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--toolbox", help="e.g. BS,LI,Dove,Holo")
    s.add_argument("--objective", help="ghz:3, srv:3,3,2, srvscan, gate:2,3")
    s.add_argument("--max-elements", type=int)
    s.add_argument("--mode", choices=("random", "exhaustive"))
    s.add_argument("--progress-every", type=int)
    s.add_argument("--audit", action="store_true", help="force-evaluate pruned trials")
    s.add_argument("--augment", action="store_true", help="add solutions to the toolbox")
    s.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
    s.add_argument("-q", "--quiet", action="store_true")
    s.set_defaults(func=cmd_search)

    v = sub.add_parser("verify", help="re-check a setup, a solutions log or a state")
    v.add_argument("file", nargs="?")
    v.add_argument("--objective")
    v.add_argument("--state", help="state text, e.g. '|a:0 b:0 c:0> + |a:1 b:1 c:1>'")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("srv", help="Schmidt-rank vector of a setup or state")
    r.add_argument("file", nargs="?")
    r.add_argument("--state")
    r.add_argument("--show-state", action="store_true")
    r.set_defaults(func=cmd_srv)

    m = sub.add_parser("simplify", help="drop removable elements")
    m.add_argument("file")
    m.add_argument("--objective")
    m.add_argument("--out", help="write the simplified setup here")
    m.set_defaults(func=cmd_simplify)

    g = sub.add_parser("grow", help="grow a block circuit towards a target matrix")
    g.add_argument("target", help="text file with a 2x2 complex matrix")
    g.add_argument("--threshold", type=float, default=0.99)
    g.add_argument("--max-blocks", type=int, default=5)
    g.add_argument("--restarts", type=int, default=5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--new-only", action="store_true", help="freeze earlier blocks")
    g.add_argument("--out")
    g.set_defaults(func=cmd_grow)

    d = sub.add_parser("render", help="ASCII diagram of a setup")
    d.add_argument("file")
    d.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
