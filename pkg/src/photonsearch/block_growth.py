"""Grow a polarization circuit block by block towards a target operator.

A block acts on a single-photon polarization qubit (basis H, V) and has
eight wave-plate angles::

    pre HWP, pre QWP
    beam displacer: H -> upper rail, V -> lower rail
    upper HWP, upper QWP | lower HWP, lower QWP
    beam displacer: upper-H and lower-V recombine, the rest leaves on two loss rails
    post HWP, post QWP

so the induced 2x2 operator is ``post @ diag(u, l) @ pre`` with ``u`` and
``l`` the surviving amplitudes of each rail.  Loss makes it a contraction.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "ANGLES_PER_BLOCK",
    "IDENTITY_ANGLES",
    "hwp",
    "qwp",
    "block_operator",
    "compose",
    "fidelity_to_target",
    "normalize_target",
    "load_target_matrix",
    "finite_difference_gradient",
    "GrowthResult",
    "grow_until",
]

ANGLES_PER_BLOCK = 8
# angle order: pre_hwp, pre_qwp, u_hwp, u_qwp, l_hwp, l_qwp, post_hwp, post_qwp
IDENTITY_ANGLES = np.array([0.0, 0.0, 0.0, 0.0, 0.0, np.pi / 2, 0.0, 0.0])


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def hwp(theta: float) -> np.ndarray:
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp(theta: float) -> np.ndarray:
    return _rot(theta) @ np.diag([1.0, 1.0j]) @ _rot(-theta)


def _plates(h: float, q: float) -> np.ndarray:
    # the half-wave plate is hit first
    return qwp(q) @ hwp(h)


def block_operator(angles) -> np.ndarray:
    a = np.asarray(angles, dtype=float)
    if a.shape != (ANGLES_PER_BLOCK,):
        raise ValueError(f"a block takes {ANGLES_PER_BLOCK} angles, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("angles must be finite")
    pre = _plates(a[0], a[1])
    upper = _plates(a[2], a[3])[0, 0]
    lower = _plates(a[4], a[5])[1, 1]
    post = _plates(a[6], a[7])
    return post @ np.diag([upper, lower]) @ pre


def compose(blocks) -> np.ndarray:
    """Operator of the blocks in physical order (first block acts first)."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("compose needs at least one block")
    op = np.eye(2, dtype=complex)
    for b in blocks:
        op = block_operator(b) @ op
    return op


def fidelity_to_target(op: np.ndarray, target: np.ndarray) -> float:
    op = np.asarray(op, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if op.shape != target.shape:
        raise ValueError(f"shape mismatch {op.shape} vs {target.shape}")
    na = np.vdot(op, op).real
    nt = np.vdot(target, target).real
    if na == 0 or nt == 0:
        raise ValueError("fidelity of a zero operator is undefined")
    return float(abs(np.vdot(target, op)) ** 2 / (na * nt))


def normalize_target(target) -> tuple[np.ndarray, float]:
    """Rescale so the spectral norm is at most 1; returns (matrix, factor)."""
    t = np.asarray(target, dtype=complex)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError("target must be a square matrix")
    if t.shape != (2, 2):
        raise ValueError(f"target must be 2x2 to match the signal space, got {t.shape}")
    if not np.any(t):
        raise ValueError("target is the zero matrix")
    s = float(np.linalg.norm(t, 2))
    if s > 1.0:
        return t / s, 1.0 / s
    return t, 1.0


def load_target_matrix(path) -> np.ndarray:
    """Whitespace-separated complex entries (``1+0j``, ``0.5j``), one row per line."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        m = np.loadtxt(path, dtype=complex, comments="#", ndmin=2)
    if m.size == 0:
        raise ValueError(f"{path}: no matrix entries")
    return m


def finite_difference_gradient(f, x, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@dataclass
class GrowthResult:
    blocks: list
    fidelity: float
    converged: bool
    trace: list = field(default_factory=list)
    scale: float = 1.0

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def operator(self) -> np.ndarray:
        return compose(self.blocks)

    def to_json(self) -> dict:
        return {
            "blocks": [[float(a) for a in b] for b in self.blocks],
            "fidelity": self.fidelity,
            "converged": self.converged,
            "scale": self.scale,
            "trace": [{"blocks": n, "restart": r, "fidelity": f} for n, r, f in self.trace],
        }

    @classmethod
    def from_json(cls, data: dict) -> GrowthResult:
        return cls(
            [np.array(b, dtype=float) for b in data["blocks"]],
            float(data["fidelity"]),
            bool(data["converged"]),
            [(t["blocks"], t["restart"], t["fidelity"]) for t in data["trace"]],
            float(data.get("scale", 1.0)),
        )

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "blocks", "restart", "fidelity"])
        for i, (n, r, f) in enumerate(self.trace):
            w.writerow([i, n, r, repr(f)])
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _infidelity(flat, target, frozen):
    blocks = list(frozen) + list(np.reshape(flat, (-1, ANGLES_PER_BLOCK)))
    op = compose(blocks)
    if not np.any(np.abs(op) > 1e-15):
        return 1.0
    return 1.0 - fidelity_to_target(op, target)


def grow_until(
    target,
    threshold: float = 0.99,
    max_blocks: int = 5,
    restarts: int = 5,
    seed: int = 0,
    joint: bool = True,
    maxiter: int | None = None,
    init_spread: float = 0.05,
) -> GrowthResult:
    """Add blocks until the fidelity reaches ``threshold`` or blocks run out.

    Each stage runs ``restarts`` Nelder-Mead descents.  The first one starts
    from the best angles so far plus a new block within ``init_spread`` of the
    pass-through setting; the others start from uniformly random angles.
    With ``joint=False`` earlier blocks stay frozen and only the new block
    is optimized.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    if max_blocks < 1:
        raise ValueError("max_blocks must be at least 1")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    target, scale = normalize_target(target)
    rng = np.random.default_rng(seed)
    best: list = []
    best_f = 0.0
    trace: list = []
    for n in range(1, max_blocks + 1):
        fresh = IDENTITY_ANGLES + rng.uniform(-init_spread, init_spread, ANGLES_PER_BLOCK)
        frozen = [] if joint else list(best)
        warm = (list(best) if joint else []) + [fresh]
        for r in range(restarts):
            if r == 0:
                x0 = np.concatenate(warm)
            else:
                x0 = rng.uniform(0, np.pi, len(warm) * ANGLES_PER_BLOCK)
            opts = {"xatol": 1e-9, "fatol": 1e-12, "maxiter": maxiter or 600 * x0.size, "maxfev": None}
            res = minimize(_infidelity, x0, args=(target, frozen), method="Nelder-Mead", options=opts)
            f = 1.0 - float(res.fun)
            if f > best_f or not best:
                best_f = f
                tail = np.mod(np.reshape(res.x, (-1, ANGLES_PER_BLOCK)), np.pi)
                best = frozen + list(tail)
            trace.append((n, r, best_f))
            if best_f >= threshold:
                break
        if best_f >= threshold:
            return GrowthResult(best, best_f, True, trace, scale)
    return GrowthResult(best, best_f, best_f >= threshold, trace, scale)
