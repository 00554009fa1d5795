"""Finite-difference verification of analytic gradients.

Objectives are rebuilt from scratch at every probe point, so the check is
independent of the recorded graph it verifies.  All probing runs in float64;
central differences with a configurable step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Graph, NonFiniteError, Tensor, gradients

__all__ = ["GradCheckResult", "grad_check", "kink_margin"]

# ops whose derivative jumps; probe points are screened away from their kinks
_KINKED_OPS = {"abs": 0.0, "relu": 0.0, "leaky_relu": 0.0, "sqrt": 0.0}


@dataclass
class GradCheckResult:
    max_rel_err: float
    worst_leaf: int = 0
    worst_coord: tuple = ()
    worst_analytic: float = 0.0
    worst_numeric: float = 0.0
    checked: int = 0
    per_leaf: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "max_rel_err": self.max_rel_err,
            "worst_leaf": self.worst_leaf,
            "worst_coord": list(self.worst_coord),
            "worst_analytic": self.worst_analytic,
            "worst_numeric": self.worst_numeric,
            "checked": self.checked,
        }


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def grad_check(objective: Callable[[Sequence[Tensor]], Tensor],
               point: Sequence[np.ndarray],
               step: float = 1e-3,
               coords: int | None = None,
               rng: np.random.Generator | None = None) -> GradCheckResult:
    """Compare analytic gradients of a scalar objective against central differences.

    `point` holds one float64 array per differentiable leaf.  With `coords`
    set, only that many randomly chosen coordinates per leaf are probed
    (needed for large parameter tensors); otherwise every coordinate is.
    Returns the max relative error |analytic - numeric| / max(|a|, |n|, 1e-8).
    """
    point = [np.asarray(p, dtype=np.float64) for p in point]
    leaves = [Tensor(p, requires_grad=True, dtype=np.float64) for p in point]
    out = objective(leaves)
    if not np.isfinite(out.data).all():
        raise NonFiniteError("grad_check: objective is non-finite at the base point")
    analytic = gradients(out, leaves)

    def evaluate(candidate: list[np.ndarray]) -> float:
        fresh = [Tensor(p, requires_grad=False, dtype=np.float64) for p in candidate]
        val = objective(fresh)
        if not np.isfinite(val.data).all():
            raise NonFiniteError("grad_check: objective is non-finite at a perturbed point")
        return float(val.data.reshape(())[()])

    result = GradCheckResult(max_rel_err=0.0)
    for li, base in enumerate(point):
        if coords is None or coords >= base.size:
            flat_idx = np.arange(base.size)
        else:
            picker = rng if rng is not None else np.random.default_rng(0)
            flat_idx = picker.choice(base.size, size=coords, replace=False)
        leaf_worst = 0.0
        for fi in flat_idx:
            idx = np.unravel_index(int(fi), base.shape)
            plus = [p.copy() for p in point]
            minus = [p.copy() for p in point]
            plus[li][idx] += step
            minus[li][idx] -= step
            numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * step)
            a = float(analytic[li][idx])
            err = _rel_err(a, numeric)
            result.checked += 1
            leaf_worst = max(leaf_worst, err)
            if err > result.max_rel_err:
                result.max_rel_err = err
                result.worst_leaf = li
                result.worst_coord = idx
                result.worst_analytic = a
                result.worst_numeric = numeric
        result.per_leaf.append(leaf_worst)
    return result


def kink_margin(output: Tensor) -> float:
    """Smallest distance of any kinked-op input to its kink across a graph.

    Used to screen probe points: central differences straddling an abs/relu
    corner measure the average of two slopes, not the derivative, so probe
    points must keep all such inputs farther than the step from the corner.
    """
    margin = float("inf")
    for node in Graph(output).nodes:
        kink = _KINKED_OPS.get(node.op)
        if kink is None or not node._parents:
            continue
        first = node._parents[0]
        # constants never move under the perturbation, so their kinks are inert;
        # inputs sitting exactly on the kink are locally stable there (dead
        # units on both sides of a difference) and are skipped as well
        if not first.requires_grad or not first.size:
            continue
        dist = np.abs(first.data - kink)
        live = dist[dist > 0]
        if live.size:
            margin = min(margin, float(np.min(live)))
    return margin
