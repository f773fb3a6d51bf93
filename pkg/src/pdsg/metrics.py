"""Run-time measurement: objective error, infeasibility, KKT residuals.

Metrics always use exact full-batch evaluations, independent of the solver's
sampled oracles, and never touch the solver's RNG; measurement cost is kept
off the solver's oracle budget.  A ``Recorder`` is the hook handed to a run:
at each measurement tick it logs the last iterate and both ergodic averages.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

POINT_TAGS = ("last", "ergodic_plain", "ergodic_weighted")
DIVERGED_TAG = "DIVERGED"


@dataclass(frozen=True)
class RunRow:
    k: int
    epoch: float
    point: str
    obj_err: float
    infeas: float
    z_norm: float


@dataclass
class RunRecord:
    """Time series of measurement rows plus run metadata."""

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def by_point(self, tag):
        return [r for r in self.rows if r.point == tag]

    def final(self, tag):
        picked = self.by_point(tag)
        return picked[-1] if picked else None


def infeasibility(inst, x) -> float:
    """Mean positive part of the constraint values, (1/m) sum_j [f_j(x)]_+."""
    vals = inst.constraint_values(x)
    return float(np.maximum(vals, 0.0).mean())


def objective_error(inst, x, f0_ref) -> float:
    """Absolute exact-objective gap |f0(x) - f0_ref|."""
    return abs(inst.objective(x) - f0_ref)


@dataclass(frozen=True)
class KktResidual:
    stationarity: float
    complementarity: float
    primal_infeas: float
    dual_infeas: float

    def max(self) -> float:
        return max(
            self.stationarity, self.complementarity, self.primal_infeas, self.dual_infeas
        )


def kkt_residual(inst, x, z) -> KktResidual:
    """Four first-order residuals of (x, z) for the box-constrained problem.

    Stationarity is the norm of the Lagrangian gradient
    ``grad f0 + (1/m) sum_j z_j grad f_j`` projected on the box tangent cone
    (components pointing out of an active bound are clipped).
    Complementarity is ``(1/m) sum_j |z_j f_j(x)|``; dual infeasibility is the
    norm of the negative part of z.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    fvals = inst.constraint_values(x)
    grads = inst.constraint_grads(x)
    g = inst.objective_grad(x) + grads.T @ (z / inst.m)

    at_lo = x <= inst.box_lo
    at_hi = x >= inst.box_hi
    r = g.copy()
    r[at_lo] = np.minimum(g[at_lo], 0.0)
    r[at_hi] = np.maximum(g[at_hi], 0.0)

    return KktResidual(
        stationarity=float(np.linalg.norm(r)),
        complementarity=float(np.abs(z * fvals).mean()),
        primal_infeas=float(np.maximum(fvals, 0.0).mean()),
        dual_infeas=float(np.linalg.norm(np.minimum(z, 0.0))),
    )


class Recorder:
    """Measurement hook: logs (last, ergodic_plain, ergodic_weighted) rows.

    Returns the ergodic-plain ``obj_err + infeas`` as the early-stop signal.
    The epoch is cross-checked against the run's oracle counters: each
    iteration costs two constraint-function queries, so the counter-based
    epoch must equal k/m exactly.
    """

    def __init__(self, inst, f0_ref, meta=None):
        self.inst = inst
        self.f0_ref = float(f0_ref)
        self.record = RunRecord(meta=dict(meta or {}))
        self._t0 = time.perf_counter()

    def __call__(self, state):
        inst = self.inst
        k = state.k - 1
        epoch = k / inst.m
        queries = state.n_constr_grad_queries + state.n_constr_val_queries
        assert queries == 2 * k, "oracle accounting out of step with iteration count"
        z_norm = float(np.linalg.norm(state.z))

        signal = None
        points = (
            ("last", state.x),
            ("ergodic_plain", state.ergodic_plain()),
            ("ergodic_weighted", state.ergodic_weighted()),
        )
        for tag, point in points:
            err = objective_error(inst, point, self.f0_ref)
            inf = infeasibility(inst, point)
            self.record.rows.append(
                RunRow(k=k, epoch=epoch, point=tag, obj_err=err, infeas=inf, z_norm=z_norm)
            )
            if tag == "ergodic_plain":
                signal = err + inf
        self.record.meta["wall_clock"] = time.perf_counter() - self._t0
        return signal
