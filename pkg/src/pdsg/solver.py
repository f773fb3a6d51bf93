"""Primal-dual stochastic gradient solver: schedules, step, and run loop.

One iteration samples a constraint index for the primal update, takes a
projected stochastic subgradient step on the augmented Lagrangian, then
samples an independent second index and updates that single dual coordinate
from the new iterate's constraint value.  Three step-size schedules are
built in; each couples the penalty to the dual step (``beta_k = rho_k``),
which keeps the dual iterate nonnegative.

A run is single-threaded and deterministic given its seed.  Runs over the
same instance may execute concurrently; nothing here mutates the instance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import metrics
from .auglag import primal_subgradient
from .errors import ConfigError, DimensionError, DivergenceError

SCHEDULE_KINDS = ("fixed_horizon", "anytime", "strongly_convex")

_Z_BLOWUP = 1e12


@dataclass(frozen=True)
class ParamSchedule:
    """Step-size sequences (alpha_k, rho_k, beta_k) for one of the three kinds.

    fixed_horizon    alpha_k = alpha/sqrt(K),           rho_k = rho/sqrt(K)
    anytime          alpha_k = alpha/(sqrt(k+1)log(k+1)), rho_k likewise
    strongly_convex  alpha_k = alpha/(k+1),             rho_k = rho/log(K+1)

    beta_k = rho_k in all three.  Logs are natural.  ``K`` is required for
    the kinds whose sequences depend on the horizon; ``mu`` is the strong
    convexity modulus and is only used by ``strongly_convex``.
    """

    kind: str
    alpha: float
    rho: float
    K: int | None = None
    mu: float = 0.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.alpha <= 0 or self.rho <= 0:
            raise ConfigError("alpha and rho must be positive")
        if self.kind in ("fixed_horizon", "strongly_convex"):
            if self.K is None or self.K < 1:
                raise ConfigError(f"{self.kind} requires a positive horizon K")
        if self.kind == "strongly_convex" and self.mu <= 0:
            raise ConfigError("strongly_convex requires mu > 0")

    def alpha_at(self, k):
        """alpha_k for 1-based iteration index k (scalar or array)."""
        if self.kind == "fixed_horizon":
            return self.alpha / math.sqrt(self.K) * np.ones_like(np.asarray(k, dtype=float))
        if self.kind == "anytime":
            kk = np.asarray(k, dtype=float)
            return self.alpha / (np.sqrt(kk + 1.0) * np.log(kk + 1.0))
        kk = np.asarray(k, dtype=float)
        return self.alpha / (kk + 1.0)

    def rho_at(self, k):
        """rho_k for 1-based iteration index k (scalar or array)."""
        kk = np.asarray(k, dtype=float)
        if self.kind == "fixed_horizon":
            return self.rho / math.sqrt(self.K) * np.ones_like(kk)
        if self.kind == "anytime":
            return self.rho / (np.sqrt(kk + 1.0) * np.log(kk + 1.0))
        return self.rho / math.log(self.K + 1.0) * np.ones_like(kk)

    def beta_at(self, k):
        return self.rho_at(k)

    def steps(self, k):
        """(alpha_k, rho_k, beta_k) as floats for one iteration."""
        return float(self.alpha_at(k)), float(self.rho_at(k)), float(self.beta_at(k))


def fixed_horizon(alpha, rho, K) -> ParamSchedule:
    return ParamSchedule("fixed_horizon", alpha, rho, K=K)


def anytime(alpha, rho) -> ParamSchedule:
    return ParamSchedule("anytime", alpha, rho)


def strongly_convex(alpha, rho, K, mu) -> ParamSchedule:
    return ParamSchedule("strongly_convex", alpha, rho, K=K, mu=mu)


def max_equal_steps(m, G, kind="fixed_horizon", safety=0.999) -> float:
    """Largest alpha = rho passing the kind's product condition, times safety."""
    denom = 68.0 if kind == "anytime" else 32.0
    return safety * math.sqrt(m / (denom * G * G))


# -- schedule validation -------------------------------------------------------


@dataclass(frozen=True)
class ScheduleCheck:
    name: str
    passed: bool
    first_violation_k: int | None = None
    detail: str = ""


@dataclass(frozen=True)
class ScheduleReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f" (first violation at k={c.first_violation_k})" if c.first_violation_k else ""
            detail = f": {c.detail}" if c.detail else ""
            lines.append(f"  [{status}] {c.name}{extra}{detail}")
        return "\n".join(lines)


def validate_schedule(sched: ParamSchedule, m, G, K, mu=None) -> ScheduleReport:
    """Check the step-size conditions of a schedule over horizon K.

    Verifies, for k = 1..K-1, the chained dual-step inequality
    ``rho_k/alpha_k >= rho_{k+1} (1/alpha_{k+1} - mu)`` and ``beta_k >= rho_k``
    (up to k = K), plus the kind's product condition ``alpha*rho < m/(32 G^2)``
    (``m/(68 G^2)`` for anytime) and ``alpha >= 1/mu`` for the strongly convex
    kind.  Report-only; nothing raises.
    """
    if mu is None:
        mu = sched.mu
    checks = []

    ks = np.arange(1, K + 1, dtype=float)
    beta = np.asarray(sched.beta_at(ks), dtype=float)
    rho = np.asarray(sched.rho_at(ks), dtype=float)
    alpha = np.asarray(sched.alpha_at(ks), dtype=float)

    bad = np.nonzero(beta < rho - 1e-15 * np.abs(rho))[0]
    checks.append(
        ScheduleCheck("beta_ge_rho", bad.size == 0, int(bad[0] + 1) if bad.size else None)
    )

    if K >= 2:
        lhs = rho[:-1] / alpha[:-1]
        rhs = rho[1:] * (1.0 / alpha[1:] - mu)
        slack = 1e-9 * np.maximum(1.0, np.abs(rhs))
        bad = np.nonzero(lhs < rhs - slack)[0]
        checks.append(
            ScheduleCheck(
                "step_ratio_monotone", bad.size == 0, int(bad[0] + 1) if bad.size else None
            )
        )
    else:
        checks.append(ScheduleCheck("step_ratio_monotone", True))

    denom = 68.0 if sched.kind == "anytime" else 32.0
    limit = m / (denom * G * G)
    prod_ok = sched.alpha * sched.rho < limit
    checks.append(
        ScheduleCheck(
            "alpha_rho_product",
            prod_ok,
            None,
            f"alpha*rho = {sched.alpha * sched.rho:.6g} vs m/({denom:.0f} G^2) = {limit:.6g}",
        )
    )

    if sched.kind == "strongly_convex":
        ok = mu > 0 and sched.alpha >= 1.0 / mu
        checks.append(
            ScheduleCheck(
                "alpha_ge_inv_mu",
                ok,
                None,
                f"alpha = {sched.alpha:.6g} vs 1/mu = {1.0 / mu if mu > 0 else float('inf'):.6g}",
            )
        )

    return ScheduleReport(tuple(checks))


# -- solver state and iteration ------------------------------------------------


@dataclass
class SolverState:
    """Mutable per-run state: iterates, RNG stream, averages, oracle counters."""

    x: np.ndarray
    z: np.ndarray
    rng: np.random.Generator
    k: int = 1
    sum_plain: np.ndarray = None
    n_plain: int = 0
    sum_weighted: np.ndarray = None
    weight_sum: float = 0.0
    n_obj_queries: int = 0
    n_constr_grad_queries: int = 0
    n_constr_val_queries: int = 0

    def __post_init__(self):
        if self.sum_plain is None:
            self.sum_plain = np.zeros_like(self.x)
        if self.sum_weighted is None:
            self.sum_weighted = np.zeros_like(self.x)

    def ergodic_plain(self):
        """Running mean of the post-update iterates x^{k+1}."""
        if self.n_plain == 0:
            return self.x.copy()
        return self.sum_plain / self.n_plain

    def ergodic_weighted(self):
        """Running alpha_k-weighted mean of the post-update iterates."""
        if self.weight_sum == 0.0:
            return self.x.copy()
        return self.sum_weighted / self.weight_sum


def init_state(inst, seed) -> SolverState:
    """Fresh state at the instance's start point with zero duals."""
    return SolverState(
        x=inst.start_point(),
        z=np.zeros(inst.m),
        rng=np.random.default_rng(seed),
    )


def project_box(x, lo, hi):
    """Componentwise clamp of x into [lo, hi]; the nearest box point."""
    x = np.asarray(x, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if x.shape != lo.shape or x.shape != hi.shape:
        raise DimensionError(
            f"point and bounds differ in shape: {x.shape}, {lo.shape}, {hi.shape}"
        )
    return np.minimum(np.maximum(x, lo), hi)


def pdsg_step(state: SolverState, inst, alpha_k, rho_k, beta_k) -> SolverState:
    """One primal-dual iteration; mutates and returns ``state``.

    Draw order is fixed: constraint index i_k, then the stochastic objective
    oracle, then the dual index j_k.  Exactly one stochastic-objective query,
    one constraint value+subgradient query and one constraint value query.
    """
    rng = state.rng
    m = inst.m

    i_k = int(rng.integers(m))
    g0 = inst.stoch_objective_grad(state.x, rng)
    state.n_obj_queries += 1
    fval, grad = inst.constraint(i_k, state.x)
    state.n_constr_grad_queries += 1

    d = primal_subgradient(g0, fval, grad, state.z[i_k], beta_k)
    x_new = project_box(state.x - alpha_k * d, inst.box_lo, inst.box_hi)

    j_k = int(rng.integers(m))
    fj = inst.constraint_value(j_k, x_new)
    state.n_constr_val_queries += 1

    zj = state.z[j_k]
    zj_new = zj + rho_k * max(-zj / beta_k, fj)
    if rho_k <= beta_k and zj_new < 0.0:
        # exact arithmetic keeps z >= 0 here; repair last-ulp rounding only
        zj_new = 0.0

    if not np.isfinite(x_new).all() or not math.isfinite(zj_new) or abs(zj_new) > _Z_BLOWUP:
        raise DivergenceError(
            f"divergence at iteration {state.k}", iteration=state.k, state=state
        )

    state.z[j_k] = zj_new
    state.x = x_new
    state.sum_plain += x_new
    state.n_plain += 1
    state.sum_weighted += alpha_k * x_new
    state.weight_sum += alpha_k
    state.k += 1
    return state


def run(inst, sched: ParamSchedule, K, seed, recorder=None, cadence=None, stop_below=None):
    """Run K iterations from the default start; returns (state, record).

    ``recorder`` is called with the state every ``cadence`` completed
    iterations (and at the end); if it returns a scalar at or below
    ``stop_below`` the run stops early.  With no recorder the returned
    record is empty.  Deterministic given (inst, sched, K, seed).
    """
    if sched.K is not None and sched.K != K:
        raise ConfigError(f"schedule horizon K={sched.K} does not match run K={K}")
    rhos = np.asarray(sched.rho_at(np.arange(1, max(K, 1) + 1)))
    betas = np.asarray(sched.beta_at(np.arange(1, max(K, 1) + 1)))
    if np.any(rhos > betas):
        warnings.warn(
            "rho_k > beta_k: dual nonnegativity is no longer guaranteed",
            stacklevel=2,
        )

    state = init_state(inst, seed)
    last_recorded = None
    for _ in range(K):
        a_k, r_k, b_k = sched.steps(state.k)
        pdsg_step(state, inst, a_k, r_k, b_k)
        done = state.k - 1
        if (cadence and done % cadence == 0) or done == K:
            if recorder is not None and last_recorded != done:
                signal = recorder(state)
                last_recorded = done
                if stop_below is not None and signal is not None and signal <= stop_below:
                    break

    if recorder is not None:
        record = recorder.record
    else:
        record = metrics.RunRecord(rows=[], meta={"seed": seed, "K": K})
    return state, record
