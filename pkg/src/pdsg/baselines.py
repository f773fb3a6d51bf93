"""Comparison methods: stochastic mirror-prox variant and full-batch reference.

The mirror-prox variant keeps the sampled primal update but differs from the
main solver in three ways: the penalty parameter is a fixed ``beta``, the
dual coordinate update evaluates the constraint at the *old* primal iterate,
and the dual lives in the box [0, z_max]^m.  This is the single-step form of
the method (the classical one takes two gradient steps per iteration and
averages); it keeps the same three-oracle-call budget per iteration as the
main solver.

The full-batch reference is the deterministic analogue: exact objective
gradient, the full averaged penalty subgradient, and a dense dual update.
It stands in for an external convex solver as the ground-truth oracle
(x*, z*, f0*) for measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import metrics
from .errors import DivergenceError
from .solver import SolverState, init_state, project_box

_Z_BLOWUP = 1e12


@dataclass(frozen=True)
class MirrorProxConfig:
    """Step sizes and dual box for the mirror-prox baseline.

    ``alpha`` and ``rho`` scale constant sequences ``alpha/sqrt(K)`` and
    ``rho/sqrt(K)``.  ``beta`` is the fixed penalty; by default it is coupled
    to the dual step (``rho/sqrt(K)``), mirroring the main solver's
    ``beta_k = rho_k``.  The dual iterate is projected into [0, z_max]^m.
    """

    z_max: float = 10.0
    alpha: float = 1.0
    rho: float = 1.0
    beta: float | None = None

    def __post_init__(self):
        if self.z_max <= 0 or self.alpha <= 0 or self.rho <= 0:
            raise ValueError("z_max, alpha and rho must be positive")
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive when given")

    def steps(self, K):
        """(alpha_k, rho_k, beta) actually used for a K-iteration run."""
        a = self.alpha / math.sqrt(K)
        r = self.rho / math.sqrt(K)
        b = self.beta if self.beta is not None else r
        return a, r, b


def zmax_from_reference(z_ref) -> float:
    """Dual box level max(10, 10 ||z_ref||_inf) from a reference dual vector."""
    z_ref = np.asarray(z_ref, dtype=float)
    return float(max(10.0, 10.0 * np.max(np.abs(z_ref), initial=0.0)))


def mirror_prox_step(state: SolverState, inst, alpha_k, rho_k, beta, z_max) -> SolverState:
    """One mirror-prox iteration; mutates and returns ``state``.

    Identical primal update and draw order as the main solver; the dual
    coordinate update uses the constraint value at the old iterate and is
    projected into [0, z_max].
    """
    rng = state.rng
    m = inst.m

    i_k = int(rng.integers(m))
    g0 = inst.stoch_objective_grad(state.x, rng)
    state.n_obj_queries += 1
    fval, grad = inst.constraint(i_k, state.x)
    state.n_constr_grad_queries += 1

    mult = beta * fval + state.z[i_k]
    d = g0 + mult * grad if mult > 0.0 else g0
    x_new = project_box(state.x - alpha_k * d, inst.box_lo, inst.box_hi)

    j_k = int(rng.integers(m))
    fj = inst.constraint_value(j_k, state.x)
    state.n_constr_val_queries += 1

    zj = state.z[j_k]
    zj_new = min(max(zj + rho_k * max(-zj / beta, fj), 0.0), z_max)

    if not np.isfinite(x_new).all():
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


def mirror_prox_run(inst, cfg: MirrorProxConfig, K, seed, recorder=None, cadence=None):
    """Run K mirror-prox iterations; same calling convention as solver.run."""
    alpha_k, rho_k, beta = cfg.steps(K)
    state = init_state(inst, seed)
    last_recorded = None
    for _ in range(K):
        mirror_prox_step(state, inst, alpha_k, rho_k, beta, cfg.z_max)
        done = state.k - 1
        if (cadence and done % cadence == 0) or done == K:
            if recorder is not None and last_recorded != done:
                recorder(state)
                last_recorded = done
    record = recorder.record if recorder is not None else metrics.RunRecord(meta={"seed": seed})
    return state, record


# -- deterministic full-batch reference ---------------------------------------


@dataclass(frozen=True)
class ReferenceSolution:
    """Ground-truth output: best iterate, duals, objective, and diagnostics."""

    x: np.ndarray
    z: np.ndarray
    f0: float
    converged: bool
    iterations: int
    infeas: float
    step_norm: float


def _per_iter(value, k):
    if value is None:
        return None
    if callable(value):
        return float(value(k))
    return float(value)


def full_batch_reference(
    inst,
    alpha_seq=None,
    rho_seq=None,
    beta_seq=None,
    K=200_000,
    tol=1e-9,
    check_every=20,
) -> ReferenceSolution:
    """Deterministic primal-dual solve with exact gradients and dense duals.

    Per iteration: a projected gradient step on the augmented Lagrangian
    using the full averaged penalty subgradient, then the dense dual update
    ``z_j <- z_j + rho * max(-z_j/beta, f_j(x_new))`` for every coordinate.
    ``alpha_seq``/``rho_seq``/``beta_seq`` may be scalars or callables of the
    1-based iteration; by default beta = rho = 1 and alpha adapts to a local
    curvature bound of the augmented Lagrangian.  Stops once both the
    infeasibility and the primal step norm drop below ``tol``; returns the
    best iterate seen (scored by max of those two) flagged non-converged if
    the tolerance was never reached.
    """
    x = inst.start_point()
    z = np.zeros(inst.m)
    m = inst.m

    L0 = inst.objective_curvature()
    qcurv = inst.constraint_curvatures()

    fvals = inst.constraint_values(x)
    grads = inst.constraint_grads(x)

    best = None
    best_score = math.inf
    converged = False
    k = 0
    step_norm = math.inf
    infeas = float(np.maximum(fvals, 0.0).mean())

    for k in range(1, K + 1):
        beta_k = _per_iter(beta_seq, k)
        if beta_k is None:
            beta_k = 1.0
        rho_k = _per_iter(rho_seq, k)
        if rho_k is None:
            rho_k = beta_k

        mult = np.maximum(beta_k * fvals + z, 0.0)
        d = inst.objective_grad(x) + grads.T @ (mult / m)

        alpha_k = _per_iter(alpha_seq, k)
        if alpha_k is None:
            # curvature bound over all constraints, not just active ones, so the
            # step stays sane when the iterate sits inside the feasible region
            pen_curv = (
                beta_k * float(np.sum(grads * grads)) / m + float(mult @ qcurv) / m
            )
            alpha_k = 1.0 / (L0 + pen_curv + 1e-2)

        x_new = project_box(x - alpha_k * d, inst.box_lo, inst.box_hi)
        fvals_new = inst.constraint_values(x_new)
        grads_new = inst.constraint_grads(x_new)
        z = np.maximum(z + rho_k * np.maximum(-z / beta_k, fvals_new), 0.0)
        if not np.isfinite(x_new).all() or float(np.max(np.abs(z))) > _Z_BLOWUP:
            raise DivergenceError(f"reference diverged at iteration {k}", iteration=k)

        step_norm = float(np.linalg.norm(x_new - x))
        infeas = float(np.maximum(fvals_new, 0.0).mean())
        x, fvals, grads = x_new, fvals_new, grads_new

        # step/alpha approximates the projected gradient, so converged output
        # meets the KKT contract and not just a small-step test
        hit_tol = infeas <= tol and step_norm <= tol * min(1.0, alpha_k)
        if hit_tol or k % check_every == 0:
            score = max(infeas, step_norm)
            if score < best_score:
                best_score = score
                best = (x.copy(), z.copy(), step_norm, infeas)
            if hit_tol:
                converged = True
                break

    if best is None or max(infeas, step_norm) < best_score:
        best = (x.copy(), z.copy(), step_norm, infeas)
    bx, bz, bstep, binf = best
    return ReferenceSolution(
        x=bx,
        z=bz,
        f0=float(inst.objective(bx)),
        converged=converged,
        iterations=k,
        infeas=binf,
        step_norm=bstep,
    )
