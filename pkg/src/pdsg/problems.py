"""Problem instances, random generators, constant certification, and sizing.

An instance bundles the oracles the solvers consume: an exact and a
stochastic objective subgradient, and per-constraint value/subgradient
queries over a box domain.  The concrete family used throughout is the
quadratic one,

    f0(x) = (1/2N) sum_i ||H_i x - c_i||^2,
    f_j(x) = (1/2) x'Q_j x + a_j'x - b_j <= 0,   x in [lo, hi]^n,

which covers both the random QCQP benchmark (dense PSD ``Q_j``) and the
scenario-LP family (``Q_j = 0``, unit-Hessian objective).  Instances are
immutable after construction and safe to share across concurrent runs.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError

_MAGIC = b"QCPDINST"
_VERSION = 1


class ProblemInstance:
    """Oracle interface: stochastic objective plus m constraint oracles on a box.

    Subclasses must provide the objective and constraint oracles; the base
    class supplies the box bookkeeping, the default start point, and slow
    generic full passes over the constraints.
    """

    def __init__(self, n, m, box_lo, box_hi, origin_feasible=False):
        self.n = int(n)
        self.m = int(m)
        if self.n < 1 or self.m < 1:
            raise ValueError(f"dimensions must be >= 1, got n={n}, m={m}")
        self.box_lo = np.asarray(box_lo, dtype=float)
        self.box_hi = np.asarray(box_hi, dtype=float)
        if self.box_lo.shape != (self.n,) or self.box_hi.shape != (self.n,):
            raise DimensionError("box bounds must be length-n vectors")
        if np.any(self.box_lo > self.box_hi):
            raise ValueError("box_lo must be <= box_hi componentwise")
        self.origin_feasible = bool(origin_feasible)

    # -- objective oracle ---------------------------------------------------

    def objective(self, x) -> float:
        """Exact objective value f0(x)."""
        raise NotImplementedError

    def objective_grad(self, x):
        """Exact full-batch objective subgradient at x."""
        raise NotImplementedError

    def stoch_objective_grad(self, x, rng):
        """Unbiased stochastic objective subgradient at x, drawn from rng."""
        raise NotImplementedError

    def objective_curvature(self) -> float:
        """Upper bound on the objective Hessian spectral norm (0 if none known)."""
        return 0.0

    # -- constraint oracle --------------------------------------------------

    def constraint(self, j, x):
        """Value and subgradient ``(f_j(x), grad f_j(x))`` of constraint j."""
        raise NotImplementedError

    def constraint_value(self, j, x) -> float:
        return self.constraint(j, x)[0]

    def constraint_values(self, x):
        """All m constraint values at x (measurement use; O(m) pass)."""
        return np.array([self.constraint_value(j, x) for j in range(self.m)])

    def constraint_grads(self, x):
        """All m constraint subgradients at x, stacked (m, n)."""
        return np.stack([self.constraint(j, x)[1] for j in range(self.m)])

    def constraint_curvatures(self):
        """Per-constraint Hessian norm bounds (zeros when constraints are affine)."""
        return np.zeros(self.m)

    # -- misc ---------------------------------------------------------------

    def start_point(self):
        """Default initial iterate: origin when certified feasible, else box center."""
        if self.origin_feasible:
            return np.zeros(self.n)
        return 0.5 * (self.box_lo + self.box_hi)


@dataclass(frozen=True)
class QcqpData:
    """Raw arrays of a quadratic instance.

    ``H`` is (N, p, n), ``c`` is (N, p), ``Q`` is (m, n, n) symmetric PSD,
    ``a`` is (m, n), ``b`` is (m,).  ``seed`` records the generator seed
    (-1 for hand-built data).
    """

    H: np.ndarray
    c: np.ndarray
    Q: np.ndarray
    a: np.ndarray
    b: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    seed: int = -1


@dataclass(frozen=True)
class TheoryConstants:
    """Certified oracle bounds: |f_j| <= F and ||grad f_j|| <= G on the box.

    ``sigma`` is an empirical stochastic-gradient deviation estimate (not a
    certified bound) and ``mu`` is the objective's strong-convexity modulus,
    exact only when ``mu_exact`` is set.
    """

    F: float
    G: float
    sigma: float
    mu: float
    sigma_is_estimate: bool = True
    mu_exact: bool = False


class QuadraticInstance(ProblemInstance):
    """Least-squares objective with quadratic inequality constraints on a box."""

    def __init__(self, data: QcqpData):
        N, p, n = data.H.shape
        m = data.Q.shape[0]
        if data.c.shape != (N, p):
            raise DimensionError(f"c must be (N, p) = ({N}, {p}), got {data.c.shape}")
        if data.Q.shape != (m, n, n) or data.a.shape != (m, n) or data.b.shape != (m,):
            raise DimensionError("constraint arrays have inconsistent shapes")
        super().__init__(
            n, m, data.box_lo, data.box_hi,
            origin_feasible=bool(np.all(data.b > 0.0)),
        )
        self.data = data
        self.N = N
        self.p = p
        self._hessian = None
        self._curvature = None
        self._qnorms = None

    # -- objective ----------------------------------------------------------

    def objective(self, x) -> float:
        r = self.data.H @ x - self.data.c
        return float(0.5 * np.mean(np.sum(r * r, axis=1)))

    def objective_grad(self, x):
        r = self.data.H @ x - self.data.c
        return np.einsum("ipn,ip->n", self.data.H, r) / self.N

    def stoch_objective_grad(self, x, rng):
        i = int(rng.integers(self.N))
        Hi = self.data.H[i]
        return Hi.T @ (Hi @ x - self.data.c[i])

    def hessian(self):
        """Exact objective Hessian (1/N) sum_i H_i'H_i."""
        if self._hessian is None:
            self._hessian = np.einsum("ipn,ipq->nq", self.data.H, self.data.H) / self.N
        return self._hessian

    def objective_curvature(self) -> float:
        if self._curvature is None:
            if self.n <= 512:
                self._curvature = float(np.linalg.eigvalsh(self.hessian())[-1])
            else:
                self._curvature = float(np.linalg.norm(self.hessian(), "fro"))
        return self._curvature

    # -- constraints ----------------------------------------------------------

    def constraint(self, j, x):
        Qx = self.data.Q[j] @ x
        val = 0.5 * float(x @ Qx) + float(self.data.a[j] @ x) - float(self.data.b[j])
        return val, Qx + self.data.a[j]

    def constraint_value(self, j, x) -> float:
        Qx = self.data.Q[j] @ x
        return 0.5 * float(x @ Qx) + float(self.data.a[j] @ x) - float(self.data.b[j])

    def constraint_values(self, x):
        Qx = self.data.Q @ x
        return 0.5 * (Qx @ x) + self.data.a @ x - self.data.b

    def constraint_grads(self, x):
        return self.data.Q @ x + self.data.a

    def constraint_curvatures(self):
        if self._qnorms is None:
            self._qnorms = np.linalg.norm(self.data.Q, axis=(1, 2))
        return self._qnorms


def random_qcqp(n, p, N, m, seed) -> QuadraticInstance:
    """Random QCQP benchmark instance on the box [-10, 10]^n.

    ``H_i``, ``c_i`` and ``a_j`` have i.i.d. standard normal entries;
    ``Q_j = M_j M_j'/n`` with ``M_j`` standard normal, PSD by construction
    and with O(1) spectral norm; ``b_j`` is uniform on [0.1, 1.1], which
    makes the origin strictly feasible.  Deterministic given the seed.
    """
    n, p, N, m = int(n), int(p), int(N), int(m)
    if min(n, p, N, m) < 1:
        raise ValueError(f"dimensions must be >= 1, got n={n} p={p} N={N} m={m}")
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((N, p, n))
    c = rng.standard_normal((N, p))
    M = rng.standard_normal((m, n, n))
    Q = np.einsum("mik,mjk->mij", M, M) / n
    a = rng.standard_normal((m, n))
    b = rng.uniform(0.1, 1.1, m)
    box = 10.0 * np.ones(n)
    return QuadraticInstance(QcqpData(H, c, Q, a, b, -box, box, seed=int(seed)))


def random_scenario_lp(n, m, second_stage_dim, seed) -> QuadraticInstance:
    """Scenario family: affine constraints, strongly convex quadratic objective.

    The objective is (1/2N) sum_i ||x - c_i||^2 with ``N = second_stage_dim``
    scenario pieces around a common random target, so its Hessian is exactly
    the identity (modulus 1) and the stochastic oracle averages over the
    pieces.  Constraint rows have i.i.d. N(0, 1/n) entries and right-hand
    sides uniform on [0.1, 1.1], leaving the origin strictly feasible.
    """
    n, m, N = int(n), int(m), int(second_stage_dim)
    if min(n, m, N) < 1:
        raise ValueError(f"dimensions must be >= 1, got n={n} m={m} N={N}")
    rng = np.random.default_rng(seed)
    # modest target and piece spread: some seeds are constrained at the
    # optimum, others leave it interior, so both regimes are available
    target = 0.1 * rng.standard_normal(n)
    c = target[None, :] + 0.3 * rng.standard_normal((N, n))
    H = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    Q = np.zeros((m, n, n))
    a = rng.standard_normal((m, n)) / math.sqrt(n)
    b = rng.uniform(0.1, 1.1, m)
    box = 10.0 * np.ones(n)
    return QuadraticInstance(QcqpData(H, c, Q, a, b, -box, box, seed=int(seed)))


def box_radius(box_lo, box_hi) -> float:
    """Euclidean radius of the box seen from the origin: sup of ||x|| over it."""
    corner = np.maximum(np.abs(box_lo), np.abs(box_hi))
    return float(np.linalg.norm(corner))


def certify_constants(
    inst: QuadraticInstance, samples=16, rng_seed=0, spectral="frobenius"
) -> TheoryConstants:
    """Certified F, G bounds plus empirical sigma and the modulus mu.

    F and G come from the closed forms ``F_j = 0.5||Q_j|| R^2 + ||a_j|| R + |b_j|``
    and ``G_j = ||Q_j|| R + ||a_j||`` with R the box radius; ``||Q_j||`` is
    upper-bounded by the Frobenius norm unless ``spectral="exact"``.  sigma is
    the largest sample standard deviation of the stochastic gradient over
    ``samples`` uniform points of the box (an estimate, not a certificate).
    mu is the exact smallest Hessian eigenvalue on instances small enough to
    factor, else 0 with ``mu_exact=False``.
    """
    if not isinstance(inst, QuadraticInstance):
        raise TypeError("certification requires a QuadraticInstance")
    data = inst.data
    R = box_radius(inst.box_lo, inst.box_hi)
    if spectral == "exact":
        qnorm = np.array([np.linalg.norm(Qj, 2) for Qj in data.Q])
    else:
        qnorm = np.linalg.norm(data.Q, axis=(1, 2))
    anorm = np.linalg.norm(data.a, axis=1)
    G = float(np.max(qnorm * R + anorm))
    F = float(np.max(0.5 * qnorm * R * R + anorm * R + np.abs(data.b)))

    rng = np.random.default_rng(rng_seed)
    sigma = 0.0
    for _ in range(int(samples)):
        x = rng.uniform(inst.box_lo, inst.box_hi)
        grads = np.einsum("ipn,ip->in", data.H, data.H @ x - data.c)
        dev = grads - grads.mean(axis=0)
        sigma = max(sigma, math.sqrt(float(np.mean(np.sum(dev * dev, axis=1)))))

    if inst.n <= 512:
        mu = max(float(np.linalg.eigvalsh(inst.hessian())[0]), 0.0)
        mu_exact = True
    else:
        mu, mu_exact = 0.0, False
    return TheoryConstants(F=F, G=G, sigma=sigma, mu=mu, mu_exact=mu_exact)


# -- scenario sizing ---------------------------------------------------------


def _log_binom(n, k) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _log_discard_lhs(N, n, tau, p) -> float:
    """Log of C(p+n-1, p) * sum_{i<=p+n-1} C(N,i) tau^i (1-tau)^(N-i)."""
    k = p + n - 1
    log_tau = math.log(tau)
    log_1mtau = math.log1p(-tau)
    terms = [
        _log_binom(N, i) + i * log_tau + (N - i) * log_1mtau for i in range(k + 1)
    ]
    top = max(terms)
    tail = math.log(sum(math.exp(t - top) for t in terms))
    return _log_binom(p + n - 1, p) + top + tail


_N_CAP = 10**9


def scenario_count_discarding(n, tau, eps, p=0) -> int:
    """Smallest sample count N making the discarding bound hold.

    Returns the least N >= p + n with
    ``C(p+n-1, p) * sum_{i=0}^{p+n-1} C(N,i) tau^i (1-tau)^(N-i) <= eps``.
    The left side is evaluated in log space (log-gamma binomials) and is
    nonincreasing in N, so a galloping search plus bisection finds the
    minimum.
    """
    n, p = int(n), int(p)
    if n < 1 or p < 0:
        raise ValueError(f"need n >= 1 and p >= 0, got n={n}, p={p}")
    if not (0.0 < tau < 1.0 and 0.0 < eps < 1.0):
        raise ValueError("tau and eps must lie in (0, 1)")
    log_eps = math.log(eps)
    lo = p + n
    if _log_discard_lhs(lo, n, tau, p) <= log_eps:
        return lo
    hi = lo
    while True:
        lo = hi
        hi = min(2 * hi, _N_CAP)
        if _log_discard_lhs(hi, n, tau, p) <= log_eps:
            break
        if hi >= _N_CAP:
            raise CapacityError(f"no N <= {_N_CAP} satisfies the bound")
    # invariant: lhs(lo) > eps >= lhs(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _log_discard_lhs(mid, n, tau, p) <= log_eps:
            hi = mid
        else:
            lo = mid
    return hi


def scenario_count_robust(n, tau, eps) -> int:
    """Sample count ``ceil(n/(tau*eps) - 1)`` for robust feasibility by sampling."""
    n = int(n)
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not (0.0 < tau < 1.0 and 0.0 < eps < 1.0):
        raise ValueError("tau and eps must lie in (0, 1)")
    val = n / (tau * eps) - 1.0
    if not math.isfinite(val):
        raise CapacityError("robust sampling bound overflows")
    # nudge by one ulp-scale unit so exact integers survive float division
    return max(1, math.ceil(val - 1e-9))


# -- serialization -----------------------------------------------------------


def save_instance(inst: QuadraticInstance, path) -> None:
    """Write the single-file container; round-trips bit-exactly via load_instance."""
    with open(path, "wb") as fh:
        fh.write(instance_bytes(inst))


def instance_bytes(inst: QuadraticInstance) -> bytes:
    """Serialized form: magic, version byte, u64 dims (n, p, N, m), f64 arrays."""
    d = inst.data
    parts = [
        _MAGIC,
        struct.pack("<B", _VERSION),
        struct.pack("<4Q", inst.n, inst.p, inst.N, inst.m),
    ]
    for arr in (d.H, d.c, d.Q, d.a, d.b, d.box_lo, d.box_hi):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def load_instance(path) -> QuadraticInstance:
    """Read an instance container written by save_instance."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"{path}: not an instance file (bad magic)")
    off = len(_MAGIC)
    (version,) = struct.unpack_from("<B", blob, off)
    off += 1
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    n, p, N, m = struct.unpack_from("<4Q", blob, off)
    off += 32

    def take(shape):
        nonlocal off
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
        off += count * 8
        return arr.reshape(shape).copy()

    H = take((N, p, n))
    c = take((N, p))
    Q = take((m, n, n))
    a = take((m, n))
    b = take((m,))
    box_lo = take((n,))
    box_hi = take((n,))
    if off != len(blob):
        raise ValueError(f"{path}: trailing bytes in instance file")
    return QuadraticInstance(QcqpData(H, c, Q, a, b, box_lo, box_hi))


def instance_digest(inst: QuadraticInstance) -> str:
    """Content hash of the serialized instance (reference-cache key)."""
    return hashlib.sha256(instance_bytes(inst)).hexdigest()
