"""Instance generators, certification, sizing, and serialization tests."""

import math

import numpy as np
import pytest

from pdsg.errors import CapacityError
from pdsg.problems import (
    QcqpData,
    QuadraticInstance,
    box_radius,
    certify_constants,
    instance_bytes,
    instance_digest,
    load_instance,
    random_qcqp,
    random_scenario_lp,
    save_instance,
    scenario_count_discarding,
    scenario_count_robust,
)


def _fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_qcqp_shapes_and_construction():
    inst = random_qcqp(6, 4, 9, 7, seed=0)
    d = inst.data
    assert d.H.shape == (9, 4, 6) and d.c.shape == (9, 4)
    assert d.Q.shape == (7, 6, 6) and d.a.shape == (7, 6) and d.b.shape == (7,)
    assert np.all(d.b >= 0.1) and np.all(d.b <= 1.1)
    assert np.all(inst.box_lo == -10.0) and np.all(inst.box_hi == 10.0)
    # Q symmetric PSD
    for Qj in d.Q:
        assert np.allclose(Qj, Qj.T)
        assert np.linalg.eigvalsh(Qj)[0] >= -1e-10


def test_qcqp_origin_strictly_feasible():
    inst = random_qcqp(5, 3, 4, 11, seed=7)
    vals = inst.constraint_values(np.zeros(5))
    assert np.allclose(vals, -inst.data.b)
    assert np.all(vals < 0)
    assert inst.origin_feasible
    assert np.array_equal(inst.start_point(), np.zeros(5))


def test_qcqp_seed_determinism():
    a = random_qcqp(4, 3, 5, 6, seed=42)
    b = random_qcqp(4, 3, 5, 6, seed=42)
    c = random_qcqp(4, 3, 5, 6, seed=43)
    assert instance_bytes(a) == instance_bytes(b)
    assert instance_bytes(a) != instance_bytes(c)


def test_dimension_validation():
    with pytest.raises(ValueError):
        random_qcqp(0, 1, 1, 1, seed=0)
    with pytest.raises(ValueError):
        random_scenario_lp(3, 0, 1, seed=0)


def test_objective_gradient_matches_finite_differences():
    inst = random_qcqp(5, 4, 6, 3, seed=1)
    rng = np.random.default_rng(0)
    for _ in range(4):
        x = rng.uniform(-2, 2, 5)
        g = inst.objective_grad(x)
        g_fd = _fd_grad(inst.objective, x)
        assert np.max(np.abs(g - g_fd)) < 1e-5


def test_constraint_gradient_matches_finite_differences():
    inst = random_qcqp(5, 4, 6, 3, seed=2)
    rng = np.random.default_rng(1)
    for j in range(inst.m):
        x = rng.uniform(-2, 2, 5)
        val, grad = inst.constraint(j, x)
        assert val == pytest.approx(inst.constraint_value(j, x))
        g_fd = _fd_grad(lambda y: inst.constraint(j, y)[0], x)
        assert np.max(np.abs(grad - g_fd)) < 1e-5


def test_constraint_full_passes_agree_with_single_queries():
    inst = random_qcqp(4, 3, 5, 6, seed=3)
    x = np.random.default_rng(2).uniform(-3, 3, 4)
    vals = inst.constraint_values(x)
    grads = inst.constraint_grads(x)
    for j in range(inst.m):
        vj, gj = inst.constraint(j, x)
        assert vals[j] == pytest.approx(vj)
        assert np.allclose(grads[j], gj)


def test_stochastic_gradient_unbiased():
    inst = random_qcqp(6, 4, 12, 3, seed=4)
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, 6)
    exact = inst.objective_grad(x)
    per_piece = np.einsum("ipn,ip->in", inst.data.H, inst.data.H @ x - inst.data.c)
    idx = rng.integers(inst.N, size=100_000)
    draws = per_piece[idx]
    mean = draws.mean(axis=0)
    se = draws.std(axis=0) / math.sqrt(len(idx))
    assert np.all(np.abs(mean - exact) <= 4 * se + 1e-12)


def test_single_piece_objective_has_zero_variance():
    inst = random_qcqp(3, 2, 1, 2, seed=5)
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 3)
    g1 = inst.stoch_objective_grad(x, np.random.default_rng(1))
    g2 = inst.stoch_objective_grad(x, np.random.default_rng(2))
    assert np.allclose(g1, inst.objective_grad(x))
    assert np.allclose(g1, g2)
    consts = certify_constants(inst, samples=8, rng_seed=0)
    assert consts.sigma == 0.0


def test_scenario_lp_properties():
    inst = random_scenario_lp(4, 6, 3, seed=0)
    assert inst.n == 4 and inst.m == 6 and inst.N == 3
    assert np.all(inst.data.Q == 0.0)
    vals = inst.constraint_values(np.zeros(4))
    assert np.all(vals < 0)
    # unit objective Hessian: modulus exactly one
    consts = certify_constants(inst, samples=4, rng_seed=0)
    assert consts.mu == pytest.approx(1.0, abs=1e-12)
    assert consts.mu_exact


def test_certify_closed_form_example():
    # single affine constraint x1 <= 1 on [-10, 10]^2
    H = np.eye(2)[None, :, :]
    c = np.zeros((1, 2))
    Q = np.zeros((1, 2, 2))
    a = np.array([[1.0, 0.0]])
    b = np.array([1.0])
    box = np.array([10.0, 10.0])
    inst = QuadraticInstance(QcqpData(H, c, Q, a, b, -box, box))
    consts = certify_constants(inst, samples=4, rng_seed=0)
    assert consts.G == pytest.approx(1.0)
    assert consts.F == pytest.approx(10 * math.sqrt(2) + 1.0)


def test_certified_bounds_hold_on_samples():
    inst = random_qcqp(6, 4, 5, 12, seed=6)
    consts = certify_constants(inst, samples=8, rng_seed=0)
    rng = np.random.default_rng(7)
    xs = rng.uniform(inst.box_lo, inst.box_hi, size=(2000, inst.n))
    for x in xs[:200]:
        vals = inst.constraint_values(x)
        grads = inst.constraint_grads(x)
        assert np.max(np.abs(vals)) <= consts.F + 1e-9
        assert np.max(np.linalg.norm(grads, axis=1)) <= consts.G + 1e-9


def test_scaling_rows_doubles_g():
    base = random_scenario_lp(4, 5, 1, seed=1)
    d = base.data
    doubled = QuadraticInstance(
        QcqpData(d.H, d.c, d.Q, 2.0 * d.a, d.b, d.box_lo, d.box_hi)
    )
    g1 = certify_constants(base, samples=2, rng_seed=0).G
    g2 = certify_constants(doubled, samples=2, rng_seed=0).G
    assert g2 == pytest.approx(2.0 * g1)


def test_box_radius():
    assert box_radius(np.array([-10.0, -10.0]), np.array([10.0, 10.0])) == pytest.approx(
        10 * math.sqrt(2)
    )
    assert box_radius(np.array([-3.0]), np.array([1.0])) == pytest.approx(3.0)


def test_start_point_box_center_when_origin_infeasible():
    H = np.eye(2)[None, :, :]
    c = np.zeros((1, 2))
    Q = np.zeros((1, 2, 2))
    a = np.array([[1.0, 0.0]])
    b = np.array([-1.0])  # f(0) = 1 > 0
    inst = QuadraticInstance(QcqpData(H, c, Q, a, b, np.array([0.0, 0.0]), np.array([4.0, 2.0])))
    assert not inst.origin_feasible
    assert np.allclose(inst.start_point(), [2.0, 1.0])


# -- scenario sizing ----------------------------------------------------------


def test_scenario_count_robust_examples():
    assert scenario_count_robust(1, 0.5, 0.5) == 3
    assert scenario_count_robust(100, 0.01, 0.01) == 999_999


def test_scenario_count_robust_linear_in_n():
    base = scenario_count_robust(7, 0.2, 0.1)
    doubled = scenario_count_robust(14, 0.2, 0.1)
    assert abs(doubled - 2 * base) <= 1


def test_scenario_count_robust_validation():
    with pytest.raises(ValueError):
        scenario_count_robust(3, 0.0, 0.5)
    with pytest.raises(ValueError):
        scenario_count_robust(3, 0.5, 1.0)
    with pytest.raises(ValueError):
        scenario_count_robust(0, 0.5, 0.5)


def test_scenario_count_discarding_hand_case():
    # with p = 0, n = 1 the bound reduces to (1-tau)^N <= eps
    assert scenario_count_discarding(1, 0.5, 0.5, 0) == 1
    assert scenario_count_discarding(1, 0.5, 0.25, 0) == 2


def test_scenario_count_discarding_minimal():
    from pdsg.problems import _log_discard_lhs

    rng = np.random.default_rng(11)
    for _ in range(5):
        n = int(rng.integers(1, 8))
        p = int(rng.integers(0, 5))
        tau = float(rng.uniform(0.05, 0.4))
        eps = float(rng.uniform(0.02, 0.5))
        N = scenario_count_discarding(n, tau, eps, p)
        assert N >= p + n
        assert _log_discard_lhs(N, n, tau, p) <= math.log(eps)
        if N - 1 >= p + n:
            assert _log_discard_lhs(N - 1, n, tau, p) > math.log(eps)


def test_discard_bound_matches_exact_rational_arithmetic():
    from fractions import Fraction

    from pdsg.problems import _log_discard_lhs

    for n, p, tau, N in ((1, 0, Fraction(1, 2), 5), (3, 2, Fraction(1, 4), 20), (2, 1, Fraction(1, 10), 40)):
        k = p + n - 1
        exact = Fraction(math.comb(k, p)) * sum(
            Fraction(math.comb(N, i)) * tau**i * (1 - tau) ** (N - i)
            for i in range(k + 1)
        )
        got = _log_discard_lhs(N, n, float(tau), p)
        assert got == pytest.approx(math.log(float(exact)), rel=1e-10)


def test_scenario_count_discarding_monotone_in_eps():
    a = scenario_count_discarding(4, 0.1, 0.05, 2)
    b = scenario_count_discarding(4, 0.1, 0.2, 2)
    assert b <= a


def test_scenario_count_discarding_capacity():
    with pytest.raises(CapacityError):
        scenario_count_discarding(200, 1e-9, 1e-9, 0)


# -- serialization ------------------------------------------------------------


def test_instance_round_trip_bit_exact(tmp_path):
    inst = random_qcqp(5, 3, 4, 6, seed=9)
    path = tmp_path / "inst.bin"
    save_instance(inst, path)
    loaded = load_instance(path)
    assert instance_bytes(loaded) == instance_bytes(inst)
    for name in ("H", "c", "Q", "a", "b", "box_lo", "box_hi"):
        assert np.array_equal(getattr(loaded.data, name), getattr(inst.data, name))
    assert instance_digest(loaded) == instance_digest(inst)


def test_instance_byte_layout():
    import struct

    inst = random_qcqp(3, 2, 2, 4, seed=1)
    blob = instance_bytes(inst)
    assert blob[:8] == b"QCPDINST"
    assert blob[8] == 1  # version byte
    n, p, N, m = struct.unpack_from("<4Q", blob, 9)
    assert (n, p, N, m) == (3, 2, 2, 4)
    floats = N * p * n + N * p + m * n * n + m * n + m + n + n
    assert len(blob) == 8 + 1 + 32 + 8 * floats
    # first array value is H[0, 0, 0] in row-major order
    first = np.frombuffer(blob, dtype="<f8", count=1, offset=41)[0]
    assert first == inst.data.H[0, 0, 0]


def test_instance_file_rejects_bad_version(tmp_path):
    inst = random_qcqp(3, 2, 2, 2, seed=0)
    blob = bytearray(instance_bytes(inst))
    blob[8] = 99
    path = tmp_path / "vers.bin"
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError):
        load_instance(path)


def test_instance_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTANINSTANCE")
    with pytest.raises(ValueError):
        load_instance(path)


def test_instance_file_rejects_truncation(tmp_path):
    inst = random_qcqp(3, 2, 2, 2, seed=0)
    blob = instance_bytes(inst)
    path = tmp_path / "trunc.bin"
    path.write_bytes(blob + b"\x00")
    with pytest.raises(ValueError):
        load_instance(path)
