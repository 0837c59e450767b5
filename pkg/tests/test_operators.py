import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from czlab.harness import GeneratorSpec, gen_measure
from czlab.measure import AtomicMeasure, DensityVector, GrowthProfile
from czlab.operators import (Kernel, TruncationError, auto_lambda_grid, empirical_l2_norm,
                             exceedance_masses, kernel_eval, truncated_transform,
                             verify_kernel_conditions, weak_quasinorm, weak_sweep)


def test_kernel_eval_examples():
    assert kernel_eval(Kernel.cauchy(), (1, 0), (0, 0)) == 1 + 0j
    assert kernel_eval(Kernel.cauchy(), (0, 1), (0, 0)) == -1j
    assert kernel_eval(Kernel.riesz(1.0, 0, 2), (2, 0), (0, 0)) == 0.5


def test_kernel_validation():
    with pytest.raises(ValueError):
        Kernel("cauchy", dim=1)
    with pytest.raises(ValueError):
        Kernel.riesz(1.0, component=2, dim=2)
    with pytest.raises(ValueError):
        kernel_eval(Kernel.cauchy(), (0, 0), (0, 0))
    with pytest.raises(ValueError):
        Kernel("bogus")


def test_cauchy_size_is_exact_with_unit_constant():
    rep = verify_kernel_conditions(Kernel.cauchy(C_k=1.0), sample_count=20_000)
    assert rep.size_ratio == pytest.approx(1.0, rel=1e-12)


def test_cauchy_smoothness_needs_two():
    rep = verify_kernel_conditions(Kernel.cauchy(C_k=2.0), sample_count=20_000)
    assert rep.passed
    # the hand bound |x - x'| / (|x - y| |x' - y|) gives 2 under |x - x'| <= |x - y| / 2
    assert 1.9 < rep.smooth_ratio <= 2.0 * (1 + 1e-9)


def test_wrong_delta_fails():
    assert not verify_kernel_conditions(Kernel.cauchy(delta=2.0), sample_count=20_000).passed


def test_power_kernel_fails():
    assert not verify_kernel_conditions(Kernel.power(1.0, 2), sample_count=20_000).passed


def two_atoms():
    return AtomicMeasure([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0], GrowthProfile(1.0, 2.0, 0.5))


def test_transform_two_atoms():
    v = truncated_transform(two_atoms(), Kernel.cauchy(), DensityVector([1.0, 0.0]), 0.5)
    np.testing.assert_array_equal(v, [0.0, 1.0])


def test_transform_large_eps_is_zero():
    mu = gen_measure(GeneratorSpec("random", dim=2, count=50, seed=1))
    f = DensityVector(np.ones(mu.size))
    assert np.all(truncated_transform(mu, Kernel.cauchy(), f, 10 * mu.diameter() + 1) == 0)


def test_transform_rejects_small_eps_and_dim_mismatch():
    mu = two_atoms()
    with pytest.raises(TruncationError):
        truncated_transform(mu, Kernel.cauchy(), DensityVector([1.0, 0.0]), 0.1)
    with pytest.raises(ValueError):
        truncated_transform(mu, Kernel.riesz(1.0, 0, 1), DensityVector([1.0, 0.0]), 0.5)


def test_transform_eval_atoms_subset():
    mu = gen_measure(GeneratorSpec("random", dim=2, count=60, seed=2))
    f = DensityVector(np.random.default_rng(0).normal(size=mu.size))
    full = truncated_transform(mu, Kernel.cauchy(), f, mu.growth.r_min)
    part = truncated_transform(mu, Kernel.cauchy(), f, mu.growth.r_min, eval_atoms=[3, 7])
    np.testing.assert_array_equal(part, full[[3, 7]])


def rand_instance(seed, dim=2, count=80):
    mu = gen_measure(GeneratorSpec("random", dim=dim, count=count, seed=seed))
    rng = np.random.default_rng(seed)
    return mu, rng


KERNELS = [Kernel.cauchy(), Kernel.riesz(1.0, 1, 2), Kernel.riesz(0.5, 0, 2)]


@given(st.integers(0, 10_000), st.sampled_from(KERNELS), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, K, a, b):
    mu, rng = rand_instance(seed)
    f = rng.normal(size=mu.size)
    g = rng.normal(size=mu.size) + 1j * rng.normal(size=mu.size)
    eps = mu.growth.r_min * 2
    lhs = truncated_transform(mu, K, a * f + b * g, eps)
    rhs = a * truncated_transform(mu, K, f, eps) + b * truncated_transform(mu, K, g, eps)
    scale = 1.0 + np.abs(lhs).max()
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale


@given(st.integers(0, 10_000), st.sampled_from(KERNELS))
def test_adjoint_identity(seed, K):
    mu, rng = rand_instance(seed)
    u = rng.normal(size=mu.size) + 1j * rng.normal(size=mu.size)
    v = rng.normal(size=mu.size) + 1j * rng.normal(size=mu.size)
    eps = mu.growth.r_min * 3
    w = mu.weights
    lhs = np.sum(truncated_transform(mu, K, u, eps) * np.conj(v) * w)
    rhs = np.sum(u * np.conj(truncated_transform(mu, K, v, eps, adjoint=True)) * w)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


def test_weak_quasinorm_examples():
    one = AtomicMeasure([[0.0]], [1.0], GrowthProfile(1.0, 1.0, 1.0))
    assert weak_quasinorm(one, np.zeros(1), 1.0) == 0.0
    assert weak_quasinorm(one, np.array([5.0]), 1.0) == pytest.approx(5.0, rel=1e-8)
    two = AtomicMeasure([[0.0], [1.0]], [1.0, 1.0], GrowthProfile(1.0, 2.0, 1.0))
    # sup over lambda of lambda * mu{|v| > lambda} is 3 (just below lambda = 3)
    assert weak_quasinorm(two, np.array([3.0, 1.0]), 1.0) == pytest.approx(3.0, rel=1e-8)
    assert weak_quasinorm(two, np.array([3.0, 1.0]), 2.0) == pytest.approx(1.5, rel=1e-8)


def test_exceedance_masses_strict():
    mu = AtomicMeasure([[0.0], [1.0], [2.0]], [1.0, 2.0, 4.0], GrowthProfile(1.0, 7.0, 1.0))
    v = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(exceedance_masses(mu, v, [0.5, 1.0, 2.0, 3.0]), [7, 6, 4, 0])
    assert np.all(auto_lambda_grid(v) < v)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40))
def test_auto_grid_attains_supremum(vals):
    v = np.array(vals)
    mu = AtomicMeasure(np.arange(v.size)[:, None] * 1.0, np.ones(v.size),
                       GrowthProfile(1.0, 3.0, 1.0))
    q = weak_quasinorm(mu, v, 1.0)
    dense = np.linspace(0, np.abs(v).max() + 1, 2001)
    assert q >= (dense * exceedance_masses(mu, v, dense)).max() * (1 - 1e-8)


def test_l2_norm_two_atoms_closed_form():
    assert empirical_l2_norm(two_atoms(), Kernel.cauchy(), 0.5) == pytest.approx(1.0, abs=1e-8)
    assert empirical_l2_norm(two_atoms(), Kernel.cauchy(), 2.0) == 0.0


@pytest.mark.parametrize("K", KERNELS)
def test_l2_norm_matches_dense_svd(K):
    mu = gen_measure(GeneratorSpec("random", dim=2, count=60, seed=9))
    eps = mu.growth.r_min * 2
    # columns of the weighted matrix: T e_j at every atom, scaled to L^2(mu)
    sw = np.sqrt(mu.weights)
    M = np.column_stack([truncated_transform(mu, K, np.eye(mu.size)[j], eps)
                         for j in range(mu.size)]).astype(complex)
    A = sw[:, None] * M / sw[None, :]
    expected = np.linalg.svd(A, compute_uv=False)[0]
    got = empirical_l2_norm(mu, K, eps, trials=3, iters=3000, tol=1e-14)
    assert got == pytest.approx(expected, rel=1e-6)


def test_weak_sweep_and_csv(tmp_path):
    mu = gen_measure(GeneratorSpec("segment_plus_atoms", dim=2, count=120, heavy=3, seed=0))
    f = DensityVector(np.ones(mu.size))
    eps = np.geomspace(mu.growth.r_min, 100 * mu.growth.r_min, 4)
    sw = weak_sweep(mu, Kernel.cauchy(), f, eps)
    assert len(sw.quasinorms) == 4 and all(math.isfinite(q) and q > 0 for q in sw.quasinorms)
    path = tmp_path / "sweep.csv"
    sw.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "eps,lambda,exceedance_mass,quasinorm"
    assert len(lines) == 1 + len(sw.rows)
    summ = tmp_path / "summary.csv"
    sw.write_summary_csv(summ, [1.0] * 4)
    assert summ.read_text().splitlines()[0] == "eps,quasinorm,l2_norm"


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.floats(1e-3, 1e3))
def test_quasinorm_positive_homogeneity(vals, t):
    v = np.array(vals)
    mu = AtomicMeasure(np.arange(v.size)[:, None] * 1.0, np.ones(v.size),
                       GrowthProfile(1.0, 3.0, 1.0))
    base = weak_quasinorm(mu, v, 2.0)
    assert weak_quasinorm(mu, t * v, 2.0 * t) == pytest.approx(base, rel=1e-12, abs=1e-300)
