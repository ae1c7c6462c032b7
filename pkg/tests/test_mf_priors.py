import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfopt.gp import GaussianProcess, KernelSpec, fit_gp
from mfopt.mf_priors import (
    FidelityHierarchy,
    build_autoregressive,
    build_embedded_lfm_prior,
    build_lmc,
    fit_input_augmented,
    fit_nonlinear_autoregressive,
    fit_recursive,
    posterior_correlation,
)

K1 = KernelSpec("se", [1.0])
P3 = np.array([[0.1], [0.4], [0.8]])


def test_hierarchy_validation():
    d = ([[0.0]], [1.0])
    with pytest.raises(ValueError):
        FidelityHierarchy([d, d], costs=[1.0, 0.5])
    FidelityHierarchy([d, d], costs=[1.0, 0.5], allow_decreasing_costs=True)
    with pytest.raises(ValueError):
        FidelityHierarchy([d, d], costs=[0.0, 1.0])
    with pytest.raises(ValueError):
        FidelityHierarchy([])


def test_lmc_identity_mixing_gives_independent_outputs():
    k2 = KernelSpec("se", [0.3], amplitude=2.0)
    lmc = build_lmc(np.eye(2), [K1, k2])
    assert lmc.cross_covariance([0.1], [0.5], 0, 1) == 0.0
    assert lmc.cross_covariance([0.1], [0.5], 1, 1) == pytest.approx(k2([0.1], [0.5]))


def test_lmc_cross_covariance_examples():
    lmc = build_lmc([[1, 0], [2, 1]], [K1, K1])
    assert lmc.cross_covariance([0.2], [0.2], 0, 1) == pytest.approx(2.0)
    rho = 0.7
    lmc = build_lmc([[1, 0], [rho, 1]], [K1, K1])
    assert lmc.cross_covariance([0.0], [0.6], 1, 0) == pytest.approx(rho * K1([0.0], [0.6]))


def test_lmc_size_mismatch():
    with pytest.raises(ValueError):
        build_lmc(np.eye(2), [K1])
    with pytest.raises(ValueError):
        build_lmc(np.ones((2, 3)), [K1, K1])


def test_autoregressive_examples():
    ar = build_autoregressive(2, [2.0], [K1, K1])
    va, vb, c = ar.level_cov(P3, 0, 1)
    assert np.allclose(vb, 5.0) and np.allclose(c, 2.0)
    zero = build_autoregressive(2, [0.0], [K1, K1])
    assert zero.lmc.cross_covariance([0.1], [0.9], 1, 0) == 0.0
    single = build_autoregressive(1, [], [K1])
    m, v = single.predict(P3, 0)
    assert np.allclose(v, 1.0) and np.allclose(m, 0.0)
    with pytest.raises(ValueError):
        build_autoregressive(3, [1.0], [K1, K1, K1])


def test_autoregressive_monte_carlo_cross_covariance():
    ar = build_autoregressive(2, [2.0], [K1, KernelSpec("se", [0.5])])
    joint = ar.condition()
    draws = joint.sample(P3, [0, 1], n_samples=100_000, rng=11)
    emp = np.cov(draws.T)
    analytic = joint.gp.predict(np.vstack([joint._augment(P3, 0), joint._augment(P3, 1)]), full_cov=True)[1]
    big = np.abs(analytic) > 0.5
    assert np.all(np.abs(emp[big] - analytic[big]) <= 0.02 * np.abs(analytic[big]))


@pytest.mark.parametrize("rho,expected", [(1.0, 1 / math.sqrt(2)), (0.0, 0.0)])
def test_posterior_correlation_examples(rho, expected):
    ar = build_autoregressive(2, [rho], [K1, K1])
    c = posterior_correlation(ar, [0.3], 0, 1)
    assert c.value == pytest.approx(expected, abs=1e-12)
    assert posterior_correlation(ar, [0.3], 1, 1).value == pytest.approx(1.0)


def test_posterior_correlation_degenerate_flag():
    class Frozen:
        def level_cov(self, X, a, b):
            z = np.zeros(len(X))
            return z, z + 1.0, z

    assert posterior_correlation(Frozen(), [0.3], 0, 1) == (0.0, True)
    # level 0 observed noise-free at x: only jitter-level variance remains
    ar = build_autoregressive(2, [1.0], [K1, K1]).condition([([[0.3]], [1.0]), (np.zeros((0, 1)), [])])
    c = posterior_correlation(ar, [0.3], 0, 1)
    assert c.degenerate or abs(c.value) < 1e-3


@given(st.floats(-5, 5), st.floats(0.0, 1.0))
def test_correlation_bounded(rho, x):
    ar = build_autoregressive(2, [rho], [K1, KernelSpec("se", [0.4], amplitude=0.3)])
    v = posterior_correlation(ar, [x], 0, 1).value
    assert -1 - 1e-9 <= v <= 1 + 1e-9


def _linear_pair():
    xl = np.linspace(0, 1, 5)[:, None]
    xh = np.array([[0.0], [0.5], [1.0]])
    return FidelityHierarchy([(xl, xl[:, 0]), (xh, 2 * xh[:, 0])])


def test_recursive_linear_pair():
    m = fit_recursive(_linear_pair())
    assert m.levels[1].coeffs[0] == pytest.approx(2.0, abs=1e-3)
    assert m.predict_mean([[0.25]])[0] == pytest.approx(0.5, abs=1e-3)


def test_recursive_decoupled_training():
    h = _linear_pair()
    a = fit_recursive(h)
    X, y = h.datasets[1].X, h.datasets[1].y
    b = fit_recursive(FidelityHierarchy([h.datasets[0], (X, y + np.array([0.3, -0.1, 0.2]))]))
    grid = np.linspace(0, 1, 11)[:, None]
    ma, va = a.predict(grid, 0)
    mb, vb = b.predict(grid, 0)
    assert np.array_equal(ma, mb) and np.array_equal(va, vb)


def test_recursive_single_level_matches_gp():
    X = np.linspace(0, 1, 6)[:, None]
    y = np.sin(3 * X[:, 0])
    k = KernelSpec("se", [1.0])
    rec = fit_recursive(FidelityHierarchy([(X, y)]), kernel=k)
    gp = fit_gp(X, y, k, mean="constant")
    grid = np.linspace(0, 1, 7)[:, None]
    assert np.allclose(rec.predict(grid)[0], gp.predict(grid)[0])


def test_recursive_variance_bound(rng):
    xl = np.linspace(0, 1, 7)[:, None]
    xh = rng.uniform(size=(4, 1))
    m = fit_recursive(FidelityHierarchy([(xl, np.sin(4 * xl[:, 0])), (xh, 1.5 * np.sin(4 * xh[:, 0]) + xh[:, 0])]))
    grid = np.linspace(0, 1, 41)[:, None]
    v0 = m.predict(grid, 0)[1]
    v1 = m.predict(grid, 1)[1]
    rho = m.levels[1].rho(grid)
    assert np.all(v1 >= rho ** 2 * v0 - 1e-12)


def test_recursive_rejects_small_level():
    xl = np.linspace(0, 1, 5)[:, None]
    with pytest.raises(ValueError):
        fit_recursive(FidelityHierarchy([(xl, xl[:, 0]), ([[0.5]], [1.0])]), basis="linear")


def test_embedded_prior_examples():
    rho = GaussianProcess(K1, lambda X: np.ones(X.shape[0]))
    delta = GaussianProcess(K1)
    zero = build_embedded_lfm_prior(lambda X: np.zeros(X.shape[0]), rho, delta)
    assert np.allclose(zero.kernel.gram(P3), delta.kernel.gram(P3))
    fl = lambda X: 3.0 * np.ones(X.shape[0])  # noqa: E731
    emb = build_embedded_lfm_prior(fl, rho, delta)
    assert np.allclose(emb.mean(P3), 3.0)
    assert np.allclose(emb.gp.predict(P3)[1], 10.0)


def test_embedded_prior_interpolates():
    lfm = lambda X: np.sin(3 * X[:, 0])  # noqa: E731
    emb = build_embedded_lfm_prior(lfm, GaussianProcess(K1, lambda X: np.ones(X.shape[0])), GaussianProcess(K1))
    X = np.array([[0.1], [0.5], [0.9]])
    y = 2 * lfm(X) + 0.3
    post = emb.condition(X, y)
    assert np.all(np.abs(post.predict(X)[0] - y) < 1e-6)


def test_nonlinear_ar_oracle():
    xl = np.linspace(0, 1, 30)[:, None]
    xh = np.linspace(0, 1, 10)[:, None]
    m = fit_nonlinear_autoregressive(FidelityHierarchy([(xl, xl[:, 0]), (xh, xh[:, 0] ** 2)]))
    assert m.predict_mean([[0.35]])[0] == pytest.approx(0.1225, abs=0.05)


def test_nonlinear_ar_beats_plain_gp_when_levels_agree():
    f = lambda X: np.sin(8 * np.pi * X[:, 0])  # noqa: E731
    xl = np.linspace(0, 1, 60)[:, None]
    xh = np.linspace(0, 1, 8)[:, None]
    m = fit_nonlinear_autoregressive(FidelityHierarchy([(xl, f(xl)), (xh, f(xh))]))
    gp = fit_gp(xh, f(xh), KernelSpec("se", [1.0]))
    grid = np.linspace(0, 1, 101)[:, None]
    rmse_mf = np.sqrt(np.mean((m.predict_mean(grid) - f(grid)) ** 2))
    rmse_gp = np.sqrt(np.mean((gp.predict(grid)[0] - f(grid)) ** 2))
    assert rmse_mf <= rmse_gp


def test_nonlinear_ar_single_level_is_plain_gp():
    X = np.linspace(0, 1, 6)[:, None]
    m = fit_nonlinear_autoregressive(FidelityHierarchy([(X, X[:, 0] ** 2)]))
    gp = fit_gp(X, X[:, 0] ** 2, KernelSpec("se", [1.0]))
    assert np.allclose(m.predict_mean(P3), gp.predict(P3)[0])


def test_input_augmented_duplicate_labels():
    d = (np.linspace(0, 1, 4)[:, None], np.arange(4.0))
    with pytest.raises(ValueError):
        fit_input_augmented(FidelityHierarchy([d, d, d]), fidelity_labels=[0.0, 0.0, 1.0])


def test_input_augmented_all_equal_labels_pool():
    xl = np.linspace(0, 1, 5)[:, None]
    xh = np.array([[0.15], [0.55]])
    h = FidelityHierarchy([(xl, np.sin(xl[:, 0])), (xh, np.sin(xh[:, 0]))])
    k = KernelSpec("product", [0.4, 1.0], base="se", n_fidelity_dims=1)
    ia = fit_input_augmented(h, fidelity_labels=[1.0, 1.0], kernel=k, fit=False, mean="zero")
    pooled = GaussianProcess(KernelSpec("se", [0.4]), None, np.vstack([xl, xh]), np.sin(np.r_[xl[:, 0], xh[:, 0]]))
    grid = np.linspace(0, 1, 9)[:, None]
    assert np.allclose(ia.predict(grid)[0], pooled.predict(grid)[0], atol=1e-10)


def test_input_augmented_vanishing_fidelity_correlation():
    xl = np.linspace(0, 1, 6)[:, None]
    xh = np.array([[0.2], [0.6], [0.9]])
    h = FidelityHierarchy([(xl, np.cos(3 * xl[:, 0])), (xh, np.sin(xh[:, 0]))])
    k = KernelSpec("product", [0.4, 1e-6], base="se", n_fidelity_dims=1)
    ia = fit_input_augmented(h, kernel=k, fit=False, mean="zero")
    hf_only = GaussianProcess(KernelSpec("se", [0.4]), None, xh, np.sin(xh[:, 0]))
    grid = np.linspace(0, 1, 21)[:, None]
    assert np.max(np.abs(ia.predict(grid)[0] - hf_only.predict(grid)[0])) < 1e-6


def test_input_augmented_shrinks_with_label_distance():
    h = FidelityHierarchy([([[0.5]], [1.0]), (np.zeros((0, 1)), np.zeros(0))])
    k = KernelSpec("product", [0.3, 0.5], base="se", n_fidelity_dims=1)
    means = []
    for tl in [0.9, 0.7, 0.5, 0.2, 0.0]:
        ia = fit_input_augmented(h, fidelity_labels=[tl, 1.0], kernel=k, fit=False, mean="zero")
        means.append(ia.predict([[0.5]])[0][0])
    assert all(a > b for a, b in zip(means, means[1:]))
