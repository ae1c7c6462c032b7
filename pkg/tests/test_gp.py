import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfopt.errors import NumericalError
from mfopt.gp import (
    Dataset,
    GaussianProcess,
    KernelSpec,
    fit_gp,
    fit_hyperparameters,
    gp_posterior,
    kernel_eval,
    log_marginal_likelihood,
    log_marginal_likelihood_grad,
    stable_cholesky,
)

SE1 = KernelSpec("se", [1.0])


def test_kernel_eval_examples():
    assert kernel_eval(SE1, [0.0], [0.0]) == 1.0
    assert kernel_eval(SE1, [0.0], [1.0]) == pytest.approx(0.6065306597126334, abs=1e-12)


def test_kernel_dimension_mismatch():
    with pytest.raises(ValueError):
        kernel_eval(KernelSpec("se", [1.0, 1.0]), [0.0], [1.0])


@pytest.mark.parametrize("bad", [dict(lengthscales=[0.0]), dict(lengthscales=[1.0], amplitude=-1.0),
                                 dict(lengthscales=[1.0], noise_variance=-1e-3)])
def test_kernel_spec_validation(bad):
    with pytest.raises(ValueError):
        KernelSpec("se", **bad)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.sampled_from(["se", "matern52"]))
def test_kernel_symmetry(x, x2, family):
    k = KernelSpec(family, [0.7, 1.3], amplitude=2.0)
    assert kernel_eval(k, x, x2) == kernel_eval(k, x2, x)


@given(st.integers(2, 12), st.integers(0, 10**6), st.sampled_from(["se", "matern52"]))
def test_gram_is_psd(n, seed, family):
    X = np.random.default_rng(seed).uniform(size=(n, 2))
    K = KernelSpec(family, [0.4, 0.9]).gram(X, X)
    assert np.allclose(K, K.T, atol=0)
    assert np.linalg.eigvalsh(K + 1e-10 * np.eye(n)).min() > -1e-9


def test_matern_closed_form():
    r = 0.8
    expected = (1 + math.sqrt(5) * r + 5 * r * r / 3) * math.exp(-math.sqrt(5) * r)
    assert kernel_eval(KernelSpec("matern52", [1.0]), [0.0], [r]) == pytest.approx(expected, rel=1e-14)


def test_backends_agree(rng):
    from mfopt import _backend, _pykernels

    if "compiled" not in _backend.available():
        pytest.skip("extension not built")
    from mfopt import _ckernels

    X = rng.uniform(size=(15, 3))
    ls = np.array([0.3, 0.8, 1.4])
    for fam, nfid in ((0, 0), (1, 0), (1, 1)):
        a = _pykernels.ard_gram_grad(X, ls, 1.7, fam, nfid)
        b = _ckernels.ard_gram_grad(X, ls, 1.7, fam, nfid)
        assert np.allclose(a[0], b[0], atol=1e-14)
        assert np.allclose(a[1], b[1], atol=1e-13)
    R = rng.standard_normal((10, 4))
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    R2 = R.copy()
    assert np.allclose(_pykernels.deflate(R, q), _ckernels.deflate(R2, q), atol=1e-14)
    assert np.allclose(R, R2, atol=1e-14)


def test_empty_posterior_equals_prior():
    prior = GaussianProcess(SE1)
    post = gp_posterior(prior, Dataset(np.zeros((0, 1)), np.zeros(0)))
    m, v = post.predict(np.array([[0.3]]))
    assert m[0] == 0.0 and v[0] == 1.0


def test_noise_free_interpolation_examples():
    post = gp_posterior(GaussianProcess(SE1), ([[0.0]], [1.0]))
    m, v = post.predict(np.array([[0.0], [1.0]]))
    assert m[0] == pytest.approx(1.0, abs=1e-9)
    assert v[0] == pytest.approx(0.0, abs=1e-9)
    assert m[1] == pytest.approx(math.exp(-0.5), abs=1e-9)


def test_lml_examples():
    half_log_2pi = 0.5 * math.log(2 * math.pi)
    assert log_marginal_likelihood(GaussianProcess(SE1), ([[0.0]], [0.0])) == pytest.approx(-half_log_2pi)
    assert log_marginal_likelihood(GaussianProcess(SE1), ([[0.0]], [1.0])) == pytest.approx(-0.5 - half_log_2pi)
    doubled = GaussianProcess(KernelSpec("se", [1.0], amplitude=2.0))
    assert log_marginal_likelihood(doubled, ([[0.0]], [0.0])) < -half_log_2pi


def test_lml_matches_scipy_density(rng):
    from scipy.stats import multivariate_normal

    X = rng.uniform(size=(6, 2))
    y = rng.standard_normal(6)
    k = KernelSpec("matern52", [0.5, 0.7], amplitude=1.3, noise_variance=1e-2)
    K = k.gram(X, X) + 1e-2 * np.eye(6)
    expected = multivariate_normal(np.zeros(6), K).logpdf(y)
    # base jitter of 1e-10 on the diagonal
    assert log_marginal_likelihood(GaussianProcess(k), (X, y)) == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("family", ["se", "matern52", "product"])
def test_lml_gradient_central_differences(family, backend, rng):
    d = 2
    spec = KernelSpec(family, [0.4, 0.7], amplitude=1.2, noise_variance=1e-3,
                      **({"base": "matern52", "n_fidelity_dims": 1} if family == "product" else {}))
    X = rng.uniform(size=(10, d))
    y = np.sin(4 * X[:, 0]) + X[:, 1]
    lml, grad = log_marginal_likelihood_grad(spec, X, y)
    from mfopt.gp import _pack, _unpack

    theta = _pack(spec)
    h = 1e-6
    for i in range(theta.shape[0]):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fd = (log_marginal_likelihood_grad(_unpack(spec, tp), X, y)[0]
              - log_marginal_likelihood_grad(_unpack(spec, tm), X, y)[0]) / (2 * h)
        assert abs(grad[i] - fd) <= 1e-5 * max(abs(fd), 1e-3)


def test_posterior_contraction_on_grid(rng):
    X = rng.uniform(size=(5, 1))
    gp = GaussianProcess(KernelSpec("se", [0.3]), None, X, np.sin(X[:, 0]))
    grid = np.linspace(0, 1, 101)[:, None]
    v0 = gp.predict(grid)[1]
    v1 = gp.condition([[0.42]], [0.1]).predict(grid)[1]
    assert np.all(v1 <= v0 + 1e-9)


def test_prior_sampling_covariance():
    k = KernelSpec("se", [0.5])
    X = np.array([[0.0], [0.3], [0.9]])
    draws = GaussianProcess(k).sample(X, 10000, rng=7)
    emp = np.cov(draws.T)
    K = k.gram(X, X)
    assert np.all(np.abs(emp - K) <= 0.05 * np.abs(K) + 0.02)


def test_predictive_variance_nonnegative(rng):
    X = rng.uniform(size=(30, 1))
    gp = GaussianProcess(KernelSpec("se", [2.0]), None, X, X[:, 0])
    assert gp.predict(np.linspace(-1, 2, 300)[:, None])[1].min() >= 0.0


def test_jitter_escalation_and_failure():
    K = np.ones((3, 3))
    L, jitter = stable_cholesky(K)
    assert 1e-10 <= jitter <= 1e-6
    with pytest.raises(NumericalError):
        stable_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_fit_with_no_free_parameters_is_identity():
    spec = KernelSpec("se", [0.3], amplitude=2.0, noise_variance=1e-4)
    out = fit_hyperparameters(spec, ([[0.0], [0.5], [1.0]], [0.0, 1.0, 0.0]), free=())
    assert out == spec


def test_fit_recovers_lengthscale():
    # oracle: 50 draws from an SE GP with lengthscale 0.2, seed fixed
    X = np.linspace(0, 1, 50)[:, None]
    truth = KernelSpec("se", [0.2])
    y = GaussianProcess(truth).sample(X, 1, rng=3)[0]
    fitted = fit_hyperparameters(KernelSpec("se", [1.0], noise_variance=1e-8), (X, y), seed=0)
    assert 0.1 <= fitted.lengthscales[0] <= 0.4


def test_fit_constant_data_drives_noise_to_zero():
    X = np.linspace(0, 1, 8)[:, None]
    fitted = fit_hyperparameters(KernelSpec("se", [0.5], noise_variance=0.1), (X, np.full(8, 3.0)),
                                 free=("lengthscales", "amplitude", "noise"), mean="constant")
    assert fitted.noise_variance <= 1e-6


def test_fit_is_deterministic(rng):
    X = rng.uniform(size=(12, 1))
    y = np.cos(5 * X[:, 0])
    a = fit_gp(X, y, KernelSpec("se", [1.0], noise_variance=1e-6), seed=4)
    b = fit_gp(X, y, KernelSpec("se", [1.0], noise_variance=1e-6), seed=4)
    assert a.kernel == b.kernel and a.lml == b.lml


def test_fit_needs_two_points():
    with pytest.raises(ValueError):
        fit_hyperparameters(KernelSpec("se", [1.0]), ([[0.0]], [1.0]))
