"""Multi-fidelity GP priors.

Levels are indexed ``0 .. T-1`` in order of increasing fidelity; the last
level is the high-fidelity model. Every fitted model exposes

* ``n_levels``
* ``predict(X, level=-1, full_cov=False) -> (mean, var_or_cov)``
* ``level_cov(X, a, b) -> (var_a, var_b, cov_ab)``, arrays over the rows of ``X``

which is all the acquisition and campaign layers rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import linalg, optimize

from ._util import call_vectorized
from .errors import NumericalError
from .gp import (
    Dataset,
    GaussianProcess,
    KernelSpec,
    as_points,
    fit_gp,
    stable_cholesky,
)


@dataclass
class FidelityHierarchy:
    """Datasets and evaluation costs of an ordered set of fidelity levels."""

    datasets: list
    costs: Sequence[float] | None = None
    allow_decreasing_costs: bool = False

    def __post_init__(self):
        self.datasets = [d if isinstance(d, Dataset) else Dataset(*d) for d in self.datasets]
        if not self.datasets:
            raise ValueError("a fidelity hierarchy needs at least one level")
        if self.costs is not None:
            c = [float(v) for v in self.costs]
            if len(c) != len(self.datasets):
                raise ValueError("one cost per level required")
            if min(c) <= 0:
                raise ValueError("costs must be strictly positive")
            if not self.allow_decreasing_costs and any(b < a for a, b in zip(c, c[1:])):
                raise ValueError("costs must be non-decreasing in fidelity")
            self.costs = c

    @property
    def n_levels(self):
        return len(self.datasets)


def _levels(hierarchy):
    if isinstance(hierarchy, FidelityHierarchy):
        return [(d.X, d.y) for d in hierarchy.datasets]
    out = []
    for item in hierarchy:
        if isinstance(item, Dataset):
            out.append((item.X, item.y))
        else:
            X, y = item
            out.append((np.asarray(X, dtype=float), np.asarray(y, dtype=float).reshape(-1)))
    if not out:
        raise ValueError("at least one fidelity level required")
    return out


def _dim_of(levels):
    for X, y in levels:
        if np.size(y):
            return as_points(X).shape[1] if np.ndim(X) == 2 else 1
    raise ValueError("no data at any level")


class Correlation(NamedTuple):
    value: float
    degenerate: bool


def posterior_correlation(model, x, level_a, level_b):
    """Correlation of two fidelity levels at input ``x`` under ``model``.

    A level with zero predictive variance yields ``Correlation(0.0, True)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    var_a, var_b, cov = (float(v[0]) for v in model.level_cov(x[None, :], level_a, level_b))
    if var_a <= 0.0 or var_b <= 0.0:
        return Correlation(0.0, True)
    rho = cov / np.sqrt(var_a * var_b)
    return Correlation(float(np.clip(rho, -1.0, 1.0)), False)


# ----------------------------------------------------------------------------
# joint priors over augmented inputs (x, level)
# ----------------------------------------------------------------------------


class LmcKernel:
    """Cross-covariance ``sum_i R[s, i] R[t, i] k_i(x, x')`` over inputs whose
    last column is the integer level index."""

    def __init__(self, mixing, latent_kernels, noise_variance=0.0):
        self.mixing = np.asarray(mixing, dtype=float)
        self.latent_kernels = list(latent_kernels)
        self.noise_variance = float(noise_variance)
        self.dim = self.latent_kernels[0].dim + 1

    def _split(self, X):
        X = as_points(X, self.dim)
        return X[:, :-1], X[:, -1].astype(int)

    def gram(self, X1, X2=None):
        x1, l1 = self._split(X1)
        x2, l2 = (x1, l1) if X2 is None else self._split(X2)
        K = np.zeros((x1.shape[0], x2.shape[0]))
        for i, k in enumerate(self.latent_kernels):
            K += np.outer(self.mixing[l1, i], self.mixing[l2, i]) * k.gram(x1, x2)
        return K

    def diag(self, X):
        x, lv = self._split(X)
        return sum(self.mixing[lv, i] ** 2 * k.diag(x) for i, k in enumerate(self.latent_kernels))


class JointModel:
    """Posterior of a GP over ``(x, label)`` inputs; each fidelity level is the
    slice at its label."""

    def __init__(self, gp, labels):
        self.gp = gp
        self.labels = np.asarray(labels, dtype=float)

    @property
    def n_levels(self):
        return self.labels.shape[0]

    def _augment(self, X, level):
        X = as_points(X, self.gp.dim - 1)
        return np.hstack([X, np.full((X.shape[0], 1), self.labels[level])])

    def predict(self, X, level=-1, full_cov=False):
        return self.gp.predict(self._augment(X, level), full_cov=full_cov)

    def predict_mean(self, X, level=-1):
        return self.predict(X, level)[0]

    def level_cov(self, X, a, b):
        Za, Zb = self._augment(X, a), self._augment(X, b)
        va = self.gp.predict(Za)[1]
        vb = self.gp.predict(Zb)[1]
        return va, vb, self.gp.pair_cov(Za, Zb)

    def sample(self, X, levels, n_samples=1, rng=None):
        """Joint draws at ``X`` for each level in ``levels``; shape (n_samples, len(levels) * n)."""
        Z = np.vstack([self._augment(X, lv) for lv in levels])
        return self.gp.sample(Z, n_samples, rng)


def _level_mean(mean_fns):
    if mean_fns is None:
        return None

    def mean(X):
        lv = X[:, -1].astype(int)
        out = np.zeros(X.shape[0])
        for t, fn in enumerate(mean_fns):
            sel = lv == t
            if np.any(sel) and fn is not None:
                out[sel] = call_vectorized(fn, X[sel, :-1])
        return out

    return mean


def _stack_levels(levels, labels):
    Xs, ys = [], []
    for t, (X, y) in enumerate(levels):
        if np.size(y) == 0:
            continue
        X = as_points(X)
        Xs.append(np.hstack([X, np.full((X.shape[0], 1), labels[t])]))
        ys.append(np.asarray(y, dtype=float).reshape(-1))
    if not Xs:
        return None, None
    return np.vstack(Xs), np.concatenate(ys)


@dataclass
class LmcPrior:
    """Linear model of coregionalization ``f = m + R delta`` with independent
    latent GPs ``delta_i ~ GP(0, k_i)``."""

    mixing_matrix: np.ndarray
    latent_kernels: list
    mean_fns: list | None = None
    noise_variance: float = 0.0

    @property
    def n_levels(self):
        return self.mixing_matrix.shape[0]

    @property
    def kernel(self):
        return LmcKernel(self.mixing_matrix, self.latent_kernels, self.noise_variance)

    def cross_covariance(self, x, x2, s, t):
        """``Cov[f_s(x), f_t(x2)]`` under the prior."""
        R = self.mixing_matrix
        x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))[None, :]
        return float(sum(R[s, i] * R[t, i] * k.gram(x, x2)[0, 0] for i, k in enumerate(self.latent_kernels)))

    def condition(self, hierarchy=None):
        """Joint posterior given data at any subset of levels."""
        labels = np.arange(self.n_levels, dtype=float)
        gp = GaussianProcess(self.kernel, _level_mean(self.mean_fns))
        if hierarchy is not None:
            Z, y = _stack_levels(_levels(hierarchy), labels)
            if Z is not None:
                gp = gp.condition(Z, y)
        return JointModel(gp, labels)

    def level_cov(self, X, a, b):
        return self.condition().level_cov(X, a, b)

    def predict(self, X, level=-1, full_cov=False):
        return self.condition().predict(X, level, full_cov)


def build_lmc(mixing_matrix, latent_kernels, mean_fns=None, noise_variance=0.0):
    R = np.atleast_2d(np.asarray(mixing_matrix, dtype=float))
    T = R.shape[0]
    if R.shape != (T, T):
        raise ValueError(f"mixing matrix must be square, got shape {R.shape}")
    if len(latent_kernels) != T:
        raise ValueError(f"{T} latent kernels required, got {len(latent_kernels)}")
    if mean_fns is not None and len(mean_fns) != T:
        raise ValueError(f"{T} mean functions required, got {len(mean_fns)}")
    dims = {k.dim for k in latent_kernels}
    if len(dims) != 1:
        raise ValueError("latent kernels must share one input dimension")
    return LmcPrior(R, list(latent_kernels), None if mean_fns is None else list(mean_fns), noise_variance)


def autoregressive_mixing(correlation_coeffs):
    """Lower-triangular mixing matrix of ``f_t = rho_t f_{t-1} + delta_t``."""
    rho = np.asarray(correlation_coeffs, dtype=float).reshape(-1)
    T = rho.shape[0] + 1
    R = np.zeros((T, T))
    for t in range(T):
        R[t, t] = 1.0
        for i in range(t - 1, -1, -1):
            R[t, i] = R[t, i + 1] * rho[i]
    return R


@dataclass
class AutoRegressivePrior:
    """Hierarchical prior ``f_0 = delta_0``, ``f_t = rho_t f_{t-1} + delta_t``."""

    correlation_coeffs: np.ndarray
    level_kernels: list
    mean_fns: list | None = None
    noise_variance: float = 0.0

    @property
    def n_levels(self):
        return len(self.level_kernels)

    @property
    def lmc(self):
        return LmcPrior(
            autoregressive_mixing(self.correlation_coeffs), self.level_kernels, self.mean_fns,
            self.noise_variance,
        )

    def condition(self, hierarchy=None):
        return self.lmc.condition(hierarchy)

    def level_cov(self, X, a, b):
        return self.lmc.level_cov(X, a, b)

    def predict(self, X, level=-1, full_cov=False):
        return self.lmc.predict(X, level, full_cov)


def build_autoregressive(hierarchy, correlation_coeffs, level_kernels, mean_fns=None, noise_variance=0.0):
    """Auto-regressive prior; ``hierarchy`` (or a level count) fixes ``T``."""
    T = hierarchy if isinstance(hierarchy, int) else len(_levels(hierarchy))
    rho = np.asarray(correlation_coeffs, dtype=float).reshape(-1)
    if rho.shape[0] != T - 1:
        raise ValueError(f"{T} levels need {T - 1} correlation coefficients, got {rho.shape[0]}")
    if len(level_kernels) != T:
        raise ValueError(f"{T} level kernels required, got {len(level_kernels)}")
    return AutoRegressivePrior(rho, list(level_kernels), mean_fns, noise_variance)


def fit_autoregressive(hierarchy, kernel=None, *, restarts=3, seed=0, noise_variance=1e-8,
                       rho_bounds=(-10.0, 10.0)):
    """Fit ``rho_t`` and per-level SE hyperparameters by joint maximum
    likelihood (per-level constant means are profiled out).

    This is the joint O((sum N_t)^3) fit the recursive model avoids; it uses
    finite-difference gradients and is intended for small data sets.
    """
    levels = _levels(hierarchy)
    T = len(levels)
    d = _dim_of(levels)
    base = kernel or KernelSpec("se", np.ones(d))
    Z, y = _stack_levels(levels, np.arange(T, dtype=float))
    H = np.zeros((y.shape[0], T))
    H[np.arange(y.shape[0]), Z[:, -1].astype(int)] = 1.0
    H = H[:, H.any(axis=0)]

    def unpack(theta):
        kernels = []
        for t in range(T):
            chunk = theta[t * (d + 1):(t + 1) * (d + 1)]
            kernels.append(replace(base, lengthscales=tuple(np.exp(chunk[:d])), amplitude=np.exp(chunk[d]),
                                   noise_variance=0.0))
        return kernels, theta[T * (d + 1):]

    def negative_lml(theta):
        kernels, rho = unpack(theta)
        K = LmcKernel(autoregressive_mixing(rho), kernels).gram(Z) + noise_variance * np.eye(y.shape[0])
        try:
            L, _ = stable_cholesky(K)
        except NumericalError:
            return 1e20
        A = linalg.solve_triangular(L, H, lower=True)
        b = linalg.solve_triangular(L, y, lower=True)
        beta = np.linalg.lstsq(A, b, rcond=None)[0]
        r = b - A @ beta
        return 0.5 * r @ r + np.log(np.diag(L)).sum()

    lo = np.concatenate([np.tile(np.log([1e-3] * d + [1e-3]), T), np.full(T - 1, rho_bounds[0])])
    hi = np.concatenate([np.tile(np.log([1e3] * d + [1e3]), T), np.full(T - 1, rho_bounds[1])])
    rng = np.random.default_rng(seed)
    x0 = np.concatenate([np.tile(np.log(list(base.lengthscales) + [base.amplitude]), T), np.ones(T - 1)])
    starts = [np.clip(x0, lo, hi)] + [
        np.concatenate([np.tile(rng.uniform(np.log(0.05), np.log(2.0), d + 1), T), rng.uniform(-2, 2, T - 1)])
        for _ in range(max(0, restarts - 1))
    ]
    best = None
    for s in starts:
        res = optimize.minimize(negative_lml, s, method="L-BFGS-B", bounds=list(zip(lo, hi)))
        if res.fun < 1e19 and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise NumericalError("auto-regressive fit failed for every restart")
    kernels, rho = unpack(best.x)
    # profiled per-level constant means, recomputed at the optimum
    K = LmcKernel(autoregressive_mixing(rho), kernels).gram(Z) + noise_variance * np.eye(y.shape[0])
    L, _ = stable_cholesky(K)
    A = linalg.solve_triangular(L, H, lower=True)
    beta_cols = np.linalg.lstsq(A, linalg.solve_triangular(L, y, lower=True), rcond=None)[0]
    present = [t for t in range(T) if np.size(levels[t][1])]
    # level means in the hierarchy: E[f_t] = c_t, expressed through the delta means
    consts = {t: float(beta_cols[i]) for i, t in enumerate(present)}
    mean_fns = [(lambda c: (lambda X: np.full(X.shape[0], c)))(consts.get(t, 0.0)) for t in range(T)]
    prior = AutoRegressivePrior(rho, kernels, mean_fns, noise_variance)
    return prior.condition(levels)


# ----------------------------------------------------------------------------
# recursive (decoupled) model
# ----------------------------------------------------------------------------

def _basis_fn(basis):
    if callable(basis):
        return basis
    if basis == "constant":
        return lambda X: np.ones((X.shape[0], 1))
    if basis == "linear":
        return lambda X: np.hstack([np.ones((X.shape[0], 1)), X])
    if basis == "quadratic":
        def quad(X):
            d = X.shape[1]
            cross = [X[:, i] * X[:, j] for i in range(d) for j in range(i, d)]
            return np.column_stack([np.ones(X.shape[0]), X] + cross)
        return quad
    raise ValueError(f"unknown multiplicative basis {basis!r}; use constant, linear, quadratic or a callable")


@dataclass(frozen=True)
class RecursiveLevel:
    gp: GaussianProcess
    basis: Callable | None
    coeffs: np.ndarray | None  # multiplicative coefficients B (None on level 0)
    delta_mean: float = 0.0

    def rho(self, X):
        return self.basis(X) @ self.coeffs


class RecursiveModel:
    """Level ``t`` is a GP whose prior mean is ``rho_t(x) m_{t-1}(x) + m_delta``
    with ``rho_t = zeta_t(x) . B`` and the previous level frozen at its
    posterior. Predictive variance adds ``rho_t(x)^2`` times the previous
    level's predictive variance."""

    def __init__(self, levels):
        self.levels = list(levels)

    @property
    def n_levels(self):
        return len(self.levels)

    def _norm(self, level):
        level = range(self.n_levels)[level]
        return level

    def _mean_from_prev(self, lv, X, m_prev):
        Z = lv.basis(X)
        return (Z @ lv.coeffs) * m_prev + lv.delta_mean

    def predict(self, X, level=-1, full_cov=False):
        level = self._norm(level)
        X = as_points(X, self.levels[0].gp.dim)
        mean, var = self.levels[0].gp.predict(X, full_cov=full_cov)
        for t in range(1, level + 1):
            lv = self.levels[t]
            m_delta, v_delta = lv.gp.predict(X, full_cov=full_cov, prior_mean=self._mean_from_prev(lv, X, mean))
            rho = lv.rho(X)
            var = v_delta + (np.outer(rho, rho) * var if full_cov else rho ** 2 * var)
            mean = m_delta
        return mean, var

    def predict_mean(self, X, level=-1):
        return self.predict(X, level)[0]

    def level_cov(self, X, a, b):
        a, b = self._norm(a), self._norm(b)
        X = as_points(X, self.levels[0].gp.dim)
        mean, var = self.levels[0].gp.predict(X)
        variances, rhos = [var], [np.ones(X.shape[0])]
        for t in range(1, max(a, b) + 1):
            lv = self.levels[t]
            mean, v = lv.gp.predict(X, prior_mean=self._mean_from_prev(lv, X, mean))
            rho = lv.rho(X)
            rhos.append(rho)
            variances.append(v + rho ** 2 * variances[-1])
        lo, hi = min(a, b), max(a, b)
        cov = variances[lo] * np.prod(rhos[lo + 1:hi + 1], axis=0)
        return variances[a], variances[b], cov


def fit_recursive(hierarchy, basis="constant", kernel=None, *, delta_mean=True, restarts=8, seed=0,
                  free=("lengthscales", "amplitude"), bounds=None, optimize_hypers=True):
    """Fit the recursive model level by level.

    ``kernel`` is a :class:`KernelSpec` used as the starting point for every
    level, or a list with one per level. Level ``t`` reads only its own data
    and the frozen level ``t-1`` model. ``B`` and the constant discrepancy
    mean are profiled by generalized least squares inside the level's
    marginal likelihood. With ``optimize_hypers=False`` the kernels are used
    as given and only the mean coefficients are estimated.
    """
    levels = _levels(hierarchy)
    T = len(levels)
    d = _dim_of(levels)
    kernels = list(kernel) if isinstance(kernel, (list, tuple)) else [kernel or KernelSpec("se", np.ones(d))] * T
    if len(kernels) != T:
        raise ValueError(f"{T} kernels required, got {len(kernels)}")
    zeta = _basis_fn(basis)
    X0, y0 = levels[0]
    gp0 = fit_gp(X0, y0, kernels[0], mean="constant", free=free, bounds=bounds, restarts=restarts, seed=seed,
                 optimize_hypers=optimize_hypers)
    fitted = [RecursiveLevel(gp0, None, None)]
    for t in range(1, T):
        X, y = levels[t]
        X = as_points(X, d)
        prev = RecursiveModel(fitted)
        m_prev = prev.predict_mean(X)
        p = zeta(X[:1]).shape[1]
        n_mean = p + (1 if delta_mean else 0)
        if X.shape[0] < n_mean:
            raise ValueError(f"level {t} has {X.shape[0]} points but the mean basis has {n_mean} terms")
        H = np.asarray(zeta(X), dtype=float) * m_prev[:, None]
        if delta_mean:
            H = np.hstack([H, np.ones((X.shape[0], 1))])
        rows = {tuple(r): i for i, r in enumerate(X)}

        def design(Xq, H=H, rows=rows):
            return H[[rows[tuple(r)] for r in Xq]]

        gp = fit_gp(X, y, kernels[t], mean=design, free=free, bounds=bounds, restarts=restarts, seed=seed + t,
                    optimize_hypers=optimize_hypers)
        beta = np.asarray(gp.beta, dtype=float)
        coeffs = beta[:p]
        c = float(beta[p]) if delta_mean else 0.0
        frozen = GaussianProcess(gp.kernel, None, X, y - H @ beta)
        fitted.append(RecursiveLevel(frozen, zeta, coeffs, c))
    return RecursiveModel(fitted)


# ----------------------------------------------------------------------------
# embedded LFM prior
# ----------------------------------------------------------------------------


class EmbeddedKernel:
    """``k_rho(x, x') fL(x) fL(x') + k_delta(x, x')``."""

    def __init__(self, lfm, k_rho, k_delta):
        self.lfm = lfm
        self.k_rho = k_rho
        self.k_delta = k_delta
        self.dim = k_delta.dim
        self.noise_variance = k_delta.noise_variance

    def gram(self, X1, X2=None):
        X1 = as_points(X1, self.dim)
        X2 = X1 if X2 is None else as_points(X2, self.dim)
        f1 = call_vectorized(self.lfm, X1)
        f2 = call_vectorized(self.lfm, X2)
        return self.k_rho.gram(X1, X2) * np.outer(f1, f2) + self.k_delta.gram(X1, X2)

    def diag(self, X):
        X = as_points(X, self.dim)
        return self.k_rho.diag(X) * call_vectorized(self.lfm, X) ** 2 + self.k_delta.diag(X)


@dataclass
class EmbeddedLfmPrior:
    """``f_H = rho(x) f_L(x) + delta(x)`` with independent GPs ``rho`` and
    ``delta`` and a cheap deterministic ``f_L``."""

    lfm: Callable
    rho_gp: GaussianProcess
    delta_gp: GaussianProcess

    @property
    def kernel(self):
        return EmbeddedKernel(self.lfm, self.rho_gp.kernel, self.delta_gp.kernel)

    def mean(self, X):
        X = as_points(X, self.delta_gp.dim)
        return self.rho_gp.prior_mean(X) * call_vectorized(self.lfm, X) + self.delta_gp.prior_mean(X)

    @property
    def gp(self):
        return GaussianProcess(self.kernel, self.mean)

    def condition(self, X, y):
        return self.gp.condition(X, y)


def build_embedded_lfm_prior(lfm, rho_gp, delta_gp):
    if rho_gp.dim != delta_gp.dim:
        raise ValueError("rho and delta GPs must share an input dimension")
    return EmbeddedLfmPrior(lfm, rho_gp, delta_gp)


# ----------------------------------------------------------------------------
# nonlinear auto-regressive (posterior mean as an extra input)
# ----------------------------------------------------------------------------


class NonlinearARModel:
    """Level ``t`` is a GP over ``(x, m_{t-1}(x))`` with a product kernel;
    the previous posterior mean enters as a deterministic feature, so the
    levels carry no cross-covariance in this simplified composition."""

    def __init__(self, gps, dim):
        self.gps = list(gps)
        self.dim = dim

    @property
    def n_levels(self):
        return len(self.gps)

    def _inputs(self, X, level):
        X = as_points(X, self.dim)
        if level == 0:
            return X
        m_prev = self.predict_mean(X, level - 1)
        return np.hstack([X, m_prev[:, None]])

    def predict(self, X, level=-1, full_cov=False):
        level = range(self.n_levels)[level]
        return self.gps[level].predict(self._inputs(X, level), full_cov=full_cov)

    def predict_mean(self, X, level=-1):
        return self.predict(X, level)[0]

    def level_cov(self, X, a, b):
        a, b = range(self.n_levels)[a], range(self.n_levels)[b]
        va = self.predict(X, a)[1]
        vb = self.predict(X, b)[1]
        return va, vb, (va if a == b else np.zeros_like(va))


def fit_nonlinear_autoregressive(hierarchy, kernel_family="se", *, restarts=8, seed=0,
                                 free=("lengthscales", "amplitude"), bounds=None, noise_variance=0.0,
                                 kernels=None, optimize_hypers=True):
    """Fit the levels in sequence; ``kernels`` optionally gives one starting
    :class:`KernelSpec` per level (plain for level 0, product afterwards)."""
    levels = _levels(hierarchy)
    d = _dim_of(levels)
    if kernels is not None and len(kernels) != len(levels):
        raise ValueError(f"{len(levels)} kernels required, got {len(kernels)}")
    X0, y0 = levels[0]
    k0 = kernels[0] if kernels else KernelSpec(kernel_family, np.ones(d), noise_variance=noise_variance)
    gps = [fit_gp(X0, y0, k0, mean="constant", free=free, bounds=bounds, restarts=restarts, seed=seed,
                  optimize_hypers=optimize_hypers)]
    model = NonlinearARModel(gps, d)
    for t in range(1, len(levels)):
        X, y = levels[t]
        Z = model._inputs(X, t)
        kt = kernels[t] if kernels else KernelSpec("product", np.ones(d + 1), noise_variance=noise_variance,
                                                   base=kernel_family, n_fidelity_dims=1)
        gps.append(fit_gp(Z, y, kt, mean="constant", free=free, bounds=bounds, restarts=restarts, seed=seed + t,
                          optimize_hypers=optimize_hypers))
        model = NonlinearARModel(gps, d)
    return model


# ----------------------------------------------------------------------------
# input augmentation
# ----------------------------------------------------------------------------


class InputAugmentedModel(JointModel):
    """GP over ``(x, t)``; the HF model is the slice at ``hf_label``."""

    def __init__(self, gp, labels, hf_level):
        super().__init__(gp, labels)
        self.hf_level = hf_level

    @property
    def hf_label(self):
        return float(self.labels[self.hf_level])

    def predict(self, X, level=None, full_cov=False):
        return super().predict(X, self.hf_level if level is None else level, full_cov)


def fit_input_augmented(hierarchy, fidelity_labels=None, kernel_family="se", *, kernel=None, hf_level=-1,
                        fit=True, mean="constant", restarts=8, seed=0, free=("lengthscales", "amplitude"),
                        bounds=None, noise_variance=0.0):
    """Single GP over the extended input ``(x, t)`` conditioned on all levels.

    Labels default to ``0..1`` evenly spaced over the levels. Labels must be
    distinct, except that all-equal labels are accepted as the degenerate
    pooled model. ``kernel`` (a product :class:`KernelSpec` over ``d + 1``
    inputs) fixes the starting hyperparameters; with ``fit=False`` they are
    used as given.
    """
    levels = _levels(hierarchy)
    T = len(levels)
    d = _dim_of(levels)
    labels = np.linspace(0.0, 1.0, T) if fidelity_labels is None else np.asarray(fidelity_labels, dtype=float)
    if T == 1 and fidelity_labels is None:
        labels = np.array([1.0])
    if labels.shape != (T,):
        raise ValueError(f"{T} fidelity labels required, got {labels.shape[0]}")
    if len(np.unique(labels)) not in (1, T):
        raise ValueError(f"duplicate fidelity labels for distinct levels: {labels.tolist()}")
    hf_level = range(T)[hf_level]
    if kernel is None:
        kernel = KernelSpec("product", np.ones(d + 1), base=kernel_family, n_fidelity_dims=1,
                            noise_variance=noise_variance)
    if kernel.dim != d + 1:
        raise ValueError(f"augmented kernel must have dimension {d + 1}")
    Z, y = _stack_levels(levels, labels)
    gp = fit_gp(Z, y, kernel, mean=mean, free=free, bounds=bounds, restarts=restarts, seed=seed,
                optimize_hypers=fit)
    return InputAugmentedModel(gp, labels, hf_level)


class SingleFidelityModel:
    """Adapter giving a plain GP the multi-fidelity model interface."""

    def __init__(self, gp):
        self.gp = gp

    n_levels = 1

    def predict(self, X, level=-1, full_cov=False):
        return self.gp.predict(X, full_cov=full_cov)

    def predict_mean(self, X, level=-1):
        return self.gp.predict(X)[0]

    def level_cov(self, X, a, b):
        v = self.gp.predict(X)[1]
        return v, v, v
