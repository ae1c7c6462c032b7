"""Polynomial chaos surrogates and the Monte Carlo baseline."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special
from scipy.stats import qmc

from .errors import NumericalError

MARGINALS = ("uniform", "normal")
MAX_BASIS = 10**6


class UndersampledWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RandomInput:
    """Independent marginals: ``uniform`` on [-1, 1] (Legendre basis) or
    ``normal`` (probabilists' Hermite basis)."""

    marginals: tuple

    def __post_init__(self):
        m = tuple(self.marginals)
        if not m:
            raise ValueError("at least one input dimension required")
        bad = [v for v in m if v not in MARGINALS]
        if bad:
            raise ValueError(f"unsupported marginals {bad}; choose from {MARGINALS}")
        object.__setattr__(self, "marginals", m)

    @classmethod
    def uniform(cls, d):
        return cls(("uniform",) * d)

    @classmethod
    def normal(cls, d):
        return cls(("normal",) * d)

    @property
    def dim(self):
        return len(self.marginals)

    def from_unit(self, U):
        """Map points of the unit cube to the input law by inverse CDF."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        out = np.empty_like(U)
        for i, m in enumerate(self.marginals):
            out[:, i] = 2.0 * U[:, i] - 1.0 if m == "uniform" else special.ndtri(U[:, i])
        return out

    def sample(self, m, rng):
        rng = np.random.default_rng(rng)
        out = np.empty((m, self.dim))
        for i, mg in enumerate(self.marginals):
            out[:, i] = rng.uniform(-1.0, 1.0, m) if mg == "uniform" else rng.standard_normal(m)
        return out

    def low_discrepancy(self, m, seed):
        """Scrambled Sobol points mapped to the input law."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # non power-of-two sample counts
            u = qmc.Sobol(d=self.dim, scramble=True, seed=seed).random(m)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        return self.from_unit(u)


@dataclass(frozen=True)
class MultiIndexSet:
    indices: tuple
    order: int

    @property
    def dim(self):
        return len(self.indices[0])

    def __len__(self):
        return len(self.indices)


def basis_size(d, p):
    return math.comb(p + d, d)


def total_degree_multi_indices(d, p):
    """Multi-indices with total degree <= p, graded, and within one degree in
    descending lexicographic order: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2)."""
    if d < 1 or p < 0:
        raise ValueError("need d >= 1 and p >= 0")
    K = basis_size(d, p)
    if K > MAX_BASIS:
        raise ValueError(f"basis of size {K} exceeds the limit {MAX_BASIS}")
    out = []
    for deg in range(p + 1):
        out.extend(sorted(_compositions(deg, d), reverse=True))
    return MultiIndexSet(tuple(out), p)


def _compositions(total, parts):
    if parts == 1:
        return [(total,)]
    return [(k,) + rest for k in range(total, -1, -1) for rest in _compositions(total - k, parts - 1)]


def _orthonormal_1d(marginal, degree, x):
    """Columns ``psi_0..psi_degree`` evaluated at ``x``."""
    x = np.asarray(x, dtype=float)
    P = np.empty((x.shape[0], degree + 1))
    P[:, 0] = 1.0
    if degree == 0:
        return P
    if marginal == "uniform":
        # Legendre recurrence, then scale by sqrt(2k+1)
        P[:, 1] = x
        for k in range(2, degree + 1):
            P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
        return P * np.sqrt(2.0 * np.arange(degree + 1) + 1.0)
    P[:, 1] = x
    for k in range(2, degree + 1):
        P[:, k] = (x * P[:, k - 1] - math.sqrt(k - 1) * P[:, k - 2]) / math.sqrt(k)
    return P


def design_matrix(input_spec, index_set, xi):
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[1] != input_spec.dim:
        raise ValueError(f"samples have dimension {xi.shape[1]}, input has {input_spec.dim}")
    idx = np.asarray(index_set.indices)
    if idx.shape[1] != input_spec.dim:
        raise ValueError("index set dimension does not match the input")
    A = np.ones((xi.shape[0], idx.shape[0]))
    for i, m in enumerate(input_spec.marginals):
        P = _orthonormal_1d(m, int(idx[:, i].max()), xi[:, i])
        A *= P[:, idx[:, i]]
    return A


def basis_eval(input_spec, alpha, xi):
    """Orthonormal product polynomial ``psi_alpha`` at one point ``xi``."""
    alpha = tuple(int(a) for a in alpha)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if len(alpha) != input_spec.dim or xi.shape[0] != input_spec.dim:
        raise ValueError("multi-index, point and input dimension must agree")
    if any(a < 0 for a in alpha):
        raise ValueError("multi-index entries must be non-negative")
    for m, v in zip(input_spec.marginals, xi):
        if m == "uniform" and abs(v) > 1.0:
            raise ValueError(f"{v} lies outside the uniform support [-1, 1]")
    return float(design_matrix(input_spec, MultiIndexSet((alpha,), sum(alpha)), xi[None, :])[0, 0])


@dataclass(frozen=True)
class PceSurrogate:
    input_spec: RandomInput
    index_set: MultiIndexSet
    coefficients: np.ndarray
    undersampled: bool = False

    def __call__(self, xi):
        return self.predict(xi)

    def predict(self, xi):
        return design_matrix(self.input_spec, self.index_set, xi) @ self.coefficients

    @property
    def mean(self):
        return float(self.coefficients[self.index_set.indices.index((0,) * self.input_spec.dim)])

    @property
    def variance(self):
        c = self.coefficients
        mask = np.array([any(a) for a in self.index_set.indices])
        return float(np.sum(c[mask] ** 2))


def fit_pce_least_squares(input_spec, index_set, samples, values=None):
    """Least-squares PCE coefficients via a pivot-free QR factorization.

    ``samples`` is ``(xi, y)`` or the inputs with ``values`` separate. Warns
    (and sets ``undersampled``) when fewer than 1.5 samples per basis term.
    """
    xi, y = samples if values is None else (samples, values)
    y = np.asarray(y, dtype=float).reshape(-1)
    A = design_matrix(input_spec, index_set, xi)
    n, K = A.shape
    if n < K:
        raise ValueError(f"{n} samples cannot determine {K} coefficients")
    undersampled = n < 1.5 * K
    if undersampled:
        warnings.warn(f"{n} samples for {K} basis terms is below the 1.5x oversampling rate",
                      UndersampledWarning, stacklevel=2)
    Q, R = linalg.qr(A, mode="economic")
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * max(diag.max(), 1.0):
        raise NumericalError("design matrix is rank deficient")
    c = linalg.solve_triangular(R, Q.T @ y)
    return PceSurrogate(input_spec, index_set, c, undersampled)


@dataclass(frozen=True)
class MultiFidelityPce:
    """LF surrogate plus an additive discrepancy surrogate."""

    lf: PceSurrogate
    discrepancy: PceSurrogate

    def __iter__(self):
        return iter((self.lf, self.discrepancy))

    def predict(self, xi):
        return self.lf.predict(xi) + self.discrepancy.predict(xi)

    __call__ = predict


def fit_mf_pce(input_spec, lf_index_set, lf_samples, hf_samples, disc_index_set=None):
    """Fit an LF PCE, then a discrepancy PCE to ``y_H - lf(xi_H)``.

    The discrepancy order defaults to one below the LF order (at least 1).
    """
    lf = fit_pce_least_squares(input_spec, lf_index_set, lf_samples)
    if disc_index_set is None:
        disc_index_set = total_degree_multi_indices(input_spec.dim, max(1, lf_index_set.order - 1))
    xi_h, y_h = hf_samples
    y_h = np.asarray(y_h, dtype=float).reshape(-1)
    disc = fit_pce_least_squares(input_spec, disc_index_set, (xi_h, y_h - lf.predict(xi_h)))
    return MultiFidelityPce(lf, disc)


@dataclass(frozen=True)
class PceMoments:
    mean: float
    variance: float
    sobol: np.ndarray
    degenerate: bool = False


def pce_moments(surrogate):
    """Mean, variance and main-effect Sobol indices read off the coefficients."""
    idx = np.asarray(surrogate.index_set.indices)
    c = np.asarray(surrogate.coefficients)
    variance = surrogate.variance
    d = idx.shape[1]
    if variance <= 0.0:
        return PceMoments(surrogate.mean, 0.0, np.zeros(d), True)
    sobol = np.empty(d)
    for i in range(d):
        only_i = (idx[:, i] > 0) & (np.delete(idx, i, axis=1) == 0).all(axis=1)
        sobol[i] = np.sum(c[only_i] ** 2) / variance
    return PceMoments(surrogate.mean, variance, sobol)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    variance: float
    m: int
    mse: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mse", self.variance / self.m)


def mc_estimate(fn, input_spec, m, seed):
    """Plain Monte Carlo: sample mean, unbiased variance and MSE = variance / m."""
    if m < 2:
        raise ValueError("Monte Carlo needs at least 2 samples")
    xi = input_spec.sample(m, np.random.default_rng(seed))
    try:
        y = np.asarray(fn(xi), dtype=float).reshape(-1)
        if y.shape[0] != m:
            raise ValueError
    except (ValueError, TypeError):
        y = np.array([float(fn(x)) for x in xi])
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise NumericalError(f"non-finite output at sample index {bad[0]}")
    return McEstimate(float(y.mean()), float(y.var(ddof=1)), m)
