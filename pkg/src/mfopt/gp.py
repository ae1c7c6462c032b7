"""Gaussian process priors, exact conditioning and marginal-likelihood fitting.

Kernels follow a small duck-typed protocol used throughout the package:
``gram(X1, X2)``, ``diag(X)``, ``noise_variance`` and ``dim``. :class:`KernelSpec`
is the parametric ARD kernel; the multi-fidelity priors build composite
kernels that satisfy the same protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize
from scipy.stats import qmc

from . import _backend
from .errors import NumericalError

FAMILIES = ("se", "matern52", "product")
JITTER_START = 1e-10
JITTER_MAX = 1e-6
DEFAULT_BOUNDS = {
    "lengthscales": (1e-3, 1e3),
    "amplitude": (1e-3, 1e3),
    "noise": (1e-10, 1e3),
}
_LOG2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelSpec:
    """Stationary ARD kernel with amplitude and observation noise.

    ``family`` is ``"se"`` (squared exponential), ``"matern52"`` or
    ``"product"``. A product kernel multiplies a design kernel of family
    ``base`` over the leading coordinates by a squared-exponential fidelity
    kernel over the last ``n_fidelity_dims`` coordinates.
    """

    family: str = "se"
    lengthscales: tuple = (1.0,)
    amplitude: float = 1.0
    noise_variance: float = 0.0
    base: str = "se"
    n_fidelity_dims: int = 0

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(np.asarray(self.lengthscales, dtype=float)))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.base not in ("se", "matern52"):
            raise ValueError(f"product base family must be 'se' or 'matern52', got {self.base!r}")
        if not ls or min(ls) <= 0 or not all(math.isfinite(v) for v in ls):
            raise ValueError("lengthscales must be finite and strictly positive")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be strictly positive")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be non-negative")
        if self.family == "product" and not 0 < self.n_fidelity_dims < len(ls) + 1:
            raise ValueError("product kernel needs 1 <= n_fidelity_dims <= dim")

    @property
    def dim(self):
        return len(self.lengthscales)

    def _code(self):
        if self.family == "se" or (self.family == "product" and self.base == "se"):
            return _backend._pykernels.SE, 0
        if self.family == "matern52":
            return _backend._pykernels.MATERN52, 0
        return _backend._pykernels.MATERN52, self.n_fidelity_dims

    def gram(self, X1, X2=None):
        X1 = as_points(X1, self.dim)
        X2 = X1 if X2 is None else as_points(X2, self.dim)
        code, nfid = self._code()
        return _backend.kernels.ard_gram(X1, X2, np.asarray(self.lengthscales), self.amplitude, code, nfid)

    def diag(self, X):
        return np.full(as_points(X, self.dim).shape[0], self.amplitude)

    def gram_grad(self, X):
        """Gram matrix (noise excluded) and derivatives w.r.t. log-lengthscales."""
        code, nfid = self._code()
        return _backend.kernels.ard_gram_grad(
            as_points(X, self.dim), np.asarray(self.lengthscales), self.amplitude, code, nfid
        )

    def __call__(self, x, x2):
        return kernel_eval(self, x, x2)


def kernel_eval(spec, x, x2):
    """Evaluate ``spec`` at a single pair of input vectors."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.ndim != 1 or x.shape != x2.shape or x.shape[0] != spec.dim:
        raise ValueError(
            f"kernel of dimension {spec.dim} evaluated on vectors of shape {x.shape} and {x2.shape}"
        )
    return float(spec.gram(x[None, :], x2[None, :])[0, 0])


def as_points(X, dim=None):
    """Coerce ``X`` to an ``(n, dim)`` float array.

    A 1-D array is read as ``n`` scalar inputs when ``dim`` is 1 (or unknown)
    and as a single point otherwise.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None] if dim in (None, 1) else X[None, :]
    if X.ndim != 2 or (dim is not None and X.shape[1] != dim):
        raise ValueError(f"expected points of dimension {dim}, got array of shape {X.shape}")
    return X


@dataclass
class Dataset:
    """Inputs ``X`` (n, d), outputs ``y`` (n,), optional domain bounds (d, 2)
    and fidelity labels."""

    X: np.ndarray
    y: np.ndarray
    bounds: np.ndarray | None = None
    levels: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        dim = None if self.bounds is None else np.asarray(self.bounds).shape[0]
        self.X = as_points(self.X, dim) if np.size(self.X) else np.zeros((0, dim or 1))
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"{self.X.shape[0]} inputs but {self.y.shape[0]} outputs")
        if self.bounds is not None:
            b = np.asarray(self.bounds, dtype=float)
            if np.any(self.X < b[:, 0]) or np.any(self.X > b[:, 1]):
                raise ValueError("inputs outside the declared domain bounds")
            self.bounds = b
        if self.levels is not None:
            self.levels = np.asarray(self.levels)
            if self.levels.shape[0] != self.y.shape[0]:
                raise ValueError("one fidelity label per observation required")

    def __len__(self):
        return self.y.shape[0]


def stable_cholesky(K):
    """Lower Cholesky factor of ``K`` with escalating diagonal jitter.

    The exact factorization is tried first, so a well-conditioned noise-free
    Gram matrix keeps exact interpolation. Returns ``(L, jitter)``; raises
    :class:`NumericalError` when even the largest jitter fails.
    """
    n = K.shape[0]
    try:
        return linalg.cholesky(K, lower=True, check_finite=True), 0.0
    except (np.linalg.LinAlgError, ValueError):
        pass
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            L = linalg.cholesky(K + jitter * np.eye(n), lower=True, check_finite=True)
            return L, jitter
        except (np.linalg.LinAlgError, ValueError):
            jitter *= 10.0
    raise NumericalError(f"Gram matrix of size {n} is not positive definite even with jitter {JITTER_MAX:g}")


class GaussianProcess:
    """A GP prior, or a posterior once conditioned on data.

    Instances are immutable; :meth:`condition` returns a new object.
    """

    def __init__(self, kernel, mean_fn=None, X=None, y=None):
        self.kernel = kernel
        self.mean_fn = mean_fn
        d = kernel.dim
        if X is None or np.size(X) == 0:
            self.X = np.zeros((0, d))
            self.y = np.zeros(0)
        else:
            self.X = as_points(X, d)
            self.y = np.asarray(y, dtype=float).reshape(-1)
            if self.X.shape[0] != self.y.shape[0]:
                raise ValueError("X and y lengths differ")
        self._L = None
        self._alpha = None
        if self.n_data:
            K = kernel.gram(self.X, self.X) + kernel.noise_variance * np.eye(self.n_data)
            self._L, self.jitter = stable_cholesky(K)
            r = self.y - self.prior_mean(self.X)
            self._alpha = linalg.cho_solve((self._L, True), r)
        else:
            self.jitter = 0.0

    @property
    def n_data(self):
        return self.y.shape[0]

    @property
    def dim(self):
        return self.kernel.dim

    def prior_mean(self, X):
        X = as_points(X, self.dim)
        if self.mean_fn is None:
            return np.zeros(X.shape[0])
        return np.asarray(self.mean_fn(X), dtype=float).reshape(X.shape[0])

    def condition(self, X, y):
        """Posterior after adding observations ``(X, y)`` to the current data."""
        X = as_points(X, self.dim) if np.size(X) else np.zeros((0, self.dim))
        y = np.asarray(y, dtype=float).reshape(-1)
        return GaussianProcess(
            self.kernel, self.mean_fn, np.vstack([self.X, X]), np.concatenate([self.y, y])
        )

    def predict(self, X, full_cov=False, prior_mean=None):
        """Predictive mean and variance (or covariance) of the latent function.

        ``prior_mean`` overrides the evaluation of ``mean_fn`` at ``X`` when the
        caller already has it.
        """
        X = as_points(X, self.dim)
        mean = self.prior_mean(X) if prior_mean is None else np.asarray(prior_mean, dtype=float)
        if full_cov:
            cov = self.kernel.gram(X, X)
        else:
            var = np.asarray(self.kernel.diag(X), dtype=float).copy()
        if self.n_data:
            Ks = self.kernel.gram(self.X, X)
            mean = mean + Ks.T @ self._alpha
            v = linalg.solve_triangular(self._L, Ks, lower=True)
            if full_cov:
                cov = cov - v.T @ v
            else:
                var = var - np.einsum("ij,ij->j", v, v)
        if full_cov:
            return mean, 0.5 * (cov + cov.T)
        return mean, np.maximum(var, 0.0)

    def pair_cov(self, X1, X2):
        """Posterior covariances ``Cov[f(X1[i]), f(X2[i])]`` for paired rows."""
        X1 = as_points(X1, self.dim)
        X2 = as_points(X2, self.dim)
        c = np.diag(self.kernel.gram(X1, X2)).copy()
        if self.n_data:
            v1 = linalg.solve_triangular(self._L, self.kernel.gram(self.X, X1), lower=True)
            v2 = linalg.solve_triangular(self._L, self.kernel.gram(self.X, X2), lower=True)
            c -= np.einsum("ij,ij->j", v1, v2)
        return c

    def log_marginal_likelihood(self):
        if not self.n_data:
            raise ValueError("log marginal likelihood needs at least one observation")
        r = self.y - self.prior_mean(self.X)
        return float(
            -0.5 * r @ self._alpha - np.log(np.diag(self._L)).sum() - 0.5 * self.n_data * _LOG2PI
        )

    def sample(self, X, n_samples=1, rng=None):
        """Joint draws of the latent function at ``X``; shape ``(n_samples, n)``."""
        rng = np.random.default_rng(rng)
        mean, cov = self.predict(X, full_cov=True)
        L, _ = stable_cholesky(cov)
        z = rng.standard_normal((n_samples, mean.shape[0]))
        return mean[None, :] + z @ L.T


def gp_posterior(prior, data):
    """Condition ``prior`` on a :class:`Dataset` (or an ``(X, y)`` pair)."""
    X, y = (data.X, data.y) if isinstance(data, Dataset) else data
    if np.size(y) == 0:
        return prior
    return prior.condition(X, y)


def log_marginal_likelihood(prior, data):
    """Log density of the observed outputs under the prior's joint Gaussian."""
    X, y = (data.X, data.y) if isinstance(data, Dataset) else data
    if np.size(y) == 0:
        raise ValueError("log marginal likelihood needs at least one observation")
    return GaussianProcess(prior.kernel, prior.mean_fn, X, y).log_marginal_likelihood()


# ----------------------------------------------------------------------------
# hyperparameter fitting
# ----------------------------------------------------------------------------

_FREE_NAMES = ("lengthscales", "amplitude", "noise")


def _pack(spec):
    noise = max(spec.noise_variance, DEFAULT_BOUNDS["noise"][0])
    return np.log(np.concatenate([spec.lengthscales, [spec.amplitude, noise]]))


def _unpack(spec, logp, fit_noise=True):
    p = np.exp(logp)
    d = spec.dim
    noise = p[d + 1] if fit_noise else spec.noise_variance
    return replace(spec, lengthscales=tuple(p[:d]), amplitude=p[d], noise_variance=noise)


def _lml_terms(spec, X, y, H=None):
    """Log marginal likelihood, gradient w.r.t. all log-parameters, and the
    profiled mean coefficients (``None`` without a mean basis)."""
    n = X.shape[0]
    K, dK = spec.gram_grad(X)
    L, _ = stable_cholesky(K + spec.noise_variance * np.eye(n))
    beta = None
    if H is None:
        r = y
    else:
        A = linalg.solve_triangular(L, H, lower=True)
        b = linalg.solve_triangular(L, y, lower=True)
        beta = np.linalg.lstsq(A, b, rcond=None)[0]
        r = y - H @ beta
    alpha = linalg.cho_solve((L, True), r)
    lml = -0.5 * r @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * _LOG2PI
    W = np.outer(alpha, alpha) - linalg.cho_solve((L, True), np.eye(n))
    grad = np.empty(spec.dim + 2)
    grad[: spec.dim] = 0.5 * np.einsum("ij,kij->k", W, dK)
    grad[spec.dim] = 0.5 * np.sum(W * K)
    grad[spec.dim + 1] = 0.5 * spec.noise_variance * np.trace(W)
    return float(lml), grad, beta


def log_marginal_likelihood_grad(spec, X, y, mean_basis=None):
    """LML of zero-mean (or profiled-mean) data and its gradient with respect
    to ``log(lengthscales) + [log(amplitude), log(noise_variance)]``."""
    X = as_points(X, spec.dim)
    y = np.asarray(y, dtype=float).reshape(-1)
    H = None if mean_basis is None else _basis_matrix(mean_basis, X)
    lml, grad, _ = _lml_terms(spec, X, y, H)
    return lml, grad


def _basis_matrix(mean, X):
    if mean is None or mean == "zero":
        return None
    if mean == "constant":
        return np.ones((X.shape[0], 1))
    H = np.asarray(mean(X), dtype=float)
    return H.reshape(X.shape[0], -1)


def _free_mask(spec, free):
    unknown = set(free) - set(_FREE_NAMES)
    if unknown:
        raise ValueError(f"unknown free parameters {sorted(unknown)}; choose from {_FREE_NAMES}")
    mask = np.zeros(spec.dim + 2, dtype=bool)
    if "lengthscales" in free:
        mask[: spec.dim] = True
    if "amplitude" in free:
        mask[spec.dim] = True
    if "noise" in free:
        mask[spec.dim + 1] = True
    return mask


def _log_bounds(spec, bounds):
    b = dict(DEFAULT_BOUNDS)
    if bounds:
        b.update(bounds)
    lo = np.log([b["lengthscales"][0]] * spec.dim + [b["amplitude"][0], b["noise"][0]])
    hi = np.log([b["lengthscales"][1]] * spec.dim + [b["amplitude"][1], b["noise"][1]])
    return lo, hi


@dataclass
class FitResult:
    spec: KernelSpec
    lml: float
    beta: np.ndarray | None = None
    n_failed: int = 0
    history: list = field(default_factory=list)


def _fit(spec, X, y, H, free, bounds, restarts, seed):
    mask = _free_mask(spec, free)
    full0 = _pack(spec)
    lo, hi = _log_bounds(spec, bounds)
    if not mask.any():
        lml, _, beta = _lml_terms(spec, X, y, H)
        return FitResult(spec, lml, beta)

    def objective(theta):
        full = full0.copy()
        full[mask] = theta
        try:
            lml, grad, _ = _lml_terms(_unpack(spec, full, mask[-1]), X, y, H)
        except NumericalError:
            return 1e20, np.zeros(theta.shape[0])
        if not math.isfinite(lml):
            return 1e20, np.zeros(theta.shape[0])
        return -lml, -grad[mask]

    k = int(mask.sum())
    starts = [np.clip(full0[mask], lo[mask], hi[mask])]
    if restarts > 1:
        u = qmc.Halton(d=k, scramble=True, seed=seed).random(restarts - 1)
        starts.extend(lo[mask] + u[i] * (hi[mask] - lo[mask]) for i in range(restarts - 1))
    best = None
    failed = 0
    history = []
    for theta0 in starts:
        try:
            res = optimize.minimize(
                objective, theta0, jac=True, method="L-BFGS-B", bounds=list(zip(lo[mask], hi[mask]))
            )
        except (NumericalError, FloatingPointError, ValueError):
            failed += 1
            continue
        history.append(float(-res.fun))
        if not np.isfinite(res.fun) or res.fun >= 1e19:
            failed += 1
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise NumericalError(f"all {len(starts)} hyperparameter restarts failed")
    full = full0.copy()
    full[mask] = best.x
    fitted = _unpack(spec, full, mask[-1])
    lml, _, beta = _lml_terms(fitted, X, y, H)
    return FitResult(fitted, lml, beta, failed, history)


def fit_hyperparameters(spec, data, *, free=("lengthscales", "amplitude"), bounds=None,
                        restarts=8, seed=0, mean="zero"):
    """Maximum marginal likelihood hyperparameters, multi-start in log space.

    Parameters named in ``free`` are optimized inside ``bounds`` (defaults in
    :data:`DEFAULT_BOUNDS`); the first start is ``spec`` itself and the rest
    are scrambled Halton points, so the result is deterministic in ``seed``.
    ``mean`` is ``"zero"``, ``"constant"`` or a basis callable ``X -> (n, p)``
    whose coefficients are profiled out by generalized least squares.
    """
    X, y = (data.X, data.y) if isinstance(data, Dataset) else data
    X = as_points(X, spec.dim)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not set(free) & set(_FREE_NAMES):
        return spec
    if y.shape[0] < 2:
        raise ValueError("hyperparameter fitting needs at least 2 observations")
    return _fit(spec, X, y, _basis_matrix(mean, X), free, bounds, restarts, seed).spec


def fit_gp(X, y, spec, *, mean="constant", free=("lengthscales", "amplitude"), bounds=None,
           restarts=8, seed=0, optimize_hypers=True):
    """Fit hyperparameters (optionally) and return the conditioned posterior.

    The returned GP carries ``beta`` (profiled mean coefficients, possibly
    ``None``) and ``lml`` attributes.
    """
    X = as_points(X, spec.dim)
    y = np.asarray(y, dtype=float).reshape(-1)
    H = _basis_matrix(mean, X)
    if optimize_hypers and y.shape[0] >= 2:
        result = _fit(spec, X, y, H, free, bounds, restarts, seed)
    else:
        result = _fit(spec, X, y, H, (), bounds, 1, seed)
    mean_fn = _mean_function(mean, result.beta)
    gp = GaussianProcess(result.spec, mean_fn, X, y)
    gp.beta = result.beta
    gp.lml = result.lml
    return gp


def _mean_function(mean, beta):
    if beta is None:
        return None
    if mean == "constant":
        c = float(beta[0])
        return lambda X: np.full(X.shape[0], c)
    return lambda X: _basis_matrix(mean, X) @ beta
