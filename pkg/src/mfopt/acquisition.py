"""Acquisition functions, multi-fidelity policies and the acquisition maximizer.

Everything follows the minimization convention: larger scores are better
candidates for reducing the objective.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import ndtr
from scipy.stats import qmc

from ._util import call_vectorized
from .errors import NumericalError
from .gp import stable_cholesky

ACQUISITIONS = ("EI", "UCB", "TS")
POLICY_MODES = ("joint-cost", "joint-correlation", "two-stage")
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str = "EI"
    beta: float = 2.0
    n_candidates: int = 512
    starts: int = 8

    def __post_init__(self):
        if self.kind not in ACQUISITIONS:
            raise ValueError(f"unknown acquisition {self.kind!r}; choose from {ACQUISITIONS}")
        if self.beta < 0:
            raise ValueError("UCB weight beta must be non-negative")
        if self.n_candidates < 1:
            raise ValueError("TS needs at least one candidate")
        if self.starts < 1:
            raise ValueError("at least one start required")


@dataclass(frozen=True)
class MfPolicySpec:
    """How the fidelity level is chosen.

    ``joint-cost`` maximizes ``alpha(x) / c(t)``; ``joint-correlation``
    maximizes ``alpha(x) max(Cor_t(x), 0) / c(t)``; ``two-stage`` picks ``x``
    from the high-fidelity acquisition, then ``t`` maximizing
    ``max(Cor_t(x), 0) / c(t)``.
    """

    mode: str = "two-stage"
    costs: tuple | None = None
    epsilon: float = 0.0
    force_hf_after: int = 10

    def __post_init__(self):
        if self.mode not in POLICY_MODES:
            raise ValueError(f"unknown policy mode {self.mode!r}; choose from {POLICY_MODES}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.costs is not None:
            object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))
            if min(self.costs) <= 0:
                raise ValueError("costs must be strictly positive")


def expected_improvement(mean, sd, incumbent):
    """EI below ``incumbent``; works elementwise on arrays."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(sd < 0):
        raise ValueError("standard deviation must be non-negative")
    gain = incumbent - mean
    safe = np.where(sd > 0, sd, 1.0)
    z = gain / safe
    ei = gain * ndtr(z) + safe * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    out = np.where(sd > 0, np.maximum(ei, 0.0), np.maximum(gain, 0.0))
    return float(out) if out.ndim == 0 else out


def ucb_score(mean, sd, beta):
    """Lower-confidence-bound score ``-mean + beta * sd`` (to be maximized)."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(sd < 0):
        raise ValueError("standard deviation must be non-negative")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    out = -mean + beta * sd
    return float(out) if out.ndim == 0 else out


def thompson_select(posterior, candidates, seed):
    """Index of the minimizer of one joint posterior draw over ``candidates``.

    ``posterior`` needs ``predict(X, full_cov=True) -> (mean, cov)``.
    """
    C = np.asarray(candidates, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] == 0:
        raise ValueError("no candidates")
    if C.shape[0] == 1:
        return 0
    mean, cov = posterior.predict(C, full_cov=True)
    L, _ = stable_cholesky(cov)
    z = np.random.default_rng(seed).standard_normal(mean.shape[0])
    return int(np.argmin(mean + L @ z))


def _cost(level, policy):
    costs = policy.costs if isinstance(policy, MfPolicySpec) else policy
    c = float(costs[level])
    if not c > 0:
        raise ValueError(f"cost of level {level} must be positive, got {c}")
    return c


def mf_score_cost(base_score, level, policy):
    """``alpha(x, t) = alpha(x) / c(t)``; ``policy`` is an :class:`MfPolicySpec` or a cost list."""
    return base_score / _cost(level, policy)


def mf_score_correlation(base_score, corr):
    """``alpha(x, t) = alpha(x) * max(Cor, 0)``."""
    corr = np.asarray(corr, dtype=float)
    if np.any(np.abs(corr) > 1.0 + 1e-9):
        raise ValueError("correlation must lie in [-1, 1]")
    out = base_score * np.maximum(corr, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def fidelity_utility(corr, level, policy):
    """Two-stage level score ``max(Cor, 0) / c(t)``."""
    return max(float(corr), 0.0) / _cost(level, policy)


def quasi_random_points(bounds, n, seed):
    """``n`` scrambled Sobol points inside ``bounds``."""
    b = np.asarray(bounds, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # non power-of-two sample counts
        u = qmc.Sobol(d=b.shape[0], scramble=True, seed=seed).random(n)
    return b[:, 0] + u * (b[:, 1] - b[:, 0])


TIE_TOL = 1e-9


def maximize_acquisition(score_fn, bounds, starts=8, seed=0, n_raw=None, method="L-BFGS-B"):
    """Multi-start maximization of ``score_fn`` over a box.

    ``score_fn`` maps an ``(n, d)`` array to ``n`` scores (scalar callables are
    accepted too). A scrambled Sobol sweep of ``n_raw`` points seeds the
    ``starts`` best locations, each refined by a bounded local optimizer.
    Starts with non-finite scores are discarded. Returns ``(x, score)`` with
    ``score == score_fn(x)``.
    """
    b = np.atleast_2d(np.asarray(bounds, dtype=float))
    d = b.shape[0]
    if starts < 1:
        raise ValueError("at least one start required")
    n_raw = n_raw or max(128, 32 * d, starts)
    raw = quasi_random_points(b, n_raw, seed)
    vals = call_vectorized(score_fn, raw)
    finite = np.flatnonzero(np.isfinite(vals))
    if finite.size == 0:
        raise NumericalError("acquisition score is non-finite at every start point")
    order = finite[np.argsort(-vals[finite], kind="stable")][:starts]

    def neg(x):
        v = float(call_vectorized(score_fn, x[None, :])[0])
        return -v if np.isfinite(v) else 1e300

    refined = []
    for i in order:
        x0, v0 = raw[i], vals[i]
        try:
            res = optimize.minimize(neg, x0, method=method, bounds=list(map(tuple, b)))
            x1 = np.clip(res.x, b[:, 0], b[:, 1])
            v1 = float(call_vectorized(score_fn, x1[None, :])[0])
        except (ValueError, FloatingPointError, NumericalError):
            x1, v1 = x0, v0
        if not np.isfinite(v1) or v1 < v0:
            x1, v1 = x0, v0
        refined.append((x1, v1))
    # near-ties (equal optima) resolve to the lexicographically smallest point
    top = max(v for _, v in refined)
    tied = [x for x, v in refined if v >= top - TIE_TOL * max(1.0, abs(top))]
    best_x = min(tied, key=tuple)
    best_v = float(call_vectorized(score_fn, best_x[None, :])[0])
    return best_x, best_v


def epsilon_greedy_pick(adaptive_choice, bounds, epsilon, seed, return_flag=False):
    """Adaptive choice with probability ``1 - epsilon``, else a uniform point."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    b = np.atleast_2d(np.asarray(bounds, dtype=float))
    explore = rng.random() < epsilon
    if explore:
        point = rng.uniform(b[:, 0], b[:, 1])
    else:
        point = np.asarray(adaptive_choice, dtype=float)
    return (point, explore) if return_flag else point
