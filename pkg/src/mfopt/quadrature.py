"""Quadrature rules, weighted-sum objectives and sparsified low-fidelity models.

Gauss nodes are found by Newton iteration on the three-term recurrence of
the orthonormal polynomials; Clenshaw-Curtis nodes come from one sine
formula so that nested levels share bit-identical nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from .errors import NumericalError

MAX_GAUSS_ORDER = 64
MAX_CC_LEVEL = 16
MAX_TENSOR_NODES = 10**6
NEWTON_TOL = 1e-14


@dataclass(frozen=True)
class QuadratureScheme:
    """Nodes ``(n, s)`` and strictly positive weights ``(n,)``."""

    nodes: np.ndarray
    weights: np.ndarray
    family: str
    order: tuple
    measure: str = "lebesgue"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if nodes.shape[0] != weights.shape[0]:
            raise ValueError("node count and weight count differ")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be strictly positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.nodes.shape[1]

    def integrate(self, fn):
        vals = np.array([float(fn(xi)) for xi in self.nodes])
        total = 0.0
        for w, v in zip(self.weights, vals):
            total += w * v
        return total


def _check_order(n):
    if n < 1:
        raise ValueError("quadrature order must be at least 1")
    if n > MAX_GAUSS_ORDER:
        raise ValueError(f"order {n} unsupported; Gauss rules are capped at {MAX_GAUSS_ORDER} nodes")


def _legendre(n, x):
    """P_n(x) and P_{n-1}(x) by the three-term recurrence."""
    p0, p1 = np.ones_like(x), x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    return p1, p0


def gauss_legendre(n):
    """n-point Gauss-Legendre rule on [-1, 1] (weights sum to 2)."""
    _check_order(n)
    if n == 1:
        return QuadratureScheme(np.zeros(1), np.array([2.0]), "gauss-legendre", (1,))
    m = (n + 1) // 2
    k = np.arange(1, m + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        pn, pm = _legendre(n, x)
        dp = n * (x * pn - pm) / (x * x - 1.0)
        dx = pn / dp
        x = x - dx
        if np.max(np.abs(dx)) < NEWTON_TOL:
            break
    else:
        raise NumericalError(f"Gauss-Legendre Newton iteration did not converge for n={n}")
    pn, pm = _legendre(n, x)
    dp = n * (x * pn - pm) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    if n % 2:
        x[-1] = 0.0
    return _mirror(x, w, n, "gauss-legendre")


def _mirror(pos, w, n, family, measure="lebesgue"):
    """Assemble a symmetric rule from the non-negative half (descending)."""
    order = np.argsort(pos)
    pos, w = pos[order], w[order]
    if n % 2:
        nodes = np.concatenate([-pos[:0:-1], pos])
        weights = np.concatenate([w[:0:-1], w])
    else:
        nodes = np.concatenate([-pos[::-1], pos])
        weights = np.concatenate([w[::-1], w])
    return QuadratureScheme(nodes, weights, family, (n,), measure)


def _hermite_normalized(n, x):
    """Orthonormal probabilists' Hermite h_n and h_{n-1}."""
    h0, h1 = np.ones_like(x), x.copy()
    if n == 0:
        return h0, np.zeros_like(x)
    for k in range(2, n + 1):
        h0, h1 = h1, (x * h1 - math.sqrt(k - 1) * h0) / math.sqrt(k)
    return h1, h0


def gauss_hermite(n):
    """n-point Gauss-Hermite rule for the standard normal measure (weights sum to 1)."""
    _check_order(n)
    if n == 1:
        return QuadratureScheme(np.zeros(1), np.array([1.0]), "gauss-hermite", (1,), "normal")
    # Jacobi-matrix eigenvalues give the starting guesses; Newton polishes them
    off = np.sqrt(np.arange(1, n))
    x = np.linalg.eigvalsh(np.diag(off, 1) + np.diag(off, -1))
    x = np.sort(x)[n // 2:]
    for _ in range(100):
        hn, hm = _hermite_normalized(n, x)
        dx = hn / (math.sqrt(n) * hm)
        x = x - dx
        if np.max(np.abs(dx)) < NEWTON_TOL * max(1.0, np.max(np.abs(x))):
            break
    else:
        raise NumericalError(f"Gauss-Hermite Newton iteration did not converge for n={n}")
    _, hm = _hermite_normalized(n, x)
    w = 1.0 / (n * hm * hm)
    if n % 2:
        x[0] = 0.0
    return _mirror(x, w, n, "gauss-hermite", "normal")


def cc_size(level):
    return 1 if level == 0 else 2**level + 1


def clenshaw_curtis(level):
    """Nested Clenshaw-Curtis rule on [-1, 1] with ``2**level + 1`` nodes (1 at level 0)."""
    if level < 0:
        raise ValueError("Clenshaw-Curtis level must be non-negative")
    if level > MAX_CC_LEVEL:
        raise ValueError(f"level {level} unsupported; Clenshaw-Curtis levels are capped at {MAX_CC_LEVEL}")
    if level == 0:
        return QuadratureScheme(np.zeros(1), np.array([2.0]), "clenshaw-curtis", (0,))
    N = 2**level
    j = np.arange(N + 1)
    # sin(pi (2j - N) / (2N)) == -cos(pi j / N), exactly symmetric with an exact zero
    nodes = np.sin(np.pi * (2 * j - N) / (2 * N))
    k = np.arange(1, N // 2 + 1)
    b = np.where(k == N // 2, 1.0, 2.0)
    theta = np.pi * j / N
    c = np.where((j == 0) | (j == N), 1.0, 2.0)
    s = (b[None, :] / (4.0 * k[None, :] ** 2 - 1.0) * np.cos(2.0 * k[None, :] * theta[:, None])).sum(axis=1)
    weights = c / N * (1.0 - s)
    return QuadratureScheme(nodes, weights, "clenshaw-curtis", (level,))


RULES = {
    "gauss-legendre": gauss_legendre,
    "gauss-hermite": gauss_hermite,
    "clenshaw-curtis": clenshaw_curtis,
}


def make_rule(name, level):
    """Rule by name; ``level`` is the order for Gauss rules and the level for CC."""
    try:
        return RULES[name](int(level))
    except KeyError:
        raise ValueError(f"unknown rule {name!r}; choose from {sorted(RULES)}") from None


def tensor_product(rules):
    """Cartesian-product rule; nodes enumerate with the last dimension fastest."""
    rules = list(rules)
    if not rules:
        raise ValueError("tensor product needs at least one rule")
    count = math.prod(r.size for r in rules)
    if count > MAX_TENSOR_NODES:
        raise ValueError(f"tensor product would have {count} nodes (limit {MAX_TENSOR_NODES})")
    idx = list(product(*[range(r.size) for r in rules]))
    nodes = np.array([np.concatenate([r.nodes[i] for r, i in zip(rules, ix)]) for ix in idx])
    weights = np.array([math.prod(r.weights[i] for r, i in zip(rules, ix)) for ix in idx])
    measures = {r.measure for r in rules}
    return QuadratureScheme(
        nodes, weights, "tensor", tuple(r.order[0] for r in rules),
        measures.pop() if len(measures) == 1 else "mixed",
    )


# ----------------------------------------------------------------------------
# weighted-sum objectives and their sparsifications
# ----------------------------------------------------------------------------


def _term(integrand, x, xi, i):
    v = float(integrand(x, xi))
    if not math.isfinite(v):
        raise NumericalError(f"integrand is not finite at node {i} (xi={np.asarray(xi).tolist()})")
    return v


@dataclass(frozen=True)
class QuadratureObjective:
    """``f(x) = sum_i w_i g(x, xi_i)`` summed left to right in node order."""

    integrand: Callable
    scheme: QuadratureScheme
    bounds: np.ndarray | None = None

    def __call__(self, x):
        return quadrature_objective_eval(self, x)


def quadrature_objective_eval(obj, x):
    x = np.asarray(x, dtype=float)
    if obj.bounds is not None:
        b = np.asarray(obj.bounds, dtype=float)
        if np.any(np.atleast_1d(x) < b[:, 0]) or np.any(np.atleast_1d(x) > b[:, 1]):
            raise ValueError("x outside the objective's bounds")
    total = 0.0
    for i, (w, xi) in enumerate(zip(obj.scheme.weights, obj.scheme.nodes)):
        total += w * _term(obj.integrand, x, _node(xi), i)
    return total


def _node(xi):
    return xi[0] if xi.shape[0] == 1 else xi


@dataclass(frozen=True)
class SparsifiedLfm:
    """Partial sum ``f_I(x) = sum_{i in I} factor_i w_i g(x, xi_i)``."""

    objective: QuadratureObjective
    indices: tuple
    factors: tuple | None = None

    def __post_init__(self):
        if not self.indices:
            raise ValueError("index set must be non-empty")
        n = self.objective.scheme.size
        if any(i < 0 or i >= n for i in self.indices):
            raise ValueError(f"indices must lie in 0..{n - 1}")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("indices must be distinct")

    @property
    def weights(self):
        w = self.objective.scheme.weights[list(self.indices)]
        if self.factors is not None:
            w = w * np.asarray(self.factors)
        return w

    @property
    def n_terms(self):
        return len(self.indices)

    def terms(self, x):
        """Integrand values at the subset nodes, in index order."""
        nodes = self.objective.scheme.nodes
        return [_term(self.objective.integrand, x, _node(nodes[i]), i) for i in self.indices]

    def __call__(self, x):
        total = 0.0
        for w, v in zip(self.weights, self.terms(x)):
            total += w * v
        return total


def largest_weight_subset(scheme, k):
    """Indices of the ``k`` largest weights, ties broken by lower index."""
    if not 1 <= k <= scheme.size:
        raise ValueError(f"subset size must be in 1..{scheme.size}")
    order = sorted(range(scheme.size), key=lambda i: (-scheme.weights[i], i))
    return tuple(sorted(order[:k]))


def sparsify(obj, index_set, reweight="none"):
    """Sparsified LFM over ``index_set`` (or the ``k`` largest weights when an int).

    ``reweight="renormalize"`` scales the kept weights so they sum to the
    full rule's total weight.
    """
    if isinstance(index_set, (int, np.integer)):
        index_set = largest_weight_subset(obj.scheme, int(index_set))
    idx = tuple(int(i) for i in index_set)
    if not idx:
        raise ValueError("index set must be non-empty")
    if reweight == "none":
        return SparsifiedLfm(obj, idx)
    if reweight == "renormalize":
        w = obj.scheme.weights
        scale = w.sum() / w[list(idx)].sum()
        return SparsifiedLfm(obj, idx, tuple([scale] * len(idx)))
    raise ValueError(f"unknown reweight mode {reweight!r}; use 'none' or 'renormalize'")


@dataclass
class NestedChain:
    """Fidelity hierarchy of nested-rule LFMs over one parent (top-level) rule.

    Integrand values are cached per design ``x`` so that evaluating a finer
    level after a coarser one at the same ``x`` charges only the new nodes;
    ``calls`` counts integrand evaluations.
    """

    objective: QuadratureObjective
    levels: tuple
    models: list
    calls: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_levels(self):
        return len(self.models)

    @property
    def node_counts(self):
        return tuple(m.n_terms for m in self.models)

    def incremental_cost(self, level, given=None):
        """Integrand calls needed for ``level`` when ``given`` was already evaluated."""
        new = set(self.models[level].indices)
        if given is not None:
            new -= set(self.models[given].indices)
        return len(new)

    def pending_cost(self, level, x):
        """Integrand calls ``evaluate(level, x)`` would charge right now."""
        key = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
        cached = self._cache.get(key, {})
        return sum(1 for i in self.models[level].indices if i not in cached)

    def evaluate(self, level, x):
        """Return ``(value, integrand_calls_charged)`` for ``level`` at ``x``."""
        key = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
        cached = self._cache.setdefault(key, {})
        model = self.models[level]
        nodes = self.objective.scheme.nodes
        charged = 0
        for i in model.indices:
            if i not in cached:
                cached[i] = _term(self.objective.integrand, np.asarray(x, dtype=float), _node(nodes[i]), i)
                charged += 1
        self.calls += charged
        total = 0.0
        for w, i in zip(model.weights, model.indices):
            total += w * cached[i]
        return total, charged

    def evaluator(self, level):
        return lambda x: self.evaluate(level, x)[0]

    def reset(self):
        self.calls = 0
        self._cache.clear()


def nested_chain(integrand, rule_family="clenshaw-curtis", levels=(0, 1, 2), bounds=None):
    """One sparsified LFM per nested level; the last level is the full rule.

    Each level's own Clenshaw-Curtis weights are expressed as reweighting
    factors on the subset of top-level nodes it uses.
    """
    if rule_family != "clenshaw-curtis":
        raise ValueError(f"rule family {rule_family!r} is not nested; use 'clenshaw-curtis'")
    levels = tuple(int(v) for v in levels)
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be non-empty and strictly increasing")
    top = clenshaw_curtis(levels[-1])
    obj = integrand if isinstance(integrand, QuadratureObjective) else QuadratureObjective(integrand, top, bounds)
    if obj.scheme.family != "clenshaw-curtis" or obj.scheme.order != (levels[-1],):
        obj = QuadratureObjective(obj.integrand, top, obj.bounds)
    lookup = {v: i for i, v in enumerate(top.nodes[:, 0].tolist())}
    models = []
    for lv in levels:
        rule = clenshaw_curtis(lv)
        try:
            idx = [lookup[v] for v in rule.nodes[:, 0].tolist()]
        except KeyError:
            raise NumericalError(f"level {lv} nodes are not a subset of level {levels[-1]}") from None
        factors = tuple(rule.weights / top.weights[idx])
        models.append(SparsifiedLfm(obj, tuple(idx), factors))
    return NestedChain(obj, levels, models)
