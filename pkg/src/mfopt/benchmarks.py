"""Built-in benchmark problems.

* ``forrester``: the usual two-fidelity Forrester pair on [0, 1], a community
  convention for desk-scale multi-fidelity tests.
* ``quadrature-forrester``: ``f(x) = sum_j w_j g(x, xi_j)`` with
  ``g(x, xi) = (6x - 2)^2 sin(12x - 4 - xi)`` over a Clenshaw-Curtis rule on
  ``xi in [-1, 1]``; lower levels are the nested coarser rules.
* ``pce-pair``: ``LF(xi) = xi_1 + xi_2^2`` and ``HF = LF + 0.1 xi_1 xi_2`` on
  the uniform square, used by the UQ commands.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .campaign import Objective
from .quadrature import nested_chain


def forrester_hf(x):
    x = np.asarray(x, dtype=float)
    v = (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)
    return v[..., 0] if v.ndim and v.shape[-1:] == (1,) else v


def forrester_lf(x):
    x = np.asarray(x, dtype=float)
    xs = x[..., 0] if x.ndim and x.shape[-1:] == (1,) else x
    return 0.5 * forrester_hf(x) + 10.0 * (xs - 0.5) - 5.0


def quadrature_forrester_integrand(x, xi):
    x = float(np.atleast_1d(x)[0])
    xi = float(np.atleast_1d(xi)[0])
    return (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0 - xi)


def pce_lf(xi):
    xi = np.atleast_2d(xi)
    return xi[:, 0] + xi[:, 1] ** 2


def pce_hf(xi):
    xi = np.atleast_2d(xi)
    return pce_lf(xi) + 0.1 * xi[:, 0] * xi[:, 1]


def dense_grid_minimum(fn, bounds, n=10**6):
    """Minimum of a 1-D function over ``n`` evenly spaced points."""
    lo, hi = np.asarray(bounds, dtype=float)[0]
    x = np.linspace(lo, hi, n)
    v = np.asarray(fn(x[:, None]), dtype=float)
    i = int(np.argmin(v))
    return float(v[i]), float(x[i])


@dataclass
class BenchmarkSpec:
    name: str
    dim: int
    bounds: np.ndarray
    costs: tuple
    factory: Callable = field(repr=False)
    description: str = ""
    optimum: float | None = None
    optimum_x: tuple | None = None

    def objective(self, **options):
        """A fresh :class:`Objective` (evaluator state is never shared)."""
        return self.factory(self, **options)


def _forrester(spec, costs=None):
    return Objective([forrester_lf, forrester_hf], costs or spec.costs, spec.bounds, spec.optimum,
                     np.array(spec.optimum_x), spec.name)


def quadrature_chain(levels=(0, 1, 2)):
    return nested_chain(quadrature_forrester_integrand, "clenshaw-curtis", levels, [[-1.0, 1.0]])


def _quadrature(spec, levels=(0, 1, 2)):
    chain = quadrature_chain(levels)
    hf = chain.n_levels - 1
    fn = np.vectorize(lambda x: chain.models[hf](np.array([x])))
    opt, xopt = dense_grid_minimum(lambda X: fn(X[:, 0]), spec.bounds, n=20001)
    # refine on a fine local grid around the coarse minimizer
    xs = np.linspace(max(0.0, xopt - 1e-4), min(1.0, xopt + 1e-4), 2001)
    vs = fn(xs)
    opt, xopt = float(vs.min()), float(xs[np.argmin(vs)])
    chain.reset()
    return Objective(
        [chain.evaluator(t) for t in range(chain.n_levels)],
        chain.node_counts,
        spec.bounds,
        opt,
        np.array([xopt]),
        spec.name,
        charge=chain.pending_cost,
        reset=chain.reset,
        # levels are node subsets, so the top level's pending calls cover the rest
        charge_levels=lambda levels, x: chain.pending_cost(max(levels), x),
    )


def _pce_pair(spec, costs=None):
    return Objective([pce_lf, pce_hf], costs or spec.costs, spec.bounds, None, None, spec.name)


def register_builtin_benchmarks():
    reg = {}

    def add(b):
        if b.name in reg:
            raise ValueError(f"duplicate benchmark {b.name!r}")
        reg[b.name] = b

    add(BenchmarkSpec("forrester", 1, np.array([[0.0, 1.0]]), (0.2, 1.0), _forrester,
                      "Forrester HF (6x-2)^2 sin(12x-4) with LF 0.5 f_H + 10(x-0.5) - 5",
                      -6.020740055767083, (0.7572487,)))
    add(BenchmarkSpec("quadrature-forrester", 1, np.array([[0.0, 1.0]]), (1.0, 3.0, 5.0), _quadrature,
                      "Clenshaw-Curtis average of (6x-2)^2 sin(12x-4-xi) with nested coarse levels"))
    add(BenchmarkSpec("pce-pair", 2, np.array([[-1.0, 1.0], [-1.0, 1.0]]), (1.0, 1.0), _pce_pair,
                      "LF xi_1 + xi_2^2 and HF = LF + 0.1 xi_1 xi_2 on the uniform square"))
    return reg


BENCHMARKS = register_builtin_benchmarks()


def get_benchmark(name):
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
