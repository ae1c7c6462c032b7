import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfopt.benchmarks import quadrature_forrester_integrand
from mfopt.errors import NumericalError
from mfopt.quadrature import (
    QuadratureObjective,
    QuadratureScheme,
    clenshaw_curtis,
    gauss_hermite,
    gauss_legendre,
    nested_chain,
    quadrature_objective_eval,
    sparsify,
    tensor_product,
)


def test_gauss_legendre_examples():
    r1 = gauss_legendre(1)
    assert r1.nodes[:, 0].tolist() == [0.0] and r1.weights.tolist() == [2.0]
    r2 = gauss_legendre(2)
    assert np.allclose(r2.nodes[:, 0], [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-12)
    assert np.allclose(r2.weights, [1, 1], atol=1e-12)
    r3 = gauss_legendre(3)
    assert np.allclose(r3.nodes[:, 0], [-math.sqrt(0.6), 0, math.sqrt(0.6)], atol=1e-12)
    assert np.allclose(r3.weights, [5 / 9, 8 / 9, 5 / 9], atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5, 10, 20, 40, 64])
def test_gauss_legendre_matches_numpy(n):
    x, w = np.polynomial.legendre.leggauss(n)
    r = gauss_legendre(n)
    assert np.allclose(r.nodes[:, 0], x, atol=1e-13)
    assert np.allclose(r.weights, w, atol=1e-13)
    assert r.weights.sum() == pytest.approx(2.0, abs=1e-12)


def test_gauss_hermite_examples():
    assert gauss_hermite(1).weights.tolist() == [1.0]
    r2 = gauss_hermite(2)
    assert np.allclose(r2.nodes[:, 0], [-1, 1], atol=1e-12) and np.allclose(r2.weights, [0.5, 0.5], atol=1e-12)
    r3 = gauss_hermite(3)
    assert np.allclose(r3.nodes[:, 0], [-math.sqrt(3), 0, math.sqrt(3)], atol=1e-12)
    assert np.allclose(r3.weights, [1 / 6, 2 / 3, 1 / 6], atol=1e-12)


@pytest.mark.parametrize("n", [1, 4, 11, 30, 64])
def test_gauss_hermite_matches_numpy(n):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    r = gauss_hermite(n)
    assert np.allclose(r.nodes[:, 0], x, atol=1e-10 * max(1, abs(x).max()))
    assert np.allclose(r.weights, w / math.sqrt(2 * math.pi), rtol=1e-8, atol=1e-300)
    assert r.weights.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("fn", [gauss_legendre, gauss_hermite])
def test_order_limits(fn):
    with pytest.raises(ValueError):
        fn(0)
    with pytest.raises(ValueError):
        fn(65)


@given(st.integers(1, 20))
def test_gauss_legendre_exactness(n):
    r = gauss_legendre(n)
    for k in range(2 * n):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(r.integrate(lambda x: x[0] ** k) - exact) < 1e-12


@given(st.integers(1, 10))
def test_gauss_hermite_exactness(n):
    r = gauss_hermite(n)
    for k in range(2 * n):
        exact = 0.0 if k % 2 else float(math.prod(range(k - 1, 0, -2)))
        # error scaled by E|xi|^k: odd moments cancel terms of that size
        scale = r.integrate(lambda x: abs(x[0]) ** k)
        assert abs(r.integrate(lambda x: x[0] ** k) - exact) < 1e-12 * max(1.0, scale)


def test_clenshaw_curtis_examples():
    r0 = clenshaw_curtis(0)
    assert r0.nodes[:, 0].tolist() == [0.0] and r0.weights.tolist() == [2.0]
    r1 = clenshaw_curtis(1)
    assert r1.nodes[:, 0].tolist() == [-1.0, 0.0, 1.0]
    assert np.allclose(r1.weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-14)
    with pytest.raises(ValueError):
        clenshaw_curtis(17)
    with pytest.raises(ValueError):
        clenshaw_curtis(-1)


@given(st.integers(0, 9))
def test_clenshaw_curtis_nested_exactly(level):
    coarse = set(clenshaw_curtis(level).nodes[:, 0].tolist())
    fine = set(clenshaw_curtis(level + 1).nodes[:, 0].tolist())
    assert coarse <= fine
    r = clenshaw_curtis(level)
    assert np.all(r.weights > 0) and r.weights.sum() == pytest.approx(2.0, abs=1e-12)


def test_tensor_product():
    t = tensor_product([gauss_legendre(1), gauss_legendre(1)])
    assert t.nodes.tolist() == [[0.0, 0.0]] and t.weights.tolist() == [4.0]
    t = tensor_product([gauss_legendre(2), gauss_legendre(3)])
    assert t.size == 6 and t.dim == 2
    assert t.weights.sum() == pytest.approx(4.0, abs=1e-12)
    # x^2 y^4 over the square: (2/3)(2/5)
    assert t.integrate(lambda z: z[0] ** 2 * z[1] ** 4) == pytest.approx(4 / 15, abs=1e-12)
    with pytest.raises(ValueError):
        tensor_product([gauss_legendre(64)] * 4)


def test_scheme_validation():
    with pytest.raises(ValueError):
        QuadratureScheme([0.0, 1.0], [1.0], "x", (1,))
    with pytest.raises(ValueError):
        QuadratureScheme([0.0], [0.0], "x", (1,))


def test_objective_examples():
    obj = QuadratureObjective(lambda x, xi: x * xi**2, gauss_legendre(2))
    for x in (-1.0, 0.3, 2.5):
        assert quadrature_objective_eval(obj, x) == pytest.approx(2 * x / 3, abs=1e-14)
    prob = QuadratureObjective(lambda x, xi: math.sin(x), gauss_hermite(5))
    assert prob(0.7) == pytest.approx(math.sin(0.7), abs=1e-14)
    sym = QuadratureObjective(lambda x, xi: x * x + xi, gauss_legendre(4))
    assert sym(1.5) == pytest.approx(2.25 * 2, abs=1e-13)


def test_objective_nonfinite_names_node():
    obj = QuadratureObjective(lambda x, xi: math.inf if xi == 0 else 1.0 / xi, gauss_legendre(3))
    with pytest.raises(NumericalError, match="node 1"):
        obj(0.0)


def test_objective_bounds():
    obj = QuadratureObjective(lambda x, xi: x, gauss_legendre(2), bounds=np.array([[0.0, 1.0]]))
    with pytest.raises(ValueError):
        obj(1.5)


def test_sparsify_examples():
    obj = QuadratureObjective(lambda x, xi: math.exp(x * xi), gauss_legendre(4))
    full = sparsify(obj, range(4))
    assert full(0.8) == obj(0.8)
    one = sparsify(obj, [2])
    assert one(0.8) == pytest.approx(obj.scheme.weights[2] * math.exp(0.8 * obj.scheme.nodes[2, 0]), rel=1e-15)
    gh = QuadratureObjective(lambda x, xi: x + xi, gauss_hermite(3))
    renorm = sparsify(gh, [2], reweight="renormalize")
    assert renorm(0.5) == pytest.approx(0.5 + gh.scheme.nodes[2, 0], rel=1e-14)
    with pytest.raises(ValueError):
        sparsify(obj, [])
    with pytest.raises(ValueError):
        sparsify(obj, [0], reweight="scale")


def test_sparsify_by_size_keeps_largest_weights():
    obj = QuadratureObjective(lambda x, xi: 1.0, gauss_legendre(5))
    assert sparsify(obj, 1).indices == (2,)
    assert sparsify(obj, 3).indices == (1, 2, 3)


def test_nested_chain_examples():
    chain = nested_chain(lambda x, xi: x * xi * xi)
    assert chain.node_counts == (1, 3, 5)
    assert chain.incremental_cost(2, given=1) == 2
    assert chain.evaluate(1, 0.5)[1] == 3
    value, charged = chain.evaluate(2, 0.5)
    assert charged == 2 and chain.calls == 5
    assert value == pytest.approx(0.5 * 2 / 3, abs=1e-14)
    assert chain.evaluate(0, 0.5)[1] == 0
    single = nested_chain(lambda x, xi: x, levels=(3,))
    assert single.n_levels == 1 and single.node_counts == (9,)
    with pytest.raises(ValueError):
        nested_chain(lambda x, xi: x, rule_family="gauss-legendre")
    with pytest.raises(ValueError):
        nested_chain(lambda x, xi: x, levels=(1, 1))


def test_nested_levels_use_own_weights():
    chain = nested_chain(lambda x, xi: xi**2, levels=(1, 2, 3))
    # CC level 1 is exact for quadratics
    for t in range(3):
        assert chain.evaluate(t, 0.0)[0] == pytest.approx(2 / 3, abs=1e-14)


def test_gauss_beats_trapezoid_on_exp():
    exact = math.e - 1 / math.e
    gl = gauss_legendre(10).integrate(lambda x: math.exp(x[0]))
    grid = np.linspace(-1, 1, 10)
    trap = float(np.sum((np.exp(grid[1:]) + np.exp(grid[:-1])) / 2 * np.diff(grid)))
    assert abs(gl - exact) / exact < 1e-10
    assert abs(trap - exact) / exact > 1e-3


def test_sparsified_prefix_correlation_positive():
    chain = nested_chain(quadrature_forrester_integrand, levels=(0, 1, 2))
    X = np.random.default_rng(2024).uniform(size=200)
    hf = np.array([chain.evaluate(2, x)[0] for x in X])
    for t in range(2):
        lf = np.array([chain.evaluate(t, x)[0] for x in X])
        assert np.corrcoef(lf, hf)[0, 1] > 0
