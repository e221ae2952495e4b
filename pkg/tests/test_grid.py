import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from priceformation import (Equilibrium, GridFunction, InvalidParams, ModelParams, OutOfDomain,
                            TooCloseToBoundary, deposit_delta, derivative_at, discrete_norms,
                            integrate, interpolate, make_grid, read_csv, sample, write_csv)


def test_make_grid_examples(sym, asym):
    assert make_grid(sym, 201).h == pytest.approx(0.01, abs=1e-15)
    assert make_grid(asym, 301).h == pytest.approx(0.01, abs=1e-15)
    with pytest.raises(InvalidParams):
        make_grid(sym, 5)
    g = make_grid(asym, 301)
    assert g.nodes[0] == -1.0 and g.nodes[-1] == 2.0


def test_sample_examples(sym):
    g = make_grid(sym, 201)
    assert np.all(sample(lambda x: 1.0, g).values == 1.0)
    f = sample(Equilibrium(0.0, 0.9375), g)
    assert f.values[100] == 0.0
    ident = sample(lambda x: x, g).values
    assert np.allclose(ident, -1 + 0.01 * np.arange(201), atol=1e-14)


def test_gridfunction_validation(sym):
    g = make_grid(sym, 21)
    with pytest.raises(InvalidParams):
        GridFunction(g, np.zeros(20))
    with pytest.raises(InvalidParams):
        GridFunction(g, np.full(21, np.nan))


class TestIntegrate:
    def test_examples(self, sym):
        g = make_grid(sym, 201)
        assert integrate(sample(lambda x: np.ones_like(x), g), -1, 1) == pytest.approx(2, abs=1e-14)
        eq = sample(Equilibrium(0.0, 0.9375), g)
        assert integrate(eq, -1, 0) == pytest.approx(0.3, abs=1e-14)
        assert integrate(sample(lambda x: x, g), 0, 1) == pytest.approx(0.5, abs=1e-14)

    def test_out_of_domain(self, sym):
        f = sample(lambda x: x, make_grid(sym, 21))
        with pytest.raises(OutOfDomain):
            integrate(f, -1.5, 0)
        with pytest.raises(OutOfDomain):
            integrate(f, 0.5, 0.1)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-1, 1), st.floats(-1, 1), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
    def test_exact_on_piecewise_linear(self, lo, hi, slopes):
        # kinks at -0.5, 0, 0.5 (nodes for n = 41); oracle integrates each linear piece in closed form
        lo, hi = min(lo, hi), max(lo, hi)
        g = make_grid(ModelParams(1, 1, 0.2), 41)
        br = np.array([-1, -0.5, 0, 0.5, 1.0])

        def fn(x):
            x = np.asarray(x, float)
            out = np.zeros_like(x)
            v0 = 0.0
            for k in range(4):
                m = (x >= br[k]) & (x <= br[k + 1])
                out[m] = v0 + slopes[k] * (x[m] - br[k])
                v0 += slopes[k] * (br[k + 1] - br[k])
            return out

        def exact(a, b):
            xs = np.unique(np.clip(np.concatenate([[a, b], br]), a, b))
            return sum((xs[i + 1] - xs[i]) * (fn(xs[i]) + fn(xs[i + 1])) / 2
                       for i in range(len(xs) - 1))

        assert integrate(sample(fn, g), lo, hi) == pytest.approx(float(exact(lo, hi)), abs=1e-13)


class TestInterpolate:
    def test_examples(self, sym):
        g = make_grid(sym, 21)
        f = sample(lambda x: np.sin(x), g)
        assert interpolate(f, g.nodes[7]) == f.values[7]
        v = np.zeros(21)
        v[11] = 1.0
        assert interpolate(GridFunction(g, v), (g.nodes[10] + g.nodes[11]) / 2) == 0.5

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-1, 1))
    def test_quadratic_error_bound(self, x):
        g = make_grid(ModelParams(1, 1, 0.4), 101)
        f = sample(lambda t: t**2, g)
        # linear interpolation error bound h^2/8 * max|f''| with f'' = 2
        assert abs(interpolate(f, x) - x * x) <= g.h**2 / 8 * 2 * (1 + 1e-9)

    def test_out_of_domain(self, sym):
        with pytest.raises(OutOfDomain):
            interpolate(sample(lambda x: x, make_grid(sym, 21)), 1.01)


class TestDerivative:
    def test_examples(self, sym):
        g = make_grid(sym, 201)
        f = sample(lambda x: x, g)
        for x in (-0.73, 0.0, 0.3141):
            assert derivative_at(f, x, 1) == pytest.approx(1.0, abs=1e-12)
        f2 = sample(lambda x: x**2, g)
        assert derivative_at(f2, g.nodes[57], 2) == pytest.approx(2.0, abs=1e-9)
        s = sample(lambda x: np.sin(np.pi * x), g)
        assert abs(derivative_at(s, 0.0, 1) - np.pi) < 1e-3

    def test_boundary_guard(self, sym):
        g = make_grid(sym, 101)
        f = sample(lambda x: x, g)
        with pytest.raises(TooCloseToBoundary):
            derivative_at(f, -1 + 1.5 * g.h, 2)
        derivative_at(f, -1 + 1.5 * g.h, 1)
        with pytest.raises(InvalidParams):
            derivative_at(f, 0.0, 3)

    @pytest.mark.parametrize("order,expected", [(1, 2.0), (2, 1.0)])
    def test_convergence_order(self, order, expected):
        xs = np.linspace(-0.8, 0.8, 97)
        exact = [2 * np.cos(2 * xs), -4 * np.sin(2 * xs)][order - 1]
        errs = []
        for n in (101, 201, 401, 801):
            f = sample(lambda x: np.sin(2 * x), make_grid(ModelParams(1, 1, 0.4), n))
            approx = np.array([derivative_at(f, x, order) for x in xs])
            errs.append(np.max(np.abs(approx - exact)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= expected - 0.1), orders


class TestDeposit:
    def test_examples(self, sym):
        g = make_grid(sym, 21)
        d = deposit_delta(g, g.nodes[5], 2.0)
        assert d.values[5] == pytest.approx(2.0 / g.h) and np.count_nonzero(d.values) == 1
        d = deposit_delta(g, (g.nodes[5] + g.nodes[6]) / 2, 1.0)
        assert d.values[5] == pytest.approx(0.5 / g.h) and d.values[6] == pytest.approx(0.5 / g.h)

    def test_out_of_domain(self, sym):
        g = make_grid(sym, 21)
        with pytest.raises(OutOfDomain):
            deposit_delta(g, -1 + 0.5 * g.h, 1.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-0.98, 0.98), st.floats(-5, 5))
    def test_mass_exact(self, c, s):
        g = make_grid(ModelParams(1, 1, 0.4), 101)
        assert integrate(deposit_delta(g, c, s), -1, 1) == pytest.approx(s, abs=1e-13)

    def test_pairing_order(self):
        cs = np.linspace(-0.9, 0.9, 173)
        errs = []
        for n in (51, 101, 201, 401):
            g = make_grid(ModelParams(1, 1, 0.4), n)
            phi = np.cos(3 * g.nodes)
            errs.append(max(abs(g.weights @ (deposit_delta(g, c, 1.0).values * phi) - np.cos(3 * c))
                            for c in cs))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.9), orders


def test_norms_examples(sym):
    g = make_grid(sym, 2001)
    n = discrete_norms(sample(lambda x: np.ones_like(x), g))
    assert n["l2"] == pytest.approx(math.sqrt(2)) and n["linf"] == 1 and n["h1"] == pytest.approx(math.sqrt(2))
    n = discrete_norms(sample(lambda x: 0 * x, g))
    assert n == {"l2": 0.0, "linf": 0.0, "h1": 0.0}
    n = discrete_norms(sample(lambda x: x, g))
    assert n["l2"] == pytest.approx(math.sqrt(2 / 3), abs=1e-6) and n["linf"] == 1


def test_csv_round_trip(tmp_path, asym):
    g = make_grid(asym, 61)
    f = sample(lambda x: np.exp(np.sin(7 * x)) / 3, g)
    path = tmp_path / "f.csv"
    write_csv(f, path)
    assert path.read_text().splitlines()[0] == "x,value"
    back = read_csv(path, asym)
    assert back.grid == g and np.array_equal(back.values, f.values)
    with pytest.raises(InvalidParams):
        read_csv(path, ModelParams(1, 1, 0.4))
