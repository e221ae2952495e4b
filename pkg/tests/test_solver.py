import csv
import math
import warnings

import numpy as np
import pytest

from priceformation import (BoundaryCollision, Equilibrium, InvalidParams, ModelParams,
                            NonpositiveSlope, NoSignChange, SolverError, discrete_norms,
                            find_root, init_state, integrate, interpolate, make_grid, run,
                            sample, step)
from priceformation.solver import TRAJ_COLUMNS, boundary_velocity, side_masses


class TestFindRoot:
    def test_linear(self, sym):
        f = sample(lambda x: -2 * x, make_grid(sym, 201))
        assert find_root(f, 0.0, 0.1) == pytest.approx(0.0, abs=1e-14)

    def test_asymmetric_equilibrium(self, asym):
        g = make_grid(asym, 301)
        f = sample(Equilibrium(0.0666667, 0.576923), g)
        assert abs(find_root(f, 0.0, 0.2) - 0.0666667) <= g.h

    def test_off_node_root_exact_for_interpolant(self, sym):
        g = make_grid(sym, 101)
        f = sample(lambda x: 0.3 - x, g)
        r = find_root(f, 0.25, 0.2)
        assert r == pytest.approx(0.3, abs=1e-12)
        assert abs(interpolate(f, r)) < 1e-12

    def test_no_sign_change(self, sym):
        with pytest.raises(NoSignChange):
            find_root(sample(lambda x: np.ones_like(x), make_grid(sym, 101)), 0.0, 0.3)


class TestInitState:
    def test_equilibrium(self, sym, sym_eq):
        s = init_state(sample(sym_eq, make_grid(sym, 401)), 0.05, sym)
        assert s.p == pytest.approx(0.0, abs=1e-10)
        assert s.lam == pytest.approx(0.9375, abs=1e-10)
        assert s.t == 0.0

    def test_zero_perturbation_identical(self, sym, sym_eq):
        g = make_grid(sym, 401)
        s1 = init_state(sample(sym_eq, g), 0.0, sym)
        s2 = init_state(sample(sym_eq, g) + 0.0, 0.0, sym)
        assert (s1.p, s1.lam) == (s2.p, s2.lam)
        assert np.array_equal(s1.f.values, s2.f.values)

    def test_reversed_sign(self, sym, sym_eq):
        with pytest.raises((NoSignChange, NonpositiveSlope)):
            init_state(-sample(sym_eq, make_grid(sym, 401)), 0.0, sym)

    def test_guess_outside_range(self, sym, sym_eq):
        with pytest.raises(InvalidParams):
            init_state(sample(sym_eq, make_grid(sym, 401)), 0.7, sym)

    def test_smallness_warning(self, sym, sym_eq):
        g = make_grid(sym, 401)
        bump = sample(lambda x: 0.2 * np.exp(-((x + 0.7) / 0.1) ** 2), g)
        with pytest.warns(UserWarning, match="smallness"):
            init_state(sample(sym_eq, g) + bump, 0.0, sym)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            init_state(sample(sym_eq, g) + bump * 0.01, 0.0, sym)


class TestStep:
    def test_equilibrium_is_fixed_point(self, sym, sym_eq):
        g = make_grid(sym, 401)  # h = 0.005
        s = init_state(sample(sym_eq, g), 0.0, sym)
        new = step(s, g.h)
        assert np.max(np.abs(new.f.values - sample(sym_eq, g).values)) <= 1e-8
        assert new.t == pytest.approx(g.h)

    def test_off_node_equilibrium_fixed_point(self, asym):
        # kinks between nodes: the hat deposit still matches the second difference
        g = make_grid(asym, 500)
        e = Equilibrium(0.0666667, 0.576923)
        s = init_state(sample(e, g), 0.0, asym)
        new = step(s, g.h)
        assert np.max(np.abs(new.f.values - sample(e, g).values)) <= 1e-8

    @pytest.mark.parametrize("dt", [0.0, -1e-3])
    def test_rejects_nonpositive_dt(self, sym, sym_eq, dt):
        s = init_state(sample(sym_eq, make_grid(sym, 201)), 0.0, sym)
        with pytest.raises(InvalidParams):
            step(s, dt)

    @pytest.mark.parametrize("scheme,corrector", [("implicit", False), ("implicit", True),
                                                  ("cn", False)])
    def test_total_mass_conserved(self, sym, sym_eq, scheme, corrector):
        g = make_grid(sym, 401)
        f = sample(sym_eq, g) + sample(lambda x: 0.02 * np.cos(np.pi * (x + 1)), g)
        s = init_state(f, 0.0, sym)
        new = step(s, g.h, scheme=scheme, corrector=corrector)
        assert abs(integrate(new.f, -1, 1) - integrate(s.f, -1, 1)) <= 1e-12

    def test_unknown_scheme(self, sym, sym_eq):
        s = init_state(sample(sym_eq, make_grid(sym, 201)), 0.0, sym)
        with pytest.raises(InvalidParams):
            step(s, 1e-3, scheme="rk4")


class TestBoundaryVelocity:
    def test_equilibrium(self, sym, sym_eq):
        g = make_grid(sym, 401)
        s = init_state(sample(sym_eq, g), 0.0, sym)
        assert abs(boundary_velocity(s)) <= 10 * g.h

    def test_even_perturbation_with_zero_curvature(self, sym, sym_eq):
        # even about p = 0 with g''(0) = 0
        g = make_grid(sym, 801)
        pert = sample(lambda x: 0.01 * x**4, g)
        s = init_state(sample(sym_eq, g) + pert, 0.0, sym)
        # analytic: f_xx(p) = 0.12 p^2 ~ 0, so the speed is O(h)
        assert abs(boundary_velocity(s)) <= 10 * g.h

    def test_matches_tracked_motion(self, sym, sym_eq):
        g = make_grid(sym, 801)
        pert = sample(lambda x: 0.01 * np.cos(np.pi * (x + 1) / 2), g)
        s = init_state(sample(sym_eq, g) + pert, 0.0, sym)
        dt = g.h / 4
        v0 = boundary_velocity(s)
        s1 = step(s, dt)
        v1 = boundary_velocity(s1)
        fd = (s1.p - s.p) / dt
        assert abs(fd - 0.5 * (v0 + v1)) <= 50 * (dt + g.h)

    def test_nonpositive_slope(self, sym):
        from priceformation.solver import SimState
        g = make_grid(sym, 201)
        s = SimState(sample(lambda x: x, g), 0.0, 0.0, 1.0)
        with pytest.raises(NonpositiveSlope):
            boundary_velocity(s)


class TestRun:
    def test_equilibrium_stays(self, sym, sym_eq):
        g = make_grid(sym, 401)
        f0 = sample(sym_eq, g)
        tr = run(init_state(f0, 0.0, sym), g.h, 1.0, f_inf=f0)
        p = tr.column("p")
        assert np.max(np.abs(p - 0.0)) <= 2 * g.h
        for m in ("m1", "m2"):
            assert np.max(np.abs(tr.column(m) - 0.3)) <= 1e-6
        assert tr.column("t")[-1] == pytest.approx(1.0)
        assert np.all(np.diff(tr.column("t")) > 0)

    def test_side_mass_drift(self, sym, sym_eq):
        drifts = []
        for n in (401, 801):
            g = make_grid(sym, n)
            f = sample(sym_eq, g) + sample(lambda x: 0.02 * np.cos(np.pi * (x + 1) / 2), g)
            tr = run(init_state(f, 0.0, sym), g.h, 1.0)
            m1, m2 = tr.column("m1"), tr.column("m2")
            drifts.append(max(np.max(np.abs(m1 - m1[0])) / m1[0], np.max(np.abs(m2 - m2[0])) / m2[0]))
            assert tr.max_step_mass_change <= 1e-12
        assert drifts[0] <= 1e-3
        assert drifts[1] < drifts[0]

    def test_error_decays_after_transient(self, sym, sym_eq):
        g = make_grid(sym, 401)
        pert = sample(lambda x: 0.02 * np.cos(np.pi * (x + 1)), g)
        f = sample(sym_eq, g) + pert
        s0 = init_state(f, 0.0, sym)
        from priceformation.manifold import predict_limit
        f_inf = sample(predict_limit(f, s0.p), g)
        tr = run(s0, g.h, 1.0, f_inf=f_inf, stride=4)
        e = tr.column("err_l2")
        t = tr.column("t")
        tail = e[t > 0.1]
        assert np.all(np.diff(tail) <= 1e-12)
        assert tail[-1] < 0.05 * e[0]

    def test_guards(self, sym, sym_eq):
        g = make_grid(sym, 201)
        s = init_state(sample(sym_eq, g), 0.0, sym)
        with pytest.raises(InvalidParams):
            run(s, 2 * g.h, 1.0)
        with pytest.raises(InvalidParams):
            run(s, g.h, 0.0)
        with pytest.raises(InvalidParams):
            run(s, g.h, 1.0, stride=0)

    def test_stride_and_snapshots(self, sym, sym_eq):
        g = make_grid(sym, 201)
        s = init_state(sample(sym_eq, g), 0.0, sym)
        tr = run(s, g.h, 0.105, stride=4, snapshot_times=(0.0, 0.05, 0.105))
        # h = 0.01: 11 steps (last one shortened), rows at t=0, steps 4, 8 and 11
        assert len(tr) == 4
        assert tr.column("t")[-1] == pytest.approx(0.105)
        assert [round(t, 6) for t, _ in tr.snapshots] == [0.0, 0.05, 0.105]

    def test_failure_is_annotated(self, sym, sym_eq, monkeypatch):
        import priceformation.solver as solver
        g = make_grid(sym, 201)
        s = init_state(sample(sym_eq, g), 0.0, sym)
        real_step, calls = solver.step, []

        def failing(state, dt, **kw):
            calls.append(state.t)
            if len(calls) == 5:
                raise BoundaryCollision("free boundary left the interval", t=state.t + dt)
            return real_step(state, dt, **kw)

        monkeypatch.setattr(solver, "step", failing)
        with pytest.raises(BoundaryCollision) as info:
            run(s, g.h, 1.0)
        exc = info.value
        assert exc.t == pytest.approx(5 * g.h)
        tr = exc.trajectory
        assert tr is not None and "BoundaryCollision" in tr.failure
        assert len(tr) == 5 and tr.final_state.t == pytest.approx(4 * g.h)

    def test_csv(self, tmp_path, sym, sym_eq):
        g = make_grid(sym, 201)
        f0 = sample(sym_eq, g)
        tr = run(init_state(f0, 0.0, sym), g.h, 0.05, f_inf=f0)
        path = tmp_path / "t.csv"
        tr.to_csv(path)
        rows = list(csv.reader(open(path)))
        assert tuple(rows[0]) == TRAJ_COLUMNS
        assert len(rows) == len(tr) + 1
        assert float(rows[-1][0]) == tr.rows[-1]["t"]


def test_d_rescales_time(sym_eq):
    slow = ModelParams(1, 1, 0.4, D=0.5)
    fast = ModelParams(1, 1, 0.4)
    out = []
    for prm, t_end in ((slow, 0.2), (fast, 0.1)):
        g = make_grid(prm, 201)
        f = sample(sym_eq, g) + sample(lambda x: 0.02 * np.cos(np.pi * (x + 1)), g)
        tr = run(init_state(f, 0.0, prm), g.h / 2 if prm is slow else g.h / 4, t_end)
        out.append(tr.final_state.f.values)
    # D=0.5 with dt=h/2 is the same discrete map as D=1 with dt=h/4
    assert np.max(np.abs(out[0] - out[1])) < 1e-12
