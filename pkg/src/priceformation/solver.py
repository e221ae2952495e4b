"""Time stepping of the signed density with a tracked free boundary.

One step advances ``f_t = D * (f_xx + lam * [delta_{p-a} - delta_{p+a}])``:
the two point sources are deposited explicitly from the current state and
diffusion is advanced implicitly with reflecting (ghost node) Neumann
closures.  Both pieces conserve the trapezoid total mass exactly.  The root
``p`` and the flux ``lam = -f_x(p)`` are then refreshed from the new data.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded

from .errors import BoundaryCollision, InvalidParams, NonpositiveSlope, NoSignChange, OutOfDomain
from .grid import (Grid, GridFunction, deposit_delta, derivative_at, discrete_norms,
                   integrate, interpolate, sample)
from .model import Equilibrium, MassPair, ModelParams, admissible, equilibrium_from_masses

ROOT_TOL = 1e-12
SCHEMES = ("implicit", "cn")


@dataclass(frozen=True)
class SimState:
    f: GridFunction
    t: float
    p: float
    lam: float

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @property
    def params(self) -> ModelParams:
        return self.f.grid.params


TRAJ_COLUMNS = ("t", "p", "lambda", "m1", "m2", "err_l2", "err_linf", "err_h1")


@dataclass
class Trajectory:
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (t, values) pairs
    failure: str | None = None
    final_state: SimState | None = None
    max_step_mass_change: float = 0.0
    max_speed: float = 0.0

    def append(self, rec: dict) -> None:
        if self.rows and rec["t"] <= self.rows[-1]["t"]:
            raise ValueError("trajectory times must increase strictly")
        self.rows.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJ_COLUMNS)
            for r in self.rows:
                w.writerow([repr(float(r[c])) for c in TRAJ_COLUMNS])


def find_root(f: GridFunction, window_center: float, window_radius: float) -> float:
    """Zero of the piecewise-linear interpolant of ``f`` inside the window.

    Bisection on the interpolant narrows the bracket to a single cell, where
    the linear piece is solved in closed form.
    """
    g = f.grid
    lo = max(window_center - window_radius, -g.params.A)
    hi = min(window_center + window_radius, g.params.B)
    flo, fhi = interpolate(f, lo), interpolate(f, hi)
    if not (flo > 0 > fhi):
        raise NoSignChange(
            f"no sign change on [{lo:.6g}, {hi:.6g}]: f={flo:.3g} .. {fhi:.3g}")
    while hi - lo > ROOT_TOL:
        i_lo, _ = g.locate(lo)
        i_hi, th_hi = g.locate(hi)
        if th_hi == 0.0:
            i_hi -= 1
        if i_lo == i_hi:
            v0, v1 = f.values[i_lo], f.values[i_lo + 1]
            x0 = -g.params.A + i_lo * g.h
            return float(x0 + g.h * v0 / (v0 - v1))
        mid = 0.5 * (lo + hi)
        fm = interpolate(f, mid)
        if fm == 0.0:
            return mid
        if fm > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _slope_state(f: GridFunction, p: float, t: float) -> SimState:
    lam = -derivative_at(f, p, 1)
    if not lam > 0:
        raise NonpositiveSlope(f"-f_x(p) = {lam:.3g} <= 0 at p={p:.6g}", t=t)
    return SimState(f, t, p, lam)


def side_masses(f: GridFunction, p: float) -> tuple[float, float]:
    g = f.grid
    return integrate(f, -g.params.A, p), -integrate(f, p, g.params.B)


def init_state(f_I: GridFunction, p_guess: float, prm: ModelParams | None = None,
               window_radius: float | None = None) -> SimState:
    """Locate the initial root near ``p_guess`` and its flux.

    Warns when ``f_I`` is farther (sup norm) from the equilibrium with the same
    side masses than ``min(lambda0*a/8, lambda0)``; beyond that the root is not
    guaranteed unique near the price.
    """
    prm = prm or f_I.grid.params
    if not (-prm.A + prm.a < p_guess < prm.B - prm.a):
        raise InvalidParams(f"p_guess={p_guess} outside (-A+a, B-a)")
    r = prm.a / 2 if window_radius is None else window_radius
    p = find_root(f_I, p_guess, r)
    s = _slope_state(f_I, p, 0.0)
    m1, m2 = side_masses(f_I, p)
    ref = None
    if m1 > 0 and m2 > 0 and admissible(MassPair(m1, m2), prm):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = equilibrium_from_masses(MassPair(m1, m2), prm)
    else:
        ref = Equilibrium(p, s.lam)
    dist = float(np.max(np.abs(f_I.values - sample(ref, f_I.grid).values)))
    guard = min(ref.lambda0 * prm.a / 8, ref.lambda0)
    if dist >= guard:
        warnings.warn(f"initial data {dist:.3g} away from its equilibrium; smallness guard is "
                      f"{guard:.3g}", stacklevel=2)
    return s


@lru_cache(maxsize=32)
def _banded(n: int, h: float, tau: float, theta: float) -> np.ndarray:
    r = theta * tau / h**2
    ab = np.zeros((3, n))
    ab[1, :] = 1 + 2 * r
    ab[0, 2:] = -r
    ab[0, 1] = -2 * r
    ab[2, :n - 2] = -r
    ab[2, n - 2] = -2 * r
    ab.setflags(write=False)
    return ab


def laplacian(v: np.ndarray, h: float) -> np.ndarray:
    """Second difference with reflecting Neumann closures at both ends."""
    out = np.empty_like(v)
    out[1:-1] = v[:-2] - 2 * v[1:-1] + v[2:]
    out[0] = 2 * (v[1] - v[0])
    out[-1] = 2 * (v[-2] - v[-1])
    return out / h**2


def _sources(g: Grid, p: float, strength: float, t: float) -> np.ndarray:
    a = g.params.a
    try:
        return (deposit_delta(g, p - a, strength).values
                - deposit_delta(g, p + a, strength).values)
    except OutOfDomain as exc:
        raise BoundaryCollision(f"source site left the grid at p={p:.6g}: {exc}", t=t) from exc


def _advance(s: SimState, tau: float, lam: float, p_src: float, scheme: str) -> np.ndarray:
    g = s.grid
    rhs = s.f.values + _sources(g, p_src, lam * tau, s.t)
    if scheme == "implicit":
        return solve_banded((1, 1), _banded(g.n, g.h, tau, 1.0), rhs, check_finite=False)
    rhs = rhs + 0.5 * tau * laplacian(s.f.values, g.h)
    return solve_banded((1, 1), _banded(g.n, g.h, tau, 0.5), rhs, check_finite=False)


def _refresh(f_new: GridFunction, s: SimState, tau: float, t_new: float) -> SimState:
    prm = f_new.grid.params
    radius = 4 * max(f_new.grid.h, s.lam * tau)
    try:
        p = find_root(f_new, s.p, radius)
    except NoSignChange as exc:
        raise NoSignChange(str(exc), t=t_new) from exc
    if not (-prm.A + prm.a < p < prm.B - prm.a):
        raise BoundaryCollision(f"free boundary p={p:.6g} left (-A+a, B-a)", t=t_new)
    return _slope_state(f_new, p, t_new)


def step(s: SimState, dt: float, scheme: str = "implicit", corrector: bool = False) -> SimState:
    """Advance the state by ``dt``.

    ``scheme`` selects backward Euler (``"implicit"``) or Crank-Nicolson
    (``"cn"``) for the diffusion.  With ``corrector`` the sources are
    re-deposited once using the average of the old and predicted ``p`` and
    ``lam``.
    """
    if not dt > 0:
        raise InvalidParams(f"dt must be positive, got {dt}")
    if scheme not in SCHEMES:
        raise InvalidParams(f"unknown scheme {scheme!r}")
    g = s.grid
    tau = g.params.D * dt
    t_new = s.t + dt
    v = _advance(s, tau, s.lam, s.p, scheme)
    new = _refresh(GridFunction(g, v), s, tau, t_new)
    if corrector:
        v = _advance(s, tau, 0.5 * (s.lam + new.lam), 0.5 * (s.p + new.p), scheme)
        new = _refresh(GridFunction(g, v), s, tau, t_new)
    return new


def boundary_velocity(s: SimState) -> float:
    """Speed of the free boundary, ``p' = -D f_xx(p) / f_x(p)``."""
    fx = derivative_at(s.f, s.p, 1)
    if not fx < 0:
        raise NonpositiveSlope(f"f_x(p) = {fx:.3g} is not negative", t=s.t)
    return -s.params.D * derivative_at(s.f, s.p, 2) / fx


def _record(s: SimState, f_inf: GridFunction | None) -> dict:
    m1, m2 = side_masses(s.f, s.p)
    if f_inf is not None:
        nrm = discrete_norms(s.f - f_inf)
    else:
        nrm = {"l2": math.nan, "linf": math.nan, "h1": math.nan}
    return {"t": s.t, "p": s.p, "lambda": s.lam, "m1": m1, "m2": m2,
            "err_l2": nrm["l2"], "err_linf": nrm["linf"], "err_h1": nrm["h1"]}


def run(s0: SimState, dt: float, t_end: float, f_inf: GridFunction | None = None,
        stride: int = 1, scheme: str = "implicit", corrector: bool = False,
        snapshot_times=()) -> Trajectory:
    """Step from ``s0`` to ``t_end`` recording every ``stride`` steps.

    The last step is shortened to land on ``t_end``.  On a step failure the
    partial trajectory is kept (``failure`` names the cause) and the error is
    re-raised with the failing time and the trajectory attached.
    """
    g = s0.grid
    if dt > g.h * (1 + 1e-12):
        raise InvalidParams(f"dt={dt} exceeds the grid spacing h={g.h}")
    if not t_end > 0 or not dt > 0:
        raise InvalidParams("dt and t_end must be positive")
    if stride < 1:
        raise InvalidParams("stride must be >= 1")
    traj = Trajectory()
    traj.append(_record(s0, f_inf))
    pending = sorted(float(t) for t in snapshot_times)
    while pending and pending[0] <= s0.t:
        traj.snapshots.append((s0.t, s0.f.values.copy()))
        pending.pop(0)
    nsteps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    w = g.weights
    s = s0
    mass = float(w @ s.f.values)
    for k in range(1, nsteps + 1):
        h_step = min(dt, t_end - s.t) if k == nsteps else dt
        try:
            s = step(s, h_step, scheme=scheme, corrector=corrector)
            traj.max_speed = max(traj.max_speed, abs(boundary_velocity(s)))
        except Exception as exc:
            t_fail = getattr(exc, "t", None) or s.t + h_step
            traj.failure = f"{type(exc).__name__} at t={t_fail:.6g}: {exc}"
            traj.final_state = s
            if hasattr(exc, "trajectory"):
                exc.t, exc.trajectory = t_fail, traj
            raise
        if k == nsteps:
            s = replace(s, t=t_end)
        new_mass = float(w @ s.f.values)
        traj.max_step_mass_change = max(traj.max_step_mass_change, abs(new_mass - mass))
        mass = new_mass
        while pending and pending[0] <= s.t + 1e-12:
            traj.snapshots.append((s.t, s.f.values.copy()))
            pending.pop(0)
        if k % stride == 0 or k == nsteps:
            traj.append(_record(s, f_inf))
    traj.final_state = s
    return traj
