"""Coordinates on the equilibrium family and the nonlinear remainder.

The kernel of the linearised operator is two dimensional, so a state is
placed on it by two numbers ``(c, d)`` that depend only on its two side
integrals.  The remainder ``N(g)`` left over after linearising about an
equilibrium is a finite combination of point masses and point dipoles; it is
kept in that exact form here and paired against smooth test functions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import (InvalidParams, NoConvergence, NonpositiveSlope, NotAdmissible,
                     SingularJacobian)
from .grid import Grid, GridFunction, derivative_at, integrate, interpolate, sample
from .model import Equilibrium, Geometry, MassPair, ModelParams, equilibrium_from_masses
from .solver import find_root, init_state, side_masses, step
from .spectral import kernel_basis

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100
NEWTON_MAX_HALVINGS = 30
DET_TOL = 1e-12


class KernelCoords(NamedTuple):
    c: float
    d: float
    I1: float
    I2: float


def _side_integrals(f: GridFunction, center: float) -> tuple[float, float]:
    prm = f.grid.params
    return integrate(f, -prm.A, center), integrate(f, center, prm.B)


def project_kernel(f: GridFunction, prm: ModelParams | None = None, convention: str = "distributional",
                   center: float = 0.0) -> KernelCoords:
    """Coordinates of ``f`` on the kernel basis ``(g0, h0)`` centred at ``center``.

    Only the side integrals ``I1`` (left of ``center``) and ``I2`` (right of
    it) enter, so every zero-side-mass function projects to ``(0, 0)``.
    """
    prm = prm or f.grid.params
    I1, I2 = _side_integrals(f, center)
    A, B, a = prm.A + center, prm.B - center, prm.a
    if convention == "distributional":
        den = a * (a - 2 * A) * (a - 2 * B)
        c = ((-a + 2 * A) * I2 - (-a + 2 * B) * I1) / den
        d = ((-a * a / 2 + a * B) * I1 - (a * a / 2 - a * A) * I2) / den
        return KernelCoords(float(c), float(d), I1, I2)
    K = kernel_basis(Geometry(A, B, a), convention)
    c, d = np.linalg.solve(K.side_integrals(), [I1, I2])
    return KernelCoords(float(c), float(d), I1, I2)


def predict_limit(f_I: GridFunction, p_I: float, prm: ModelParams | None = None) -> Equilibrium:
    """Equilibrium carrying the same mass as ``f_I`` on each side of ``p_I``."""
    prm = prm or f_I.grid.params
    m1 = integrate(f_I, -prm.A, p_I)
    m2 = -integrate(f_I, p_I, prm.B)
    if not (m1 > 0 and m2 > 0):
        raise NotAdmissible(f"side masses must be positive, got m1={m1}, m2={m2}")
    return equilibrium_from_masses(MassPair(m1, m2), prm)


# ------------------------------------------------------------------- H map


def h_map(lam: float, p: float, prm) -> tuple[float, float]:
    """Side integrals over ``(-A, 0)`` and ``(0, B)`` of the equilibrium ``(p, lam)``."""
    A, B, a = prm.A, prm.B, prm.a
    h1 = lam * a * (p - a / 2 + A) - lam * p * p / 2
    h2 = lam * p * p / 2 - lam * a * (B - p - a / 2)
    return h1, h2


def h_jacobian(lam: float, p: float, prm, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of :func:`h_map` in ``(lam, p)``."""
    J = np.empty((2, 2))
    for k, (dl, dp) in enumerate(((step * max(1.0, abs(lam)), 0.0), (0.0, step))):
        hp = np.array(h_map(lam + dl, p + dp, prm))
        hm = np.array(h_map(lam - dl, p - dp, prm))
        J[:, k] = (hp - hm) / (2 * (dl + dp))
    return J


def _in_domain(lam, p, prm) -> bool:
    return lam > 0 and -prm.A + prm.a < p < prm.B - prm.a


def invert_h(h1: float, h2: float, seed: tuple[float, float], prm) -> tuple[float, float]:
    """Solve ``h_map(lam, p) = (h1, h2)`` by damped Newton from ``seed``.

    The step is halved (up to 30 times) until the residual decreases and the
    iterate stays in ``lam > 0``, ``-A+a < p < B-a``.
    """
    lam, p = map(float, seed)
    if not _in_domain(lam, p, prm):
        raise InvalidParams(f"seed {seed} outside lam > 0, -A+a < p < B-a")
    target = np.array([h1, h2], dtype=float)
    res = np.array(h_map(lam, p, prm)) - target
    for _ in range(NEWTON_MAX_ITER):
        rn = float(np.max(np.abs(res)))
        if rn <= NEWTON_TOL:
            return lam, p
        J = h_jacobian(lam, p, prm)
        det = float(np.linalg.det(J))
        if abs(det) < DET_TOL:
            raise SingularJacobian(f"|det DH| = {abs(det):.3g} at (lam, p) = ({lam:.6g}, {p:.6g})")
        dl, dp = np.linalg.solve(J, -res)
        t = 1.0
        for _ in range(NEWTON_MAX_HALVINGS + 1):
            nl, np_ = lam + t * dl, p + t * dp
            if _in_domain(nl, np_, prm):
                nres = np.array(h_map(nl, np_, prm)) - target
                if float(np.max(np.abs(nres))) < rn:
                    break
            t *= 0.5
        else:
            raise NoConvergence(f"no decreasing step from (lam, p) = ({lam:.6g}, {p:.6g})")
        lam, p, res = nl, np_, nres
    if float(np.max(np.abs(res))) <= NEWTON_TOL:
        return lam, p
    raise NoConvergence(f"residual {np.max(np.abs(res)):.3g} after {NEWTON_MAX_ITER} iterations")


# ------------------------------------------------------- nonlinear remainder


@dataclass(frozen=True)
class NRemainder:
    """``N(g)`` as point terms ``(location, weight, order)``.

    Order 0 is ``weight * delta_loc``; order 1 is ``weight * delta'_loc`` with
    ``<delta'_c, phi> = -phi'(c)``.  The derivative of ``delta_c`` in its
    location is therefore an order-1 term with weight ``-1``.
    """

    r1: float
    r2: float
    q: float
    p: float
    p0: float
    point_terms: list = field(default_factory=list)

    def side_integrals(self) -> tuple[float, float]:
        """Total point mass left and right of ``p0`` (dipoles carry none)."""
        left = sum(w for x, w, o in self.point_terms if o == 0 and x < self.p0)
        right = sum(w for x, w, o in self.point_terms if o == 0 and x > self.p0)
        return left, right


def _dipole_weight(convention: str) -> float:
    if convention == "shift":
        return -1.0
    if convention == "distributional":
        return 1.0
    raise InvalidParams(f"unknown convention {convention!r}")


def n_remainder(g: GridFunction, e: Equilibrium, prm: ModelParams | None = None,
                convention: str = "shift") -> NRemainder:
    """Remainder of the dynamics of ``f0 + g`` after removing ``L g``.

    ``p`` is the root of ``f0 + g`` near ``p0``; ``q = p - p0``,
    ``R1 = g(p) - g(p0)`` and ``R2 = g_x(p) - g_x(p0)``.  The four groups are
    the Taylor remainders of the moving sources, the value correction of the
    dipoles, the source displacement driven by ``g_x(p0)`` and the flux
    correction.  ``convention`` must match the operator ``L`` it is paired
    with; only ``"shift"`` makes the first group a genuine second-order
    remainder.
    """
    prm = prm or g.grid.params
    sd = _dipole_weight(convention)
    a, p0, lam0 = prm.a, e.p0, e.lambda0
    f = sample(e, g.grid) + g
    p = find_root(f, p0, a / 2)
    lam = -derivative_at(f, p, 1)
    if not lam > 0:
        raise NonpositiveSlope(f"-f_x(p) = {lam:.3g} <= 0 at p={p:.6g}")
    q = p - p0
    g0 = interpolate(g, p0)
    gx0 = derivative_at(g, p0, 1)
    r1 = interpolate(g, p) - g0
    r2 = derivative_at(g, p, 1) - gx0
    terms = []
    # lam0 * (R3^- - R3^+), R3^{+-} = delta_{p+-a} - delta_{p0+-a} - q * delta'_{p0+-a}
    for sgn, off in ((1.0, -a), (-1.0, a)):
        terms += [(p + off, sgn * lam0, 0), (p0 + off, -sgn * lam0, 0),
                  (p0 + off, -sgn * lam0 * q * sd, 1)]
    # R1 * (delta'_{p0-a} - delta'_{p0+a})
    terms += [(p0 - a, r1 * sd, 1), (p0 + a, -r1 * sd, 1)]
    # -g_x(p0) * [(delta_{p-a} - delta_{p0-a}) - (delta_{p+a} - delta_{p0+a})]
    terms += [(p - a, -gx0, 0), (p0 - a, gx0, 0), (p + a, gx0, 0), (p0 + a, -gx0, 0)]
    # -R2 * (delta_{p-a} - delta_{p+a})
    terms += [(p - a, -r2, 0), (p + a, r2, 0)]
    terms = [(float(x), float(w), o) for x, w, o in terms]
    return NRemainder(float(r1), float(r2), float(q), float(p), float(p0), terms)


def pair_measure(m: NRemainder, phi: Callable, dphi: Callable | None = None,
                 fd_step: float = 1e-5) -> float:
    """``<m, phi>``: order-0 terms give ``w*phi(x)``, order-1 terms ``-w*phi'(x)``.

    ``dphi`` defaults to a central difference of ``phi``.
    """
    if dphi is None:
        def dphi(x):
            return (phi(x + fd_step) - phi(x - fd_step)) / (2 * fd_step)
    total = 0.0
    for x, w, order in m.point_terms:
        total += w * phi(x) if order == 0 else -w * dphi(x)
    return float(total)


def probe_battery(prm) -> list:
    """Probe functions ``(name, phi, dphi)``: 1, x, x^2 and two Neumann cosines."""
    A, L = prm.A, prm.A + prm.B
    k1, k2 = math.pi / L, 2 * math.pi / L
    return [
        ("one", lambda x: np.ones_like(np.asarray(x, dtype=float)) * 1.0,
         lambda x: np.zeros_like(np.asarray(x, dtype=float))),
        ("x", lambda x: np.asarray(x, dtype=float), lambda x: np.ones_like(np.asarray(x, dtype=float))),
        ("x2", lambda x: np.asarray(x, dtype=float) ** 2, lambda x: 2 * np.asarray(x, dtype=float)),
        ("cos1", lambda x: np.cos(k1 * (np.asarray(x) + A)), lambda x: -k1 * np.sin(k1 * (np.asarray(x) + A))),
        ("cos2", lambda x: np.cos(k2 * (np.asarray(x) + A)), lambda x: -k2 * np.sin(k2 * (np.asarray(x) + A))),
    ]


def battery_size(m: NRemainder, prm) -> float:
    """``max |<m, phi>|`` over :func:`probe_battery` (a proxy for the size of ``m``)."""
    return max(abs(pair_measure(m, phi, dphi)) for _, phi, dphi in probe_battery(prm))


def grid_pairing(v: np.ndarray, grid: Grid, phi: Callable) -> float:
    """Trapezoid pairing of a grid density ``v`` with ``phi``."""
    return float(grid.weights @ (np.asarray(v) * phi(grid.nodes)))


def smallness_exponent(e: Equilibrium, g_dir: GridFunction, eps_list, prm: ModelParams | None = None,
                       convention: str = "shift") -> float:
    """Slope of ``log max_phi |<N(eps g_dir), phi>|`` against ``log eps``."""
    prm = prm or g_dir.grid.params
    eps = np.asarray(list(eps_list), dtype=float)
    if eps.size < 2 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise InvalidParams("eps_list must hold at least two decreasing positive values")
    if not np.any(g_dir.values):
        raise InvalidParams("perturbation direction is identically zero")
    sizes = np.array([battery_size(n_remainder(g_dir * float(ep), e, prm, convention), prm)
                      for ep in eps])
    if np.any(sizes <= 0):
        raise InvalidParams("remainder vanished for some eps; direction leaves the root fixed")
    slope, _ = np.polyfit(np.log(eps), np.log(sizes), 1)
    return float(slope)


# ------------------------------------------------------------ stationarity


def remainder_rates(prm) -> tuple[float, float]:
    """``(gamma1, gamma2)`` with ``c' = gamma1 R2`` and ``d' = gamma2 R2`` on the kernel."""
    A, B, a = prm.A, prm.B, prm.a
    den = (a - 2 * A) * (a - 2 * B)
    return 2 * (A + B - a) / (a * den), (A - B) / den


@dataclass
class StationarityReport:
    drift_c: float
    drift_d: float
    gamma1: float
    gamma2: float
    h: float
    t_end: float
    mass_drift: float


def stationarity_check(e: Equilibrium, prm: ModelParams, grid: Grid, t_end: float = 1.0,
                       dt: float | None = None) -> StationarityReport:
    """Run from the sampled equilibrium and measure how far ``(c, d)`` moves.

    The coordinates are taken about the fixed centre ``p0`` at every step.
    """
    e.check_in(prm)
    f0 = sample(e, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = init_state(f0, e.p0, prm)
    dt = grid.h if dt is None else dt
    if not 0 < dt <= grid.h * (1 + 1e-12):
        raise InvalidParams(f"need 0 < dt <= h, got dt={dt}")
    k0 = project_kernel(f0, prm, center=e.p0)
    m0 = side_masses(f0, s.p)
    dc = dd = dm = 0.0
    nsteps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    for k in range(nsteps):
        s = step(s, min(dt, t_end - s.t) if k == nsteps - 1 else dt)
        kc = project_kernel(s.f, prm, center=e.p0)
        dc, dd = max(dc, abs(kc.c - k0.c)), max(dd, abs(kc.d - k0.d))
        m = side_masses(s.f, s.p)
        dm = max(dm, abs(m[0] - m0[0]), abs(m[1] - m0[1]))
    g1, g2 = remainder_rates(prm.centered_at(e.p0))
    return StationarityReport(dc, dd, g1, g2, grid.h, t_end, dm)
