"""Uniform node-inclusive grid on ``[-A, B]`` and the operations on sampled data.

Quadrature is the composite trapezoid rule, interpolation is piecewise linear
and point sources are spread on the two nodes bracketing the source (linear
hat weights), which keeps their trapezoid mass exact.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams, OutOfDomain, TooCloseToBoundary
from .model import ModelParams, validate_params

MIN_NODES = 16
_SNAP = 1e-10  # fraction of a cell under which a point is treated as a node


@dataclass(frozen=True)
class Grid:
    params: ModelParams
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < MIN_NODES:
            raise InvalidParams(f"grid needs n >= {MIN_NODES} nodes, got {self.n}")

    @property
    def h(self) -> float:
        return (self.params.A + self.params.B) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.params.A, self.params.B, self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = self.h / 2
        return w

    def locate(self, x: float) -> tuple[int, float]:
        """Return ``(i, theta)`` with ``x = x_i + theta*h`` and ``0 <= theta < 1``.

        The right endpoint is reported as ``(n-2, 1.0)``.
        """
        t = (x + self.params.A) / self.h
        i = int(math.floor(t))
        theta = t - i
        if theta > 1 - _SNAP:
            i, theta = i + 1, 0.0
        elif theta < _SNAP:
            theta = 0.0
        if i >= self.n - 1:
            return self.n - 2, 1.0
        return max(i, 0), theta

    def contains(self, x) -> bool:
        xs = np.asarray(x, dtype=float)
        tol = _SNAP * self.h
        return bool(np.all(xs >= -self.params.A - tol) and np.all(xs <= self.params.B + tol))


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise InvalidParams(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidParams("grid function has non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise InvalidParams("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, s):
        return GridFunction(self.grid, self.values * self._coerce(s))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


def make_grid(p: ModelParams, n: int) -> Grid:
    validate_params(p)
    return Grid(p, n)


def sample(fn, g: Grid) -> GridFunction:
    """Evaluate ``fn`` at the grid nodes.

    ``fn`` is a vectorised callable of ``x``, or an ``Equilibrium``.
    """
    from .model import Equilibrium, eval_equilibrium

    if isinstance(fn, Equilibrium):
        return GridFunction(g, eval_equilibrium(fn, g.nodes, g.params))
    vals = np.broadcast_to(np.asarray(fn(g.nodes), dtype=float), (g.n,))
    return GridFunction(g, vals.copy())


def _check_in(g: Grid, *xs):
    for x in xs:
        if not g.contains(x):
            raise OutOfDomain(f"{x} outside [{-g.params.A}, {g.params.B}]")


def _antiderivative(f: GridFunction, x: float) -> float:
    g, v = f.grid, f.values
    i, th = g.locate(x)
    head = g.h * (0.5 * v[0] + v[1:i].sum() + 0.5 * v[i]) if i > 0 else 0.0
    fx = (1 - th) * v[i] + th * v[i + 1]
    return head + th * g.h * (v[i] + fx) / 2


def integrate(f: GridFunction, lo: float, hi: float) -> float:
    """Trapezoid value of the integral of ``f`` over ``[lo, hi]``.

    Partial cells at ``lo`` and ``hi`` use the linear interpolant, so the
    result is exact for piecewise-linear data whose kinks are nodes.
    """
    _check_in(f.grid, lo, hi)
    if lo > hi:
        raise OutOfDomain(f"integration bounds reversed: lo={lo} > hi={hi}")
    return _antiderivative(f, hi) - _antiderivative(f, lo)


def interpolate(f: GridFunction, x):
    """Piecewise-linear interpolant of ``f`` at ``x`` (scalar or array)."""
    _check_in(f.grid, x)
    out = np.interp(x, f.grid.nodes, f.values)
    return float(out) if np.ndim(out) == 0 else out


def _stencil(g: Grid, x: float) -> tuple[int, float]:
    j = int(round((x + g.params.A) / g.h))
    j = min(max(j, 1), g.n - 2)
    return j, (x - (-g.params.A + j * g.h)) / g.h


def derivative_weights(g: Grid, x: float, order: int) -> tuple[int, np.ndarray]:
    """Weights on nodes ``j-1, j, j+1`` of the local quadratic's derivative at ``x``."""
    if order not in (1, 2):
        raise InvalidParams(f"order must be 1 or 2, got {order}")
    _check_in(g, x)
    margin = 2 * g.h if order == 2 else g.h
    if x + g.params.A < margin * (1 - _SNAP) or g.params.B - x < margin * (1 - _SNAP):
        raise TooCloseToBoundary(f"x={x} is closer than {margin} to an endpoint")
    j, s = _stencil(g, x)
    h = g.h
    if order == 1:
        w = np.array([-0.5 + s, -2 * s, 0.5 + s]) / h
    else:
        w = np.array([1.0, -2.0, 1.0]) / h**2
    return j, w


def derivative_at(f: GridFunction, x: float, order: int = 1) -> float:
    """Derivative of the quadratic through the three nodes nearest ``x``."""
    j, w = derivative_weights(f.grid, x, order)
    return float(w @ f.values[j - 1:j + 2])


def interpolation_weights(g: Grid, x: float) -> tuple[int, np.ndarray]:
    i, th = g.locate(x)
    return i, np.array([1 - th, th])


def deposit_delta(g: Grid, c: float, strength: float) -> GridFunction:
    """Grid representation of ``strength * delta_c`` (two-node hat deposit)."""
    h = g.h
    if not (-g.params.A + h <= c + _SNAP * h and c - _SNAP * h <= g.params.B - h):
        raise OutOfDomain(f"delta site {c} not inside (-A+h, B-h)")
    i, th = g.locate(c)
    v = np.zeros(g.n)
    v[i] += strength * (1 - th) / h
    v[i + 1] += strength * th / h
    return GridFunction(g, v)


def discrete_norms(f: GridFunction) -> dict:
    g, v = f.grid, f.values
    l2sq = float(g.weights @ v**2)
    dsq = float(g.h * np.sum((np.diff(v) / g.h) ** 2))
    return {"l2": math.sqrt(l2sq), "linf": float(np.max(np.abs(v))), "h1": math.sqrt(l2sq + dsq)}


def write_csv(f: GridFunction, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for xi, vi in zip(f.grid.nodes, f.values):
            w.writerow([repr(float(xi)), repr(float(vi))])


def read_csv(path, p: ModelParams) -> GridFunction:
    """Read a ``x,value`` CSV written by :func:`write_csv` back onto its grid."""
    xs, vs = [], []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if [h.strip() for h in header] != ["x", "value"]:
            raise InvalidParams(f"expected header x,value, got {header}")
        for row in rows:
            if row:
                xs.append(float(row[0]))
                vs.append(float(row[1]))
    g = make_grid(p, len(xs))
    if not np.allclose(xs, g.nodes, rtol=0, atol=1e-9 * g.h):
        raise InvalidParams("CSV nodes do not form the uniform grid of the given parameters")
    return GridFunction(g, np.array(vs))
