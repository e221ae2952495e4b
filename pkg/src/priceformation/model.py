"""Problem parameters and the two-parameter family of stationary states.

Every stationary state is piecewise linear: flat at ``+lambda0*a`` left of
``p0 - a``, flat at ``-lambda0*a`` right of ``p0 + a`` and decreasing with
slope ``-lambda0`` in between.  A state is fixed equivalently by ``(p0,
lambda0)`` or by the two side masses ``(m1, m2)`` it carries on either side
of its root.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidParams, NotAdmissible, OutOfDomain

REL_TOL = 1e-12


class Geometry(NamedTuple):
    """Bare interval geometry ``[-A, B]`` with transaction cost ``a``.

    Used where the interval is re-centred on an equilibrium price, which can
    leave ``a`` larger than half of one side.  Only ``a < A`` and ``a < B``
    are required there.
    """

    A: float
    B: float
    a: float


@dataclass(frozen=True)
class ModelParams:
    """Interval ``[-A, B]``, transaction cost ``a`` and diffusion ``D``.

    ``D`` plays the role of sigma^2/2.  The dynamics are ``f_t = D * (f_xx +
    lambda * [delta_{p-a} - delta_{p+a}])`` with ``lambda = -f_x(p)``, so a
    non-unit ``D`` only rescales time.
    """

    A: float
    B: float
    a: float
    D: float = 1.0

    def __post_init__(self):
        validate_params(self)

    @property
    def length(self) -> float:
        return self.A + self.B

    def centered_at(self, p0: float) -> Geometry:
        """Geometry of the interval seen from ``p0`` (shifted to the origin)."""
        return Geometry(self.A + p0, self.B - p0, self.a)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(A=float(d["A"]), B=float(d["B"]), a=float(d["a"]), D=float(d.get("D", 1.0)))

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "a": self.a, "D": self.D}


@dataclass(frozen=True)
class Equilibrium:
    p0: float
    lambda0: float

    def __post_init__(self):
        if not (self.lambda0 > 0 and math.isfinite(self.lambda0)):
            raise InvalidParams(f"lambda0 must be positive, got {self.lambda0}")
        if not math.isfinite(self.p0):
            raise InvalidParams(f"p0 must be finite, got {self.p0}")

    def check_in(self, prm) -> None:
        """Raise ``InvalidParams`` unless ``p0`` lies in ``(-A + a, B - a)``."""
        if not (-prm.A + prm.a < self.p0 < prm.B - prm.a):
            raise InvalidParams(
                f"p0={self.p0} outside (-A+a, B-a) = ({-prm.A + prm.a}, {prm.B - prm.a})")


@dataclass(frozen=True)
class MassPair:
    m1: float
    m2: float

    def __post_init__(self):
        if not (self.m1 > 0 and self.m2 > 0):
            raise InvalidParams(f"side masses must be positive, got m1={self.m1}, m2={self.m2}")

    @classmethod
    def from_dict(cls, d: dict) -> "MassPair":
        return cls(float(d["m1"]), float(d["m2"]))


def validate_params(p) -> None:
    """Raise ``InvalidParams`` naming the first violated inequality."""
    for name in ("A", "B", "a", "D"):
        v = getattr(p, name)
        if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v)):
            raise InvalidParams(f"{name} must be a finite real, got {v!r}")
        if v <= 0:
            raise InvalidParams(f"{name} > 0 violated ({name}={v})")
    if not p.a < min(p.A / 2, p.B / 2):
        raise InvalidParams(
            f"a < min(A/2, B/2) violated (a={p.a}, A/2={p.A / 2}, B/2={p.B / 2})")


def _ratio_bounds(p) -> tuple[float, float]:
    k = 2 * p.A + 2 * p.B - 3 * p.a
    return p.a / k, k / p.a


def admissible(m: MassPair, p: ModelParams) -> bool:
    """True iff the mass ratio ``m1/m2`` lies in the closed admissible range."""
    lo, hi = _ratio_bounds(p)
    r = m.m1 / m.m2
    return lo * (1 - REL_TOL) <= r <= hi * (1 + REL_TOL)


def _on_admissible_edge(m: MassPair, p: ModelParams) -> bool:
    lo, hi = _ratio_bounds(p)
    r = m.m1 / m.m2
    return math.isclose(r, lo, rel_tol=REL_TOL) or math.isclose(r, hi, rel_tol=REL_TOL)


def equilibrium_from_masses(m: MassPair, p: ModelParams) -> Equilibrium:
    """Return the unique stationary state carrying side masses ``m``.

    Raises ``NotAdmissible`` when the mass ratio is outside the admissible
    range.  On the edge of the range the returned ``p0`` sits at an end of
    ``(-A + a, B - a)``; a ``UserWarning`` is issued.
    """
    if not admissible(m, p):
        lo, hi = _ratio_bounds(p)
        raise NotAdmissible(f"m1/m2={m.m1 / m.m2} outside [{lo}, {hi}]")
    if _on_admissible_edge(m, p):
        warnings.warn("mass ratio on the admissible edge; p0 sits at the end of its interval",
                      stacklevel=2)
    m1, m2, a, A, B = m.m1, m.m2, p.a, p.A, p.B
    p0 = (-a * (m1 - m2) - 2 * A * m2 + 2 * B * m1) / (2 * (m1 + m2))
    lam = (m1 + m2) / (a * (-a + A + B))
    return Equilibrium(p0, lam)


def masses_of_equilibrium(e: Equilibrium, p: ModelParams) -> MassPair:
    lam, a = e.lambda0, p.a
    return MassPair(lam * a * (e.p0 - a / 2 + p.A), lam * a * (p.B - e.p0 - a / 2))


def eval_equilibrium(e: Equilibrium, x, p: ModelParams, strict: bool = True):
    """Evaluate the stationary state at ``x`` (scalar or array).

    ``strict`` rejects points outside ``[-A, B]`` with ``OutOfDomain``.
    """
    xs = np.asarray(x, dtype=float)
    if strict and (np.any(xs < -p.A) or np.any(xs > p.B)):
        raise OutOfDomain(f"x outside [-A, B] = [{-p.A}, {p.B}]")
    lam, a = e.lambda0, p.a
    out = np.clip(-lam * (xs - e.p0), -lam * a, lam * a)
    return float(out) if out.ndim == 0 else out
