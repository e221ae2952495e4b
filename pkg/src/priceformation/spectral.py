"""Spectrum of the operator linearised about an equilibrium with root at 0.

    L g = g'' - g'(0) [delta_{-a} - delta_{a}] + s * g(0) [delta'_{-a} - delta'_{a}]

on ``[-A, B]`` with homogeneous Neumann data.  Away from ``x = -a, 0, a`` an
eigenfunction solves ``g'' = -alpha^2 g``; the point terms become jump
conditions at ``x = +-a``.  Two readings of the dipole term are supported:

``"distributional"``
    ``delta'`` is the distributional derivative (``<delta'_c, phi> =
    -phi'(c)``).  This is the operator whose kernel contains the step
    function ``h0 = 1`` on ``(-a, a)``, ``2`` outside, and whose gap is
    ``min{(2 pi/(2A-a))^2, (2 pi/(2B-a))^2, (pi/a)^2}``.

``"shift"``
    ``delta'_c`` is the derivative of ``delta_c`` with respect to its
    location (``<., phi> = +phi'(c)``), which is what differentiating the
    moving sources ``delta_{p +- a}`` in ``p`` produces.  Its kernel holds the
    tangents of the equilibrium family and its nonzero spectrum is
    ``{(n pi/(A+B-a))^2} U {(2 n pi/a)^2}``; this is the operator that governs
    the simulated relaxation.

The two readings differ only in the sign ``s`` of the value jumps at ``+-a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConvergenceFailure, IndexOutOfRange, InvalidParams, OutOfDomain
from .grid import Grid, deposit_delta, derivative_weights, interpolation_weights

CONVENTIONS = ("distributional", "shift")
RANK_TOL = 1e-9
PRED_TOL = 1e-9

_DIM_OF_CASE = {0: 0, 1: 1, 2: 2, 3: 1, 4: 1, 5: 2, 6: 2}


def _jump_sign(convention: str) -> int:
    if convention == "distributional":
        return 1
    if convention == "shift":
        return -1
    raise InvalidParams(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def _check_geometry(prm) -> None:
    if not (0 < prm.a < prm.A and prm.a < prm.B):
        raise InvalidParams(f"need 0 < a < min(A, B), got A={prm.A}, B={prm.B}, a={prm.a}")


# --------------------------------------------------------------------- kernel


@dataclass(frozen=True)
class KernelBasis:
    """The two zero modes ``g0`` (tilt) and ``h0`` (step) of ``L``.

    ``g0`` is ``x`` on ``(-a, a)`` and ``+-a`` outside.  ``h0`` is ``1`` on
    ``(-a, a)`` and ``2`` outside for the distributional reading, ``0`` outside for the
    shift reading.  At ``x = +-a`` the step takes its mid value.
    """

    A: float
    B: float
    a: float
    convention: str = "distributional"

    @property
    def h0_outer(self) -> float:
        return 2.0 if self.convention == "distributional" else 0.0

    def g0(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip(x, -self.a, self.a)
        return float(out) if out.ndim == 0 else out

    def h0(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        out = np.where(ax < self.a, 1.0, self.h0_outer)
        out = np.where(np.isclose(ax, self.a, rtol=0, atol=1e-14), 0.5 * (1.0 + self.h0_outer), out)
        return float(out) if out.ndim == 0 else out

    def side_integrals(self) -> np.ndarray:
        """``[[I1(g0), I1(h0)], [I2(g0), I2(h0)]]`` with ``I1 = int_{-A}^0``, ``I2 = int_0^B``."""
        A, B, a, k = self.A, self.B, self.a, self.h0_outer
        return np.array([[a * a / 2 - a * A, a + k * (A - a)],
                         [a * B - a * a / 2, a + k * (B - a)]])


def kernel_basis(prm, convention: str = "distributional") -> KernelBasis:
    _jump_sign(convention)
    _check_geometry(prm)
    return KernelBasis(prm.A, prm.B, prm.a, convention)


def spectral_gap(prm, convention: str = "distributional") -> float:
    """Smallest nonzero ``|mu|`` of ``L`` under the chosen reading."""
    _jump_sign(convention)
    A, B, a = prm.A, prm.B, prm.a
    if convention == "distributional":
        return min((2 * math.pi / (2 * A - a)) ** 2, (2 * math.pi / (2 * B - a)) ** 2,
                   (math.pi / a) ** 2)
    return min((math.pi / (A + B - a)) ** 2, (2 * math.pi / a) ** 2)


# ----------------------------------------------------------------- candidates


def _families(prm, convention):
    A, B, a = prm.A, prm.B, prm.a
    if convention == "distributional":
        return [("a", math.pi / a), ("left", 2 * math.pi / (2 * A - a)),
                ("right", 2 * math.pi / (2 * B - a))]
    return [("span", math.pi / (A + B - a)), ("a", 2 * math.pi / a)]


def eigenvalue_candidates(prm, alpha_max: float, convention: str = "distributional"):
    """Frequencies in ``(0, alpha_max]`` where the matching determinant vanishes.

    Returns ``[(alpha, families), ...]`` sorted by ``alpha``; coincident
    frequencies from different families are merged and carry every tag.
    """
    if not alpha_max > 0:
        raise InvalidParams("alpha_max must be positive")
    _jump_sign(convention)
    raw = []
    for tag, base in _families(prm, convention):
        n = 1
        while n * base <= alpha_max * (1 + 1e-12):
            raw.append((n * base, tag))
            n += 1
    raw.sort()
    out: list = []
    for alpha, tag in raw:
        if out and math.isclose(alpha, out[-1][0], rel_tol=1e-9):
            if tag not in out[-1][1]:
                out[-1] = (out[-1][0], out[-1][1] + (tag,))
        else:
            out.append((alpha, (tag,)))
    return out


# ---------------------------------------------------------------- eigenpairs
#
# Ansatz with the Neumann data built in:
#   (-a, a): c1 sin(alpha x) + c2 cos(alpha x)
#   (a, B) : d cos(alpha (B - x))
#   (-A,-a): e cos(alpha (A + x))
# Unknown vector order is (c1, c2, d, e).


def matching_matrix(alpha: float, prm, convention: str = "distributional") -> np.ndarray:
    """Rows: value jump at ``a``, value jump at ``-a``, slope jumps at ``a``, ``-a`` (over alpha)."""
    s = _jump_sign(convention)
    A, B, a = prm.A, prm.B, prm.a
    sa, ca = math.sin(alpha * a), math.cos(alpha * a)
    return np.array([
        [-sa, -ca - s, math.cos(alpha * (B - a)), 0.0],
        [-sa, ca + s, 0.0, -math.cos(alpha * (A - a))],
        [1.0 - ca, sa, math.sin(alpha * (B - a)), 0.0],
        [ca - 1.0, sa, 0.0, math.sin(alpha * (A - a))],
    ])


def _canonical_basis(null: np.ndarray) -> np.ndarray:
    """Reduced row echelon form of a null-space basis, pivots preferring d, e, c1, c2."""
    order = [2, 3, 0, 1]
    m = null[:, order].copy()
    k = m.shape[0]
    row = 0
    scale = np.max(np.abs(m))
    for col in range(4):
        if row == k:
            break
        r = row + int(np.argmax(np.abs(m[row:, col])))
        if abs(m[r, col]) <= 1e-8 * scale:
            continue
        m[[row, r]] = m[[r, row]]
        m[row] /= m[row, col]
        for rr in range(k):
            if rr != row:
                m[rr] -= m[rr, col] * m[row]
        row += 1
    out = np.empty_like(m)
    out[:, order] = m
    out /= np.max(np.abs(out), axis=1, keepdims=True)
    return out


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue ``mu = -alpha^2`` with a basis of its eigenfunctions.

    ``coeffs[k] = (c1, c2, d, e)`` describes basis function ``k`` through the
    Neumann-reduced ansatz (see :func:`matching_matrix`).  ``case`` is the
    integer-condition case of the classical symmetric classification when
    ``A = B = 1`` under the distributional reading, else ``None``.
    """

    alpha: float
    A: float
    B: float
    a: float
    coeffs: np.ndarray = field(repr=False)
    convention: str = "distributional"
    families: tuple = ()
    case: int | None = None

    @property
    def mu(self) -> float:
        return -self.alpha ** 2

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def branches(self, k: int) -> dict:
        """``{interval: (amp_sin, amp_cos)}`` in the global ``sin(alpha x), cos(alpha x)`` basis."""
        c1, c2, d, e = self._coef(k)
        al, A, B = self.alpha, self.A, self.B
        return {
            "left": (-e * math.sin(al * A), e * math.cos(al * A)),
            "mid": (c1, c2),
            "right": (d * math.sin(al * B), d * math.cos(al * B)),
        }

    def _coef(self, k):
        if not 0 <= k < self.dim:
            raise IndexOutOfRange(f"basis index {k} not in [0, {self.dim})")
        return self.coeffs[k]

    def one_sided(self, k: int, x, side: str, deriv: int = 0):
        """Value (``deriv=0``) or slope (``deriv=1``) of the branch named by ``side``."""
        c1, c2, d, e = self._coef(k)
        al, A, B = self.alpha, self.A, self.B
        x = np.asarray(x, dtype=float)
        if side == "mid":
            if deriv == 0:
                return c1 * np.sin(al * x) + c2 * np.cos(al * x)
            return al * (c1 * np.cos(al * x) - c2 * np.sin(al * x))
        if side == "right":
            if deriv == 0:
                return d * np.cos(al * (B - x))
            return d * al * np.sin(al * (B - x))
        if side == "left":
            if deriv == 0:
                return e * np.cos(al * (A + x))
            return -e * al * np.sin(al * (A + x))
        raise InvalidParams(f"unknown side {side!r}")

    def side_masses(self, k: int) -> tuple[float, float]:
        """``(int_{-A}^0 g, int_0^B g)`` from the closed-form antiderivatives."""
        c1, c2, d, e = self._coef(k)
        al, A, B, a = self.alpha, self.A, self.B, self.a

        def mid(x):
            return (-c1 * math.cos(al * x) + c2 * math.sin(al * x)) / al

        def right(x):
            return -d * math.sin(al * (B - x)) / al

        def left(x):
            return e * math.sin(al * (A + x)) / al

        i1 = (left(-a) - left(-A)) + (mid(0.0) - mid(-a))
        i2 = (mid(a) - mid(0.0)) + (right(B) - right(a))
        return i1, i2

    def residuals(self, k: int) -> np.ndarray:
        """Jump conditions at ``+-a`` (values, then slopes) and the two Neumann slopes."""
        s = _jump_sign(self.convention)
        a = self.a
        g0 = float(self.one_sided(k, 0.0, "mid"))
        d0 = float(self.one_sided(k, 0.0, "mid", 1))

        def val(x, side, dv=0):
            return float(self.one_sided(k, x, side, dv))

        return np.array([
            val(a, "right") - val(a, "mid") - s * g0,
            val(-a, "mid") - val(-a, "left") + s * g0,
            val(a, "right", 1) - val(a, "mid", 1) + d0,
            val(-a, "mid", 1) - val(-a, "left", 1) - d0,
            val(-self.A, "left", 1),
            val(self.B, "right", 1),
        ])


def matching_rank(alpha: float, prm, convention: str = "distributional", families: tuple = ()):
    """EigenPair at frequency ``alpha``, or ``None`` if ``-alpha^2`` is not an eigenvalue.

    The null space of the 4x4 matching system is found from its singular
    values with a cut-off of ``1e-9`` times the largest one.
    """
    if not alpha > 0:
        raise InvalidParams("alpha must be positive")
    _check_geometry(prm)
    M = matching_matrix(alpha, prm, convention)
    _, sv, vt = np.linalg.svd(M)
    rank = int(np.sum(sv > RANK_TOL * sv[0]))
    if rank == 4:
        return None
    coeffs = _canonical_basis(vt[rank:])
    case = None
    if convention == "distributional" and prm.A == 1 and prm.B == 1:
        case = symmetric_case(alpha, prm.a)
    return EigenPair(alpha, prm.A, prm.B, prm.a, coeffs, convention, tuple(families), case)


def eigenfunction_eval(e: EigenPair, basis_index: int, x):
    """Evaluate basis eigenfunction ``basis_index`` (mid value at the jumps ``+-a``)."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < -e.A - 1e-12) or np.any(xs > e.B + 1e-12):
        raise OutOfDomain(f"x outside [{-e.A}, {e.B}]")
    e._coef(basis_index)
    a = e.a
    mid = e.one_sided(basis_index, xs, "mid")
    out = np.where(xs > a, e.one_sided(basis_index, xs, "right"),
                   np.where(xs < -a, e.one_sided(basis_index, xs, "left"), mid))
    at_r = np.isclose(xs, a, rtol=0, atol=1e-14)
    at_l = np.isclose(xs, -a, rtol=0, atol=1e-14)
    out = np.where(at_r, 0.5 * (mid + e.one_sided(basis_index, xs, "right")), out)
    out = np.where(at_l, 0.5 * (mid + e.one_sided(basis_index, xs, "left")), out)
    return float(out) if out.ndim == 0 else out


def analytic_spectrum(prm, count: int, convention: str = "distributional") -> list:
    """The first ``count`` distinct nonzero eigenvalues as EigenPairs, by increasing ``alpha``."""
    _check_geometry(prm)
    step = max(b for _, b in _families(prm, convention))
    alpha_max = step * (count + 1)
    while True:
        pairs = []
        for alpha, fam in eigenvalue_candidates(prm, alpha_max, convention):
            ep = matching_rank(alpha, prm, convention, fam)
            if ep is not None:
                pairs.append(ep)
            if len(pairs) == count:
                return pairs
        alpha_max *= 2


# ------------------------------------------------- symmetric classification


def symmetric_case(alpha: float, a: float) -> int:
    """Case 1..6 of the symmetric (``A = B = 1``) classification; 0 means no eigenvalue."""

    def zero(v):
        return abs(v) < PRED_TOL

    if zero(math.cos(alpha)):
        if not zero(math.sin(alpha * a)):
            return 0
        return 1 if math.cos(alpha * a) > 0 else 2
    if zero(math.sin(alpha * a)):
        if math.cos(alpha * a) < 0:
            return 3
        return 5 if zero(math.sin(alpha)) else 4
    return 6


def classify_symmetric(a: float, n_max: int):
    """Case and eigenspace dimension for the first ``n_max`` candidates at ``A = B = 1``."""
    if not 0 < a < 0.5:
        raise InvalidParams(f"need 0 < a < 1/2, got {a}")
    prm = _Sym(1.0, 1.0, a)
    alpha_max = 2 * math.pi / (2 - a) * (n_max + 1)
    cands = eigenvalue_candidates(prm, alpha_max, "distributional")[:n_max]
    out = []
    for alpha, _ in cands:
        case = symmetric_case(alpha, a)
        out.append((alpha, case, _DIM_OF_CASE[case]))
    return out


class _Sym(NamedTuple):
    A: float
    B: float
    a: float


# ---------------------------------------------------------- discrete operator


def _dipole(g: Grid, c: float, convention: str) -> np.ndarray:
    """Grid vector of ``delta'_c`` under ``convention`` (divided hat difference)."""
    h = g.h
    diff = (deposit_delta(g, c + h / 2, 1.0).values - deposit_delta(g, c - h / 2, 1.0).values) / h
    return -diff if convention == "distributional" else diff


def assemble_discrete_operator(g: Grid, prm=None, convention: str = "distributional",
                               center: float = 0.0, sparse: bool = False):
    """Matrix of ``L`` (linearised about a root at ``center``) on the grid ``g``.

    Built from the Neumann second difference, hat deposits for the deltas at
    ``center +- a``, the three-point slope functional and linear interpolation
    at ``center``.  The dipoles are divided differences of hat deposits.
    """
    prm = prm or g.params
    _jump_sign(convention)
    a, h, n = prm.a, g.h, g.n
    if h > a / 8 * (1 + 1e-12):
        raise InvalidParams(f"grid does not resolve a: h={h} > a/8={a / 8}")
    main = np.full(n, -2.0)
    up = np.ones(n - 1)
    lo = np.ones(n - 1)
    up[0] = 2.0
    lo[-1] = 2.0
    lap = scipy.sparse.diags([lo, main, up], [-1, 0, 1], format="lil") / h**2
    j1, w1 = derivative_weights(g, center, 1)
    i0, w0 = interpolation_weights(g, center)
    slope = np.zeros(n)
    slope[j1 - 1:j1 + 2] = w1
    value = np.zeros(n)
    value[i0:i0 + 2] = w0
    mono = deposit_delta(g, center - a, 1.0).values - deposit_delta(g, center + a, 1.0).values
    dip = _dipole(g, center - a, convention) - _dipole(g, center + a, convention)
    coupling = -np.outer(mono, slope) + np.outer(dip, value)
    cs = scipy.sparse.csr_matrix(coupling)
    M = lap.tocsr() + cs
    return M if sparse else M.toarray()


class Spectrum(NamedTuple):
    values: np.ndarray
    max_rel_imag: float


def discrete_spectrum(M, k: int, sigma: float = 1.0) -> Spectrum:
    """The ``k`` eigenvalues of ``M`` of smallest magnitude.

    Dense arrays use a full non-symmetric eigensolve; sparse matrices use
    shift-invert Arnoldi about ``sigma``.
    """
    n = M.shape[0]
    if M.shape != (n, n) or not 0 < k <= n:
        raise InvalidParams(f"need a square matrix and 0 < k <= n, got {M.shape}, k={k}")
    try:
        if scipy.sparse.issparse(M):
            vals = scipy.sparse.linalg.eigs(M.tocsc(), k=min(k + 2, n - 2), sigma=sigma,
                                            return_eigenvectors=False)
        else:
            vals = scipy.linalg.eigvals(M)
    except (np.linalg.LinAlgError, scipy.sparse.linalg.ArpackNoConvergence) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not np.all(np.isfinite(vals)):
        raise ConvergenceFailure("eigensolver returned non-finite values")
    vals = vals[np.argsort(np.abs(vals), kind="stable")][:k]
    rel = np.abs(vals.imag) / np.maximum(np.abs(vals), 1.0)
    return Spectrum(vals, float(rel.max()) if len(rel) else 0.0)
