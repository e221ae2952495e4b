"""JSON-configured experiments: scenario runs, decay fits, refinement and sweeps.

A scenario is an equilibrium (given directly or through its side masses)
plus a named perturbation.  Running it writes

``trajectory.csv``
    one row per recorded time, columns ``t,p,lambda,m1,m2,err_l2,err_linf,err_h1``
    (errors measured against the mass-predicted limit)
``final_state.csv``
    ``x,value`` of the last state
``summary.json``
    config echo, input hash, tolerances, predicted and attained limit, drift,
    decay fit and both spectral gaps
``snapshots.svg``, ``error.svg``
    when ``plots`` is set
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ConfigError, InvalidParams, NonpositiveError, NotAdmissible,
                     PriceFormationError)
from .grid import GridFunction, make_grid, sample, write_csv
from .manifold import predict_limit
from .model import (Equilibrium, MassPair, ModelParams, equilibrium_from_masses,
                    masses_of_equilibrium)
from .solver import init_state, run
from .spectral import (analytic_spectrum, assemble_discrete_operator, discrete_spectrum,
                       eigenfunction_eval, kernel_basis, spectral_gap)

PERTURBATIONS = ("first-eigenfunction", "smooth-cosine", "random-smooth", "kernel-shift", "none")
NORM_KINDS = ("l2", "linf", "h1")
FIT_RESIDUAL_MAX = 0.05  # RMS in log space above which a fit is flagged
FLOOR_FACTOR = 10.0
MASS_DRIFT_TOL = 1e-3
STEP_MASS_TOL = 1e-12
RATE_REL_TOL = 0.15
ZERO_AMPLITUDE_TOL = 1e-6


# ------------------------------------------------------------------ config


@dataclass
class ScenarioConfig:
    params: ModelParams
    equilibrium: Equilibrium
    perturbation: str = "first-eigenfunction"
    amplitude: float = 0.02
    kernel: tuple = (1.0, 0.0)       # (c, d) for kernel-shift
    eig_convention: str = "distributional"    # which eigenfunction first-eigenfunction uses
    n: int = 801
    dt: float | None = None          # defaults to h
    t_end: float | None = None       # defaults to 3 / gap
    stride: int = 1
    out_dir: str | None = None
    seed: int = 0
    scheme: str = "implicit"
    corrector: bool = False
    plots: bool = False
    snapshots: int = 5
    norm_kind: str = "linf"
    masses: MassPair | None = None   # echoed when the equilibrium came from masses

    @property
    def grid(self):
        return make_grid(self.params, self.n)

    @property
    def h(self) -> float:
        return (self.params.A + self.params.B) / (self.n - 1)

    @property
    def gap(self) -> float:
        return spectral_gap(self.params.centered_at(self.equilibrium.p0))

    @property
    def step(self) -> float:
        return self.h if self.dt is None else self.dt

    @property
    def horizon(self) -> float:
        return 3.0 / self.gap if self.t_end is None else self.t_end

    def guard(self) -> float:
        """Largest sup-norm perturbation the root-tracking guarantees cover."""
        lam = self.equilibrium.lambda0
        return min(lam * self.params.a / 8, lam)

    def validate(self) -> None:
        if self.perturbation not in PERTURBATIONS:
            raise ConfigError(f"unknown perturbation {self.perturbation!r}; one of {PERTURBATIONS}")
        if self.norm_kind not in NORM_KINDS:
            raise ConfigError(f"norm_kind must be one of {NORM_KINDS}")
        if self.eig_convention not in ("distributional", "shift"):
            raise ConfigError("eig_convention must be 'distributional' or 'shift'")
        if not isinstance(self.n, int) or self.n < 16:
            raise ConfigError(f"n must be an integer >= 16, got {self.n!r}")
        if self.step > self.h * (1 + 1e-12) or not self.step > 0:
            raise ConfigError(f"dt={self.step} must be positive and <= h={self.h}")
        if not self.horizon > 0:
            raise ConfigError("t_end must be positive")
        if self.stride < 1 or self.snapshots < 0:
            raise ConfigError("stride must be >= 1 and snapshots >= 0")
        if not (0 <= self.amplitude < self.guard()):
            raise ConfigError(f"amplitude {self.amplitude} outside [0, {self.guard():.6g}) "
                              "(smallness guard lambda0*a/8)")
        try:
            self.equilibrium.check_in(self.params)
        except InvalidParams as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = copy.deepcopy(d)
        try:
            prm = ModelParams.from_dict(d.pop("params"))
            masses = None
            if "masses" in d and "equilibrium" in d:
                raise ConfigError("give either masses or equilibrium, not both")
            if "masses" in d:
                masses = MassPair.from_dict(d.pop("masses"))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    eq = equilibrium_from_masses(masses, prm)
            elif "equilibrium" in d:
                e = d.pop("equilibrium")
                eq = Equilibrium(float(e["p0"]), float(e["lambda0"]))
            else:
                raise ConfigError("config needs 'masses' or 'equilibrium'")
            pert = d.pop("perturbation", {})
            if isinstance(pert, str):
                pert = {"kind": pert}
            kw = {}
            for key in ("n", "stride", "seed", "snapshots"):
                if key in d:
                    kw[key] = int(d.pop(key))
            for key in ("dt", "t_end"):
                if key in d:
                    kw[key] = None if d[key] is None else float(d[key])
                    d.pop(key)
            for key in ("out_dir", "scheme", "norm_kind"):
                if key in d:
                    kw[key] = d.pop(key)
            for key in ("corrector", "plots"):
                if key in d:
                    kw[key] = bool(d.pop(key))
            d.pop("levels", None)
            if d:
                raise ConfigError(f"unknown config keys: {sorted(d)}")
            cfg = cls(params=prm, equilibrium=eq,
                      perturbation=pert.get("kind", "first-eigenfunction"),
                      amplitude=float(pert.get("amplitude", 0.02)),
                      kernel=tuple(float(v) for v in pert.get("kernel", (1.0, 0.0))),
                      eig_convention=pert.get("convention", "distributional"),
                      masses=masses, **kw)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {"params": self.params.to_dict()}
        if self.masses is not None:
            out["masses"] = {"m1": self.masses.m1, "m2": self.masses.m2}
        else:
            out["equilibrium"] = {"p0": self.equilibrium.p0, "lambda0": self.equilibrium.lambda0}
        out["perturbation"] = {"kind": self.perturbation, "amplitude": self.amplitude,
                               "kernel": list(self.kernel), "convention": self.eig_convention}
        for key in ("n", "dt", "t_end", "stride", "out_dir", "seed", "scheme", "corrector",
                    "plots", "snapshots", "norm_kind"):
            out[key] = getattr(self, key)
        return out


def input_hash(cfg: ScenarioConfig) -> str:
    """Git blob hash of the canonical JSON of the config (output directory excluded)."""
    d = cfg.to_dict()
    d.pop("out_dir", None)
    body = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


# ----------------------------------------------------------- perturbations


def _unit(v: np.ndarray) -> np.ndarray:
    m = float(np.max(np.abs(v)))
    if m == 0:
        raise ConfigError("perturbation shape vanishes on the grid")
    return v / m


def perturbation_shape(cfg: ScenarioConfig) -> np.ndarray:
    """Grid values of the chosen perturbation, scaled to sup norm ``amplitude``."""
    g = cfg.grid
    x = g.nodes
    p0, prm = cfg.equilibrium.p0, cfg.params
    kind = cfg.perturbation
    if kind == "none" or cfg.amplitude == 0:
        return np.zeros(g.n)
    if kind == "first-eigenfunction":
        geom = prm.centered_at(p0)
        ep = analytic_spectrum(geom, 1, cfg.eig_convention)[0]
        v = eigenfunction_eval(ep, 0, np.clip(x - p0, -geom.A, geom.B))
    elif kind == "smooth-cosine":
        v = np.cos(math.pi * (x + prm.A) / prm.length)
    elif kind == "random-smooth":
        rng = np.random.default_rng(cfg.seed)
        k = np.arange(1, 7)
        coef = rng.standard_normal(k.size) / k**2
        v = np.cos(np.outer(x + prm.A, k) * math.pi / prm.length) @ coef
    elif kind == "kernel-shift":
        kb = kernel_basis(prm.centered_at(p0), cfg.eig_convention)
        c, d = cfg.kernel
        v = c * kb.g0(x - p0) + d * kb.h0(x - p0)
    else:
        raise ConfigError(f"unknown perturbation {kind!r}")
    return cfg.amplitude * _unit(np.asarray(v, dtype=float))


def initial_data(cfg: ScenarioConfig) -> GridFunction:
    g = cfg.grid
    return sample(cfg.equilibrium, g) + perturbation_shape(cfg)


# ------------------------------------------------------------- decay fits


@dataclass
class DecayFit:
    gamma_fit: float
    c_fit: float
    window: tuple
    residual: float
    norm_kind: str
    npoints: int = 0
    flagged: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def default_window(gap: float, t_end: float) -> tuple[float, float]:
    return 0.2 / gap, min(t_end, 3.0 / gap)


def fit_decay(traj, norm_kind: str = "linf", window=None, gap: float | None = None,
              floor: float | None = None) -> DecayFit:
    """Least-squares line through ``(t, log err)`` on ``window``; ``gamma_fit = -slope``.

    ``window`` defaults to ``[0.2/gap, min(t_end, 3/gap)]``.  With ``floor``
    the upper end is pulled back to the last time the error is still above
    ``floor``.  A fit whose log-space RMS exceeds 0.05 is flagged.
    """
    if norm_kind not in NORM_KINDS:
        raise InvalidParams(f"norm_kind must be one of {NORM_KINDS}")
    t = traj.column("t")
    e = traj.column("err_" + norm_kind)
    if window is None:
        if gap is None:
            raise InvalidParams("need a window or a spectral gap for the default window")
        window = default_window(gap, float(t[-1]))
    lo, hi = map(float, window)
    if floor is not None:
        above = np.nonzero((e > floor) & (t >= lo))[0]
        if above.size:
            hi = min(hi, float(t[above[-1]]))
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if np.count_nonzero(sel) < 2:
        raise InvalidParams(f"fewer than two samples in window [{lo:.4g}, {hi:.4g}]")
    ts, es = t[sel], e[sel]
    if np.any(~(es > 0)):
        raise NonpositiveError(f"non-positive error in window [{lo:.4g}, {hi:.4g}]; "
                               "the error floor was reached, shrink the window")
    slope, icpt = np.polyfit(ts, np.log(es), 1)
    res = float(np.sqrt(np.mean((np.log(es) - (slope * ts + icpt)) ** 2)))
    return DecayFit(float(-slope), float(math.exp(icpt)), (float(ts[0]), float(ts[-1])), res,
                    norm_kind, int(ts.size), bool(res > FIT_RESIDUAL_MAX or not slope < 0))


# ---------------------------------------------------------------- scenarios


@dataclass
class ScenarioResult:
    summary: dict
    trajectory: object
    limit: Equilibrium
    final: GridFunction
    paths: dict = field(default_factory=dict)


def _limit_state(cfg, f_I, p_I) -> Equilibrium:
    try:
        return predict_limit(f_I, p_I, cfg.params)
    except NotAdmissible as exc:
        raise ConfigError(f"perturbed masses are not admissible: {exc}") from exc


def run_scenario(cfg: ScenarioConfig, write: bool = True) -> ScenarioResult:
    """Perturb, predict the limit from the side masses, run, fit and report."""
    cfg.validate()
    g = cfg.grid
    f_I = initial_data(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s0 = init_state(f_I, cfg.equilibrium.p0, cfg.params)
        limit = _limit_state(cfg, f_I, s0.p)
    f_inf = sample(limit, g)
    t_end = cfg.horizon
    snaps = np.linspace(0, t_end, cfg.snapshots) if cfg.snapshots else ()
    traj = run(s0, cfg.step, t_end, f_inf=f_inf, stride=cfg.stride, scheme=cfg.scheme,
               corrector=cfg.corrector, snapshot_times=snaps)
    fin = traj.final_state
    gap_dist = spectral_gap(cfg.params.centered_at(limit.p0), "distributional")
    gap_shift = spectral_gap(cfg.params.centered_at(limit.p0), "shift")
    m1, m2 = traj.column("m1"), traj.column("m2")
    rel_drift = float(max(abs(m1[-1] - m1[0]) / abs(m1[0]), abs(m2[-1] - m2[0]) / abs(m2[0])))
    err_final = float(traj.rows[-1]["err_" + cfg.norm_kind])
    floor = FLOOR_FACTOR * err_final
    fit, fit_note = None, None
    if cfg.amplitude == 0 or cfg.perturbation == "none":
        fit_note = "undefined: zero perturbation"
    else:
        try:
            fit = fit_decay(traj, cfg.norm_kind, gap=gap_dist, floor=floor)
        except (NonpositiveError, InvalidParams) as exc:
            fit_note = f"undefined: {exc}"
    err_max = float(np.nanmax(traj.column("err_" + cfg.norm_kind)))
    summary = {
        "config": cfg.to_dict(),
        "input_hash": input_hash(cfg),
        "tolerances": {"mass_drift_rel": MASS_DRIFT_TOL, "step_mass": STEP_MASS_TOL,
                       "rate_rel": RATE_REL_TOL, "limit_linf": 2 * g.h,
                       "fit_residual_max": FIT_RESIDUAL_MAX, "floor_factor": FLOOR_FACTOR,
                       "zero_amplitude": ZERO_AMPLITUDE_TOL},
        "h": g.h,
        "dt": cfg.step,
        "t_end": t_end,
        "predicted_limit": {"p0": limit.p0, "lambda0": limit.lambda0},
        "attained": {"p": fin.p, "lambda": fin.lam,
                     "err_l2": traj.rows[-1]["err_l2"], "err_linf": traj.rows[-1]["err_linf"],
                     "err_h1": traj.rows[-1]["err_h1"]},
        "initial": {"p": s0.p, "lambda": s0.lam,
                    "err_linf": traj.rows[0]["err_linf"]},
        "fixed_point_residual": err_final,
        "max_error": err_max,
        "mass": {"side_drift_rel": rel_drift,
                 "max_step_total_change": traj.max_step_mass_change,
                 "m1": [float(m1[0]), float(m1[-1])], "m2": [float(m2[0]), float(m2[-1])]},
        "decay_fit": fit.to_dict() if fit else None,
        "decay_fit_note": fit_note,
        "gamma_fit_defined": fit is not None,
        "spectral_gap": {"distributional": gap_dist, "shift": gap_shift},
        "max_boundary_speed": traj.max_speed,
        "steps": int(math.ceil(t_end / cfg.step - 1e-9)),
    }
    res = ScenarioResult(summary, traj, limit, fin.f)
    if write and cfg.out_dir:
        res.paths = write_bundle(res, cfg)
    return res


def write_bundle(res: ScenarioResult, cfg: ScenarioConfig) -> dict:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trajectory": out / "trajectory.csv", "final_state": out / "final_state.csv",
             "summary": out / "summary.json"}
    res.trajectory.to_csv(paths["trajectory"])
    write_csv(res.final, paths["final_state"])
    with open(paths["summary"], "w") as fh:
        json.dump(_jsonable(res.summary), fh, indent=2, sort_keys=True)
    if cfg.plots:
        x = res.final.grid.nodes
        series = [(f"t={t:.3g}", x, v) for t, v in res.trajectory.snapshots]
        paths["snapshots"] = out / "snapshots.svg"
        write_svg(paths["snapshots"], series, "f(x, t)", "x", "f")
        t = res.trajectory.column("t")
        e = res.trajectory.column("err_" + cfg.norm_kind)
        keep = e > 0
        paths["error"] = out / "error.svg"
        write_svg(paths["error"], [(cfg.norm_kind, t[keep], np.log10(e[keep]))],
                  "log10 error vs t", "t", "log10 err")
    return {k: str(v) for k, v in paths.items()}


def _jsonable(o):
    if isinstance(o, dict):
        return {k: _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return None
    return o


# ---------------------------------------------------------------- plotting

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def write_svg(path, series, title: str, xlabel: str, ylabel: str,
              width: int = 640, height: int = 420) -> None:
    """Plain SVG line chart of ``[(label, x, y), ...]``."""
    ml, mr, mt, mb = 60, 110, 30, 45
    xs = np.concatenate([np.asarray(s[1], float) for s in series]) if series else np.zeros(1)
    ys = np.concatenate([np.asarray(s[2], float) for s in series]) if series else np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = width - ml - mr, height - mt - mb

    def X(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="12">',
             f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
             f'<text x="{ml + pw / 2}" y="18" text-anchor="middle">{title}</text>',
             f'<text x="{ml + pw / 2}" y="{height - 8}" text-anchor="middle">{xlabel}</text>',
             f'<text x="14" y="{mt + ph / 2}" transform="rotate(-90 14 {mt + ph / 2})" '
             f'text-anchor="middle">{ylabel}</text>']
    for v in np.linspace(x0, x1, 5):
        parts.append(f'<text x="{X(v):.1f}" y="{mt + ph + 16}" text-anchor="middle">{v:.3g}</text>')
    for v in np.linspace(y0, y1, 5):
        parts.append(f'<text x="{ml - 6}" y="{Y(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    for k, (label, sx, sy) in enumerate(series):
        col = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(sx, sy))
        parts.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.2" points="{pts}"/>')
        ly = mt + 14 + 16 * k
        parts.append(f'<line x1="{ml + pw + 8}" y1="{ly - 4}" x2="{ml + pw + 24}" y2="{ly - 4}" '
                     f'stroke="{col}" stroke-width="2"/>')
        parts.append(f'<text x="{ml + pw + 28}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# ------------------------------------------------------------- refinement


def _order(values) -> list:
    v = np.asarray(values, dtype=float)
    out = []
    for a, b in zip(v[:-1], v[1:]):
        out.append(float(math.log2(a / b)) if a > 0 and b > 0 else math.nan)
    return out


def discrete_eigen_errors(prm, n: int, count: int = 3, convention: str = "distributional") -> dict:
    """Relative error of the first ``count`` nonzero discrete eigenvalues at ``n`` nodes."""
    g = make_grid(prm, n)
    sparse = n > 1200
    M = assemble_discrete_operator(g, convention=convention, sparse=sparse)
    exact = [ep.mu for ep in analytic_spectrum(prm, count, convention)]
    spec = discrete_spectrum(M, 2 + 2 * count + 2)
    vals = np.sort(spec.values.real)[::-1]
    kernel = vals[np.abs(vals) < 1e-2]
    rest = vals[np.abs(vals) >= 1e-2]
    errs = []
    for mu in exact:
        k = int(np.argmin(np.abs(rest - mu)))
        errs.append(float(abs(rest[k] - mu) / abs(mu)))
    return {"n": n, "kernel_dim": int(kernel.size), "exact": exact,
            "nearest": [float(rest[int(np.argmin(np.abs(rest - mu)))]) for mu in exact],
            "rel_err": errs, "max_rel_imag": spec.max_rel_imag}


def convergence_study(cfg: ScenarioConfig, levels: int, eigen: bool = True) -> dict:
    """Rerun ``cfg`` halving ``h`` and ``dt`` per level and report observed orders."""
    if not isinstance(levels, int) or levels < 3:
        raise ConfigError(f"a convergence study needs levels >= 3, got {levels!r}")
    rows = []
    for k in range(levels):
        c = copy.deepcopy(cfg)
        c.n = (cfg.n - 1) * 2**k + 1
        c.dt = cfg.step / 2**k
        c.stride = cfg.stride * 2**k
        c.out_dir = os.path.join(cfg.out_dir, f"level{k}") if cfg.out_dir else None
        c.plots = False
        res = run_scenario(c)
        row = {"level": k, "n": c.n, "h": c.h, "dt": c.dt,
               "side_drift_rel": res.summary["mass"]["side_drift_rel"],
               "fixed_point_residual": res.summary["fixed_point_residual"],
               "max_step_total_change": res.summary["mass"]["max_step_total_change"]}
        if eigen:
            geom = cfg.params
            ev = discrete_eigen_errors(geom, c.n)
            row["eigen_rel_err"] = ev["rel_err"]
            row["kernel_dim"] = ev["kernel_dim"]
        rows.append(row)
    fp = [r["fixed_point_residual"] for r in rows]
    report = {
        "config": cfg.to_dict(),
        "input_hash": input_hash(cfg),
        "levels": rows,
        "order_side_drift": _order([r["side_drift_rel"] for r in rows]),
        "order_fixed_point": _order(fp),
        "fixed_point_monotone": bool(all(b < a for a, b in zip(fp[:-1], fp[1:]))),
    }
    if eigen:
        report["order_eigen"] = _order([max(r["eigen_rel_err"]) for r in rows])
    if cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(cfg.out_dir) / "convergence.json", "w") as fh:
            json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
    return report


# ------------------------------------------------------------------- sweep


def sample_equilibria(prm: ModelParams, chi: float, count: int, seed=0,
                      lam_span: float = 1.0) -> list:
    """``count`` equilibria with ``p0`` uniform in ``(-A+a, B-a)`` and ``lambda0`` in ``[chi, chi+lam_span]``."""
    if not chi > 0:
        raise ConfigError(f"chi must be positive, got {chi}")
    if count < 0:
        raise ConfigError("count must be >= 0")
    rng = np.random.default_rng(seed)
    lo, hi = -prm.A + prm.a, prm.B - prm.a
    out = []
    for _ in range(count):
        p0 = float(rng.uniform(lo, hi))
        while not lo < p0 < hi:
            p0 = float(rng.uniform(lo, hi))
        out.append(Equilibrium(p0, float(chi + lam_span * rng.uniform())))
    return out


def case_checks(res: ScenarioResult, gap: float) -> dict:
    """Per-run checks: conservation, decay rate and limit selection."""
    s = res.summary
    fit = s["decay_fit"]
    rate_ok = bool(fit is not None and abs(fit["gamma_fit"] - gap) <= RATE_REL_TOL * gap)
    return {
        "conservation": bool(s["mass"]["side_drift_rel"] <= MASS_DRIFT_TOL
                             and s["mass"]["max_step_total_change"] <= STEP_MASS_TOL),
        "decay_rate": rate_ok,
        "limit": bool(s["attained"]["err_linf"] <= s["tolerances"]["limit_linf"]),
    }


def sweep_equilibria(chi: float, count: int, seed=0, params: ModelParams | None = None,
                     n: int = 801, rel_amplitude: float = 0.4, t_end: float | None = None,
                     perturbation: str = "first-eigenfunction", out_dir=None) -> dict:
    """Perturb ``count`` random equilibria with ``lambda0 >= chi`` and check each run.

    The perturbation amplitude is ``rel_amplitude`` times the smallness guard
    ``lambda0*a/8`` of each equilibrium.
    """
    prm = params or ModelParams(1.0, 1.0, 0.4)
    eqs = sample_equilibria(prm, chi, count, seed)
    cases = []
    for k, e in enumerate(eqs):
        cfg = ScenarioConfig(prm, e, perturbation=perturbation, n=n, t_end=t_end, seed=seed + k,
                             amplitude=rel_amplitude * min(e.lambda0 * prm.a / 8, e.lambda0),
                             out_dir=os.path.join(out_dir, f"case{k}") if out_dir else None)
        entry = {"p0": e.p0, "lambda0": e.lambda0, "amplitude": cfg.amplitude}
        try:
            res = run_scenario(cfg)
        except PriceFormationError as exc:
            entry.update(converged=False, error=f"{type(exc).__name__}: {exc}")
            cases.append(entry)
            continue
        gap = res.summary["spectral_gap"]["distributional"]
        checks = case_checks(res, gap)
        fit = res.summary["decay_fit"]
        entry.update(converged=checks["limit"], checks=checks, gap=gap,
                     gap_shift=res.summary["spectral_gap"]["shift"],
                     gamma_fit=fit["gamma_fit"] if fit else None,
                     side_drift_rel=res.summary["mass"]["side_drift_rel"],
                     limit_err_linf=res.summary["attained"]["err_linf"],
                     limit_tol=res.summary["tolerances"]["limit_linf"])
        cases.append(entry)
    fits = [c["gamma_fit"] / c["gap"] for c in cases if c.get("gamma_fit")]
    drifts = [c["side_drift_rel"] for c in cases if "side_drift_rel" in c]
    report = {"chi": chi, "count": count, "seed": seed, "params": prm.to_dict(),
              "cases": cases,
              "all_converged": bool(all(c["converged"] for c in cases)),
              "all_checks": bool(all(c.get("checks") and all(c["checks"].values()) for c in cases)),
              "worst_rate_ratio": float(min(fits)) if fits else None,
              "worst_side_drift_rel": float(max(drifts)) if drifts else None}
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "sweep.json", "w") as fh:
            json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
    return report
