"""Command line entry point: ``python -m priceformation <command> --config cfg.json``.

Exit status is 0 on success, 2 for a bad configuration and 3 when the solver
or an eigensolver fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .errors import (ConfigError, ConvergenceFailure, InvalidParams, NoConvergence, NotAdmissible,
                     OutOfDomain, SingularJacobian, SolverError)
from .grid import make_grid, read_csv
from .harness import (ScenarioConfig, _jsonable, convergence_study, run_scenario,
                      sweep_equilibria, write_svg)
from .manifold import project_kernel
from .model import MassPair, ModelParams, admissible, equilibrium_from_masses
from .spectral import (CONVENTIONS, analytic_spectrum, assemble_discrete_operator,
                       discrete_spectrum, eigenfunction_eval, spectral_gap)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _load(path) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _params(d: dict) -> ModelParams:
    if "params" not in d:
        raise ConfigError("config needs a 'params' object with A, B, a")
    try:
        return ModelParams.from_dict(d["params"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad params: {exc}") from exc


def _emit(obj: dict, out, name: str) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text + "\n")
    print(text)


def cmd_equilibrium(args) -> dict:
    d = _load(args.config)
    prm = _params(d)
    try:
        m = MassPair.from_dict(d["masses"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config needs masses m1, m2 > 0: {exc}") from exc
    if not admissible(m, prm):
        raise ConfigError(f"masses {m} are not admissible for {prm}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = equilibrium_from_masses(m, prm)
    out = {"params": prm.to_dict(), "masses": {"m1": m.m1, "m2": m.m2},
           "p0": e.p0, "lambda0": e.lambda0}
    _emit(out, args.out, "equilibrium.json")
    return out


def cmd_spectrum(args) -> dict:
    d = _load(args.config)
    prm = _params(d)
    conv = d.get("convention", "distributional")
    if conv not in CONVENTIONS:
        raise ConfigError(f"convention must be one of {CONVENTIONS}")
    count = int(d.get("count", 5))
    pairs = analytic_spectrum(prm, count, conv)
    out = {"params": prm.to_dict(), "convention": conv, "gap": spectral_gap(prm, conv),
           "eigenvalues": [{"alpha": ep.alpha, "mu": ep.mu, "dim": ep.dim,
                            "families": list(ep.families), "case": ep.case} for ep in pairs]}
    if d.get("n"):
        M = assemble_discrete_operator(make_grid(prm, int(d["n"])), convention=conv)
        sp = discrete_spectrum(M, 2 + 2 * count)
        out["discrete"] = {"n": int(d["n"]), "values": [float(v.real) for v in sp.values],
                           "max_rel_imag": sp.max_rel_imag}
    _emit(out, args.out, "spectrum.json")
    if args.out:
        with open(Path(args.out) / "spectrum.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "mu", "dim", "family", "case"])
            for ep in pairs:
                w.writerow([repr(ep.alpha), repr(ep.mu), ep.dim, "+".join(ep.families),
                            "" if ep.case is None else ep.case])
        if d.get("plots"):
            x = np.linspace(-prm.A, prm.B, 801)
            series = [(f"alpha={ep.alpha:.4g}", x, eigenfunction_eval(ep, 0, x))
                      for ep in pairs[:4]]
            write_svg(Path(args.out) / "eigenfunctions.svg", series, "first eigenfunctions",
                      "x", "g")
    return out


def _scenario(args, d) -> ScenarioConfig:
    d = dict(d)
    if args.out:
        d["out_dir"] = args.out
    if args.seed is not None:
        d["seed"] = args.seed
    return ScenarioConfig.from_dict(d)


def cmd_simulate(args) -> dict:
    cfg = _scenario(args, _load(args.config))
    res = run_scenario(cfg)
    print(json.dumps(_jsonable(res.summary), indent=2, sort_keys=True))
    return res.summary


def cmd_project(args) -> dict:
    d = _load(args.config)
    prm = _params(d)
    src = args.csv or d.get("csv")
    if not src:
        raise ConfigError("project needs a grid-function CSV (--csv or 'csv' in the config)")
    try:
        f = read_csv(src, prm)
    except OSError as exc:
        raise ConfigError(f"cannot read {src}: {exc}") from exc
    k = project_kernel(f, prm, d.get("convention", "distributional"), float(d.get("center", 0.0)))
    out = {"c": k.c, "d": k.d, "I1": k.I1, "I2": k.I2}
    _emit(out, args.out, "projection.json")
    return out


def cmd_convergence(args) -> dict:
    d = _load(args.config)
    levels = d.get("levels", 3)
    cfg = _scenario(args, {k: v for k, v in d.items() if k != "levels"})
    rep = convergence_study(cfg, levels)
    print(json.dumps(_jsonable(rep), indent=2, sort_keys=True))
    return rep


def cmd_sweep(args) -> dict:
    d = _load(args.config)
    prm = _params(d)
    try:
        chi, count = float(d["chi"]), int(d["count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"sweep config needs chi and count: {exc}") from exc
    seed = args.seed if args.seed is not None else int(d.get("seed", 0))
    rep = sweep_equilibria(chi, count, seed, prm, n=int(d.get("n", 801)),
                           rel_amplitude=float(d.get("rel_amplitude", 0.4)),
                           t_end=d.get("t_end"), out_dir=args.out)
    print(json.dumps(_jsonable(rep), indent=2, sort_keys=True))
    return rep


COMMANDS = {
    "equilibrium": (cmd_equilibrium, "side masses -> equilibrium (p0, lambda0)"),
    "spectrum": (cmd_spectrum, "analytic (and optional discrete) spectrum of the linearisation"),
    "simulate": (cmd_simulate, "run a perturbed-equilibrium scenario"),
    "project": (cmd_project, "kernel coordinates (c, d) of a grid-function CSV"),
    "convergence": (cmd_convergence, "grid refinement study of a scenario"),
    "sweep": (cmd_sweep, "perturbation runs over random equilibria with lambda0 >= chi"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="priceformation", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomised parts")
        if name == "project":
            sp.add_argument("--csv", help="grid-function CSV with header x,value")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    try:
        fn(args)
    except (ConfigError, InvalidParams, NotAdmissible, OutOfDomain) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ConvergenceFailure, NoConvergence, SingularJacobian) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK
