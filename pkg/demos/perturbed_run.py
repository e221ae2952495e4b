"""Perturb the symmetric equilibrium and watch the error decay.

Two perturbations are compared: the first eigenfunction of each of the two
readings of the dipole coupling.  The simulated dynamics decay at the gap of
the ``shift`` reading.  Writes its bundles under ``demo_out/``.
"""
import json

from priceformation.harness import ScenarioConfig, run_scenario

base = {"params": {"A": 1.0, "B": 1.0, "a": 0.4}, "masses": {"m1": 0.3, "m2": 0.3},
        "n": 801, "t_end": 1.0, "stride": 4, "plots": True}

for conv in ("distributional", "shift"):
    cfg = ScenarioConfig.from_dict({**base, "out_dir": f"demo_out/perturbed_{conv}",
                                    "perturbation": {"kind": "first-eigenfunction",
                                                     "amplitude": 0.02, "convention": conv}})
    s = run_scenario(cfg).summary
    print(f"{conv} eigenfunction: fitted rate {s['decay_fit']['gamma_fit']:.3f}, "
          f"gaps {json.dumps({k: round(v, 4) for k, v in s['spectral_gap'].items()})}, "
          f"final linf error {s['attained']['err_linf']:.2e}")
print("bundles (CSV, JSON, SVG) written to demo_out/")
