"""From side masses to the stationary state and the spectrum of its linearisation.

Run with ``python3 demos/equilibrium_and_spectrum.py``.
"""
import numpy as np

from priceformation import (MassPair, ModelParams, analytic_spectrum, assemble_discrete_operator,
                            discrete_spectrum, equilibrium_from_masses, make_grid, spectral_gap)

prm = ModelParams(A=1.0, B=2.0, a=0.4)
masses = MassPair(0.2, 0.4)

# buyers hold 0.2 to the left of the price, vendors 0.4 to the right
eq = equilibrium_from_masses(masses, prm)
print(f"equilibrium: p0 = {eq.p0:.7f}, lambda0 = {eq.lambda0:.6f}")

# the spectrum is computed about p0 = 0 here; recentre when p0 matters
for conv in ("distributional", "shift"):
    print(f"\n{conv} convention, gap = {spectral_gap(prm, conv):.4f}")
    for ep in analytic_spectrum(prm, 4, conv):
        print(f"  alpha = {ep.alpha:8.4f}  mu = {ep.mu:10.4f}  dim = {ep.dim}  from {ep.families}")

# the grid operator reproduces the analytic values and a two-dimensional kernel
grid = make_grid(prm, 801)
for conv in ("distributional", "shift"):
    vals = np.sort(discrete_spectrum(assemble_discrete_operator(grid, convention=conv), 6)
                   .values.real)[::-1]
    print(f"\ndiscrete ({conv}, n=801): {np.round(vals, 4)}")
