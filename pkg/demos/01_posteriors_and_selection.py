"""Walk through the core posterior quantities on the worked-example model.

Each unit's effect is exactly zero with prior probability 0.9 and otherwise
drawn from Normal(2.5, variance 0.5); observations are z ~ Normal(effect, 1).
We evaluate the marginal, the local and tail-area false discovery rates, and
the exceedance probabilities P(effect > k | z) that rank units by how likely
their effect is to be scientifically large, not merely nonzero.

Run:  python3 demos/01_posteriors_and_selection.py
"""

import numpy as np

from twogroups import (
    MixingDistribution,
    TwoGroupsModel,
    exceedance_probability,
    expected_exceedance_in_tail,
    h_posterior,
    local_fdr,
    select_and_rank,
    tail_fdr,
)

model = TwoGroupsModel(p0=0.9, g=MixingDistribution.normal(2.5, 0.5))

print("Marginal structure at the selection threshold z = 3.5")
print(f"  f0(3.5) = {model.null_density(3.5):.6f}")
print(f"  f1(3.5) = {model.alt_marginal_density(3.5):.6f}   (= Normal(2.5, 1.5) density)")
print(f"  f(3.5)  = {model.marginal_density(3.5):.6f}")
print(f"  P(Z >= 3.5) = {model.marginal_upper_tail(3.5):.4%}  -> about "
      f"{3000 * model.marginal_upper_tail(3.5):.0f} of 3000 units selected")

print("\nPosterior of the effect given z = 3.5")
print(f"  local fdr(3.5)      = {local_fdr(model, 3.5):.5f}   (mass of the atom at zero)")
print(f"  upper tail Fdr(3.5) = {tail_fdr(model, 3.5, tail='upper'):.5f}")
hp = h_posterior(model, 3.5)
print(f"  non-null part: Normal({hp.mean:.4f}, {hp.variance:.4f})")

print("\nExceedance probabilities at z = 3.5")
for k in (0.0, 2.0, 2.8):
    print(f"  P(effect > {k:3.1f} | z = 3.5) = {exceedance_probability(model, 3.5, k=k):.4f}")

print("\nPopulation averages over the selected region Z >= 3.5 (by quadrature)")
for k in (0.0, 2.0, 2.8):
    print(f"  E[P(effect > {k:3.1f} | Z) | Z >= 3.5] = "
          f"{expected_exceedance_in_tail(model, 3.5, k):.4f}")

print("\nThe same numbers on a simulated panel of 3000 units")
panel, effects = model.sample_panel(3000, seed=0)
report = select_and_rank(model, panel, threshold_z=3.5, k=2.8, extra_ks=(2.0, 0.0))
print(f"  selected: {report.n_selected}")
for k in (0.0, 2.0, 2.8):
    true_frac = np.mean(effects[panel.z >= 3.5] > k)
    print(f"  k = {k:3.1f}: averaged exceedance {report.averaged_by_k[k]:.3f}, "
          f"realised fraction with effect > k: {true_frac:.3f}")
print("\nTop five units by P(effect > 2.8 | z):")
for s in report.selected[:5]:
    print(f"  {s.id}  z = {s.z:6.3f}  fdr = {s.fdr:.5f}  "
          f"P(>2.8) = {s.exceedance[2.8]:.4f}")
