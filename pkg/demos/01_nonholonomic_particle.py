"""The nonholonomic particle, end to end.

A free particle in R^3 subject to the constraint u3 + q1 u2 = 0.  The script
derives the constrained dynamics from the frame data, compares it with the
closed form, inspects the multiplier, integrates a trajectory, and shows that
the momentum section is weakly but not strongly consistent (the invariant
measure density is not constant for this system).
"""

import numpy as np

from framedyn import (IntegratorConfig, MomentumSection, QuasiState,
                      ZeroSection, builtin, consistency_report, drift_report,
                      integrate, measure_density, sample_states,
                      solve_gamma_C, NonholonomicField)

sysd = builtin("nonholonomic_particle")
L, F, split = sysd.lagrangian(), sysd.frame(), sysd.split()
field = NonholonomicField(L, F, split)

print("== system ==")
print(f"coordinates: {sysd.coords}, constraint fields span D = <X_1, X_2>")
print(f"Lagrangian:  {sysd.lagrangian_expr}")
print(f"X_2 row:     {sysd.frame_exprs[1]}   (constraint u3 + q1 u2 = 0)")

# --- pointwise dynamics --------------------------------------------------
s = QuasiState.on_C(np.array([0.8, 0.0, 0.0]), [1.2, -0.5], split)
gamma = field.gamma(s)
q1, v1, v2 = 0.8, 1.2, -0.5
print("\n== dynamics at one state ==")
print(f"Gamma     = {gamma}")
print(f"closed    = [0, -q1 v1 v2/(1+q1^2)] = [0, {-q1*v1*v2/(1+q1**2):.6f}]")
print(f"lambda    = {field.multipliers(s)}  "
      f"(closed: {-v1*v2/(1+q1**2):.6f})")

# --- a trajectory with observables ---------------------------------------
s0 = QuasiState.on_C(np.array([0.0, 0.0, 0.0]), [1.0, 1.0], split)
cfg = IntegratorConfig(step=1e-3, t_span=(0.0, 10.0),
                       observables=("energy", "momenta", "multipliers"))
traj = integrate(field, F, split, s0, cfg)
rep = drift_report(traj, L, F, split)
print("\n== trajectory on [0, 10], RK4 h=1e-3 ==")
print(f"energy drift:        {rep['energy_drift']:.3e}")
print(f"residual (fund/ham): {rep['max_residual_fundamental']:.3e} "
      f"/ {rep['max_residual_hamel']:.3e}")
print(f"final q:             {traj.q[-1]}")

# --- consistency of the vakonomic problem --------------------------------
states = sample_states(sysd, 200, seed=0)
zero = consistency_report(L, F, split, ZeroSection(F, split), states)
mom = consistency_report(L, F, split, MomentumSection(L, F, split), states)
print("\n== consistency over 200 sampled states ==")
print("zero section:     weak defect max "
      f"{np.max(np.abs(zero.weak_defect)):.2e}  (always consistent)")
print("                  strong defect max "
      f"{np.max(np.abs(zero.strong_defect)):.2e}  (= multipliers)")
print("momentum section: weak defect max "
      f"{np.max(np.abs(mom.weak_defect)):.2e}  -> not consistent")
print(f"measure density:  N(0) = {measure_density(sysd, 0.0):.4f}, "
      f"N(1) = {measure_density(sysd, 1.0):.4f}  (not constant)")

sol = solve_gamma_C(L, F, split, ZeroSection(F, split), states)
print("zero-section Gamma_C equals Gamma: max diff "
      f"{np.max(np.abs(sol.gamma_C - field.gamma(states))):.2e}")
