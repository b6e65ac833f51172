"""The numerical oracles on a small sweep.

Each closed-form path is retro-integrated from its terminal state with RK4,
with the controls re-derived from the running costate. The tour then probes
the barrier at the four BUP angles, including the rho_v = 0 case where the
probe stalls on a singular arc instead of leaving the disk.

    python3 demos/verification_tour.py
"""

from ddr_escape import GameParams
from ddr_escape.verification import barrier_probe, run_verification

rep = run_verification(rho_v=(0.2, 0.6), rho_l=(2.0, 6.0), n_per_arc=4, dt=1e-3,
                       n_saddle=4)
for c in rep.checks:
    print(f"{'PASS' if c.passed else 'FAIL'} {c.name:24s} {c.value:.2e} (tol {c.tol:g})")

for rv in (0.6, 0.05, 0.0):
    b = barrier_probe(GameParams.from_ratios(rv, 2.0))
    print(f"barrier rho_v={rv:g}: exit steps {b.exit_step}, "
          f"max |r - r_d| {max(b.max_radius_change):.1e}")
