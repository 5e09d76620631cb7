"""Finite-grid look at the iterated-logarithm scaling of sup |X(s)|.

Three exhibits: the deterministic gap ratios that make the lower grid
T_k = exp(k (log k)^-3) dense enough for liminf arguments, a running
minimum of scaled distances sampled along that grid, and the analytic
convergence test for power-of-log scaling functions.
"""

import numpy as np

from stable_smallball import RngStream
from stable_smallball.lil import (
    DIAGNOSTIC_NOTE,
    GridSpec,
    grid_gap_ratios,
    integral_test,
    running_min_trace,
    sample_scaled_distances,
)
from stable_smallball.processes import power_loglog_scaling


def main(alpha=1.5, delta=0.5, seed=47):
    print("gap ratios of consecutive lower-grid horizons (all -> 0, 0, 1):")
    print(f"{'k':>9s} {'r1':>10s} {'r2':>10s} {'1-r3':>10s}")
    for k in (10**3, 10**4, 10**5, 10**6):
        r1, r2, r3 = grid_gap_ratios(k, delta, alpha)
        print(f"{k:>9d} {r1:>10.2e} {r2:>10.2e} {1.0 - r3:>10.2e}")

    spec = GridSpec(kind="lower", k_min=2000, k_max=2100)
    records = sample_scaled_distances(spec, delta, alpha, None, n_steps=256,
                                      rng=RngStream(seed))
    trace = running_min_trace(records)
    print(f"\nscaled distances on k = {spec.k_min}..{spec.k_max} "
          f"(delta = {delta}):")
    dist = np.array([rec.distance for rec in records])
    print(f"mean {dist.mean():.3f}, min {dist.min():.3f}, "
          f"running min after sweep {trace[-1][1]:.3f}")
    print(f"note: {DIAGNOSTIC_NOTE}")

    print("\nintegral test for h(t) = (log t)^p (log log t)^q:")
    for p, q in ((2.0 / alpha, 0.0), (1.0 / alpha, 0.0),
                 (1.0 / alpha, 2.0 / alpha), (0.0, -1.0 / alpha)):
        res = integral_test(power_loglog_scaling(p, q), alpha)
        print(f"  p = {p:.3f}, q = {q:+.3f}: {res.classification}")


if __name__ == "__main__":
    main()
