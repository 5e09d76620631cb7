"""Tabulate the numeric constants of the small-deviation toolkit.

For each stability index alpha: the characteristic-exponent scale c_alpha,
the small-ball rate constant K_alpha from the spectral route and from a
quick Monte Carlo fit, and the (much larger) shift-cost constant C(alpha)
that bounds how much a middle-regime shift can raise the rate.
"""

from stable_smallball import RngStream
from stable_smallball.constants import (
    char_exponent_scale,
    middle_shift_constant,
    smallball_constant_mc,
    smallball_constant_spectral,
)


def main(mc_paths=20_000, mc_steps=512, seed=31):
    # radii grow with alpha to keep the exit-free fraction resolvable:
    # -log p ~ K(alpha) r^-alpha and K grows quickly with alpha
    radii = {1.2: (0.7, 0.85, 1.0, 1.2), 1.5: (0.8, 0.95, 1.1, 1.3),
             1.8: (1.4, 1.6, 1.8, 2.0)}
    print(f"{'alpha':>6s} {'c_alpha':>9s} {'K spectral':>11s} {'K mc':>7s} "
          f"{'+-':>6s} {'C(alpha)':>10s}")
    for i, alpha in enumerate((1.2, 1.5, 1.8)):
        spectral = smallball_constant_spectral(alpha, n_grid=512)
        mc = smallball_constant_mc(alpha, r_list=radii[alpha],
                                   n_paths=mc_paths, n_steps=mc_steps,
                                   rng=RngStream(seed).child(i))
        print(f"{alpha:>6.1f} {char_exponent_scale(alpha):>9.4f} "
              f"{spectral.value:>11.4f} {mc.value:>7.3f} "
              f"{mc.diagnostics['slope_stderr']:>6.3f} "
              f"{middle_shift_constant(alpha):>10.1f}")
    print("\nK mc fits -log p(r) against r^-alpha on moderate radii, so it")
    print("sits a little below the asymptotic spectral value; the two agree")
    print("to ~10% and tighten with more paths and smaller radii")


if __name__ == "__main__":
    main()
