"""Estimate shifted small-ball probabilities: crude counting vs tilting.

The crude estimator counts paths that stay inside the shifted ball.  The
importance-sampling estimator removes the big jumps analytically, tilts the
remaining small-jump measure toward the shift, and reweights; at equal path
budgets its confidence interval is several times narrower.
"""

from stable_smallball import AlphaStableParams, RngStream, identity_shift
from stable_smallball.smallball import (
    SmallBallQuery,
    estimate_crude,
    estimate_is,
    prob_no_big_jumps,
)


def main(alpha=1.5, c=0.2, n_paths=10_000, n_steps=512, seed=23):
    params = AlphaStableParams(alpha)
    f = identity_shift()
    print(f"alpha = {alpha}, shift f(t) = t with coupling c = {c}, "
          f"{n_paths} paths x {n_steps} steps per estimate\n")
    print(f"{'r':>5s} {'crude':>11s} {'+-':>9s} {'IS':>11s} {'+-':>9s} "
          f"{'ess':>6s} {'se ratio':>9s}")
    for i, r in enumerate((0.7, 0.8, 0.9, 1.0)):
        query = SmallBallQuery.middle(params, f, c, r)
        crude = estimate_crude(query, n_paths, n_steps=n_steps,
                               rng=RngStream(seed).child(0, i))
        imps = estimate_is(query, n_paths, n_steps=n_steps,
                           rng=RngStream(seed).child(1, i))
        if crude.stderr > 0.0 and imps.stderr > 0.0:
            ratio = f"{crude.stderr / imps.stderr:>9.1f}"
        else:
            ratio = f"{'--':>9s}"  # crude saw no hits at all
        print(f"{r:>5.2f} {crude.value:>11.3e} {crude.stderr:>9.1e} "
              f"{imps.value:>11.3e} {imps.stderr:>9.1e} {imps.ess:>6.0f} "
              f"{ratio}")

    p_trunc = prob_no_big_jumps(alpha, 1.0)
    print(f"\nexact no-jump-above-r factor at r = 1: {p_trunc:.4f}")
    print("the IS estimate = that factor x a tilted conditional estimate,")
    print("so its error comes only from the conditional part")


if __name__ == "__main__":
    main()
