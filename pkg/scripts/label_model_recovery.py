"""Parameter recovery and majority-vote comparison for the EM label model.

    python3 scripts/label_model_recovery.py --sizes 1000 5000 20000 --reps 3

Label matrices are sampled from a known model with LF accuracies spread over
[--acc-low, --acc-high]. For each size the script reports the worst emission
and class-prior errors of the fit, the hard-label accuracy of the fitted model
and of majority vote, and the fit time.
"""

import argparse
import time

import numpy as np

from codeintent.labelmodel import LabelModelParams, assign_labels, fit_em, majority_vote, posteriors, sample_synthetic


def symmetric(accuracies, abstain, pi):
    em = [[[b, (1 - b) * a, (1 - b) * (1 - a)], [b, (1 - b) * (1 - a), (1 - b) * a]]
          for a, b in zip(accuracies, abstain)]
    return LabelModelParams(pi, np.array(em))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 5000, 20000])
    ap.add_argument("--n-lfs", type=int, default=8)
    ap.add_argument("--acc-low", type=float, default=0.55)
    ap.add_argument("--acc-high", type=float, default=0.95)
    ap.add_argument("--abstain", type=float, default=0.4)
    ap.add_argument("--pi", type=float, default=0.5)
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()

    true = symmetric(np.linspace(args.acc_low, args.acc_high, args.n_lfs), [args.abstain] * args.n_lfs, args.pi)
    print(f"{'m':>7}{'rep':>4}{'emis err':>10}{'pi err':>9}{'gen acc':>9}{'mv acc':>8}{'iters':>7}{'secs':>7}")
    for m in args.sizes:
        for rep in range(args.reps):
            L, y = sample_synthetic(true, m, seed=1000 * rep + m)
            t0 = time.perf_counter()
            fit = fit_em(L)
            secs = time.perf_counter() - t0
            gen = (assign_labels(posteriors(fit, L), "hard") == y).mean()
            mv = (majority_vote(L, seed=rep) == y).mean()
            print(f"{m:>7}{rep:>4}{np.abs(fit.emissions - true.emissions).max():>10.4f}"
                  f"{abs(fit.pi - true.pi):>9.4f}{gen:>9.4f}{mv:>8.4f}{fit.n_iter:>7}{secs:>7.2f}")


if __name__ == "__main__":
    main()
