"""KS distance between exact stationary maxima and the discretization as the step shrinks."""

import argparse
import math
import time

import nsrbm as N
from nsrbm import baseline as B
from nsrbm.rbm import sample_triplets
from nsrbm.stats import ks_two_sample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--horizon", type=float, default=B.DEFAULT_HORIZON, help="discretization horizon")
    ap.add_argument("--powers", type=int, nargs="+", default=[1, 2, 4, 6, 8, 10], help="steps 2^-k")
    args = ap.parse_args()

    model = N.normalize(N.cosine_model())
    exact = sample_triplets(model, math.inf, args.trials, args.seed, "alg2").M
    print(f"{'delta':>10} {'KS':>8} {'p-value':>10} {'mean':>8} {'seconds':>8}")
    print(f"{'exact':>10} {'':>8} {'':>10} {exact.mean():8.4f}")
    for k in args.powers:
        t0 = time.perf_counter()
        approx = B.discretize_batch(model, args.horizon, 2.0**-k, args.trials, args.seed + k)[:, 0]
        r = ks_two_sample(exact, approx)
        print(f"{'2^-%d' % k:>10} {r.statistic:8.4f} {r.pvalue:10.3g} {approx.mean():8.4f} "
              f"{time.perf_counter() - t0:8.1f}")


if __name__ == "__main__":
    main()
