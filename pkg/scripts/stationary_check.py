"""Stationary maximum for a constant drift (known exponential law) and the cosine model."""

import argparse
import math
import time

from scipy import stats

import nsrbm as N
from nsrbm.rbm import sample_triplets
from nsrbm.stats import summarize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--algorithm", choices=["alg1", "alg2"], default="alg2")
    args = ap.parse_args()

    const = N.normalize(N.constant_model(-1.0))
    t0 = time.perf_counter()
    b = sample_triplets(const, math.inf, args.trials, args.seed, args.algorithm)
    s = summarize(b.M, reference=0.5)
    p = stats.kstest(b.M, "expon", args=(0, 0.5)).pvalue
    print(f"constant mu=-1: mean {s.mean:.4f} (exact 0.5), SE {s.se:.2e}, KS vs Exp(2) p={p:.3g}, "
          f"{time.perf_counter() - t0:.1f}s")

    cos = N.normalize(N.cosine_model())
    t0 = time.perf_counter()
    b = sample_triplets(cos, math.inf, args.trials, args.seed + 1, args.algorithm)
    s = summarize(b.M)
    print(f"cosine: mean {s.mean:.4f}, 90% CI [{s.ci90[0]:.4f}, {s.ci90[1]:.4f}], SE {s.se:.2e}, "
          f"mean iterations {b.iterations.mean():.3f}, {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
