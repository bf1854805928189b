"""Compare the two barrier-level rules of the stationary sampler: iterations and wall time."""

import argparse
import math
import time

import numpy as np
from scipy import stats

import nsrbm as N
from nsrbm.rbm import Alg2Config, sample_triplets


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--epsilon", type=float, default=0.1)
    args = ap.parse_args()

    model = N.normalize(N.cosine_model())
    out = {}
    for rule in ("standard", "improved"):
        cfg = Alg2Config(epsilon=args.epsilon, beta_rule=rule)
        t0 = time.perf_counter()
        b = sample_triplets(model, math.inf, args.trials, args.seed, "alg2", cfg)
        dt = time.perf_counter() - t0
        out[rule] = b.M
        print(f"{rule:>9}: {1e6 * dt / args.trials:7.1f} us/draw, mean K {b.iterations.mean():.3f}, "
              f"mean skeleton {np.mean(b.skeleton_points):.1f}, mean M {b.M.mean():.4f}")
    p = stats.ks_2samp(out["standard"], out["improved"]).pvalue
    print(f"KS between rules: p={p:.3g}")


if __name__ == "__main__":
    main()
