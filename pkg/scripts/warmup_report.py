"""Warm-up recommendation against the analytic bound for several starting states."""

import argparse

import nsrbm as N
from nsrbm.rbm import plan_warmup


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=4)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--horizon", type=float, default=50.0)
    args = ap.parse_args()

    # integer horizon: the reversed cosine coefficients coincide with the forward ones
    model = N.normalize(N.reverse_spec(N.cosine_model(), args.horizon))
    print(f"{'x0':>5} {'recommended':>12} {'quantile':>9} {'SE':>7} {'bound':>7} {'never idle':>10}")
    for x0 in (0.0, 0.5, 1.0, 2.0):
        p = plan_warmup(model, args.epsilon, args.horizon, x0, args.trials, args.seed)
        rec = "none" if p.recommended is None else f"{p.recommended:.3f}"
        q = "none" if p.quantile is None else f"{p.quantile:.3f}"
        print(f"{x0:5.1f} {rec:>12} {q:>9} {p.se:7.3f} {p.bound:7.3f} {p.n_infinite:10d}")
    print(p.note)


if __name__ == "__main__":
    main()
