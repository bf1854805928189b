"""RMSE against computing budget for the exact sampler and the discretization, with fitted slopes."""

import argparse
import csv
import json
import tempfile
from pathlib import Path

from nsrbm import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None, help="output directory (default: temporary)")
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--repetitions", type=int, default=8)
    ap.add_argument("--reference-trials", type=int, default=100_000)
    args = ap.parse_args()

    out = Path(args.out or tempfile.mkdtemp(prefix="nsrbm-conv-"))
    out.mkdir(parents=True, exist_ok=True)
    ini = out / "convergence.ini"
    ini.write_text(f"[model]\nkind = cosine\n[run]\nhorizon = inf\nseed = {args.seed}\nout = {out}\n"
                   f"[convergence]\nrepetitions = {args.repetitions}\nreference_trials = {args.reference_trials}\n")
    code = cli.main(["convergence", "--config", str(ini)])
    if code:
        raise SystemExit(code)
    with open(out / "convergence.csv") as fh:
        for row in csv.DictReader(fh):
            print(f"{float(row['budget']):10.3g} {row['arm']:>8} N={row['N']:>6} rmse={float(row['rmse']):.4g}")
    rep = json.loads((out / "convergence.json").read_text())
    print(f"slopes: exact {rep['slope_exact']['slope']:.3f}, baseline {rep['slope_baseline']['slope']:.3f}; "
          f"output in {out}")


if __name__ == "__main__":
    main()
