#!/usr/bin/env python3
"""D2D delivery probability vs. building outer-wall penetration loss (dB)."""
import argparse
import csv
import sys
from dataclasses import replace

from d2drelay.config import load_config, scenario_from_config
from d2drelay.sim import SweepSpec, sweep

GRID = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="optional scenario config")
    ap.add_argument("--out", default="results_wall.csv")
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--band", default="UL", choices=["DL", "UL"])
    args = ap.parse_args()

    scenario = scenario_from_config(load_config(args.config), seed_override=args.seed)
    scenario = replace(scenario, band=args.band)
    spec = SweepSpec(
        axis="wall_loss", grid=GRID, strategies=("SPR", "IAR"), trials_per_point=args.trials
    )
    rows = sweep(spec, scenario, workers=args.workers)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["wall_loss_db", "strategy", "band", "d2d_success", "ci_low", "ci_high",
                    "mean_hops", "mean_route_len_m", "cc_outage"])
        for r in rows:
            w.writerow([r.axis_value, r.strategy, r.band, r.d2d_success, r.ci_low, r.ci_high,
                        r.mean_hops, r.mean_route_len_m, r.cc_outage])
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
