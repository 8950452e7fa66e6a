"""Coverage, Cramer-Rao comparison and precision profile of grid Bayesian estimation."""

import argparse
import math
from dataclasses import dataclass

import numpy as np

from nhwalk.estimation import CoarseTable, TransientModel, estimate_angle, sample_counts
from nhwalk.fisher import ProbeSpec, fisher_sweep
from nhwalk.walk import Coin, WalkConfig

from _common import PI, pi_grid, write_outputs

CASES = {
    "point": (0.9, Coin.V, (0.05, 0.2, 0.01)),
    "line": (0.05, Coin.H_MINUS_V, (0.65, 0.85, 0.01)),
}


@dataclass
class Config:
    case: str = "point"
    n: int = 15
    gamma: float = 0.3
    M: int = 25000
    trials: int = 100
    seed: int = 0
    out: str = "results/bayes"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--case", choices=sorted(CASES), default=Config.case)
    ap.add_argument("--trials", type=int, default=Config.trials)
    ap.add_argument("--M", type=int, default=Config.M)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--out", default=Config.out)
    args = ap.parse_args()
    cfg = Config(case=args.case, M=args.M, trials=args.trials, seed=args.seed, out=args.out)

    fixed, coin, window = CASES[cfg.case]
    thetas = pi_grid(*window)
    wall = WalkConfig.domain_wall(cfg.n, fixed * PI, thetas[0], cfg.gamma)
    model = TransientModel(wall, cfg.n, coin)
    coarse = CoarseTable.build(model)
    sw = fisher_sweep(wall, thetas, ProbeSpec(coin=coin))

    rows = []
    for trial in range(cfg.trials):
        k = trial % len(thetas)
        seed = cfg.seed + trial
        post = estimate_angle(sample_counts(model(thetas[k]), cfg.M, seed, thetas[k]), model, coarse)
        crb = 1 / math.sqrt(cfg.M * sw.qfi[k])
        rows.append((trial, thetas[k] / PI, post.mean / PI, post.std / PI, crb / PI, seed))
    data = np.array([r[1:5] for r in rows])
    z = (data[:, 1] - data[:, 0]) / data[:, 2]
    profile = [float(data[np.isclose(data[:, 0], t / PI), 2].mean()) for t in thetas]
    summary = {
        "coverage_2sigma": float(np.mean(np.abs(z) <= 2)),
        "z_std": float(z.std()),
        "min_std_ratio_to_crb": float((data[:, 2] / data[:, 3]).min()),
        "best_theta_over_pi": float(thetas[int(np.argmin(profile))] / PI),
        "cfi_peak_theta_over_pi": sw.peak_theta_cfi / PI,
    }
    for k, v in summary.items():
        print(f"{k}: {v}")
    write_outputs(cfg.out, f"bayes_{cfg.case}", ["trial", "theta_true_over_pi", "theta_est_over_pi",
                                                 "std_over_pi", "crb_over_pi", "seed"], rows, cfg, summary)


if __name__ == "__main__":
    main()
