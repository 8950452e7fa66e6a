"""Transient QFI/CFI around the point-gap transition: peak location and size scaling."""

import argparse
from dataclasses import dataclass, field

from nhwalk.fisher import ProbeSpec, fisher_sweep, fixed_point_scaling, peak_scaling, piecewise_scaling_fit
from nhwalk.walk import Coin, WalkConfig

from _common import PI, pi_grid, write_outputs


@dataclass
class Config:
    fixed: float = 0.9
    gamma: float = 0.3
    sweep_n: int = 50
    sizes: list = field(default_factory=lambda: list(range(21, 102, 10)))
    away: float = 0.2
    out: str = "results/point_gap"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Config.out)
    cfg = Config(out=ap.parse_args().out)

    wall = WalkConfig.domain_wall(cfg.sweep_n, cfg.fixed * PI, 0.1 * PI, cfg.gamma)
    probe = ProbeSpec(coin=Coin.V)
    sw = fisher_sweep(wall, pi_grid(0.02, 0.2, 0.005), probe)
    rows = [(round(t / PI, 12), q, c) for t, q, c in zip(sw.theta_grid, sw.qfi, sw.cfi)]

    crit = peak_scaling(wall, cfg.sizes, pi_grid(0.06, 0.2, 0.01), probe)
    away = fixed_point_scaling(wall, cfg.sizes, cfg.away * PI, probe)
    knee = piecewise_scaling_fit(cfg.sizes, away.peak_value)
    summary = {
        "peak_theta_qfi_over_pi": sw.peak_theta_qfi / PI,
        "peak_theta_cfi_over_pi": sw.peak_theta_cfi / PI,
        "critical_b": crit.fit.exponent,
        "critical_peak_theta_over_pi": [t / PI for t in crit.peak_theta],
        "away_b": away.fit.exponent,
        "away_knee_N": knee.knee,
        "away_b_left": knee.left.exponent,
        "away_b_right": knee.right.exponent,
    }
    for k, v in summary.items():
        print(f"{k}: {v}")
    write_outputs(cfg.out, "sweep", ["theta_over_pi", "qfi", "cfi"], rows, cfg, summary)


if __name__ == "__main__":
    main()
