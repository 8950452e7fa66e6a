"""Unit-modulus deviation of the GBZ roots across the point-gap transition, with skin-effect localization."""

import argparse
from dataclasses import dataclass, field

from nhwalk.gbz import solve_gbz
from nhwalk.spectral import full_spectrum, skin_localization
from nhwalk.walk import WalkConfig, build_step_operator

from _common import PI, write_outputs


@dataclass
class Config:
    n: int = 50
    fixed: float = 0.9
    gamma: float = 0.3
    angles: list = field(default_factory=lambda: [0.04, 0.05, 0.06, 0.08, 0.09, 0.1, 0.11, 0.12, 0.14, 0.17, 0.2])
    out: str = "results/gbz"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Config.out)
    ap.add_argument("--n", type=int, default=Config.n)
    args = ap.parse_args()
    cfg = Config(n=args.n, out=args.out)

    rows = []
    for a in cfg.angles:
        wall = WalkConfig.domain_wall(cfg.n, cfg.fixed * PI, a * PI, cfg.gamma)
        res = solve_gbz(wall)
        pr = skin_localization(full_spectrum(build_step_operator(wall))).mean_participation
        row = (a, len(res.solutions), len(res.failed), res.min_unit_deviation(), res.max_unit_deviation(), pr)
        rows.append(row)
        print("theta2_L={:.3f}pi solutions={} failed={} min_dev={:.3g} max_dev={:.3g} PR={:.1f}".format(*row))
    write_outputs(cfg.out, "gbz", ["theta_over_pi", "solutions", "failed", "min_unit_deviation",
                                   "max_unit_deviation", "mean_participation"], rows, cfg, {})


if __name__ == "__main__":
    main()
