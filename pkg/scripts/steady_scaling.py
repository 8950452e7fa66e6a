"""Steady-state QFI peak scaling at both transitions and at fixed off-critical angles."""

import argparse
from dataclasses import dataclass, field

from nhwalk.fisher import ProbeSpec, fixed_point_scaling, peak_scaling
from nhwalk.walk import WalkConfig

from _common import PI, pi_grid, write_outputs


@dataclass
class Config:
    gamma: float = 0.3
    sizes: list = field(default_factory=lambda: [51, 61, 71, 81, 91, 101])
    point_window: tuple = (0.06, 0.15, 0.002)
    line_window: tuple = (0.74, 0.82, 0.002)
    point_away: float = 0.15
    line_away: float = 0.79
    out: str = "results/steady"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Config.out)
    cfg = Config(out=ap.parse_args().out)

    probe = ProbeSpec("steady")
    cases = {
        "point": (WalkConfig.domain_wall(10, 0.9 * PI, 0.1 * PI, cfg.gamma), cfg.point_window, cfg.point_away),
        "line": (WalkConfig.domain_wall(10, 0.05 * PI, 0.779 * PI, cfg.gamma), cfg.line_window, cfg.line_away),
    }
    rows, summary = [], {}
    for label, (wall, window, away_theta) in cases.items():
        crit = peak_scaling(wall, cfg.sizes, pi_grid(*window), probe)
        away = fixed_point_scaling(wall, cfg.sizes, away_theta * PI, probe)
        for size, t, v, a in zip(cfg.sizes, crit.peak_theta, crit.peak_value, away.peak_value):
            rows.append((label, size, t / PI, v, a))
        summary[f"{label}_b"] = crit.fit.exponent
        summary[f"{label}_away_b"] = away.fit.exponent
        print(f"{label}: b = {crit.fit.exponent:.3f}, away b = {away.fit.exponent:.3f}")
    write_outputs(cfg.out, "steady_scaling",
                  ["gap", "N", "peak_theta_over_pi", "peak_qfi", "away_qfi"], rows, cfg, summary)


if __name__ == "__main__":
    main()
