"""CFI peak scaling exponent under coin dephasing for each channel placement."""

import argparse
from dataclasses import dataclass, field

from nhwalk.fisher import scaling_fit
from nhwalk.noise import PLACEMENTS, NoiseSpec, noisy_cfi_sweep
from nhwalk.walk import WalkConfig

from _common import PI, pi_grid, write_outputs


@dataclass
class Config:
    gamma: float = 0.3
    sizes: list = field(default_factory=lambda: [21, 31, 41, 51, 61])
    etas: list = field(default_factory=lambda: [1.0, 0.995, 0.98, 0.95])
    placements: list = field(default_factory=lambda: list(PLACEMENTS))
    out: str = "results/noise"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Config.out)
    ap.add_argument("--placement", choices=PLACEMENTS, action="append")
    args = ap.parse_args()
    cfg = Config(out=args.out)
    if args.placement:
        cfg.placements = args.placement

    thetas = pi_grid(0.08, 0.2, 0.005)
    rows, summary = [], {}
    for placement in cfg.placements:
        for eta in cfg.etas:
            peaks = []
            for size in cfg.sizes:
                wall = WalkConfig.domain_wall((size - 1) // 2, 0.9 * PI, 0.1 * PI, cfg.gamma)
                mean, _ = noisy_cfi_sweep(wall, thetas, noise=NoiseSpec(eta=eta, placement=placement))
                peaks.append(float(mean.max()))
                rows.append((placement, eta, size, peaks[-1]))
            fit = scaling_fit(cfg.sizes, peaks)
            summary[f"{placement}_eta{eta}"] = fit.exponent
            print(f"{placement:9s} eta={eta:<6} b = {fit.exponent:.3f} (r^2 {fit.r_squared:.4f})")
    write_outputs(cfg.out, "noise_scaling", ["placement", "eta", "N", "peak_cfi"], rows, cfg, summary)


if __name__ == "__main__":
    main()
