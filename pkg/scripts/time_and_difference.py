"""Time trace of the transient QFI against the steady state, and forward vs converged CFI across sizes."""

import argparse
from dataclasses import dataclass, field

from nhwalk.fisher import ProbeSpec, _forward_pair, fisher_point, fisher_sweep, fisher_time_trace, \
    probe_family, steady_state_fisher
from nhwalk.walk import WalkConfig

from _common import PI, pi_grid, write_outputs


@dataclass
class Config:
    trace_n: int = 25
    trace_multiple: int = 10
    sizes: list = field(default_factory=lambda: [11, 21, 31, 51, 101])
    step: float = 0.01
    out: str = "results/time_and_difference"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Config.out)
    cfg = Config(out=ap.parse_args().out)

    wall = WalkConfig.domain_wall(cfg.trace_n, 0.9 * PI, 0.1 * PI, 0.3)
    size = 2 * cfg.trace_n + 1
    trace = fisher_time_trace(wall, 0.1 * PI, cfg.trace_multiple * size)
    steady = steady_state_fisher(wall, 0.1 * PI)[0]
    rows = [(int(t), t / size, q, c) for t, q, c in zip(trace.steps, trace.qfi, trace.cfi)]
    print(f"QFI({cfg.trace_multiple}N) = {trace.qfi[-1]:.1f}, steady state {steady:.1f}")
    write_outputs(cfg.out, "time_trace", ["step", "t_over_N", "qfi", "cfi"], rows, cfg, {"steady_qfi": steady})

    step = cfg.step * PI
    rows = []
    for size in cfg.sizes:
        probe = ProbeSpec(coin="V")
        sized = wall.with_size((size - 1) // 2)
        family = probe_family(sized, probe)
        peak = fisher_sweep(sized, pi_grid(0.06, 0.2, 0.005), probe).peak_theta_cfi
        for theta in (peak, 0.2 * PI):
            converged = fisher_point(sized, theta, probe)[1]
            forward = _forward_pair(family(theta), family(theta + step), step)[1]
            rows.append((size, theta / PI, forward, converged, forward / converged - 1))
            print(f"N={size:4d} theta={theta / PI:.3f}pi forward={forward:.1f} converged={converged:.1f} "
                  f"excess={forward / converged - 1:+.3f}")
    write_outputs(cfg.out, "forward_difference",
                  ["N", "theta_over_pi", "forward_cfi", "converged_cfi", "relative_excess"], rows, cfg, {})


if __name__ == "__main__":
    main()
