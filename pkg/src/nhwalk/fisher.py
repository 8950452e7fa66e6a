"""Quantum and classical Fisher information of walker probes, sweeps and scaling fits."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import t as student_t

from .errors import ConditioningWarning, ConvergenceError, NumericalError, TrackingError
from .spectral import dominant_state
from .walk import (LOCKED, Coin, WalkConfig, build_step_operator, coin_vector, evolve,
                   initial_state, probabilities, WalkerState)

DEFAULT_H = 1e-5
QFI_RTOL = 1e-4


# ------------------------------------------------------------------ formulas

def qfi_pure(state, dstate) -> float:
    """4 (<d|d> - |<d|psi>|^2) for a normalized state and its derivative."""
    state = np.asarray(state)
    dstate = np.asarray(dstate)
    nrm = np.linalg.norm(state)
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"state must be normalized, norm = {nrm:.12g}")
    dd = float(np.vdot(dstate, dstate).real)
    overlap = np.vdot(dstate, state)
    value = 4.0 * (dd - abs(overlap) ** 2)
    if value < -1e-12 * max(1.0, 4.0 * dd):
        raise NumericalError(f"negative QFI {value:.3g}: derivative inconsistent with state")
    return max(value, 0.0)


def cfi_position(p, dp, floor: float = 1e-15) -> float:
    """sum_j dp_j^2 / p_j over outcomes with p_j above `floor`."""
    p = np.asarray(p, float)
    dp = np.asarray(dp, float)
    if p.shape != dp.shape:
        raise ValueError("p and dp must have the same length")
    if (p < -1e-12).any():
        raise ValueError(f"negative probability {p.min():.3g}")
    keep = p > floor
    dropped = ~keep & (np.abs(dp) > 1e-10)
    if dropped.any():
        warnings.warn(f"{int(dropped.sum())} outcomes below floor carry |dp| > 1e-10",
                      ConditioningWarning, stacklevel=2)
    return float(np.sum(dp[keep] ** 2 / p[keep]))


def fidelity_qfi(psi, psi_h, h: float) -> float:
    """Fidelity estimate 8 (1 - |<psi(theta)|psi(theta + h)>|) / h^2."""
    return 8.0 * (1.0 - abs(np.vdot(psi, psi_h))) / h ** 2


def align_phase(reference, vec):
    """Multiply `vec` by the unit phase making <reference|vec> real and positive."""
    ov = np.vdot(reference, vec)
    if ov == 0:
        return vec
    return vec * (np.conj(ov) / abs(ov))


def probability_derivative(state, dstate) -> np.ndarray:
    """d p_j = 2 Re sum_c conj(psi_jc) dpsi_jc."""
    return (2.0 * (np.conj(state) * dstate).real).reshape(-1, 2).sum(axis=1)


# ------------------------------------------------------------------ probes

@dataclass(frozen=True)
class ProbeSpec:
    """What state is measured: the transient |Psi(T)> or the dominant (steady) state."""

    kind: str = "transient"
    steps: int | None = None
    coin: Coin = Coin.V
    parameter: str = LOCKED
    parity: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("transient", "steady"):
            raise ValueError(f"probe kind must be 'transient' or 'steady', got {self.kind!r}")
        if self.steps is not None and self.steps < 0:
            raise ValueError("steps must be >= 0")
        object.__setattr__(self, "coin", Coin(self.coin))

    def steps_for(self, config: WalkConfig) -> int:
        return config.n if self.steps is None else int(self.steps)


def transient_state(config: WalkConfig, steps: int, coin=Coin.V) -> np.ndarray:
    state = initial_state(config, coin)
    return evolve(state, build_step_operator(config), steps).amplitudes


def steady_vector(config: WalkConfig, parity: int = 0, seed: int = 0) -> np.ndarray:
    return dominant_state(build_step_operator(config), parity=parity, seed=seed)[1]


def probe_family(config: WalkConfig, probe: ProbeSpec) -> Callable[[float], np.ndarray]:
    """theta -> normalized probe amplitudes, with theta the probe's parameter."""
    if probe.kind == "transient":
        steps = probe.steps_for(config)
        return lambda theta: transient_state(config.with_parameter(probe.parameter, theta), steps, probe.coin)
    return lambda theta: steady_vector(config.with_parameter(probe.parameter, theta), probe.parity, probe.seed)


# ------------------------------------------------------------------ derivatives

@dataclass(frozen=True)
class DerivativeResult:
    state: np.ndarray
    derivative: np.ndarray
    error: float
    h: float

    @property
    def qfi(self) -> float:
        return qfi_pure(self.state, self.derivative)

    @property
    def cfi(self) -> float:
        p = probabilities(self.state)
        return cfi_position(p, probability_derivative(self.state, self.derivative))


def _central(center, plus, minus, h, check_tracking):
    plus = align_phase(center, plus)
    minus = align_phase(center, minus)
    if check_tracking:
        for v in (plus, minus):
            if abs(np.vdot(center, v)) < 0.9:
                raise TrackingError("dominant state jumped between neighbouring parameters")
    return (plus - minus) / (2 * h)


def converged_derivative(family, theta: float, h: float = DEFAULT_H, max_halvings: int = 4,
                         rtol: float = QFI_RTOL, check_tracking: bool = False) -> DerivativeResult:
    """Gauge-aligned central difference, halving h until the QFI is stable to `rtol`.

    The returned derivative is the Richardson combination of steps h and h/2;
    `error` is the norm of their difference divided by 3.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    center = family(theta)
    prev = _central(center, family(theta + h), family(theta - h), h, check_tracking)
    prev_q = qfi_pure(center, prev)
    for _ in range(max_halvings + 1):
        half = h / 2
        cur = _central(center, family(theta + half), family(theta - half), half, check_tracking)
        cur_q = qfi_pure(center, cur)
        scale = max(cur_q, prev_q)
        if scale == 0 or abs(cur_q - prev_q) <= rtol * scale:
            err = float(np.linalg.norm(cur - prev)) / 3.0
            return DerivativeResult(center, cur + (cur - prev) / 3.0, err, half)
        prev, prev_q, h = cur, cur_q, half
    raise ConvergenceError(f"QFI not stable under step halving at theta={theta:.10g} (last h={h:.3g})")


def state_derivative(config: WalkConfig, theta_name: str, steps: int, psi0=Coin.V,
                     h: float = DEFAULT_H) -> DerivativeResult:
    """Derivative of the normalized transient state with respect to one angle (or the locked pair).

    `psi0` is a coin label for the |0> x |coin> start or a full amplitude vector.
    """
    if isinstance(psi0, (Coin, str)):
        start = initial_state(config, psi0)
    else:
        start = WalkerState(np.asarray(psi0, complex)).normalize()

    def family(theta):
        op = build_step_operator(config.with_parameter(theta_name, theta))
        return evolve(start, op, steps).amplitudes

    return converged_derivative(family, config.parameter(theta_name), h)


def fisher_point(config: WalkConfig, theta: float, probe: ProbeSpec,
                 h: float = DEFAULT_H) -> tuple[float, float]:
    """(QFI, CFI) of the probe at one parameter value with the converged scheme."""
    res = converged_derivative(probe_family(config, probe), theta, h,
                               check_tracking=probe.kind == "steady")
    return res.qfi, res.cfi


def steady_state_fisher(config: WalkConfig, theta: float, derivative_scheme: str = "converged",
                        parameter: str = LOCKED, h: float = DEFAULT_H, parity: int = 0,
                        step: float | None = None) -> tuple[float, float]:
    """(QFI, CFI) of the dominant eigenvector, followed by overlap across theta +- h.

    With derivative_scheme="forward_paper" a forward difference with `step`
    replaces the converged central difference.
    """
    probe = ProbeSpec("steady", parameter=parameter, parity=parity)
    if derivative_scheme == "converged":
        return fisher_point(config, theta, probe, h)
    if derivative_scheme != "forward_paper" or step is None:
        raise ValueError("forward_paper scheme needs a step")
    family = probe_family(config, probe)
    return _forward_pair(family(theta), family(theta + step), step)


def _forward_pair(center, nxt, step):
    nxt = align_phase(center, nxt)
    d = (nxt - center) / step
    q = qfi_pure(center, d)
    p0 = probabilities(center)
    dp = (probabilities(nxt) - p0) / step
    return q, cfi_position(p0, dp)


# ------------------------------------------------------------------ sweeps

@dataclass
class FisherSweep:
    theta_grid: np.ndarray
    qfi: np.ndarray
    cfi: np.ndarray
    probe: ProbeSpec
    scheme: str
    config: WalkConfig
    failures: list = field(default_factory=list)

    def peak(self, which: str = "qfi") -> tuple[float, float]:
        values = getattr(self, which)
        if np.all(np.isnan(values)):
            return math.nan, math.nan
        i = int(np.nanargmax(values))
        return float(self.theta_grid[i]), float(values[i])

    @property
    def peak_theta_qfi(self):
        return self.peak("qfi")[0]

    @property
    def peak_theta_cfi(self):
        return self.peak("cfi")[0]


def check_uniform_grid(theta_grid) -> np.ndarray:
    grid = np.asarray(theta_grid, float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("theta grid needs at least two points")
    steps = np.diff(grid)
    if (steps <= 0).any():
        raise ValueError("theta grid must be strictly increasing")
    if np.abs(steps - steps.mean()).max() > 1e-9 * max(abs(steps.mean()), 1e-300) + 1e-12:
        raise ValueError("theta grid must be uniform")
    return grid


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def fisher_sweep(config_template: WalkConfig, theta_grid, probe: ProbeSpec = ProbeSpec(),
                 derivative_scheme: str = "converged", h: float = DEFAULT_H,
                 workers: int = 1) -> FisherSweep:
    """QFI and CFI over a uniform grid of the probe parameter.

    "converged" differentiates each point with a small central step;
    "forward_paper" uses (f(theta_{i+1}) - f(theta_i)) / dtheta at the grid
    spacing, which overestimates near sharp peaks. Failing points become NaN
    and are listed in `failures` as (index, theta, message).
    """
    grid = check_uniform_grid(theta_grid)
    family = probe_family(config_template, probe)
    qfi = np.full(len(grid), np.nan)
    cfi = np.full(len(grid), np.nan)
    failures = []

    if derivative_scheme == "converged":
        def point(theta):
            try:
                return fisher_point(config_template, theta, probe, h)
            except NumericalError as exc:
                return exc

        results = _map(point, grid, workers)
        for i, r in enumerate(results):
            if isinstance(r, Exception):
                failures.append((i, float(grid[i]), str(r)))
            else:
                qfi[i], cfi[i] = r
    elif derivative_scheme == "forward_paper":
        step = grid[1] - grid[0]
        points = np.append(grid, grid[-1] + step)

        def state(theta):
            try:
                return family(theta)
            except NumericalError as exc:
                return exc

        states = _map(state, points, workers)
        for i in range(len(grid)):
            a, b = states[i], states[i + 1]
            if isinstance(a, Exception) or isinstance(b, Exception):
                failures.append((i, float(grid[i]), str(a if isinstance(a, Exception) else b)))
                continue
            qfi[i], cfi[i] = _forward_pair(a, b, step)
    else:
        raise ValueError(f"unknown derivative scheme {derivative_scheme!r}")
    return FisherSweep(grid, qfi, cfi, probe, derivative_scheme, config_template, failures)


def interior_peak_index(values) -> int | None:
    """Index of the largest local maximum whose two neighbours are finite, or None."""
    v = np.asarray(values, float)
    best = None
    for i in range(1, len(v) - 1):
        if not np.isfinite(v[i - 1:i + 2]).all():
            continue
        if v[i] >= v[i - 1] and v[i] >= v[i + 1] and (best is None or v[i] > v[best]):
            best = i
    return best


def refine_peak(config: WalkConfig, theta_grid, values, probe: ProbeSpec, which: str = "qfi",
                h: float = DEFAULT_H, interior: bool = False, xatol: float = 1e-7) -> tuple[float, float]:
    """Maximize QFI or CFI between the grid neighbours of the discrete peak.

    With `interior` the discrete peak must be a local maximum with finite
    neighbours, which skips spikes next to invalid regions.
    """
    grid = np.asarray(theta_grid, float)
    values = np.asarray(values, float)
    i = interior_peak_index(values) if interior else (
        None if np.all(np.isnan(values)) else int(np.nanargmax(values)))
    if i is None:
        raise NumericalError("no usable peak on the grid")
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    pick = 0 if which == "qfi" else 1

    def neg(theta):
        try:
            return -fisher_point(config, theta, probe, h)[pick]
        except NumericalError:
            return math.inf

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    if -res.fun >= values[i]:
        return float(res.x), float(-res.fun)
    return float(grid[i]), float(values[i])


# ------------------------------------------------------------------ scaling

@dataclass(frozen=True)
class ScalingFit:
    sizes: np.ndarray
    values: np.ndarray
    exponent: float
    intercept: float
    r_squared: float
    stderr: float = math.nan

    def confidence_halfwidth(self, level: float = 0.95) -> float:
        """Half-width of the two-sided confidence interval of the exponent."""
        dof = len(self.sizes) - 2
        return float(student_t.ppf(0.5 + level / 2, dof) * self.stderr)


def scaling_fit(sizes, peak_values) -> ScalingFit:
    """Least-squares fit of ln(value) = b ln(N) + c."""
    sizes = np.asarray(sizes, float)
    values = np.asarray(peak_values, float)
    if len(sizes) != len(values):
        raise ValueError("sizes and values differ in length")
    if len(sizes) < 4:
        raise ValueError("scaling fit needs at least 4 sizes")
    if not (values > 0).all() or not np.isfinite(values).all():
        raise ValueError("scaling fit needs finite positive values")
    x, y = np.log(sizes), np.log(values)
    b, c = np.polyfit(x, y, 1)
    resid = y - (b * x + c)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    sxx = float(((x - x.mean()) ** 2).sum())
    stderr = math.sqrt(float((resid ** 2).sum()) / (len(x) - 2) / sxx) if sxx > 0 else math.nan
    return ScalingFit(sizes, values, float(b), float(c), min(max(r2, 0.0), 1.0), stderr)


@dataclass(frozen=True)
class PiecewiseFit:
    knee: float
    left: ScalingFit
    right: ScalingFit


def piecewise_scaling_fit(sizes, values, min_points: int = 4) -> PiecewiseFit:
    """Two power laws split at the size that minimizes the total squared log residual."""
    sizes = np.asarray(sizes, float)
    values = np.asarray(values, float)
    best = None
    for k in range(min_points, len(sizes) - min_points + 1):
        left = scaling_fit(sizes[:k], values[:k])
        right = scaling_fit(sizes[k:], values[k:])
        sse = sum(float(((np.log(f.values) - f.exponent * np.log(f.sizes) - f.intercept) ** 2).sum())
                  for f in (left, right))
        if best is None or sse < best[0]:
            best = (sse, PiecewiseFit(float(sizes[k]), left, right))
    if best is None:
        raise ValueError(f"piecewise fit needs at least {2 * min_points} sizes")
    return best[1]


@dataclass
class PeakScaling:
    sizes: list
    peak_theta: list
    peak_value: list
    fit: ScalingFit


def peak_scaling(config_template: WalkConfig, sizes, theta_grid, probe: ProbeSpec,
                 which: str = "qfi", refine: bool = True, h: float = DEFAULT_H,
                 workers: int = 1) -> PeakScaling:
    """Peak QFI/CFI over theta for each size N (odd), then the log-log fit."""
    interior = probe.kind == "steady"
    thetas, values = [], []
    for size in sizes:
        if size % 2 != 1 or size < 3:
            raise ValueError(f"sizes must be odd and >= 3, got {size}")
        cfg = config_template.with_size((size - 1) // 2)
        sw = fisher_sweep(cfg, theta_grid, probe, "converged", h, workers)
        vals = getattr(sw, which)
        if refine:
            t, v = refine_peak(cfg, sw.theta_grid, vals, probe, which, h, interior)
        else:
            i = interior_peak_index(vals) if interior else int(np.nanargmax(vals))
            if i is None:
                raise NumericalError(f"no usable peak for N={size}")
            t, v = float(sw.theta_grid[i]), float(vals[i])
        thetas.append(t)
        values.append(v)
    return PeakScaling(list(sizes), thetas, values, scaling_fit(sizes, values))


def fixed_point_scaling(config_template: WalkConfig, sizes, theta: float, probe: ProbeSpec,
                        which: str = "qfi", h: float = DEFAULT_H) -> PeakScaling:
    """QFI/CFI at a fixed theta for each size, then the log-log fit."""
    values = []
    for size in sizes:
        cfg = config_template.with_size((size - 1) // 2)
        q, c = fisher_point(cfg, theta, probe, h)
        values.append(q if which == "qfi" else c)
    return PeakScaling(list(sizes), [theta] * len(sizes), values, scaling_fit(sizes, values))


# ------------------------------------------------------------------ time trace

@dataclass(frozen=True)
class TimeTrace:
    steps: np.ndarray
    qfi: np.ndarray
    cfi: np.ndarray


def fisher_time_trace(config: WalkConfig, theta: float, t_max: int, psi0=Coin.V,
                      parameter: str = LOCKED, h: float = DEFAULT_H, rtol: float = QFI_RTOL) -> TimeTrace:
    """QFI and CFI of |Psi(t)> for t = 0..t_max from five jointly evolved states."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    offsets = (0.0, h, -h, h / 2, -h / 2)
    ops = [build_step_operator(config.with_parameter(parameter, theta + o)).sparse for o in offsets]
    start = initial_state(config, psi0).amplitudes if isinstance(psi0, (Coin, str)) \
        else WalkerState(np.asarray(psi0, complex)).normalize().amplitudes
    states = [start.copy() for _ in offsets]
    qfi = np.zeros(t_max + 1)
    cfi = np.zeros(t_max + 1)
    worst = 0.0
    for t in range(t_max + 1):
        if t > 0:
            for k, op in enumerate(ops):
                v = op @ states[k]
                states[k] = v / np.linalg.norm(v)
        c = states[0]
        d_full = _central(c, states[1], states[2], h, False)
        d_half = _central(c, states[3], states[4], h / 2, False)
        q_full, q_half = qfi_pure(c, d_full), qfi_pure(c, d_half)
        if q_half > 1e-8:
            worst = max(worst, abs(q_half - q_full) / q_half)
        qfi[t] = q_half
        cfi[t] = cfi_position(probabilities(c), probability_derivative(c, d_half))
    if worst > rtol:
        raise ConvergenceError(f"time trace QFI changes by {worst:.2e} under step halving")
    return TimeTrace(np.arange(t_max + 1), qfi, cfi)
