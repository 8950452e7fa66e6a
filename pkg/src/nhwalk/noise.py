"""Imperfection models: coin dephasing, wave-plate angle jitter and CFI error bars."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import NumericalError, UnderflowError
from .fisher import cfi_position
from .walk import (LOCKED, Coin, StepOperator, WalkConfig, assemble_operator, initial_state,
                   step_factors)

PLACEMENTS = ("shift", "step_end", "one_shot")
JITTER_MODES = ("static_per_run", "per_step")


@dataclass(frozen=True)
class NoiseSpec:
    """Dephasing retention eta, jitter half-width W (radians), ensemble size and seed.

    `placement` says where the per-step channel acts: "shift" applies it
    between the local coin/loss and the shift of each step, "step_end" after
    the full step, "one_shot" once on the final state.
    """

    eta: float = 1.0
    W: float = 0.0
    runs: int = 1
    seed: int = 0
    jitter_mode: str = "static_per_run"
    placement: str = "shift"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta!r}")
        if not (np.isfinite(self.W) and self.W >= 0):
            raise ValueError(f"W must be finite and >= 0, got {self.W!r}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs!r}")
        if self.jitter_mode not in JITTER_MODES:
            raise ValueError(f"jitter_mode must be one of {JITTER_MODES}")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"placement must be one of {PLACEMENTS}")


@dataclass(frozen=True)
class DensityState:
    """Density matrix over (site, coin) with the accumulated log of removed trace."""

    rho: np.ndarray
    log_trace: float = 0.0

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    @classmethod
    def pure(cls, amplitudes) -> "DensityState":
        v = np.asarray(amplitudes, complex)
        return cls(np.outer(v, v.conj()))

    def normalize(self) -> "DensityState":
        tr = self.trace
        if not tr > 1e-300:
            raise UnderflowError(f"trace {tr:.3g} collapsed")
        return DensityState(self.rho / tr, self.log_trace + math.log(tr))

    def site_distribution(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).reshape(-1, 2).sum(axis=1)

    def check(self, herm_tol: float = 1e-10, psd_tol: float = 1e-9) -> None:
        if np.abs(self.rho - self.rho.conj().T).max() > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min() < -psd_tol:
            raise ValueError("density matrix is not positive semidefinite")


def coin_signs(dim: int) -> np.ndarray:
    """Diagonal of I (x) sigma_z in the (j, H), (j, V) basis."""
    return np.tile([1.0, -1.0], dim // 2)


def _dephase(rho: np.ndarray, eta: float) -> np.ndarray:
    # sigma_z conjugation flips the sign of coin-off-diagonal entries only
    s = coin_signs(rho.shape[0])
    flip = np.outer(s, s)
    return rho * (eta + (1.0 - eta) * flip)


def depolarize(state: DensityState, eta: float) -> DensityState:
    """eta rho + (1 - eta) (I (x) sigma_z) rho (I (x) sigma_z)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    return DensityState(_dephase(state.rho, eta), state.log_trace)


def _conjugate(mat, rho):
    # mat rho mat^dagger, using that rho stays Hermitian
    return mat @ (mat @ rho).conj().T


def _run_density(rho, factor_seq, steps, eta, placement):
    log_trace = 0.0
    for t in range(steps):
        shift_rot, local = factor_seq(t)
        if placement == "shift":
            rho = _conjugate(local, rho)
            rho = _dephase(rho, eta)
            rho = _conjugate(shift_rot, rho)
        else:
            rho = _conjugate(shift_rot, _conjugate(local, rho))
            if placement == "step_end":
                rho = _dephase(rho, eta)
        tr = float(np.trace(rho).real)
        if not tr > 1e-300:
            raise UnderflowError(f"trace {tr:.3g} collapsed at step {t + 1}")
        rho = rho / tr
        log_trace += math.log(tr)
    if placement == "one_shot":
        rho = _dephase(rho, eta)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityState(rho, log_trace)


def _sparse_factors(shift_rot, local):
    return sparse.csr_matrix(shift_rot), sparse.csr_matrix(local)


def evolve_density(rho0: DensityState, op: StepOperator, steps: int, eta: float = 1.0,
                   placement: str = "shift") -> DensityState:
    """Per-step evolution with coin dephasing and trace renormalization."""
    if rho0.rho.shape != (op.dim, op.dim):
        raise ValueError(f"density dimension {rho0.rho.shape} does not match operator {op.dim}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    if placement not in PLACEMENTS:
        raise ValueError(f"placement must be one of {PLACEMENTS}")
    factors = _sparse_factors(*step_factors(op.config))
    start = rho0.normalize()
    out = _run_density(start.rho, lambda t: factors, steps, eta, placement)
    return DensityState(out.rho, start.log_trace + out.log_trace)


# ------------------------------------------------------------------ noisy CFI

@dataclass(frozen=True)
class NoisyCFI:
    mean: float
    std: float
    values: np.ndarray
    failures: list = field(default_factory=list)


def _jitter_draws(config: WalkConfig, steps: int, noise: NoiseSpec, run: int):
    if noise.W == 0:
        return None
    rng = np.random.default_rng(noise.seed + run)
    shape = (config.size,) if noise.jitter_mode == "static_per_run" else (max(steps, 1), config.size)
    return rng.uniform(-noise.W, noise.W, shape), rng.uniform(-noise.W, noise.W, shape)


def _noisy_distribution(config: WalkConfig, steps: int, coin, noise: NoiseSpec, draws) -> np.ndarray:
    t1, t2 = config.site_angles()
    if draws is None or noise.jitter_mode == "static_per_run":
        d1, d2 = (0.0, 0.0) if draws is None else draws
        fixed = _sparse_factors(*assemble_operator(t1 + d1, t2 + d2, config.gamma,
                                                   config.boundary, return_factors=True))
        factor_seq = lambda t: fixed
    else:
        d1, d2 = draws
        factor_seq = lambda t: _sparse_factors(*assemble_operator(
            t1 + d1[t], t2 + d2[t], config.gamma, config.boundary, return_factors=True))
    rho0 = DensityState.pure(initial_state(config, coin).amplitudes)
    return _run_density(rho0.rho, factor_seq, steps, noise.eta, noise.placement).site_distribution()


def cfi_noisy(config: WalkConfig, theta: float, steps: int, psi0=Coin.V, noise: NoiseSpec = NoiseSpec(),
              derivative_scheme: str = "converged", parameter: str = LOCKED, h: float = 1e-5,
              step: float | None = None) -> NoisyCFI:
    """Mean and spread of the position CFI over a seeded ensemble of noisy runs.

    Each run draws its jitter once and reuses it at every theta needed for
    the derivative, so the difference quotient sees only the theta change.
    """
    if derivative_scheme == "converged":
        offsets = (h, -h)
    elif derivative_scheme == "forward_paper":
        if step is None:
            raise ValueError("forward_paper scheme needs a step")
        offsets = (step, 0.0)
    else:
        raise ValueError(f"unknown derivative scheme {derivative_scheme!r}")
    values, failures = [], []
    # without jitter every run is the same deterministic computation
    distinct_runs = noise.runs if noise.W > 0 else 1
    for run in range(distinct_runs):
        draws = _jitter_draws(config, steps, noise, run)
        try:
            dist = lambda th: _noisy_distribution(config.with_parameter(parameter, th), steps, psi0, noise, draws)
            p = dist(theta)
            pa, pb = dist(theta + offsets[0]), dist(theta + offsets[1])
            dp = (pa - pb) / (offsets[0] - offsets[1])
            values.append(cfi_position(p, dp))
        except NumericalError as exc:
            failures.append((run, str(exc)))
    if not values:
        raise NumericalError(f"all {noise.runs} noisy runs failed: {failures[0][1]}")
    vals = np.array(values)
    if distinct_runs < noise.runs:
        vals = np.full(noise.runs, vals[0])
    # shifting by one sample keeps identical runs at exactly zero spread
    return NoisyCFI(float(vals.mean()), float((vals - vals[0]).std()), vals, failures)


def noisy_cfi_sweep(config: WalkConfig, theta_grid, steps: int | None = None, psi0=Coin.V,
                    noise: NoiseSpec = NoiseSpec(), parameter: str = LOCKED, h: float = 1e-5):
    """Ensemble-mean CFI and its standard deviation over a theta grid."""
    steps = config.n if steps is None else steps
    res = [cfi_noisy(config, th, steps, psi0, noise, parameter=parameter, h=h) for th in theta_grid]
    return np.array([r.mean for r in res]), np.array([r.std for r in res])


# ------------------------------------------------------------------ error bars

def cfi_error_propagation(counts_i, counts_next, delta_theta: float,
                          uncertainty_i=None, uncertainty_next=None) -> tuple[float, float]:
    """Forward-difference CFI from two count records and its propagated uncertainty.

    Count uncertainties default to Poisson (sqrt of the counts). Each
    normalized frequency p_j = m_j / sum(m) carries the full Jacobian of the
    ratio, including the dependence of the total on every count.
    """
    m_i = np.asarray(counts_i, float)
    m_n = np.asarray(counts_next, float)
    if m_i.shape != m_n.shape:
        raise ValueError("count records differ in length")
    if m_i.sum() <= 0 or m_n.sum() <= 0:
        raise ValueError("count records must have a positive total")
    if not delta_theta > 0:
        raise ValueError("delta_theta must be positive")
    dm_i = np.sqrt(m_i) if uncertainty_i is None else np.asarray(uncertainty_i, float)
    dm_n = np.sqrt(m_n) if uncertainty_next is None else np.asarray(uncertainty_next, float)
    p, dp_unc = _normalized_with_error(m_i, dm_i)
    q, dq_unc = _normalized_with_error(m_n, dm_n)
    keep = p > 0
    diff = q - p
    F = float(np.sum(diff[keep] ** 2 / p[keep]) / delta_theta ** 2)
    dF_dq = np.zeros_like(p)
    dF_dp = np.zeros_like(p)
    dF_dq[keep] = 2 * diff[keep] / (delta_theta ** 2 * p[keep])
    dF_dp[keep] = (p[keep] ** 2 - q[keep] ** 2) / (delta_theta ** 2 * p[keep] ** 2)
    dF = float(np.sqrt(np.sum((dF_dq * dq_unc) ** 2 + (dF_dp * dp_unc) ** 2)))
    return F, dF


def _normalized_with_error(m, dm):
    total = m.sum()
    p = m / total
    # d p_j / d m_k = delta_jk / M - m_j / M^2
    jac = np.eye(len(m)) / total - np.outer(m, np.ones(len(m))) / total ** 2
    err = np.sqrt((jac ** 2) @ (dm ** 2))
    return p, err
