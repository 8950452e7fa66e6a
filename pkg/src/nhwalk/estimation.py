"""Synthetic photon-count records and grid-based Bayesian inference of a coin angle."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError, SupportMismatchWarning
from .fisher import _map, transient_state
from .walk import LOCKED, Coin, WalkConfig, probabilities

PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class MeasurementRecord:
    """Counts per site from M detected photons.

    The multinomial coefficient M!/prod(m_j!) is dropped from every
    likelihood; it does not depend on theta and cancels in the posterior.
    """

    counts: np.ndarray
    theta_true: float = math.nan
    seed: int | None = None
    config: dict | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or (counts < 0).any() or not np.issubdtype(counts.dtype, np.integer):
            raise ValueError("counts must be a 1-D array of non-negative integers")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {
            "counts": [int(c) for c in self.counts],
            "M": self.total,
            "theta_true": None if math.isnan(self.theta_true) else float(self.theta_true),
            "seed": self.seed,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurementRecord":
        counts = np.asarray(data["counts"], dtype=np.int64)
        if "M" in data and int(data["M"]) != int(counts.sum()):
            raise ValueError(f"M={data['M']} does not match the counts total {int(counts.sum())}")
        theta = data.get("theta_true")
        return cls(counts, math.nan if theta is None else float(theta), data.get("seed"), data.get("config"))

    @classmethod
    def from_json(cls, text: str) -> "MeasurementRecord":
        return cls.from_dict(json.loads(text))


def validate_distribution(p) -> np.ndarray:
    p = np.asarray(p, float)
    if p.ndim != 1 or len(p) == 0 or not np.isfinite(p).all():
        raise ValueError("probability vector must be a finite 1-D array")
    if (p < -1e-12).any():
        raise ValueError(f"negative probability {p.min():.3g}")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum():.12g}, not 1")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_counts(p, M: int, seed: int, theta_true: float = math.nan, config: dict | None = None) -> MeasurementRecord:
    """Multinomial draw of M photons over the sites, reproducible from `seed`."""
    if M < 1:
        raise ValueError("M must be >= 1")
    p = validate_distribution(p)
    counts = np.random.default_rng(seed).multinomial(int(M), p)
    return MeasurementRecord(counts, theta_true, seed, config)


@dataclass
class TransientModel:
    """Position distribution of the transient probe as a function of the estimated angle."""

    config: WalkConfig
    steps: int | None = None
    coin: Coin = Coin.V
    parameter: str = LOCKED
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, theta: float) -> np.ndarray:
        key = float(theta)
        if key not in self._cache:
            steps = self.config.n if self.steps is None else self.steps
            cfg = self.config.with_parameter(self.parameter, key)
            self._cache[key] = probabilities(transient_state(cfg, steps, self.coin))
        return self._cache[key]


def likelihood_table(forward_model, theta_grid, workers: int = 1) -> np.ndarray:
    """Model distributions stacked over the grid, shape (len(grid), sites)."""
    return np.stack(_map(forward_model, np.asarray(theta_grid, float), workers))


def log_likelihood_from_table(counts, table) -> np.ndarray:
    counts = np.asarray(counts)
    table = np.asarray(table, float)
    if counts.sum() == 0:
        return np.zeros(table.shape[0])
    tiny = table <= PROB_FLOOR
    if (tiny & (counts > 0)).any():
        warnings.warn("counts observed where the model probability is below the floor",
                      SupportMismatchWarning, stacklevel=2)
    return np.log(np.maximum(table, PROB_FLOOR)) @ counts


def log_likelihood(record: MeasurementRecord, theta_grid, forward_model, workers: int = 1) -> np.ndarray:
    """sum_j m_j ln p_j(theta) on the grid (multinomial coefficient dropped)."""
    if record.total == 0:
        return np.zeros(len(theta_grid))
    return log_likelihood_from_table(record.counts, likelihood_table(forward_model, theta_grid, workers))


@dataclass(frozen=True)
class Posterior:
    theta_grid: np.ndarray
    log_posterior: np.ndarray
    pdf: np.ndarray
    mean: float
    std: float

    @property
    def map(self) -> float:
        return float(self.theta_grid[int(np.argmax(self.pdf))])

    @property
    def excess_kurtosis(self) -> float:
        m4 = np.trapezoid((self.theta_grid - self.mean) ** 4 * self.pdf, self.theta_grid)
        return float(m4 / self.std ** 4 - 3.0)


def posterior(log_like, theta_grid, prior=None, min_points: int = 200,
              check_resolution: bool = True) -> Posterior:
    """Normalized grid posterior from log-likelihood values and a prior.

    `prior` is None (flat), a callable density or an array of density values
    on the grid. Raises ResolutionError when the std is below two grid steps.
    """
    grid = np.asarray(theta_grid, float)
    ll = np.asarray(log_like, float)
    if len(grid) < min_points:
        raise ValueError(f"posterior grid needs at least {min_points} points, got {len(grid)}")
    if ll.shape != grid.shape:
        raise ValueError("log-likelihood and grid differ in shape")
    if prior is None:
        log_prior = np.zeros_like(grid)
    else:
        dens = np.asarray(prior(grid) if callable(prior) else prior, float)
        if dens.shape != grid.shape or (dens < 0).any():
            raise ValueError("prior must be a non-negative density on the grid")
        with np.errstate(divide="ignore"):
            log_prior = np.log(dens)
    lp = ll + log_prior
    lp = lp - lp.max()
    w = np.exp(lp)
    pdf = w / np.trapezoid(w, grid)
    mean = float(np.trapezoid(grid * pdf, grid))
    std = float(math.sqrt(max(np.trapezoid((grid - mean) ** 2 * pdf, grid), 0.0)))
    step = float(np.min(np.diff(grid)))
    if check_resolution and std < 2 * step:
        raise ResolutionError(f"posterior std {std:.3g} below two grid steps ({2 * step:.3g}); refine the grid")
    return Posterior(grid, lp, pdf, mean, std)


def crb_bound(fisher_value: float, M: int) -> float:
    """Smallest standard deviation allowed by the Cramer-Rao bound, 1/sqrt(M F)."""
    if not fisher_value > 0:
        raise ValueError(f"Fisher information must be positive, got {fisher_value!r}")
    if M < 1:
        raise ValueError("M must be >= 1")
    return 1.0 / math.sqrt(M * fisher_value)


@dataclass
class CoarseTable:
    """Forward model tabulated once on the full prior range, reused across records."""

    grid: np.ndarray
    table: np.ndarray

    @classmethod
    def build(cls, forward_model, prior_range=(0.0, math.pi), points: int = 2001, workers: int = 1):
        grid = np.linspace(prior_range[0], prior_range[1], points)
        return cls(grid, likelihood_table(forward_model, grid, workers))


def estimate_angle(record: MeasurementRecord, forward_model, coarse: CoarseTable,
                   fine_points: int = 401, edge_tol: float = 1e-8, max_widen: int = 6) -> Posterior:
    """Flat-prior posterior: coarse scan of the prior range, then a fine window around its mode.

    The window starts at +-8 coarse steps and doubles until the posterior
    density at both edges is below `edge_tol` times its peak.
    """
    ll = log_likelihood_from_table(record.counts, coarse.table)
    k = int(np.argmax(ll))
    step = coarse.grid[1] - coarse.grid[0]
    lo_bound, hi_bound = coarse.grid[0], coarse.grid[-1]
    half = 8 * step
    post = None
    for _ in range(max_widen + 1):
        lo = max(lo_bound, coarse.grid[k] - half)
        hi = min(hi_bound, coarse.grid[k] + half)
        fine = np.linspace(lo, hi, fine_points)
        post = posterior(log_likelihood(record, fine, forward_model), fine)
        edges = post.pdf[[0, -1]] / post.pdf.max()
        at_bound = (lo <= lo_bound, hi >= hi_bound)
        if all(e < edge_tol or b for e, b in zip(edges, at_bound)):
            return post
        half *= 2
    return post
