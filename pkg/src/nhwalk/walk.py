"""Domain-wall step operator and walker evolution.

One step is U = R(theta1/2) S R(theta2/2) Gamma acting on the basis
(j, H), (j, V) with j in [-n, n]. The coin angles take their left values for
j < 0 and their right values for j >= 0. The second rotation acts at the source
site and the first at the destination site after the shift.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import UnderflowError

ANGLE_NAMES = ("theta1_L", "theta2_L", "theta1_R", "theta2_R")
# the estimated angle: theta2_L and theta1_R move together
LOCKED = "locked"
PARAMETER_NAMES = ANGLE_NAMES + (LOCKED,)


class Boundary(str, enum.Enum):
    OBC = "obc"
    CBC = "cbc"


class Coin(str, enum.Enum):
    H = "H"
    V = "V"
    H_MINUS_V = "H_minus_V"
    H_PLUS_V = "H_plus_V"


_COIN_VECTORS = {
    Coin.H: np.array([1.0, 0.0]),
    Coin.V: np.array([0.0, 1.0]),
    Coin.H_MINUS_V: np.array([1.0, -1.0]) / math.sqrt(2.0),
    Coin.H_PLUS_V: np.array([1.0, 1.0]) / math.sqrt(2.0),
}


@dataclass(frozen=True)
class WalkConfig:
    """Lattice size, boundary type, region coin angles (radians) and loss strength."""

    n: int
    theta1_L: float
    theta2_L: float
    theta1_R: float
    theta2_R: float
    gamma: float = 0.0
    boundary: Boundary = Boundary.OBC

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise ValueError(f"n: expected a positive integer, got {self.n!r}")
        if self.n < 1:
            raise ValueError(f"n: must be >= 1, got {self.n}")
        for name in ANGLE_NAMES:
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name}: must be finite, got {value!r}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma: must be finite and >= 0, got {self.gamma!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @classmethod
    def domain_wall(cls, n, fixed, estimated, gamma=0.3, boundary=Boundary.OBC):
        """Config with theta1_L = theta2_R = fixed and theta2_L = theta1_R = estimated."""
        return cls(n, fixed, estimated, estimated, fixed, gamma, boundary)

    @classmethod
    def homogeneous(cls, n, theta1, theta2, gamma=0.0, boundary=Boundary.CBC):
        return cls(n, theta1, theta2, theta1, theta2, gamma, boundary)

    @property
    def size(self) -> int:
        """Number of sites N = 2n + 1."""
        return 2 * self.n + 1

    @property
    def dim(self) -> int:
        return 2 * self.size

    @property
    def is_homogeneous(self) -> bool:
        return self.theta1_L == self.theta1_R and self.theta2_L == self.theta2_R

    def sites(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)

    def site_angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-site (theta1, theta2) arrays of length N."""
        left = self.sites() < 0
        t1 = np.where(left, self.theta1_L, self.theta1_R).astype(float)
        t2 = np.where(left, self.theta2_L, self.theta2_R).astype(float)
        return t1, t2

    def with_parameter(self, name: str, value: float) -> "WalkConfig":
        """Return a copy with one angle (or the locked pair) set to `value`."""
        if name == LOCKED:
            return replace(self, theta2_L=value, theta1_R=value)
        if name not in ANGLE_NAMES:
            raise ValueError(f"unknown parameter {name!r}; expected one of {PARAMETER_NAMES}")
        return replace(self, **{name: value})

    def parameter(self, name: str) -> float:
        if name == LOCKED:
            return self.theta2_L
        if name not in ANGLE_NAMES:
            raise ValueError(f"unknown parameter {name!r}; expected one of {PARAMETER_NAMES}")
        return getattr(self, name)

    def with_size(self, n: int) -> "WalkConfig":
        return replace(self, n=n)


def rotation(angle):
    """Coin rotation exp(-i angle sigma_y), real 2x2 (vectorized over angle)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def loss_matrix(gamma: float) -> np.ndarray:
    return np.diag([math.exp(gamma), math.exp(-gamma)])


def _destinations(size: int, boundary: Boundary):
    """Index of the left and right neighbour of every site (-1 where dropped)."""
    idx = np.arange(size)
    left, right = idx - 1, idx + 1
    if boundary is Boundary.CBC:
        return left % size, right % size
    right = np.where(right >= size, -1, right)
    return left, right


def assemble_operator(theta1_sites, theta2_sites, gamma, boundary, return_factors=False):
    """Dense step operator from per-site angle arrays.

    Column block of source site i sends its H part to i-1 and its V part to i+1.
    With `return_factors` the pair (R1 S, R2 Gamma) is returned instead of the product.
    """
    theta1_sites = np.asarray(theta1_sites, float)
    theta2_sites = np.asarray(theta2_sites, float)
    size = theta1_sites.shape[0]
    boundary = Boundary(boundary)
    r1 = rotation(theta1_sites / 2)
    r2g = rotation(theta2_sites / 2) @ loss_matrix(gamma)
    left, right = _destinations(size, boundary)

    shift_rot = np.zeros((2 * size, 2 * size))
    for i in range(size):
        if left[i] >= 0:
            d = left[i]
            shift_rot[2 * d:2 * d + 2, 2 * i] += r1[d][:, 0]
        if right[i] >= 0:
            d = right[i]
            shift_rot[2 * d:2 * d + 2, 2 * i + 1] += r1[d][:, 1]
    local = np.zeros((2 * size, 2 * size))
    for i in range(size):
        local[2 * i:2 * i + 2, 2 * i:2 * i + 2] = r2g[i]
    if return_factors:
        return shift_rot, local
    return shift_rot @ local


@dataclass(frozen=True)
class StepOperator:
    """Dense 2N x 2N step operator together with the config it was built from."""

    matrix: np.ndarray
    config: WalkConfig

    @cached_property
    def sparse(self):
        return sparse.csr_matrix(self.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def build_step_operator(config: WalkConfig) -> StepOperator:
    t1, t2 = config.site_angles()
    matrix = assemble_operator(t1, t2, config.gamma, config.boundary)
    return StepOperator(matrix, config)


def step_factors(config: WalkConfig) -> tuple[np.ndarray, np.ndarray]:
    """(R1 S, R2 Gamma) such that U = (R1 S) @ (R2 Gamma)."""
    t1, t2 = config.site_angles()
    return assemble_operator(t1, t2, config.gamma, config.boundary, return_factors=True)


@dataclass(frozen=True)
class WalkerState:
    """Amplitudes over (site, coin) plus the accumulated log of removed norm factors."""

    amplitudes: np.ndarray
    log_norm: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "WalkerState":
        nrm = self.norm
        if nrm == 0:
            raise UnderflowError("cannot normalize a zero state")
        return WalkerState(self.amplitudes / nrm, self.log_norm + math.log(nrm))


def coin_vector(coin) -> np.ndarray:
    return _COIN_VECTORS[Coin(coin)].astype(complex)


def initial_state(config: WalkConfig, coin=Coin.V) -> WalkerState:
    """Walker on site j = 0 with the requested coin state."""
    amps = np.zeros(config.dim, complex)
    amps[2 * config.n:2 * config.n + 2] = coin_vector(coin)
    return WalkerState(amps)


UNDERFLOW = 1e-300


def evolve(state: WalkerState, op: StepOperator, steps: int) -> WalkerState:
    """Apply `op` `steps` times, renormalizing each step into log_norm."""
    if state.amplitudes.shape[0] != op.dim:
        raise ValueError(f"state dimension {state.amplitudes.shape[0]} does not match operator {op.dim}")
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    amps = state.amplitudes
    log_norm = state.log_norm
    mat = op.sparse
    for _ in range(int(steps)):
        amps = mat @ amps
        nrm = np.linalg.norm(amps)
        if not nrm > UNDERFLOW:
            raise UnderflowError(f"state norm {nrm:.3g} fell below {UNDERFLOW:g}")
        amps = amps / nrm
        log_norm += math.log(nrm)
    return WalkerState(amps, log_norm)


def position_distribution(state: WalkerState) -> np.ndarray:
    """p_j = |psi_{j,H}|^2 + |psi_{j,V}|^2 for a normalized state."""
    nrm = state.norm
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"state must be normalized, norm = {nrm:.12g}")
    return probabilities(state.amplitudes)


def probabilities(amplitudes: np.ndarray) -> np.ndarray:
    return (np.abs(amplitudes) ** 2).reshape(-1, 2).sum(axis=1)


def loss_strength_from_reflectivity(p: float) -> float:
    """gamma = -ln(1 - p) / 4 for partial-polarizer reflectivity p in [0, 1)."""
    if not (0.0 <= p < 1.0):
        raise ValueError(f"reflectivity must lie in [0, 1), got {p!r}")
    return -0.25 * math.log1p(-p)


def step_budget(n_photons_initial: float, im_e_max: float, gamma: float) -> int:
    """Largest T leaving at least one expected photon after decay at rate 2(gamma - Im E_max)."""
    if n_photons_initial < 1:
        raise ValueError(f"n_photons_initial must be >= 1, got {n_photons_initial!r}")
    rate = 2.0 * (gamma - im_e_max)
    if rate <= 0:
        raise ValueError(f"non-decaying configuration: Im E_max = {im_e_max} >= gamma = {gamma}")
    # tolerance absorbs rounding in exactly representable inversions
    return int(math.floor(math.log(n_photons_initial) / rate + 1e-9))
