"""Generalized Brillouin zone of the two-region walk.

In each region the bulk step is U = sum_j |j-1><j| C_minus + |j+1><j| C_plus
with rank-one blocks, so an eigenstate ansatz beta^j chi leads to a quadratic
in beta. The asymptotic boundary condition is the four-case function zeta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import NumericalError
from .spectral import full_spectrum
from .walk import Boundary, WalkConfig, build_step_operator, loss_matrix, rotation

P_H = np.diag([1.0, 0.0])
P_V = np.diag([0.0, 1.0])
GUARD_SLACK = 1e-12


@dataclass(frozen=True)
class TransferBlocks:
    c_minus: np.ndarray
    c_plus: np.ndarray
    region: str


def transfer_blocks(config: WalkConfig, region: str) -> TransferBlocks:
    """Bulk hopping blocks of one region: C_minus sends a site to j-1, C_plus to j+1."""
    if region == "L":
        t1, t2 = config.theta1_L, config.theta2_L
    elif region == "R":
        t1, t2 = config.theta1_R, config.theta2_R
    else:
        raise ValueError(f"region must be 'L' or 'R', got {region!r}")
    tail = rotation(t2 / 2) @ loss_matrix(config.gamma)
    head = rotation(t1 / 2)
    return TransferBlocks(head @ P_H @ tail, head @ P_V @ tail, region)


def _sorted_roots(roots) -> np.ndarray:
    roots = np.asarray(roots, complex)
    order = np.lexsort((np.angle(roots), np.abs(roots)))
    return roots[order]


def beta_coefficients(blocks: TransferBlocks, lam: complex) -> np.ndarray:
    """Coefficients (a, b, c) of a beta^2 + b beta + c = 0 from det(X beta + Y / beta - lam) = 0."""
    x, y = blocks.c_minus, blocks.c_plus
    mixed = x[0, 0] * y[1, 1] + x[1, 1] * y[0, 0] - x[0, 1] * y[1, 0] - x[1, 0] * y[0, 1]
    return np.array([-lam * np.trace(x), mixed + lam ** 2, -lam * np.trace(y)], complex)


def beta_residual(blocks: TransferBlocks, lam: complex, beta: complex) -> float:
    m = blocks.c_minus * beta + blocks.c_plus / beta - lam * np.eye(2)
    return float(abs(np.linalg.det(m)))


def beta_roots(blocks: TransferBlocks, lam: complex) -> tuple[complex, complex]:
    """Both roots, ordered by modulus with argument tiebreak."""
    if lam == 0:
        raise ValueError("lambda must be non-zero")
    a, b, c = beta_coefficients(blocks, lam)
    if abs(a) < 1e-14:
        raise NumericalError(f"degenerate beta quadratic at lambda={lam}: leading coefficient {abs(a):.3g}")
    disc = np.sqrt(b * b - 4 * a * c)
    # numerically stable pair
    q = -0.5 * (b + disc if abs(b + disc) >= abs(b - disc) else b - disc)
    r1 = q / a
    r2 = c / q if q != 0 else -b / a - r1
    b1, b2 = _sorted_roots([r1, r2])
    return complex(b1), complex(b2)


@dataclass(frozen=True)
class ZetaValue:
    case: int
    value: float
    ambiguous: bool = False


def zeta(b1L, b2L, b1R, b2R, slack: float = GUARD_SLACK) -> ZetaValue:
    """Four-case asymptotic boundary function; the lowest-numbered matching case wins."""
    a = abs
    le = lambda v: v <= 1 + slack
    ge = lambda v: v >= 1 - slack
    guards = [
        le(a(b2L * b2R)) and le(a(b2L * b1R)) and le(a(b1L * b2R)),
        ge(a(b1L * b1R)) and ge(a(b1L * b2R)) and ge(a(b2L * b1R)),
        ge(a(b2L * b1R)) and le(a(b1L * b2R)),
        ge(a(b1L * b2R)) and le(a(b2L * b1R)),
    ]
    values = [
        a(b1L * b1R) - 1,
        a(b2L * b2R) - 1,
        a(b1L) - a(b2L),
        a(b1R) - a(b2R),
    ]
    hits = [i for i, g in enumerate(guards) if g]
    if not hits:
        raise NumericalError("no zeta case applies")
    return ZetaValue(hits[0] + 1, float(values[hits[0]]), len(hits) > 1)


@dataclass(frozen=True)
class GbzSolution:
    lam: complex
    betas: tuple
    zeta_case: int
    zeta_value: float
    seed_index: int
    ambiguous: bool = False

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(np.array(self.betas))


@dataclass
class GbzResult:
    solutions: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    max_modulus_step: float = math.nan

    def max_unit_deviation(self) -> float:
        """Largest ||beta| - 1| over converged solutions, NaN when none converged."""
        return max((float(np.abs(s.moduli - 1).max()) for s in self.solutions), default=math.nan)

    def min_unit_deviation(self) -> float:
        """Smallest ||beta| - 1| over converged solutions, NaN when none converged."""
        return min((float(np.abs(s.moduli - 1).min()) for s in self.solutions), default=math.nan)


class _Zeta:
    """zeta as a function of lambda for one config.

    The left roots enter after inversion so that both regions are measured
    outward from the domain wall at j = -1 | 0.
    """

    def __init__(self, config: WalkConfig):
        self.left = transfer_blocks(config, "L")
        self.right = transfer_blocks(config, "R")

    def roots(self, lam):
        return beta_roots(self.left, lam) + beta_roots(self.right, lam)

    def __call__(self, lam) -> tuple[tuple, ZetaValue | None]:
        b1L, b2L, b1R, b2R = self.roots(lam)
        o1L, o2L = _sorted_roots([1 / b1L, 1 / b2L])
        try:
            z = zeta(o1L, o2L, b1R, b2R)
        except NumericalError:
            z = None
        return (b1L, b2L, b1R, b2R), z


def _refine_on_line(fz: _Zeta, point, lo: float, hi: float, scale: float, tol: float):
    """Solve zeta = 0 along the parametrized line t -> point(t), t in [lo, hi]."""

    def evaluate(t):
        try:
            _, z = fz(point(t))
        except NumericalError:
            return None
        return z

    def objective(t):
        z = evaluate(t)
        return math.inf if z is None else abs(z.value)

    grid = np.linspace(lo, hi, 41)
    vals = [evaluate(t) for t in grid]
    # a sign change within one case is bracketed and solved exactly
    for (ta, za), (tb, zb) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
        if za is None or zb is None or za.case != zb.case or za.value * zb.value >= 0:
            continue
        case = za.case

        def signed(t, case=case):
            z = evaluate(t)
            return z.value if z is not None and z.case == case else math.nan

        try:
            t = brentq(signed, ta, tb, xtol=1e-15 * scale)
        except ValueError:
            continue
        if objective(t) < tol:
            return point(t)
    mags = np.array([math.inf if z is None else abs(z.value) for z in vals])
    k = int(np.argmin(mags))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(objective, bounds=(a, b), method="bounded",
                          options={"xatol": 1e-14 * scale, "maxiter": 500})
    if res.fun < tol:
        return point(res.x)
    return None


def _refine(fz: _Zeta, lam0: complex, window: float, tol: float):
    """Move lam0 onto zeta = 0, first radially, then along the circle |lambda| = |lam0|.

    Spectral curves can run either across or along rays, so both transverse
    directions are tried.
    """
    _, z = fz(lam0)
    if z is not None and abs(z.value) < tol:
        return lam0
    r0 = abs(lam0)
    phase = lam0 / r0
    found = _refine_on_line(fz, lambda s: s * phase, r0 * (1 - window), r0 * (1 + window), r0, tol)
    if found is None:
        found = _refine_on_line(fz, lambda a: lam0 * np.exp(1j * a), -window, window, 1.0, tol)
    return found


def default_seeds(config: WalkConfig) -> np.ndarray:
    """Non-zero eigenvalues of the open-boundary operator."""
    obc = WalkConfig(config.n, config.theta1_L, config.theta2_L, config.theta1_R,
                     config.theta2_R, config.gamma, Boundary.OBC)
    lam = full_spectrum(build_step_operator(obc)).eigenvalues
    return lam[np.abs(lam) > 1e-8]


def _max_step(solutions, spacing):
    if len(solutions) < 2:
        return 0.0, []
    sols = sorted(solutions, key=lambda s: np.angle(s.lam))
    worst, gaps = 0.0, []
    for a, b in zip(sols, sols[1:]):
        if abs(a.lam - b.lam) > spacing:
            continue
        step = float(np.abs(a.moduli - b.moduli).max())
        worst = max(worst, step)
        if step >= 0.05:
            gaps.append(0.5 * (a.lam + b.lam))
    return worst, gaps


def solve_gbz(config: WalkConfig, seeds=None, tol: float = 1e-6, window: float = 0.05,
              densify_rounds: int = 3) -> GbzResult:
    """Refine every seed onto zeta = 0 and collect the beta quadruples.

    Seeds that do not converge are listed in `failed` as (index, seed, reason).
    Between neighbouring solutions whose beta moduli jump by 0.05 or more,
    midpoint seeds are added for up to `densify_rounds` rounds.
    """
    fz = _Zeta(config)
    seeds = default_seeds(config) if seeds is None else np.asarray(seeds, complex)
    result = GbzResult()
    pending = list(enumerate(seeds))
    next_index = len(seeds)
    spacing = math.inf
    for round_ in range(densify_rounds + 1):
        for idx, lam0 in pending:
            if lam0 == 0:
                result.failed.append((idx, lam0, "zero seed"))
                continue
            try:
                lam = _refine(fz, complex(lam0), window, tol)
            except NumericalError as exc:
                result.failed.append((idx, lam0, str(exc)))
                continue
            if lam is None:
                result.failed.append((idx, lam0, "zeta did not reach tolerance"))
                continue
            betas, z = fz(lam)
            result.solutions.append(GbzSolution(lam, betas, z.case, z.value, idx, z.ambiguous))
        if round_ == 0 and len(result.solutions) > 2:
            lams = np.array([s.lam for s in result.solutions])
            d = np.abs(lams[:, None] - lams[None, :]) + np.diag(np.full(len(lams), np.inf))
            spacing = 3.0 * float(np.median(d.min(axis=1)))
        worst, gaps = _max_step(result.solutions, spacing)
        result.max_modulus_step = worst
        if not gaps or round_ == densify_rounds:
            break
        pending = [(next_index + i, g) for i, g in enumerate(gaps)]
        next_index += len(gaps)
    return result


# ------------------------------------------------ finite boundary cross-check

def _ansatz_vector(config: WalkConfig, blocks: TransferBlocks, lam, beta) -> np.ndarray:
    m = blocks.c_minus * beta + blocks.c_plus / beta - lam * np.eye(2)
    chi = np.linalg.svd(m)[2].conj()[-1]
    sites = config.sites()
    mask = sites < 0 if blocks.region == "L" else sites >= 0
    psi = np.zeros((config.size, 2), complex)
    psi[mask] = np.power(complex(beta), sites[mask])[:, None] * chi[None, :]
    psi = psi.ravel()
    return psi / np.linalg.norm(psi)


def boundary_matrix(config: WalkConfig, lam: complex) -> np.ndarray:
    """Residuals of the four bulk ansatz vectors on the boundary sites, shape (8, 4).

    Only meant for small lattices (2 <= n <= 6); a vanishing singular value
    means lam is an eigenvalue of the finite operator in the ansatz span.
    """
    if not 2 <= config.n <= 6:
        raise ValueError("boundary_matrix is a small-lattice cross-check (2 <= n <= 6)")
    u = build_step_operator(config).matrix
    cols = []
    for region in ("L", "R"):
        blocks = transfer_blocks(config, region)
        for beta in beta_roots(blocks, lam):
            psi = _ansatz_vector(config, blocks, lam, beta)
            cols.append(u @ psi - lam * psi)
    res = np.stack(cols, axis=1).reshape(config.size, 2, 4)
    rows = [-config.n, -1, 0, config.n]
    return np.concatenate([res[j + config.n] for j in rows], axis=0)


def boundary_singular_ratio(config: WalkConfig, lam: complex) -> float:
    s = np.linalg.svd(boundary_matrix(config, lam), compute_uv=False)
    return float(s[-1] / s[0])
