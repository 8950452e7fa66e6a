"""Eigenanalysis of the step operator: quasi-energies, steady state, gap diagnostics,
skin-effect localization and the homogeneous Bloch picture."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateSteadyStateError, NumericalError
from .walk import Boundary, StepOperator, WalkConfig, loss_matrix, rotation

RESIDUAL_TOL = 1e-8
DEGENERACY_TOL = 1e-9


def quasi_energy(lam) -> np.ndarray:
    """E = i ln(lambda) on the principal branch, Re E in (-pi, pi]; lambda = 0 maps to Im E = -inf."""
    lam = np.asarray(lam, complex)
    with np.errstate(divide="ignore"):
        im = np.log(np.abs(lam))
    re = -np.angle(lam)
    re = np.where(re <= -math.pi, re + 2 * math.pi, re)
    out = np.empty(lam.shape, complex)
    out.real, out.imag = re, im
    return out


@dataclass(frozen=True)
class SpectrumResult:
    """Eigenvalues sorted by descending modulus, with unit-norm right eigenvectors as columns."""

    eigenvalues: np.ndarray
    quasi_energies: np.ndarray
    eigenvectors: np.ndarray
    config: WalkConfig | None = None
    residuals: np.ndarray | None = None

    def __len__(self):
        return len(self.eigenvalues)


def _sort_key(lam):
    # descending modulus, then ascending argument
    return np.lexsort((np.angle(lam), -np.round(np.abs(lam), 12)))


def full_spectrum(op: StepOperator) -> SpectrumResult:
    """Complete eigensystem of a step operator, checked against the residual bound."""
    mat = op.matrix
    try:
        lam, vecs = np.linalg.eig(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    order = _sort_key(lam)
    lam = lam[order]
    vecs = vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    residuals = np.linalg.norm(mat @ vecs - vecs * lam, axis=0)
    worst = float(residuals.max())
    if worst > RESIDUAL_TOL:
        raise NumericalError(f"eigen-residual {worst:.3g} exceeds {RESIDUAL_TOL:g}")
    return SpectrumResult(lam, quasi_energy(lam), vecs, op.config, residuals)


def _symmetry_orbit(lam: complex, bipartite: bool) -> list[complex]:
    # real U pairs lambda with its conjugate; a bipartite lattice also pairs lambda with -lambda
    orbit = [lam, np.conj(lam)]
    if bipartite:
        orbit += [-lam, -np.conj(lam)]
    return orbit


def is_bipartite(config: WalkConfig | None) -> bool:
    """Every step changes the site parity; CBC with odd N breaks this at the wrap."""
    return config is not None and config.boundary is Boundary.OBC


def steady_state(spectrum: SpectrumResult) -> tuple[complex, np.ndarray]:
    """Eigenpair of largest |lambda|.

    Eigenvalues tied with the top one only through the exact symmetries of U
    (complex conjugation, and lambda -> -lambda on a bipartite lattice) are
    treated as copies; the representative with the smallest non-negative
    argument is returned. Any other tie within 1e-9 is a degeneracy error.
    """
    lam = spectrum.eigenvalues
    if len(lam) == 0:
        raise ValueError("empty spectrum")
    top = abs(lam[0])
    group = np.flatnonzero(np.abs(np.abs(lam) - top) <= DEGENERACY_TOL * max(top, 1.0))
    rep = lam[group[0]]
    orbit = _symmetry_orbit(rep, is_bipartite(spectrum.config))
    distinct = []
    for z in orbit:
        if all(abs(z - w) > 1e-7 * max(top, 1.0) for w in distinct):
            distinct.append(z)
    tied = [lam[i] for i in group]
    explained = all(min(abs(z - w) for w in distinct) <= 1e-7 * max(top, 1.0) for z in tied)
    if not explained or len(tied) > len(distinct):
        raise DegenerateSteadyStateError(
            f"top eigenvalue modulus {top:.12g} shared by {len(tied)} eigenvalues"
        )
    args = np.mod(np.angle(np.array([lam[i] for i in group])), 2 * math.pi)
    pick = group[int(np.argmin(args))]
    return complex(lam[pick]), spectrum.eigenvectors[:, pick]


def sublattice_indices(config: WalkConfig, parity: int = 0) -> np.ndarray:
    """Basis indices of sites with j = parity (mod 2); parity 0 contains the origin."""
    sites = np.flatnonzero((config.sites() - parity) % 2 == 0)
    return np.sort(np.concatenate([2 * sites, 2 * sites + 1]))


def dominant_state(op: StepOperator, parity: int = 0, seed: int = 0,
                   max_squarings: int = 60, tol: float = 1e-13) -> tuple[complex, np.ndarray]:
    """Dominant eigenvector by power iteration with repeated squaring.

    On a bipartite lattice the sublattice block of U^2 is used: it lifts the
    exact lambda -> -lambda pairing and the returned vector is the long-time
    state on the chosen sublattice, embedded in the full space. The returned
    eigenvalue belongs to U^2 in that case and to U otherwise. Non-convergence
    means the top of the spectrum is degenerate.
    """
    config = op.config
    mat = op.matrix
    if is_bipartite(config):
        idx = sublattice_indices(config, parity)
        block = (mat @ mat)[np.ix_(idx, idx)]
    else:
        idx = np.arange(mat.shape[0])
        block = mat.astype(complex)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx))
    power = block / np.linalg.norm(block)
    prev = None
    for _ in range(max_squarings):
        power = power @ power
        scale = np.linalg.norm(power)
        if not scale > 0:
            raise DegenerateSteadyStateError("sublattice block is nilpotent")
        power = power / scale
        v = power @ v0
        v = v / np.linalg.norm(v)
        if prev is not None and abs(np.vdot(prev, v)) > 1 - tol:
            break
        prev = v
    else:
        raise DegenerateSteadyStateError("power iteration did not settle on a single dominant eigenvector")
    lam = complex(np.vdot(v, block @ v))
    # squaring maps lambda and -lambda (or i|lambda| and -i|lambda|) to the same value
    resid = np.linalg.norm(block @ v - lam * v)
    if resid > 1e-8 * np.linalg.norm(block, 2):
        raise DegenerateSteadyStateError(f"power iteration settled in a degenerate subspace (residual {resid:.2e})")
    full = np.zeros(mat.shape[0], complex)
    full[idx] = v
    return lam, full


# ---------------------------------------------------------------- Bloch picture

def bloch_operator(config: WalkConfig, k: float) -> np.ndarray:
    """2x2 momentum-space step R(theta1/2) diag(e^{ik}, e^{-ik}) R(theta2/2) Gamma."""
    if not config.is_homogeneous:
        raise ValueError("bloch_operator requires a homogeneous config (theta^L = theta^R)")
    return _bloch(config.theta1_L, config.theta2_L, config.gamma, k)


def _bloch(theta1, theta2, gamma, k):
    shift = np.diag([np.exp(1j * k), np.exp(-1j * k)])
    return rotation(theta1 / 2) @ shift @ rotation(theta2 / 2) @ loss_matrix(gamma)


def bloch_spectrum(config: WalkConfig, ks) -> np.ndarray:
    """Eigenvalues of U(k) for each k, shape (len(ks), 2)."""
    if not config.is_homogeneous:
        raise ValueError("bloch_spectrum requires a homogeneous config")
    return _band_eigs(config.theta1_L, config.theta2_L, config.gamma, ks)


def _band_eigs(theta1, theta2, gamma, ks):
    ks = np.asarray(ks, float)
    mats = np.stack([_bloch(theta1, theta2, gamma, k) for k in ks])
    return np.linalg.eigvals(mats)


def finite_bloch_spectrum(config: WalkConfig) -> np.ndarray:
    """Union of Bloch eigenvalues on the CBC momentum grid k = 2 pi m / N."""
    ks = 2 * math.pi * np.arange(config.size) / config.size
    return bloch_spectrum(config, ks).ravel()


def multiset_distance(a, b) -> float:
    """Largest pairwise distance under the optimal one-to-one matching."""
    a = np.asarray(a, complex)
    b = np.asarray(b, complex)
    if a.shape != b.shape:
        raise ValueError("multisets must have equal size")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@dataclass(frozen=True)
class BlochLoop:
    """Bands of U(k) tracked by continuity over one period, joined into closed loops."""

    ks: np.ndarray
    bands: np.ndarray
    loops: list = field(default_factory=list)


def _track_bands(eigs: np.ndarray) -> np.ndarray:
    bands = eigs.copy()
    for m in range(1, len(bands)):
        a, b = bands[m]
        p, q = bands[m - 1]
        if abs(a - p) + abs(b - q) > abs(b - p) + abs(a - q):
            bands[m] = [b, a]
    return bands


def bloch_loop(config: WalkConfig, num_k: int = 512) -> BlochLoop:
    """Sample both bands on k in [0, 2 pi) and assemble closed loops."""
    if num_k < 8:
        raise ValueError("num_k must be >= 8")
    ks = 2 * math.pi * np.arange(num_k) / num_k
    bands = _track_bands(bloch_spectrum(config, ks))
    closing = _bloch_eigs_at(config, 2 * math.pi)
    end = bands[-1]
    # continue one step past the end to see which band each one closes onto
    a, b = closing
    if abs(a - end[0]) + abs(b - end[1]) > abs(b - end[0]) + abs(a - end[1]):
        a, b = b, a
    if abs(a - bands[0, 0]) <= abs(a - bands[0, 1]):
        loops = [bands[:, 0].copy(), bands[:, 1].copy()]
    else:
        loops = [np.concatenate([bands[:, 0], bands[:, 1]])]
    return BlochLoop(ks, bands, loops)


def _bloch_eigs_at(config, k):
    return np.linalg.eigvals(bloch_operator(config, k))


def shoelace_area(points) -> float:
    z = np.asarray(points, complex)
    x, y = z.real, z.imag
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def winding_number(points, reference: complex) -> int:
    """Total argument change of (points - reference) around the closed polygon, over 2 pi."""
    z = np.asarray(points, complex) - reference
    dphi = np.angle(np.roll(z, -1) / z)
    return int(round(float(dphi.sum()) / (2 * math.pi)))


def _distance_to_polygon(points, ref) -> float:
    z = np.asarray(points, complex)
    a, b = z, np.roll(z, -1)
    ab = b - a
    denom = np.where(np.abs(ab) > 0, np.abs(ab) ** 2, 1.0)
    t = np.clip(((ref - a) * np.conj(ab)).real / denom, 0.0, 1.0)
    return float(np.abs(a + t * ab - ref).min())


@dataclass(frozen=True)
class LineSpec:
    """Reference line through `point` with unit `direction` in the quasi-energy plane."""

    point: complex = 0j
    direction: complex = 1j

    def __post_init__(self):
        d = complex(self.direction)
        if not np.isfinite(d) or not np.isfinite(complex(self.point)) or abs(d) == 0:
            raise ValueError("line needs a finite point and a non-zero finite direction")
        object.__setattr__(self, "point", complex(self.point))
        object.__setattr__(self, "direction", d / abs(d))


@dataclass(frozen=True)
class GapReport:
    kind: str
    is_closed: bool
    winding: int = 0
    loop_windings: tuple = ()
    loop_area: float = math.nan
    min_line_distance: float = math.nan
    line_spec: LineSpec | None = None
    both_sides: bool | None = None
    authoritative: bool = True


def point_gap_metric(obj, reference: complex = 0j, tolerance_area: float = 1e-4) -> GapReport:
    """Winding and enclosed area of the spectrum around `reference`.

    A BlochLoop gives authoritative values. A finite SpectrumResult is ordered
    by angle around its centroid, which is only a heuristic.
    """
    if isinstance(obj, BlochLoop):
        loops = obj.loops
        authoritative = True
    elif isinstance(obj, SpectrumResult):
        lam = obj.eigenvalues[np.abs(obj.eigenvalues) > 1e-12]
        centre = lam.mean()
        loops = [lam[np.argsort(np.angle(lam - centre))]]
        authoritative = False
    else:
        raise TypeError("point_gap_metric expects a BlochLoop or SpectrumResult")
    for loop in loops:
        if _distance_to_polygon(loop, reference) < 1e-9:
            raise ValueError(f"reference point {reference} lies on the spectral loop")
    windings = tuple(winding_number(loop, reference) for loop in loops)
    area = float(sum(shoelace_area(loop) for loop in loops))
    return GapReport("point", area < tolerance_area, winding=sum(windings),
                     loop_windings=windings, loop_area=area, authoritative=authoritative)


def _finite_energies(spectrum: SpectrumResult) -> np.ndarray:
    e = spectrum.quasi_energies
    return e[np.isfinite(e.imag)]


def line_gap_metric(spectrum: SpectrumResult, line: LineSpec | None = None,
                    tolerance: float = 1e-3) -> GapReport:
    """Distance of the quasi-energies to a reference line and whether both sides are populated.

    The default line is Re E = 0.
    """
    line = line or LineSpec()
    e = _finite_energies(spectrum)
    signed = (np.conj(line.direction) * (e - line.point)).imag
    dist = float(np.abs(signed).min())
    both = bool((signed > 0).any() and (signed < 0).any())
    return GapReport("line", both and dist < tolerance, min_line_distance=dist,
                     line_spec=line, both_sides=both)


def edge_separating_line(spectrum: SpectrumResult, n_top: int = 2) -> LineSpec:
    """Horizontal line midway between the n_top largest Im E and the rest.

    Separates domain-wall edge states from the bulk band; its distance to the
    spectrum shrinks to zero where the two parts join.
    """
    im = np.sort(_finite_energies(spectrum).imag)[::-1]
    if len(im) <= n_top:
        raise ValueError("spectrum too small for the requested split")
    mid = 0.5 * (im[n_top - 1] + im[n_top])
    return LineSpec(1j * mid, 1.0)


@dataclass(frozen=True)
class LocalizationProfile:
    site_population: np.ndarray
    participation_ratio: np.ndarray

    @property
    def mean_participation(self) -> float:
        return float(self.participation_ratio.mean())


def skin_localization(spectrum: SpectrumResult) -> LocalizationProfile:
    """Cumulative site population of all unit eigenvectors and their participation ratios."""
    weights = (np.abs(spectrum.eigenvectors) ** 2).reshape(-1, 2, spectrum.eigenvectors.shape[1]).sum(axis=1)
    pr = 1.0 / (weights ** 2).sum(axis=0)
    return LocalizationProfile(weights.sum(axis=1), pr)


def homogeneous_critical_angle(theta1: float) -> tuple[float, float]:
    """theta2 solving cos((theta1 + theta2)/2) = 0 and cos((theta1 - theta2)/2) = 0, mod 2 pi."""
    two_pi = 2 * math.pi
    plus = (math.pi - theta1) % two_pi
    minus = (theta1 - math.pi) % two_pi
    return plus, minus


def bulk_max_imag_quasi_energy(config: WalkConfig, num_k: int = 512) -> float:
    """Largest Im E of the bulk bands of both regions (boundary modes excluded)."""
    ks = 2 * math.pi * np.arange(num_k) / num_k
    best = -math.inf
    for t1, t2 in ((config.theta1_L, config.theta2_L), (config.theta1_R, config.theta2_R)):
        lam = _band_eigs(t1, t2, config.gamma, ks)
        best = max(best, float(np.log(np.abs(lam)).max()))
    return best
