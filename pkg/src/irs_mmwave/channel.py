"""Array responses, path loss and geometric mmWave channels.

All quantities are in linear units. Every random draw goes through an
explicit ``numpy.random.Generator`` so identical seeds give bit-identical
channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import InvalidArgumentError

#: Smallest link distance fed to the path-loss law (log10 singularity at 0).
MIN_DISTANCE_M = 0.1

AZIMUTH_RANGE = (-math.pi / 2, math.pi / 2)
ELEVATION_RANGE = (-math.pi / 4, math.pi / 4)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UlaGeometry:
    num_elements: int
    element_spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise InvalidArgumentError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.element_spacing_over_wavelength > 0:
            raise InvalidArgumentError("element_spacing_over_wavelength must be > 0")


@dataclass(frozen=True)
class UraGeometry:
    """Rectangular array with ``rows`` vertical (z) and ``cols`` horizontal (y) elements."""

    rows: int
    cols: int
    element_spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        for name in ("rows", "cols"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {v}")
        if not self.element_spacing_over_wavelength > 0:
            raise InvalidArgumentError("element_spacing_over_wavelength must be > 0")

    @property
    def num_elements(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class PathLossParams:
    """Log-distance law ``kappa = a + 10 b log10(d) + xi``, ``xi ~ N(0, sigma^2)`` (dB)."""

    intercept_db: float
    exponent: float
    shadow_sigma_db: float

    def __post_init__(self):
        if self.shadow_sigma_db < 0:
            raise InvalidArgumentError("shadow_sigma_db must be >= 0")


LOS_PATHLOSS = PathLossParams(61.4, 2.0, 5.8)
NLOS_PATHLOSS = PathLossParams(72.0, 2.92, 8.7)


@dataclass(frozen=True)
class ChannelStatistics:
    num_paths_bs_user: int = 4
    num_paths_irs_user: int = 4
    num_paths_bs_irs: int = 4
    rician_factor_db: float = 13.2
    los_pathloss: PathLossParams = LOS_PATHLOSS
    nlos_pathloss: PathLossParams = NLOS_PATHLOSS

    def __post_init__(self):
        for name in ("num_paths_bs_user", "num_paths_irs_user", "num_paths_bs_irs"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {v}")

    @property
    def rician_factor(self) -> float:
        return 10.0 ** (self.rician_factor_db / 10.0)


@dataclass(frozen=True)
class SingleIrsGeometry:
    bs_irs_horizontal_m: float = 119.0
    vertical_offset_m: float = 0.6
    bs_user_horizontal_m: float = 119.0

    def __post_init__(self):
        for name in ("bs_irs_horizontal_m", "vertical_offset_m", "bs_user_horizontal_m"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be > 0")


@dataclass(frozen=True)
class MultiIrsGeometry:
    num_irs: int = 3
    bs_first_irs_horizontal_m: float = 100.0
    irs_span_m: float = 30.0
    vertical_offset_m: float = 0.6
    bs_user_horizontal_m: float = 115.0

    def __post_init__(self):
        if int(self.num_irs) != self.num_irs or self.num_irs < 1:
            raise InvalidArgumentError("num_irs must be a positive integer")
        for name in ("bs_first_irs_horizontal_m", "vertical_offset_m", "bs_user_horizontal_m"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be > 0")
        if self.num_irs > 1 and self.irs_span_m < 0:
            raise InvalidArgumentError("irs_span_m must be >= 0")


@dataclass(frozen=True)
class RankOneLink:
    """``G ~= gain * irs_steering @ bs_steering.T`` with unit-norm steering vectors."""

    gain: complex
    irs_steering: np.ndarray
    bs_steering: np.ndarray

    def __post_init__(self):
        for name in ("irs_steering", "bs_steering"):
            v = np.asarray(getattr(self, name), dtype=complex)
            if v.ndim != 1:
                raise InvalidArgumentError(f"{name} must be a vector")
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise InvalidArgumentError(f"{name} must have unit norm, got {np.linalg.norm(v)!r}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "gain", complex(self.gain))

    def matrix(self) -> np.ndarray:
        return self.gain * np.outer(self.irs_steering, self.bs_steering)


@dataclass
class ChannelSet:
    """One realization: direct link, K BS-IRS matrices and K IRS-user vectors.

    ``rank_one`` optionally carries the per-IRS rank-one decomposition the
    solvers consume.
    """

    bs_user: np.ndarray
    bs_irs: List[np.ndarray] = field(default_factory=list)
    irs_user: List[np.ndarray] = field(default_factory=list)
    rank_one: Optional[List[RankOneLink]] = None

    def __post_init__(self):
        self.bs_user = np.asarray(self.bs_user, dtype=complex)
        self.bs_irs = [np.asarray(g, dtype=complex) for g in self.bs_irs]
        self.irs_user = [np.asarray(h, dtype=complex) for h in self.irs_user]
        if self.bs_user.ndim != 1:
            raise InvalidArgumentError("bs_user must be a vector")
        n = self.bs_user.shape[0]
        if len(self.bs_irs) != len(self.irs_user):
            raise InvalidArgumentError("bs_irs and irs_user must have the same length")
        if self.rank_one is not None and len(self.rank_one) != len(self.bs_irs):
            raise InvalidArgumentError("rank_one must have one entry per IRS")
        for k, (g, h) in enumerate(zip(self.bs_irs, self.irs_user)):
            if g.ndim != 2 or g.shape[1] != n:
                raise InvalidArgumentError(f"bs_irs[{k}] must be M x {n}, got {g.shape}")
            if h.shape != (g.shape[0],):
                raise InvalidArgumentError(f"irs_user[{k}] must have length {g.shape[0]}, got {h.shape}")
            if self.rank_one is not None:
                link = self.rank_one[k]
                if link.irs_steering.shape != (g.shape[0],) or link.bs_steering.shape != (n,):
                    raise InvalidArgumentError(f"rank_one[{k}] dimensions do not match bs_irs[{k}]")

    @property
    def num_irs(self) -> int:
        return len(self.bs_irs)

    @property
    def num_antennas(self) -> int:
        return self.bs_user.shape[0]

    def rank_one_view(self, links: Optional[List[RankOneLink]] = None) -> "ChannelSet":
        """Same realization with every ``G_k`` replaced by its rank-one model."""
        links = self.rank_one if links is None else links
        if links is None:
            raise InvalidArgumentError("no rank-one links available")
        return ChannelSet(self.bs_user, [l.matrix() for l in links], list(self.irs_user), list(links))

    def with_blockage(self, direct_blocked: bool, irs_blocked) -> "ChannelSet":
        """Zero the blocked BS-user / IRS-user links. BS-IRS links are never blocked."""
        irs_blocked = list(irs_blocked)
        if len(irs_blocked) != self.num_irs:
            raise InvalidArgumentError("need one blockage flag per IRS")
        h_d = np.zeros_like(self.bs_user) if direct_blocked else self.bs_user
        h_r = [np.zeros_like(h) if b else h for h, b in zip(self.irs_user, irs_blocked)]
        return ChannelSet(h_d, list(self.bs_irs), h_r, self.rank_one)


# ---------------------------------------------------------------------------
# Array responses
# ---------------------------------------------------------------------------

def ula_response(angle: float, geom: UlaGeometry) -> np.ndarray:
    """Normalized ULA response, entry n = exp(j 2 pi (d/lambda) n sin(angle)) / sqrt(N)."""
    n = np.arange(geom.num_elements)
    phase = 2 * np.pi * geom.element_spacing_over_wavelength * n * np.sin(angle)
    return np.exp(1j * phase) / np.sqrt(geom.num_elements)


def ura_response(azimuth: float, elevation: float, geom: UraGeometry) -> np.ndarray:
    """Normalized URA response, flattened row-major over (vertical row, horizontal col).

    Horizontal progression uses ``sin(az) cos(el)``, vertical uses ``sin(el)``.
    """
    d = geom.element_spacing_over_wavelength
    y = np.exp(1j * 2 * np.pi * d * np.arange(geom.cols) * np.sin(azimuth) * np.cos(elevation))
    z = np.exp(1j * 2 * np.pi * d * np.arange(geom.rows) * np.sin(elevation))
    return np.kron(z, y) / np.sqrt(geom.num_elements)


def ula_inner_product(angle_i: float, angle_j: float, geom: UlaGeometry) -> complex:
    """Closed form of ``b_i^H b_j`` for two ULA responses (geometric series).

    Returns 1 when the angles give identical spatial frequencies.
    """
    n = geom.num_elements
    delta = 2 * np.pi * geom.element_spacing_over_wavelength * (np.sin(angle_j) - np.sin(angle_i))
    denom = 1 - np.exp(1j * delta)
    if abs(denom) < 1e-14:
        return 1.0 + 0j
    return complex((1 - np.exp(1j * n * delta)) / (n * denom))


# ---------------------------------------------------------------------------
# Path loss and gains
# ---------------------------------------------------------------------------

def pathloss_db(distance_m: float, params: PathLossParams, shadow_db: float = 0.0) -> float:
    """Path loss ``kappa`` in dB for a given shadowing realization."""
    if not distance_m > 0:
        raise InvalidArgumentError(f"distance must be > 0, got {distance_m}")
    return params.intercept_db + 10 * params.exponent * math.log10(distance_m) + shadow_db


def pathloss_variance(distance_m: float, params: PathLossParams, shadow_db: float = 0.0) -> float:
    """Gain variance ``10^(-kappa/10)``."""
    return 10.0 ** (-0.1 * pathloss_db(distance_m, params, shadow_db))


def complex_normal(rng: np.random.Generator, variance, size=None):
    """Circularly-symmetric CN(0, variance) samples."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return scale * (re + 1j * im)


def draw_shadowing(params: PathLossParams, rng: np.random.Generator) -> float:
    return float(rng.normal(0.0, params.shadow_sigma_db)) if params.shadow_sigma_db > 0 else 0.0


def pathloss_gain(distance_m: float, params: PathLossParams, rng: np.random.Generator) -> complex:
    """Draw one complex gain ``CN(0, 10^(-kappa/10))`` with lognormal shadowing."""
    if not distance_m > 0:
        raise InvalidArgumentError(f"distance must be > 0, got {distance_m}")
    xi = draw_shadowing(params, rng)
    return complex(complex_normal(rng, pathloss_variance(distance_m, params, xi)))


def _rician_gains(num_paths, distance_m, params, rician_factor, rng):
    # One shadowing draw per link; the LOS term carries the path-loss variance
    # and the NLOS terms share LOS/rician_factor equally.
    if not distance_m > 0:
        raise InvalidArgumentError(f"distance must be > 0, got {distance_m}")
    xi = draw_shadowing(params, rng)
    var_los = pathloss_variance(distance_m, params, xi)
    los = complex(complex_normal(rng, var_los))
    if num_paths == 1:
        return los, np.zeros(0, dtype=complex)
    var_nlos = var_los / (rician_factor * (num_paths - 1))
    return los, complex_normal(rng, var_nlos, num_paths - 1)


def _azimuths(rng, size=None):
    return rng.uniform(*AZIMUTH_RANGE, size)


def _elevations(rng, size=None):
    return rng.uniform(*ELEVATION_RANGE, size)


# ---------------------------------------------------------------------------
# Channel generators
# ---------------------------------------------------------------------------

def gen_bs_user_channel(geom: UlaGeometry, stats: ChannelStatistics, distance_m: float,
                        rng: np.random.Generator) -> np.ndarray:
    """NLOS geometric BS-user channel ``sqrt(N/L_d) sum_l alpha_l a_t(phi_l)``."""
    if not distance_m > 0:
        raise InvalidArgumentError(f"distance must be > 0, got {distance_m}")
    n, paths = geom.num_elements, stats.num_paths_bs_user
    xi = draw_shadowing(stats.nlos_pathloss, rng)
    gains = complex_normal(rng, pathloss_variance(distance_m, stats.nlos_pathloss, xi), paths)
    angles = _azimuths(rng, paths)
    h = np.zeros(n, dtype=complex)
    for g, phi in zip(gains, angles):
        h += g * ula_response(phi, geom)
    return np.sqrt(n / paths) * h


def gen_irs_user_channel(geom: UraGeometry, stats: ChannelStatistics, distance_m: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Rician IRS-user channel: one LOS path plus ``L_r - 1`` weaker NLOS paths."""
    m, paths = geom.num_elements, stats.num_paths_irs_user
    los, nlos = _rician_gains(paths, distance_m, stats.los_pathloss, stats.rician_factor, rng)
    az = _azimuths(rng, paths)
    el = _elevations(rng, paths)
    h = los * ura_response(az[0], el[0], geom)
    for g, a, e in zip(nlos, az[1:], el[1:]):
        h = h + g * ura_response(a, e, geom)
    return np.sqrt(m / paths) * h


def gen_bs_irs_channel(tx: UlaGeometry, rx: UraGeometry, stats: ChannelStatistics,
                       distance_m: float, rng: np.random.Generator) -> Tuple[np.ndarray, RankOneLink]:
    """SV BS-IRS channel and the rank-one link built from its LOS term.

    The BS-side steering is ``conj(a_t(phi))`` so that ``a_r a_t^H = a b^T``.
    """
    n, m, paths = tx.num_elements, rx.num_elements, stats.num_paths_bs_irs
    los, nlos = _rician_gains(paths, distance_m, stats.los_pathloss, stats.rician_factor, rng)
    az = _azimuths(rng, paths)
    el = _elevations(rng, paths)
    aod = _azimuths(rng, paths)
    scale = np.sqrt(n * m / paths)
    a = ura_response(az[0], el[0], rx)
    b = np.conj(ula_response(aod[0], tx))
    link = RankOneLink(scale * los, a, b)
    g = link.matrix()
    for gain, a_l, e_l, p_l in zip(nlos, az[1:], el[1:], aod[1:]):
        g = g + scale * gain * np.outer(ura_response(a_l, e_l, rx), np.conj(ula_response(p_l, tx)))
    return g, link


def dominant_rank_one(g: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> RankOneLink:
    """Dominant singular triplet of ``g`` by power iteration.

    Stops when successive singular-value estimates differ by less than
    ``tol`` (relative to the estimate).
    """
    g = np.asarray(g, dtype=complex)
    if not np.any(g):
        raise InvalidArgumentError("cannot extract a rank-one link from a zero matrix")
    # deterministic start: the row of largest energy
    v = np.conj(g[np.argmax(np.sum(np.abs(g) ** 2, axis=1))])
    v = v / np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        u = g @ v
        s_u = np.linalg.norm(u)
        u = u / s_u
        v = g.conj().T @ u
        s_new = np.linalg.norm(v)
        v = v / s_new
        if abs(s_new - sigma) <= tol * s_new:
            sigma = s_new
            break
        sigma = s_new
    # g ~= sigma u v^H = sigma * u * (conj v)^T
    return RankOneLink(sigma, u / np.linalg.norm(u), np.conj(v) / np.linalg.norm(v))


# ---------------------------------------------------------------------------
# Deployment geometry
# ---------------------------------------------------------------------------

def single_irs_distances(g: SingleIrsGeometry) -> Tuple[float, float]:
    """Return (BS-IRS, IRS-user) distances in meters, unclamped."""
    d2 = math.hypot(g.bs_irs_horizontal_m, g.vertical_offset_m)
    d3 = math.hypot(g.bs_irs_horizontal_m - g.bs_user_horizontal_m, g.vertical_offset_m)
    return d2, d3


def multi_irs_positions(g: MultiIrsGeometry) -> List[Tuple[float, float]]:
    """Per-IRS (BS-IRS, IRS-user) distances for K equally spaced IRSs."""
    return [(math.hypot(x, g.vertical_offset_m),
             math.hypot(x - g.bs_user_horizontal_m, g.vertical_offset_m))
            for x in irs_horizontal_offsets(g)]


def irs_horizontal_offsets(g: MultiIrsGeometry) -> List[float]:
    if g.num_irs == 1:
        return [g.bs_first_irs_horizontal_m]
    step = g.irs_span_m / (g.num_irs - 1)
    return [g.bs_first_irs_horizontal_m + k * step for k in range(g.num_irs)]


def clamp_distance(d: float) -> float:
    return max(d, MIN_DISTANCE_M)
