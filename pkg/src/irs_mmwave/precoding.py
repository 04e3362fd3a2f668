"""Joint active/passive beamforming solvers.

Every solver works on the rank-one model ``G_k = lambda_k a_k b_k^T`` and
returns a precoder with ``||w||^2 = p`` (MRT toward the effective channel)
together with the per-IRS phases. The reported power is evaluated on that
same rank-one model; scoring against full channels is left to the caller.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .channel import ChannelSet, RankOneLink
from .errors import DegenerateChannelError, InvalidArgumentError, TooLargeError
from .sdp import DEFAULT_SAMPLES, UnitDiagSdp, extract_rank_one, solve_unit_diag_sdp

TWO_PI = 2 * math.pi

#: Oracle guards.
MAX_PHASE_ORACLE_ELEMENTS = 8
MAX_ALPHA_ORACLE_IRS = 4
#: Largest number of grid points an oracle evaluates before polishing.
MAX_GRID_POINTS = 2 ** 21

_POLISH_TOL = 1e-10
_POLISH_SWEEPS = 100
_GRID_CHUNK = 1 << 15


class Solver(enum.Enum):
    SINGLE_IRS_CLOSED_FORM = "closed_form"
    MULTI_IRS_ANALYTICAL = "analytical"
    MULTI_IRS_SDR = "sdr"
    MRT_NO_IRS = "no_irs"
    BRUTE_FORCE = "brute_force"


def wrap_phase(x) -> np.ndarray:
    """Map angles into [0, 2 pi)."""
    r = np.mod(np.asarray(x, dtype=float), TWO_PI)
    return np.where(r >= TWO_PI, 0.0, r)


def _arg(x):
    # np.angle(0) is 0, which is the arg(0) convention we want
    return np.angle(x)


@dataclass(frozen=True)
class PhaseShiftConfig:
    """Per-IRS phase vectors in radians, optionally restricted to a b-bit grid."""

    phases: tuple
    resolution_bits: Optional[int] = None

    def __post_init__(self):
        ph = tuple(np.asarray(p, dtype=float).reshape(-1) for p in self.phases)
        for k, p in enumerate(ph):
            if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p >= TWO_PI):
                raise InvalidArgumentError(f"phases[{k}] must lie in [0, 2pi)")
        b = self.resolution_bits
        if b is not None:
            if int(b) != b or b < 1:
                raise InvalidArgumentError(f"resolution_bits must be a positive integer, got {b}")
            for k, p in enumerate(ph):
                x = p * (2 ** b) / TWO_PI
                if np.any(np.abs(x - np.round(x)) > 1e-9):
                    raise InvalidArgumentError(f"phases[{k}] are not on the {b}-bit grid")
        object.__setattr__(self, "phases", ph)

    @property
    def num_irs(self) -> int:
        return len(self.phases)

    def coefficients(self) -> List[np.ndarray]:
        return [np.exp(1j * p) for p in self.phases]


@dataclass(frozen=True)
class BeamformingSolution:
    precoder: np.ndarray
    phase_config: PhaseShiftConfig
    received_power: float
    solver: Solver


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------

def effective_channel(phases: PhaseShiftConfig, ch: ChannelSet) -> np.ndarray:
    """Row vector ``c`` with ``y = c w``: ``sum_k h_rk^H Theta_k G_k + h_d^H``."""
    if phases.num_irs != ch.num_irs:
        raise InvalidArgumentError(f"phase config has {phases.num_irs} IRSs, channel has {ch.num_irs}")
    c = np.conj(ch.bs_user).copy()
    for coef, g, h in zip(phases.coefficients(), ch.bs_irs, ch.irs_user):
        if coef.shape != h.shape:
            raise InvalidArgumentError(f"phase vector length {coef.shape[0]} does not match M={h.shape[0]}")
        c += (np.conj(h) * coef) @ g
    return c


def received_power(w, phases: PhaseShiftConfig, ch: ChannelSet) -> float:
    """``|(sum_k h_rk^H Theta_k G_k + h_d^H) w|^2``."""
    w = np.asarray(w, dtype=complex)
    if w.shape != (ch.num_antennas,):
        raise InvalidArgumentError(f"precoder must have length {ch.num_antennas}, got {w.shape}")
    return float(abs(effective_channel(phases, ch) @ w) ** 2)


def _check_power(p):
    if not p > 0:
        raise InvalidArgumentError(f"transmit power must be > 0, got {p}")


def _mrt(c: np.ndarray, p: float) -> np.ndarray:
    norm = np.linalg.norm(c)
    if norm == 0:
        raise DegenerateChannelError("effective channel is zero")
    return np.sqrt(p) * np.conj(c) / norm


def complete_with_mrt(phases: PhaseShiftConfig, ch: ChannelSet, p: float,
                      solver: Solver) -> BeamformingSolution:
    """Fix the phases, pick the MRT precoder and report the resulting power."""
    _check_power(p)
    c = effective_channel(phases, ch)
    w = _mrt(c, p)
    return BeamformingSolution(w, phases, float(abs(c @ w) ** 2), solver)


def _links(ch: ChannelSet, links):
    links = ch.rank_one if links is None else list(links)
    if links is None:
        raise InvalidArgumentError("rank-one links are required")
    if len(links) != ch.num_irs:
        raise InvalidArgumentError(f"need {ch.num_irs} rank-one links, got {len(links)}")
    return links


def passive_alignment(link: RankOneLink, h_r: np.ndarray):
    """Return ``(theta_bar, z)``: co-phasing phases and ``z = ||g||_1``."""
    g = link.gain * (np.conj(h_r) * link.irs_steering)
    return -_arg(g), float(np.sum(np.abs(g)))


def _phase_config(alphas, theta_bars) -> PhaseShiftConfig:
    return PhaseShiftConfig(tuple(wrap_phase(a + tb) for a, tb in zip(alphas, theta_bars)))


def _structure(ch: ChannelSet, links):
    """``Phi = diag(z) B`` plus the co-phasing phases, one row per IRS."""
    thetas, z = [], []
    for link, h in zip(links, ch.irs_user):
        tb, zk = passive_alignment(link, h)
        thetas.append(tb)
        z.append(zk)
    b = np.array([l.bs_steering for l in links]).reshape(len(links), ch.num_antennas)
    return np.asarray(z)[:, None] * b, thetas


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

def mrt_no_irs(h_d, p: float) -> BeamformingSolution:
    """Direct-link MRT, ``w = sqrt(p) h_d / ||h_d||``."""
    ch = ChannelSet(np.asarray(h_d, dtype=complex))
    return complete_with_mrt(PhaseShiftConfig(()), ch, p, Solver.MRT_NO_IRS)


def solve_single_irs(ch: ChannelSet, link: RankOneLink, p: float) -> BeamformingSolution:
    """Closed-form optimum for one IRS on a rank-one BS-IRS link.

    The IRS co-phases ``lambda (h_r^* o a)`` and a common rotation
    ``alpha = -arg(b^T h_d)`` aligns the reflected path with the direct one.
    """
    if ch.num_irs != 1:
        raise InvalidArgumentError(f"solve_single_irs needs K=1, got K={ch.num_irs}")
    _check_power(p)
    theta_bar, _ = passive_alignment(link, ch.irs_user[0])
    alpha = -_arg(link.bs_steering @ ch.bs_user)
    cfg = _phase_config([alpha], [theta_bar])
    return complete_with_mrt(cfg, ch.rank_one_view([link]), p, Solver.SINGLE_IRS_CLOSED_FORM)


def single_irs_power_identity(ch: ChannelSet, link: RankOneLink, p: float) -> float:
    """``p (z^2 + 2 z |b^T h_d| + ||h_d||^2)``, the optimum of the closed form."""
    _, z = passive_alignment(link, ch.irs_user[0])
    cross = abs(link.bs_steering @ ch.bs_user)
    return p * (z * z + 2 * z * cross + float(np.vdot(ch.bs_user, ch.bs_user).real))


def solve_multi_irs_analytical(ch: ChannelSet, links: Optional[Sequence[RankOneLink]], p: float
                               ) -> BeamformingSolution:
    """Near-optimal multi-IRS solution.

    Treats the BS steering vectors as mutually orthogonal, which leaves only
    the direct-link cross term to align: ``alpha_k = -arg(u_k)`` with
    ``u = Phi h_d``.
    """
    links = _links(ch, links)
    if not links:
        raise InvalidArgumentError("need at least one IRS")
    _check_power(p)
    phi, thetas = _structure(ch, links)
    alphas = -_arg(phi @ ch.bs_user)
    return complete_with_mrt(_phase_config(alphas, thetas), ch.rank_one_view(links), p,
                             Solver.MULTI_IRS_ANALYTICAL)


def _sdr_problem(ch: ChannelSet, links):
    phi, thetas = _structure(ch, links)
    u = phi @ ch.bs_user
    k = len(links)
    r = np.zeros((k + 1, k + 1), dtype=complex)
    r[:k, :k] = phi @ phi.conj().T
    r[:k, k] = u
    r[k, :k] = np.conj(u)
    scale = float(np.max(np.abs(r)))
    return r, scale, thetas


def solve_multi_irs_sdr(ch: ChannelSet, links: Optional[Sequence[RankOneLink]], p: float,
                        num_randomizations: int = DEFAULT_SAMPLES,
                        rng: Optional[np.random.Generator] = None, tol: float = 1e-7
                        ) -> BeamformingSolution:
    """SDR over the common rotations ``alpha_k`` followed by Gaussian randomization."""
    links = _links(ch, links)
    if not links:
        raise InvalidArgumentError("need at least one IRS")
    _check_power(p)
    r, scale, thetas = _sdr_problem(ch, links)
    k = len(links)
    if scale == 0:
        alphas = np.zeros(k)
    else:
        prob = UnitDiagSdp(r / scale)
        sol = solve_unit_diag_sdp(prob, tol=tol)
        vbar = extract_rank_one(sol, prob, num_randomizations, rng)
        v = vbar[:k] / vbar[k]
        alphas = -_arg(v)
    return complete_with_mrt(_phase_config(alphas, thetas), ch.rank_one_view(links), p,
                             Solver.MULTI_IRS_SDR)


def sdr_upper_bound(ch: ChannelSet, links: Optional[Sequence[RankOneLink]], p: float,
                    tol: float = 1e-7) -> float:
    """Certified upper bound on the power reachable with the co-phasing structure.

    Uses the dual value of the relaxation, so it holds even though the
    solver stops at a nonzero duality gap.
    """
    links = _links(ch, links)
    if not links:
        raise InvalidArgumentError("need at least one IRS")
    _check_power(p)
    r, scale, _ = _sdr_problem(ch, links)
    direct = float(np.vdot(ch.bs_user, ch.bs_user).real)
    if scale == 0:
        return p * direct
    sol = solve_unit_diag_sdp(UnitDiagSdp(r / scale), tol=tol)
    return p * (scale * sol.dual_value + direct)


# ---------------------------------------------------------------------------
# Quantization
# ---------------------------------------------------------------------------

def quantize_phases(cfg: PhaseShiftConfig, bits: int) -> PhaseShiftConfig:
    """Nearest point of ``{2 pi i / 2^b}`` (circular); exact ties go to the lower index."""
    if int(bits) != bits or bits < 1:
        raise InvalidArgumentError(f"bits must be a positive integer, got {bits}")
    levels = 2 ** int(bits)
    out = []
    for p in cfg.phases:
        idx = np.mod(np.ceil(p * levels / TWO_PI - 0.5), levels)
        out.append(idx * TWO_PI / levels)
    return PhaseShiftConfig(tuple(out), int(bits))


def quantize_solution(sol: BeamformingSolution, ch: ChannelSet, p: float, bits: int
                      ) -> BeamformingSolution:
    """Quantize a solution's phases and redo the MRT precoder on ``ch``."""
    return complete_with_mrt(quantize_phases(sol.phase_config, bits), ch, p, sol.solver)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def _grid_bits(requested: int, dims: int, max_points: int) -> int:
    if int(requested) != requested or requested < 1:
        raise InvalidArgumentError(f"grid_bits must be a positive integer, got {requested}")
    if dims == 0:
        return int(requested)
    affordable = int(math.log2(max_points)) // dims
    if affordable < 1:
        raise TooLargeError(f"{dims}-dimensional grid exceeds {max_points} points even at 1 bit")
    return min(int(requested), affordable)


def _grid_search(rows: np.ndarray, const: np.ndarray, bits: int) -> np.ndarray:
    """Exhaustive max of ``||sum_j e^{j t_j} rows_j + const||`` over a b-bit grid."""
    dims = rows.shape[0]
    if dims == 0:
        return np.zeros(0)
    levels = 2 ** bits
    total = levels ** dims
    unit = np.exp(1j * TWO_PI * np.arange(levels) / levels)
    radix = levels ** np.arange(dims - 1, -1, -1)
    best_val, best_idx = -np.inf, 0
    for start in range(0, total, _GRID_CHUNK):
        idx = np.arange(start, min(total, start + _GRID_CHUNK))
        digits = (idx[:, None] // radix) % levels
        c = unit[digits] @ rows + const
        vals = np.sum(c.real ** 2 + c.imag ** 2, axis=1)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_idx = vals[i], int(idx[i])
    return TWO_PI * ((best_idx // radix) % levels) / levels


def _golden_max(f, lo, hi, tol):
    inv = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    x1, x2 = b - inv * (b - a), a + inv * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = f(x1)
    return (a + b) / 2


def _polish(rows, const, t):
    """Cyclic coordinate ascent with golden-section line searches over +-pi/2."""
    t = np.array(t, dtype=float)
    for _ in range(_POLISH_SWEEPS):
        moved = 0.0
        for j in range(len(t)):
            rest = const + np.exp(1j * t) @ rows - np.exp(1j * t[j]) * rows[j]

            def f(x, j=j, rest=rest):
                return float(np.sum(np.abs(np.exp(1j * x) * rows[j] + rest) ** 2))

            x = _golden_max(f, t[j] - math.pi / 2, t[j] + math.pi / 2, _POLISH_TOL)
            if f(x) > f(t[j]):
                moved = max(moved, abs(x - t[j]))
                t[j] = x
        if moved < _POLISH_TOL:
            break
    return t


def brute_force_phases(ch: ChannelSet, p: float, grid_bits: int = 10, polish: bool = False,
                       max_points: int = MAX_GRID_POINTS) -> BeamformingSolution:
    """Grid search over every reflection phase with MRT completion on ``ch``.

    The grid uses ``grid_bits`` bits per element, reduced if needed so that
    at most ``max_points`` candidates are scored. With ``polish`` the best
    grid point is refined by cyclic golden-section search.
    """
    _check_power(p)
    elements = sum(h.shape[0] for h in ch.irs_user)
    if elements > MAX_PHASE_ORACLE_ELEMENTS:
        raise TooLargeError(f"K*M = {elements} exceeds {MAX_PHASE_ORACLE_ELEMENTS}")
    bits = _grid_bits(grid_bits, elements, max_points)
    rows = np.concatenate([np.conj(h)[:, None] * g for g, h in zip(ch.bs_irs, ch.irs_user)]
                          ) if elements else np.zeros((0, ch.num_antennas), dtype=complex)
    const = np.conj(ch.bs_user)
    t = _grid_search(rows, const, bits)
    if polish:
        t = _polish(rows, const, t)
    sizes = np.cumsum([h.shape[0] for h in ch.irs_user])[:-1]
    phases = tuple(wrap_phase(x) for x in np.split(t, sizes))
    cfg = PhaseShiftConfig(phases, None if polish else bits)
    return complete_with_mrt(cfg, ch, p, Solver.BRUTE_FORCE)


def brute_force_alpha(ch: ChannelSet, links: Optional[Sequence[RankOneLink]], p: float,
                      grid_bits: int = 10, polish: bool = False,
                      max_points: int = MAX_GRID_POINTS) -> BeamformingSolution:
    """Grid search over the common rotations ``alpha_k`` with co-phasing fixed."""
    links = _links(ch, links)
    _check_power(p)
    if len(links) > MAX_ALPHA_ORACLE_IRS:
        raise TooLargeError(f"K = {len(links)} exceeds {MAX_ALPHA_ORACLE_IRS}")
    bits = _grid_bits(grid_bits, len(links), max_points)
    phi, thetas = _structure(ch, links)
    const = np.conj(ch.bs_user)
    alphas = _grid_search(phi, const, bits)
    if polish:
        alphas = _polish(phi, const, alphas)
    return complete_with_mrt(_phase_config(alphas, thetas), ch.rank_one_view(links), p,
                             Solver.BRUTE_FORCE)
