"""Monte Carlo experiment runner.

A run is fully described by an :class:`ExperimentConfig`. Every trial gets
private random streams derived from ``(seed, sweep index, trial index, K,
purpose)``, and per-trial results are reduced in trial order with
``math.fsum``, so the output does not depend on how many workers ran it.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import analysis
from .channel import (
    ChannelSet, ChannelStatistics, MultiIrsGeometry, PathLossParams, RankOneLink,
    SingleIrsGeometry, UlaGeometry, UraGeometry, clamp_distance, complex_normal,
    gen_bs_irs_channel, gen_bs_user_channel, gen_irs_user_channel, multi_irs_positions,
    pathloss_variance, single_irs_distances, ula_response, ura_response,
)
from .errors import ConfigError, DegenerateChannelError, SolverFailureError
from .precoding import (
    mrt_no_irs, quantize_solution, received_power, sdr_upper_bound, solve_multi_irs_analytical,
    solve_multi_irs_sdr, solve_single_irs,
)

CSV_HEADER = ("sweep_value", "solver", "mean_snr_db", "mean_throughput", "outage",
              "trials_used", "trials_skipped")
SCALING_HEADER = ("num_elements", "solver", "simulated_mean_power", "predicted_mean_power",
                  "relative_error", "flagged")

#: Share of skipped trials above which a run is rejected.
MAX_SKIP_RATE = 0.01
#: Relative error above which verify_scaling flags a row.
SCALING_FLAG = 0.05

_CHANNEL, _BLOCKAGE, _SOLVER = 0, 1, 2


class Scenario(enum.Enum):
    SINGLE_IRS_SWEEP_DISTANCE = "single_irs_distance"
    SINGLE_IRS_SWEEP_M = "single_irs_m"
    MULTI_IRS_SWEEP_DISTANCE = "multi_irs_distance"
    MULTI_IRS_SWEEP_M = "multi_irs_m"
    BLOCKAGE_SWEEP = "blockage"

    @property
    def single(self) -> bool:
        return self in (Scenario.SINGLE_IRS_SWEEP_DISTANCE, Scenario.SINGLE_IRS_SWEEP_M)


_DEFAULT_SWEEP = {
    Scenario.SINGLE_IRS_SWEEP_DISTANCE: "bs_user_horizontal_m",
    Scenario.SINGLE_IRS_SWEEP_M: "irs_rows",
    Scenario.MULTI_IRS_SWEEP_DISTANCE: "bs_user_horizontal_m",
    Scenario.MULTI_IRS_SWEEP_M: "irs_rows",
    Scenario.BLOCKAGE_SWEEP: "blockage_prob",
}

# In the blockage scenario the user sits beside the third IRS of the K=4 layout.
_DEFAULT_USER_M = {
    Scenario.SINGLE_IRS_SWEEP_DISTANCE: 119.0,
    Scenario.SINGLE_IRS_SWEEP_M: 119.0,
    Scenario.MULTI_IRS_SWEEP_DISTANCE: 115.0,
    Scenario.MULTI_IRS_SWEEP_M: 115.0,
    Scenario.BLOCKAGE_SWEEP: 120.0,
}

SOLVER_TAGS = ("no_irs", "closed_form", "analytical", "sdr", "upper_bound")
QUANTIZABLE = ("closed_form", "analytical", "sdr")
SWEEPABLE = ("bs_user_horizontal_m", "bs_irs_horizontal_m", "vertical_offset_m", "irs_rows",
             "irs_cols", "num_antennas", "num_irs", "irs_span_m", "blockage_prob",
             "transmit_power_dbm")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def parse_solver_tag(tag: str) -> Tuple[str, Optional[int]]:
    """``"analytical:2"`` -> ``("analytical", 2)``; no suffix means continuous phases."""
    base, _, bits = tag.strip().partition(":")
    if base not in SOLVER_TAGS:
        raise ValueError(f"unknown solver {base!r}, expected one of {', '.join(SOLVER_TAGS)}")
    if not bits:
        return base, None
    if base not in QUANTIZABLE:
        raise ValueError(f"solver {base!r} takes no phase bits")
    b = int(bits)
    if b < 1:
        raise ValueError(f"phase bits must be >= 1 in {tag!r}")
    return base, b


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description. ``None`` geometry fields take scenario defaults."""

    scenario: Scenario = Scenario.SINGLE_IRS_SWEEP_DISTANCE
    channel_mode: str = "geometric"
    num_antennas: int = 64
    irs_rows: int = 20
    irs_cols: int = 10
    element_spacing: float = 0.5
    bs_irs_horizontal_m: Optional[float] = None
    vertical_offset_m: float = 0.6
    bs_user_horizontal_m: Optional[float] = None
    num_irs: int = 3
    irs_span_m: float = 30.0
    num_paths_bs_user: int = 4
    num_paths_irs_user: int = 4
    num_paths_bs_irs: Optional[int] = None
    rician_factor_db: float = 13.2
    los_intercept_db: float = 61.4
    los_exponent: float = 2.0
    los_shadow_db: float = 5.8
    nlos_intercept_db: float = 72.0
    nlos_exponent: float = 2.92
    nlos_shadow_db: float = 8.7
    transmit_power_dbm: float = 30.0
    noise_power_dbm: float = -90.0
    solvers: Tuple[str, ...] = ("no_irs", "analytical")
    sweep_variable: Optional[str] = None
    sweep_values: Tuple[float, ...] = (119.0,)
    trials: int = 1000
    seed: int = 0
    blockage_prob: float = 0.0
    num_irs_list: Tuple[int, ...] = ()
    outage_threshold: float = 0.5
    sdr_randomizations: int = 1000
    evaluate_on: str = "full"
    workers: int = 1

    def __post_init__(self):
        s = self.scenario
        defaults = {
            "bs_irs_horizontal_m": 119.0 if s.single else 100.0,
            "bs_user_horizontal_m": _DEFAULT_USER_M[s],
            # the multi-IRS BS-IRS channels are LOS only
            "num_paths_bs_irs": 4 if s.single else 1,
            "sweep_variable": _DEFAULT_SWEEP[s],
        }
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        if s.single:
            object.__setattr__(self, "num_irs", 1)
        self._validate_fields()
        self._validate_sweep()

    def _validate_fields(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(name, msg)

        for name in ("num_antennas", "irs_rows", "irs_cols", "num_irs", "num_paths_bs_user",
                     "num_paths_irs_user", "num_paths_bs_irs", "trials", "sdr_randomizations",
                     "workers"):
            need(getattr(self, name) >= 1, name, "must be >= 1")
        for name in ("element_spacing", "bs_irs_horizontal_m", "bs_user_horizontal_m"):
            need(getattr(self, name) > 0, name, "must be > 0")
        for name in ("vertical_offset_m", "irs_span_m", "los_shadow_db", "nlos_shadow_db"):
            need(getattr(self, name) >= 0, name, "must be >= 0")
        need(self.channel_mode in ("geometric", "statistical"), "channel_mode",
             "must be 'geometric' or 'statistical'")
        need(self.evaluate_on in ("full", "rank_one"), "evaluate_on", "must be 'full' or 'rank_one'")
        need(0 <= self.blockage_prob <= 1, "blockage_prob", "must lie in [0, 1]")
        need(0 <= self.seed < 2 ** 64, "seed", "must be a 64-bit unsigned integer")
        need(len(self.solvers) > 0, "solvers", "must list at least one solver")
        for tag in self.solvers:
            try:
                base, _ = parse_solver_tag(tag)
            except ValueError as exc:
                raise ConfigError("solvers", str(exc)) from None
            need(not (base == "closed_form" and not self.scenario.single), "solvers",
                 "closed_form needs a single-IRS scenario")
        need(len(set(self.solvers)) == len(self.solvers), "solvers", "duplicate solver tag")
        need(all(k >= 1 for k in self.num_irs_list), "num_irs_list", "entries must be >= 1")
        need(not self.num_irs_list or self.scenario is Scenario.BLOCKAGE_SWEEP, "num_irs_list",
             "only used by the blockage scenario")

    def _validate_sweep(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(name, msg)

        need(self.sweep_variable in SWEEPABLE, "sweep_variable",
             f"must be one of {', '.join(SWEEPABLE)}")
        need(len(self.sweep_values) > 0, "sweep_values", "must not be empty")
        diffs = np.diff(np.asarray(self.sweep_values, dtype=float))
        need(bool(np.all(diffs > 0) or np.all(diffs < 0)), "sweep_values", "must be strictly monotone")
        for v in self.sweep_values:
            try:
                self.at(v)
            except ConfigError as exc:
                raise ConfigError("sweep_values", f"{v!r} is invalid: {exc}") from None

    # -- derived views --------------------------------------------------------------

    def at(self, value) -> "ExperimentConfig":
        """This config with the sweep variable set to ``value``."""
        name = self.sweep_variable
        current = getattr(self, name)
        if isinstance(current, int) and not isinstance(current, bool):
            if float(value) != int(value):
                raise ConfigError(name, f"needs an integer, got {value!r}")
            value = int(value)
        else:
            value = float(value)
        if getattr(self, name) == value:
            return self
        point = copy.copy(self)
        object.__setattr__(point, name, value)
        point._validate_fields()
        return point

    @property
    def ula(self) -> UlaGeometry:
        return UlaGeometry(self.num_antennas, self.element_spacing)

    @property
    def ura(self) -> UraGeometry:
        return UraGeometry(self.irs_rows, self.irs_cols, self.element_spacing)

    @property
    def num_elements(self) -> int:
        return self.irs_rows * self.irs_cols

    @property
    def los_pathloss(self) -> PathLossParams:
        return PathLossParams(self.los_intercept_db, self.los_exponent, self.los_shadow_db)

    @property
    def nlos_pathloss(self) -> PathLossParams:
        return PathLossParams(self.nlos_intercept_db, self.nlos_exponent, self.nlos_shadow_db)

    @property
    def channel_stats(self) -> ChannelStatistics:
        return ChannelStatistics(self.num_paths_bs_user, self.num_paths_irs_user, self.num_paths_bs_irs,
                                 self.rician_factor_db, self.los_pathloss, self.nlos_pathloss)

    @property
    def transmit_power(self) -> float:
        return dbm_to_watts(self.transmit_power_dbm)

    @property
    def noise_power(self) -> float:
        return dbm_to_watts(self.noise_power_dbm)

    def irs_counts(self) -> Tuple[int, ...]:
        return tuple(self.num_irs_list) or (self.num_irs,)

    def link_distances(self, num_irs: Optional[int] = None):
        """``(bs_user, [(bs_irs, irs_user), ...])`` in meters, clamped."""
        d = clamp_distance(self.bs_user_horizontal_m)
        if self.scenario.single:
            d2, d3 = single_irs_distances(SingleIrsGeometry(
                self.bs_irs_horizontal_m, self.vertical_offset_m, self.bs_user_horizontal_m))
            return d, [(clamp_distance(d2), clamp_distance(d3))]
        geom = MultiIrsGeometry(num_irs or self.num_irs, self.bs_irs_horizontal_m, self.irs_span_m,
                                self.vertical_offset_m, self.bs_user_horizontal_m)
        return d, [(clamp_distance(a), clamp_distance(b)) for a, b in multi_irs_positions(geom)]


_LIST_FIELDS = {"solvers": str, "sweep_values": float, "num_irs_list": int}


def _convert(name: str, text: str, kind):
    text = text.strip()
    if name in _LIST_FIELDS:
        items = [t.strip() for t in text.split(",") if t.strip()]
        conv = _LIST_FIELDS[name]
        try:
            return tuple(int(float(t)) if conv is int else conv(t) for t in items)
        except ValueError:
            raise ConfigError(name, f"cannot parse list {text!r}") from None
    if name == "scenario":
        try:
            return Scenario(text)
        except ValueError:
            allowed = ", ".join(s.value for s in Scenario)
            raise ConfigError(name, f"unknown scenario {text!r}, expected one of {allowed}") from None
    if kind is int:
        try:
            f = float(text)
        except ValueError:
            raise ConfigError(name, f"expected an integer, got {text!r}") from None
        if not f.is_integer():
            raise ConfigError(name, f"expected an integer, got {text!r}")
        return int(text) if text.lstrip("+-").isdigit() else int(f)
    if kind is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(name, f"expected a number, got {text!r}") from None
    return text


def _field_kinds() -> Dict[str, type]:
    kinds = {}
    for f in dataclasses.fields(ExperimentConfig):
        default = f.default
        if f.name in ("bs_irs_horizontal_m", "bs_user_horizontal_m"):
            kinds[f.name] = float
        elif f.name == "num_paths_bs_irs":
            kinds[f.name] = int
        elif default is None:
            kinds[f.name] = str
        else:
            kinds[f.name] = type(default)
    return kinds


def parse_config_text(text: str, overrides: Sequence[str] = (), source: str = "<config>"
                      ) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment); overrides win over the file."""
    kinds = _field_kinds()
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {line!r}")
        if key not in kinds:
            raise ConfigError(f"{source}:{lineno}", f"unknown key {key!r}")
        raw[key] = value
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError("--override", f"expected KEY=VALUE, got {item!r}")
        if key not in kinds:
            raise ConfigError("--override", f"unknown key {key!r}")
        raw[key] = value
    values = {k: _convert(k, v, kinds[k]) for k, v in raw.items()}
    return ExperimentConfig(**values)


def load_config(path: str, overrides: Sequence[str] = ()) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_config_text(text, overrides, source=path)


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    sweep_value: float
    trial_index: int
    solver: str
    received_power_linear: float
    snr_db: float
    throughput: float
    blocked_direct: bool = False
    blocked_irs: Tuple[bool, ...] = ()
    skipped: bool = False


@dataclass(frozen=True)
class SummaryRow:
    sweep_value: float
    solver: str
    mean_snr_db: float
    mean_throughput: float
    outage: float
    trials_used: int
    trials_skipped: int


def trial_rng(seed: int, sweep_index: int, trial_index: int, num_irs: int, purpose: int
              ) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, sweep_index, trial_index, num_irs, purpose]))


def _random_steering(cfg: ExperimentConfig, rng):
    az, el = rng.uniform(-math.pi / 2, math.pi / 2), rng.uniform(-math.pi / 4, math.pi / 4)
    aod = rng.uniform(-math.pi / 2, math.pi / 2)
    return ura_response(az, el, cfg.ura), np.conj(ula_response(aod, cfg.ula))


def statistical_sigmas(cfg: ExperimentConfig, num_irs: Optional[int] = None):
    """Shadowing-free link scales: ``(s_d, [s_r_k], [|rho_k|])``."""
    d, irs = cfg.link_distances(num_irs)
    s_d = math.sqrt(pathloss_variance(d, cfg.nlos_pathloss))
    s_r = [math.sqrt(pathloss_variance(d3, cfg.los_pathloss)) for _, d3 in irs]
    rho = [math.sqrt(pathloss_variance(d2, cfg.los_pathloss)) for d2, _ in irs]
    return s_d, s_r, rho


def sample_channels(cfg: ExperimentConfig, rng: np.random.Generator,
                    num_irs: Optional[int] = None) -> ChannelSet:
    """One realization in the configured channel mode, with rank-one links attached."""
    n, m = cfg.num_antennas, cfg.num_elements
    if cfg.channel_mode == "statistical":
        s_d, s_r, rho = statistical_sigmas(cfg, num_irs)
        h_d = complex_normal(rng, s_d ** 2, n)
        gs, hs, links = [], [], []
        for sr, r in zip(s_r, rho):
            a, b = _random_steering(cfg, rng)
            link = RankOneLink(math.sqrt(n * m) * r * np.exp(1j * rng.uniform(0, 2 * math.pi)), a, b)
            gs.append(link.matrix())
            hs.append(complex_normal(rng, sr ** 2, m))
            links.append(link)
        return ChannelSet(h_d, gs, hs, links)
    stats = cfg.channel_stats
    d, irs = cfg.link_distances(num_irs)
    h_d = gen_bs_user_channel(cfg.ula, stats, d, rng)
    gs, hs, links = [], [], []
    for d2, d3 in irs:
        g, link = gen_bs_irs_channel(cfg.ula, cfg.ura, stats, d2, rng)
        gs.append(g)
        hs.append(gen_irs_user_channel(cfg.ura, stats, d3, rng))
        links.append(link)
    return ChannelSet(h_d, gs, hs, links)


def _solve(tag: str, ch: ChannelSet, p: float, cfg: ExperimentConfig, rng):
    """Received power for one solver tag (the bound tag reports the bound itself)."""
    base, bits = parse_solver_tag(tag)
    if base == "upper_bound":
        return sdr_upper_bound(ch, None, p)
    if base == "no_irs":
        return mrt_no_irs(ch.bs_user, p).received_power
    if base == "closed_form":
        sol = solve_single_irs(ch, ch.rank_one[0], p)
    elif base == "analytical":
        sol = solve_multi_irs_analytical(ch, None, p)
    else:
        sol = solve_multi_irs_sdr(ch, None, p, cfg.sdr_randomizations, rng)
    if bits is not None:
        sol = quantize_solution(sol, ch.rank_one_view(), p, bits)
    target = ch if cfg.evaluate_on == "full" else ch.rank_one_view()
    return received_power(sol.precoder, sol.phase_config, target)


def _snr_db(power: float, noise: float) -> float:
    return 10 * math.log10(power / noise) if power > 0 else -math.inf


def run_trial(cfg: ExperimentConfig, sweep_index: int, trial_index: int,
              num_irs: Optional[int] = None, label_suffix: str = "") -> List[TrialRecord]:
    """Sample, optionally block, solve and score one realization for every solver."""
    k = num_irs or cfg.num_irs
    ch = sample_channels(cfg, trial_rng(cfg.seed, sweep_index, trial_index, k, _CHANNEL), k)
    blocked_direct, blocked_irs = False, (False,) * ch.num_irs
    if cfg.blockage_prob > 0:
        flags = trial_rng(cfg.seed, sweep_index, trial_index, k, _BLOCKAGE).random(ch.num_irs + 1)
        flags = flags < cfg.blockage_prob
        blocked_direct, blocked_irs = bool(flags[0]), tuple(bool(f) for f in flags[1:])
        ch = ch.with_blockage(blocked_direct, blocked_irs)
    any_blocked = blocked_direct or any(blocked_irs)
    p, noise = cfg.transmit_power, cfg.noise_power
    value = getattr(cfg, cfg.sweep_variable)
    records = []
    for tag in cfg.solvers:
        rng = trial_rng(cfg.seed, sweep_index, trial_index, k, _SOLVER)
        skipped = False
        try:
            power = _solve(tag, ch, p, cfg, rng)
        except DegenerateChannelError:
            # a link set zeroed by blockage carries no power; anything else is a skip
            power, skipped = 0.0, not any_blocked
        records.append(TrialRecord(float(value), trial_index, tag + label_suffix, power,
                                   _snr_db(power, noise), analysis.throughput(power, noise),
                                   blocked_direct, blocked_irs, skipped))
    return records


def _run_block(args):
    cfg, sweep_index, trials, num_irs, suffix = args
    out = []
    for t in trials:
        out.extend(run_trial(cfg, sweep_index, t, num_irs, suffix))
    return out


def _jobs(cfg: ExperimentConfig):
    chunk = max(1, math.ceil(cfg.trials / (4 * cfg.workers)))
    multi_k = bool(cfg.num_irs_list)
    for si, value in enumerate(cfg.sweep_values):
        point = cfg.at(value)
        for k in cfg.irs_counts():
            suffix = f"[K={k}]" if multi_k else ""
            kk = k if cfg.scenario is Scenario.BLOCKAGE_SWEEP else None
            for start in range(0, cfg.trials, chunk):
                yield (si, value, suffix), (point, si, range(start, min(cfg.trials, start + chunk)), kk, suffix)


def collect_records(cfg: ExperimentConfig, progress: Optional[Callable[[int, int], None]] = None
                    ) -> List[TrialRecord]:
    """All trial records in deterministic (sweep, K, trial, solver) order."""
    jobs = [job for _, job in _jobs(cfg)]
    records: List[TrialRecord] = []
    if cfg.workers == 1:
        results: Iterable = map(_run_block, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=cfg.workers)
        results = pool.map(_run_block, jobs)
    try:
        for i, block in enumerate(results, 1):
            records.extend(block)
            if progress:
                progress(i, len(jobs))
    finally:
        if cfg.workers != 1:
            pool.shutdown()
    return records


def summarize(cfg: ExperimentConfig, records: Sequence[TrialRecord]) -> List[SummaryRow]:
    groups: Dict[Tuple[float, str], List[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.sweep_value, r.solver), []).append(r)
    rows = []
    for (value, solver), recs in groups.items():
        used = [r for r in recs if not r.skipped]
        skipped = len(recs) - len(used)
        if skipped > MAX_SKIP_RATE * len(recs):
            raise SolverFailureError(
                f"{solver} skipped {skipped} of {len(recs)} trials at {cfg.sweep_variable}={value:g}",
                {"solver": solver, "sweep_value": value, "skipped": skipped})
        if used:
            snr = math.fsum(r.snr_db for r in used) / len(used)
            thr = math.fsum(r.throughput for r in used) / len(used)
            out = analysis.outage_probability([r.throughput for r in used], cfg.outage_threshold)
        else:
            snr = thr = out = math.nan
        rows.append(SummaryRow(value, solver, snr, thr, out, len(used), skipped))
    return rows


def run_experiment(cfg: ExperimentConfig, progress=None) -> List[SummaryRow]:
    """Aggregate mean SNR (dB), mean throughput and outage per sweep value and solver."""
    return summarize(cfg, collect_records(cfg, progress))


def run_blockage_experiment(cfg: ExperimentConfig, progress=None) -> List[SummaryRow]:
    """Blockage sweep: one row per (P, K, solver). Solvers are re-run on the surviving links."""
    if cfg.scenario is not Scenario.BLOCKAGE_SWEEP:
        raise ConfigError("scenario", "run_blockage_experiment needs scenario = blockage")
    return run_experiment(cfg, progress)


# ---------------------------------------------------------------------------
# Scaling-law verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingRow:
    num_elements: int
    solver: str
    simulated_mean_power: float
    predicted_mean_power: float
    relative_error: float
    flagged: bool


def predicted_power_from_moments(n: int, m: int, s_d: float, s_r: Sequence[float],
                                 rho_abs: Sequence[float], rho_sq: Sequence[float],
                                 bits: Optional[int] = None) -> float:
    """Mean power built from the moments of ``z_k = sqrt(N) |rho_k| sum_m |h_rk,m|``.

    ``|h|`` is Rayleigh with ``E|h| = sqrt(pi) s / 2`` and ``E|h|^2 = s^2``; a
    b-bit phase error scales each coherent term by ``E[cos e] = sinc``.
    """
    c = 1.0 if bits is None else math.sin(math.pi / 2 ** bits) / (math.pi / 2 ** bits)
    e_bh = math.sqrt(math.pi) * s_d / 2  # E|b^T h_d|
    total = n * s_d * s_d
    for s, m1, m2 in zip(s_r, rho_abs, rho_sq):
        e_abs = math.sqrt(math.pi) * s / 2
        e_z2 = n * m2 * (m * s * s + m * (m - 1) * (c * e_abs) ** 2)
        e_z = math.sqrt(n) * m1 * m * c * e_abs
        total += e_z2 + 2 * e_z * e_bh
    return total


def verify_scaling(cfg: ExperimentConfig, progress=None) -> List[ScalingRow]:
    """Compare simulated mean power with the closed forms for each swept M.

    Runs in statistical mode on the rank-one model. Solver tags may carry
    phase bits, in which case the discrete-phase prediction is used.
    """
    if cfg.sweep_variable not in ("irs_rows", "irs_cols"):
        raise ConfigError("sweep_variable", "verify-scaling sweeps irs_rows or irs_cols")
    tags = [t for t in cfg.solvers if parse_solver_tag(t)[0] in ("closed_form", "analytical")]
    if not tags:
        raise ConfigError("solvers", "verify-scaling needs closed_form or analytical tags")
    base = dataclasses.replace(cfg, channel_mode="statistical", evaluate_on="rank_one",
                               blockage_prob=0.0, solvers=tuple(tags))
    records = collect_records(base, progress)
    rows = []
    p = base.transmit_power
    for value in base.sweep_values:
        point = base.at(value)
        s_d, s_r, rho = statistical_sigmas(point)
        for tag in tags:
            powers = [r.received_power_linear for r in records
                      if r.sweep_value == float(value) and r.solver == tag and not r.skipped]
            sim = math.fsum(powers) / len(powers)
            bits = parse_solver_tag(tag)[1]
            pred = p * predicted_power_from_moments(point.num_antennas, point.num_elements, s_d, s_r,
                                                    rho, [r * r for r in rho], bits)
            err = abs(sim - pred) / pred
            rows.append(ScalingRow(point.num_elements, tag, sim, pred, err, err > SCALING_FLAG))
    return rows


def scaling_params(cfg: ExperimentConfig) -> analysis.ScalingLawParams:
    """Statistical-model parameters of ``cfg`` for the analysis formulas."""
    s_d, s_r, rho = statistical_sigmas(cfg)
    return analysis.ScalingLawParams(cfg.num_antennas, cfg.num_elements, len(s_r), s_r, s_d,
                                     rho, [r * r for r in rho])


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(getattr(r, h)) for h in header])
    return buf.getvalue()


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    return _csv(CSV_HEADER, rows)


def scaling_csv(rows: Sequence[ScalingRow]) -> str:
    return _csv(SCALING_HEADER, rows)


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
