"""Closed-form average received power, quantization loss and link metrics.

The expected-power formulas assume Rayleigh IRS-user and direct links
(``h_r ~ CN(0, s_r^2 I)``, ``h_d ~ CN(0, s_d^2 I)``) and a rank-one BS-IRS
link ``sqrt(NM) rho a b^T``. They are per unit transmit power; multiply by
``p`` for absolute values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class ScalingLawParams:
    """Array sizes and per-link statistics.

    Attributes:
        num_antennas: N.
        num_elements: M, per IRS.
        num_irs: K.
        irs_user_sigma: standard deviation of each IRS-user entry, one per IRS.
        bs_user_sigma: standard deviation of each direct-link entry.
        los_gain_mean_abs: ``E|rho_k|`` per IRS.
        los_gain_mean_sq: ``E|rho_k|^2`` per IRS.
    """

    num_antennas: int
    num_elements: int
    num_irs: int
    irs_user_sigma: Sequence[float]
    bs_user_sigma: float
    los_gain_mean_abs: Sequence[float]
    los_gain_mean_sq: Sequence[float]

    def __post_init__(self):
        for name in ("num_antennas", "num_elements", "num_irs"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {v}")
        for name in ("irs_user_sigma", "los_gain_mean_abs", "los_gain_mean_sq"):
            vals = tuple(float(x) for x in getattr(self, name))
            if len(vals) != self.num_irs:
                raise InvalidArgumentError(f"{name} must have {self.num_irs} entries, got {len(vals)}")
            object.__setattr__(self, name, vals)
        if any(s <= 0 for s in self.irs_user_sigma) or not self.bs_user_sigma > 0:
            raise InvalidArgumentError("channel standard deviations must be > 0")
        for k, (m1, m2) in enumerate(zip(self.los_gain_mean_abs, self.los_gain_mean_sq)):
            if m1 < 0 or m2 < 0:
                raise InvalidArgumentError(f"gain moments of IRS {k} must be >= 0")
            # Jensen, with a little slack for moments estimated in floating point
            if m2 < m1 * m1 * (1 - 1e-12):
                raise InvalidArgumentError(f"E|rho|^2 < (E|rho|)^2 for IRS {k}")


@dataclass(frozen=True)
class LinkMetrics:
    received_power: float
    noise_power: float
    throughput_bps_hz: float
    blocked: bool = False

    def __post_init__(self):
        if not self.noise_power > 0:
            raise InvalidArgumentError("noise_power must be > 0")
        if self.received_power < 0:
            raise InvalidArgumentError("received_power must be >= 0")
        if abs(self.throughput_bps_hz - throughput(self.received_power, self.noise_power)) > 1e-12:
            raise InvalidArgumentError("throughput does not match log2(1 + power/noise)")

    @classmethod
    def from_power(cls, power: float, noise: float, blocked: bool = False) -> "LinkMetrics":
        return cls(power, noise, throughput(power, noise), blocked)


def _terms(p: ScalingLawParams):
    """Per-IRS (M^2, cross, linear-in-M) coefficient parts, summed over k."""
    n, m = p.num_antennas, p.num_elements
    sq = lin = cross = 0.0
    for s_r, m1, m2 in zip(p.irs_user_sigma, p.los_gain_mean_abs, p.los_gain_mean_sq):
        sq += m2 * math.pi * s_r ** 2 / 4
        cross += m1 * math.pi * s_r * p.bs_user_sigma / 4
        lin += m2 * s_r ** 2
    return n, m, sq, cross, lin


def expected_power_multi(p: ScalingLawParams) -> float:
    """Average received power of the near-optimal multi-IRS solution (unit power)."""
    n, m, sq, cross, lin = _terms(p)
    return (n * m * m * sq + 2 * m * math.sqrt(n) * cross
            + n * m * (2 - math.pi / 2) * lin / 2 + n * p.bs_user_sigma ** 2)


def expected_power_single(p: ScalingLawParams) -> float:
    """Average received power of the single-IRS closed form (unit power)."""
    if p.num_irs != 1:
        raise InvalidArgumentError(f"expected_power_single needs K=1, got K={p.num_irs}")
    return expected_power_multi(p)


def _check_bits(bits):
    if int(bits) != bits or bits < 1:
        raise InvalidArgumentError(f"bits must be a positive integer, got {bits}")


def phase_error_gain(bits: int) -> float:
    """``E[exp(j e)]`` for ``e`` uniform over one b-bit quantization cell."""
    _check_bits(bits)
    x = math.pi / 2 ** int(bits)
    return math.sin(x) / x


def quantization_ratio(bits: int) -> float:
    """Asymptotic power ratio of b-bit to continuous phases, ``((2^b/pi) sin(pi/2^b))^2``."""
    return phase_error_gain(bits) ** 2


def expected_power_discrete(p: ScalingLawParams, bits: int) -> float:
    """Average received power with b-bit phase shifters (unit power)."""
    eta1 = phase_error_gain(bits)
    n, m, sq, cross, lin = _terms(p)
    return (n * m * lin + n * m * (m - 1) * sq * eta1 ** 2
            + 2 * eta1 * m * math.sqrt(n) * cross + n * p.bs_user_sigma ** 2)


def throughput(power: float, noise: float) -> float:
    """``log2(1 + power / noise)`` in bit/s/Hz."""
    if not noise > 0:
        raise InvalidArgumentError(f"noise power must be > 0, got {noise}")
    if power < 0:
        raise InvalidArgumentError(f"power must be >= 0, got {power}")
    return math.log2(1 + power / noise)


def outage_probability(samples, threshold: float) -> float:
    """Fraction of throughput samples strictly below ``threshold``."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise InvalidArgumentError("need at least one sample")
    return float(np.count_nonzero(x < threshold)) / x.size
