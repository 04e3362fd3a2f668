import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irs_mmwave.channel import (
    LOS_PATHLOSS, NLOS_PATHLOSS, ChannelSet, ChannelStatistics, MultiIrsGeometry, PathLossParams,
    RankOneLink, SingleIrsGeometry, UlaGeometry, UraGeometry, clamp_distance, dominant_rank_one,
    gen_bs_irs_channel, gen_bs_user_channel, gen_irs_user_channel, irs_horizontal_offsets,
    multi_irs_positions, pathloss_db, pathloss_gain, pathloss_variance, single_irs_distances,
    ula_inner_product, ula_response, ura_response,
)
from irs_mmwave.errors import InvalidArgumentError

from conftest import cn, unit

angles = st.floats(-10, 10, allow_nan=False)


# -- array responses -------------------------------------------------------------

def test_ula_broadside_is_flat():
    np.testing.assert_allclose(ula_response(0.0, UlaGeometry(4)), 0.5 * np.ones(4))


def test_ula_entries_follow_phase_progression():
    geom = UlaGeometry(5, 0.5)
    phi = 0.3
    expected = [np.exp(1j * 2 * np.pi * 0.5 * n * np.sin(phi)) / np.sqrt(5) for n in range(5)]
    np.testing.assert_allclose(ula_response(phi, geom), expected, atol=1e-15)


def test_ula_two_elements_orthogonal_at_zero_and_half_pi():
    geom = UlaGeometry(2)
    assert abs(np.vdot(ula_response(0.0, geom), ula_response(np.pi / 2, geom))) < 1e-15
    assert abs(ula_inner_product(0.0, np.pi / 2, geom)) < 1e-15


@given(angles, st.integers(1, 300), st.floats(0.1, 2.0))
def test_ula_unit_norm(phi, n, spacing):
    assert abs(np.linalg.norm(ula_response(phi, UlaGeometry(n, spacing))) - 1) < 1e-12


@given(angles, angles, st.integers(1, 64), st.integers(1, 64))
def test_ura_unit_norm(az, el, rows, cols):
    assert abs(np.linalg.norm(ura_response(az, el, UraGeometry(rows, cols))) - 1) < 1e-12


def test_ura_broadside_is_flat():
    np.testing.assert_allclose(ura_response(0.0, 0.0, UraGeometry(2, 3)), np.ones(6) / np.sqrt(6))


def test_ura_single_column_is_vertical_ula():
    el = 0.4
    ura = ura_response(1.1, el, UraGeometry(7, 1))
    np.testing.assert_allclose(ura, ula_response(el, UlaGeometry(7)), atol=1e-15)


@given(angles, angles, st.integers(2, 128))
def test_ula_inner_product_closed_form(a, b, n):
    geom = UlaGeometry(n)
    direct = abs(np.vdot(ula_response(a, geom), ula_response(b, geom)))
    assert abs(abs(ula_inner_product(a, b, geom)) - direct) < 1e-10


def test_ula_near_orthogonality_improves_with_n():
    a, b = 0.2, 0.9
    small = abs(ula_inner_product(a, b, UlaGeometry(16)))
    large = abs(ula_inner_product(a, b, UlaGeometry(256)))
    assert large < small


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_ula_geometry_rejects_bad_sizes(bad):
    with pytest.raises(InvalidArgumentError):
        UlaGeometry(bad)


def test_geometry_rejects_nonpositive_spacing():
    with pytest.raises(InvalidArgumentError):
        UlaGeometry(4, 0.0)
    with pytest.raises(InvalidArgumentError):
        UraGeometry(2, 2, -0.5)


# -- path loss ---------------------------------------------------------------------

def test_pathloss_nlos_at_100m():
    # kappa = 72 + 29.2 * 2 = 130.4 dB
    assert pathloss_db(100.0, NLOS_PATHLOSS) == pytest.approx(130.4, abs=1e-12)
    assert pathloss_variance(100.0, NLOS_PATHLOSS) == pytest.approx(10 ** -13.04, rel=1e-12)


def test_pathloss_at_one_meter_is_intercept():
    assert pathloss_db(1.0, LOS_PATHLOSS) == 61.4


def test_default_pathloss_tables():
    assert (LOS_PATHLOSS.intercept_db, LOS_PATHLOSS.exponent, LOS_PATHLOSS.shadow_sigma_db) == (61.4, 2.0, 5.8)
    assert (NLOS_PATHLOSS.intercept_db, NLOS_PATHLOSS.exponent, NLOS_PATHLOSS.shadow_sigma_db) == (72.0, 2.92, 8.7)


def test_pathloss_rejects_nonpositive_distance(rng):
    with pytest.raises(InvalidArgumentError):
        pathloss_gain(0.0, LOS_PATHLOSS, rng)
    with pytest.raises(InvalidArgumentError):
        pathloss_db(-1.0, LOS_PATHLOSS)


def test_negative_shadowing_sigma_rejected():
    with pytest.raises(InvalidArgumentError):
        PathLossParams(60, 2, -1)


def test_pathloss_gain_variance_without_shadowing(rng):
    params = PathLossParams(72.0, 2.92, 0.0)
    draws = np.array([pathloss_gain(100.0, params, rng) for _ in range(40000)])
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(10 ** -13.04, rel=0.03)


def test_pathloss_gain_lognormal_mean(rng):
    # E[10^(-xi/10)] = exp((sigma ln10 / 10)^2 / 2) for xi ~ N(0, sigma^2)
    params = PathLossParams(60.0, 2.0, 2.0)
    draws = np.array([pathloss_gain(10.0, params, rng) for _ in range(60000)])
    factor = math.exp((2.0 * math.log(10) / 10) ** 2 / 2)
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(1e-8 * factor, rel=0.03)


# -- generators ----------------------------------------------------------------------

def _stats(**kw):
    base = dict(num_paths_bs_user=4, num_paths_irs_user=4, num_paths_bs_irs=4)
    base.update(kw)
    return ChannelStatistics(**base)


def test_single_path_bs_user_channel_is_scaled_steering():
    geom = UlaGeometry(8)
    h = gen_bs_user_channel(geom, _stats(num_paths_bs_user=1), 50.0, np.random.default_rng(1))
    # h = sqrt(N) alpha a_t(phi): all entries share |alpha|
    assert np.allclose(np.abs(h), np.abs(h[0]))


def test_bs_user_mean_energy():
    nlos = PathLossParams(72.0, 2.92, 0.0)
    stats = ChannelStatistics(4, 4, 4, 13.2, LOS_PATHLOSS, nlos)
    geom = UlaGeometry(8)
    rng = np.random.default_rng(3)
    e = np.mean([np.linalg.norm(gen_bs_user_channel(geom, stats, 100.0, rng)) ** 2 for _ in range(100000)])
    assert e == pytest.approx(8 * 10 ** -13.04, rel=0.01)


def test_irs_user_mean_energy():
    los = PathLossParams(61.4, 2.0, 0.0)
    stats = ChannelStatistics(4, 4, 4, 13.2, los, NLOS_PATHLOSS)
    geom = UraGeometry(3, 2)
    rng = np.random.default_rng(4)
    var = pathloss_variance(10.0, los)
    k = 10 ** 1.32
    # (M / L_r) (var + (L_r - 1) var / (k (L_r - 1)))
    expected = 6 / 4 * var * (1 + 1 / k)
    e = np.mean([np.linalg.norm(gen_irs_user_channel(geom, stats, 10.0, rng)) ** 2 for _ in range(100000)])
    assert e == pytest.approx(expected, rel=0.01)


def test_irs_user_single_path_is_pure_los():
    geom = UraGeometry(4, 5)
    h = gen_irs_user_channel(geom, _stats(num_paths_irs_user=1), 5.0, np.random.default_rng(2))
    assert np.allclose(np.abs(h), np.abs(h[0]))


def test_rician_split_ratio():
    stats = ChannelStatistics()
    assert stats.rician_factor == pytest.approx(10 ** 1.32)
    # LOS-to-total-NLOS energy of the generated BS-IRS channel follows the Rician factor
    los = PathLossParams(61.4, 2.0, 0.0)
    stats = ChannelStatistics(4, 4, 4, 13.2, los, NLOS_PATHLOSS)
    rng = np.random.default_rng(5)
    tx, rx = UlaGeometry(4), UraGeometry(2, 2)
    los_e, nlos_e = [], []
    for _ in range(40000):
        g, link = gen_bs_irs_channel(tx, rx, stats, 30.0, rng)
        los_e.append(abs(link.gain) ** 2)
        nlos_e.append(np.linalg.norm(g - link.matrix()) ** 2)
    # NLOS terms are not orthogonal to each other, but their cross terms average out
    assert np.mean(los_e) / np.mean(nlos_e) == pytest.approx(10 ** 1.32, rel=0.05)


def test_bs_irs_single_path_reconstructs_exactly():
    g, link = gen_bs_irs_channel(UlaGeometry(6), UraGeometry(3, 3), _stats(num_paths_bs_irs=1), 40.0,
                                 np.random.default_rng(8))
    assert np.linalg.norm(g - link.matrix()) <= 1e-15 * np.linalg.norm(g)
    assert np.linalg.matrix_rank(g) == 1


def _rank_one_residuals(trials=2000):
    rng = np.random.default_rng(123)
    stats, tx, rx = ChannelStatistics(), UlaGeometry(64), UraGeometry(20, 10)
    res, tot = [], []
    for _ in range(trials):
        g, link = gen_bs_irs_channel(tx, rx, stats, 119.0, rng)
        res.append(np.linalg.norm(g - link.matrix()) ** 2)
        tot.append(np.linalg.norm(g) ** 2)
    return np.array(res), np.array(tot)


def test_rank_one_residual_regression():
    res, tot = _rank_one_residuals()
    # mean of per-realization ratios; faded LOS draws make this heavy-tailed
    assert np.mean(np.sqrt(res / tot)) == pytest.approx(0.2962, abs=0.01)
    # energy-averaged ratio stays under 0.25 at a 13.2 dB Rician factor
    assert math.sqrt(res.mean() / tot.mean()) <= 0.25


def test_generators_are_deterministic():
    stats, tx, rx = ChannelStatistics(), UlaGeometry(8), UraGeometry(3, 4)
    a = gen_bs_irs_channel(tx, rx, stats, 50.0, np.random.default_rng(9))[0]
    b = gen_bs_irs_channel(tx, rx, stats, 50.0, np.random.default_rng(9))[0]
    assert np.array_equal(a, b)
    assert np.array_equal(gen_bs_user_channel(tx, stats, 9.0, np.random.default_rng(1)),
                          gen_bs_user_channel(tx, stats, 9.0, np.random.default_rng(1)))


def test_dominant_rank_one_matches_svd(rng):
    g = cn(rng, 12, 5)
    link = dominant_rank_one(g)
    s = np.linalg.svd(g, compute_uv=False)
    assert abs(link.gain) == pytest.approx(s[0], rel=1e-9)
    exact = unit(cn(rng, 7))[:, None] @ unit(cn(rng, 4))[None, :] * 3.0
    np.testing.assert_allclose(dominant_rank_one(exact).matrix(), exact, atol=1e-12)


def test_rank_one_link_requires_unit_norm():
    with pytest.raises(InvalidArgumentError):
        RankOneLink(1.0, np.array([1.0, 1.0]), np.array([1.0]))


# -- geometry -------------------------------------------------------------------------

def test_single_irs_distances_default_point():
    d2, d3 = single_irs_distances(SingleIrsGeometry(119, 0.6, 119))
    assert d3 == pytest.approx(0.6, abs=1e-15)
    assert d2 == pytest.approx(math.sqrt(119 ** 2 + 0.36), rel=1e-15)


def test_single_irs_distance_can_touch_zero_and_is_clamped():
    _, d3 = single_irs_distances(SingleIrsGeometry(50, 1e-300, 50))
    assert d3 < 1e-200
    assert clamp_distance(d3) == 0.1


def test_multi_irs_offsets():
    assert irs_horizontal_offsets(MultiIrsGeometry(3, 100, 30, 0.6, 115)) == [100, 115, 130]
    assert irs_horizontal_offsets(MultiIrsGeometry(1, 100, 30, 0.6, 115)) == [100]
    pos = multi_irs_positions(MultiIrsGeometry(3, 100, 30, 0.6, 115))
    assert pos[1] == pytest.approx((math.hypot(115, 0.6), 0.6))


def test_multi_irs_defaults():
    g = MultiIrsGeometry()
    assert (g.num_irs, g.bs_first_irs_horizontal_m, g.irs_span_m, g.vertical_offset_m) == (3, 100, 30, 0.6)


# -- channel sets ----------------------------------------------------------------------

def test_channel_set_dimension_checks(rng):
    with pytest.raises(InvalidArgumentError):
        ChannelSet(cn(rng, 4), [cn(rng, 3, 5)], [cn(rng, 3)])
    with pytest.raises(InvalidArgumentError):
        ChannelSet(cn(rng, 4), [cn(rng, 3, 4)], [cn(rng, 2)])
    with pytest.raises(InvalidArgumentError):
        ChannelSet(cn(rng, 4), [cn(rng, 3, 4)], [])


def test_with_blockage_zeroes_links_and_keeps_bs_irs(rng):
    ch = ChannelSet(cn(rng, 4), [cn(rng, 3, 4)] * 2, [cn(rng, 3)] * 2)
    b = ch.with_blockage(True, [False, True])
    assert not b.bs_user.any() and not b.irs_user[1].any()
    assert np.array_equal(b.irs_user[0], ch.irs_user[0])
    assert all(np.array_equal(x, y) for x, y in zip(b.bs_irs, ch.bs_irs))
