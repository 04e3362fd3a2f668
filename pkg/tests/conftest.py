import numpy as np
import pytest

from irs_mmwave.channel import ChannelSet, RankOneLink

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def unit(v):
    return v / np.linalg.norm(v)


def random_link(rng, n, m, scale=1.0):
    return RankOneLink(scale * np.sqrt(n * m) * cn(rng, 1)[0], unit(cn(rng, m)), unit(cn(rng, n)))


def rank_one_instance(rng, n, m, k=1, direct_scale=1.0):
    """Random channel whose BS-IRS links are exactly rank one."""
    links = [random_link(rng, n, m) for _ in range(k)]
    return ChannelSet(direct_scale * cn(rng, n), [l.matrix() for l in links],
                      [cn(rng, m) for _ in range(k)], links)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
