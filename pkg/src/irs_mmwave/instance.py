"""Plain-text channel instance files for one-shot solves.

Layout::

    irs-instance N M K
    h_d N 1
    <N lines "re,im">
    G1 M N
    <M*N lines, row-major>
    h_r1 M 1
    ...
    # optional rank-one data per IRS
    lambda1 1 1
    a1 M 1
    b1 N 1

Blank lines and ``#`` comments are ignored. When an IRS has no rank-one
data its dominant singular triplet is used.
"""

from __future__ import annotations

import re
from typing import Dict, List

import numpy as np

from .channel import ChannelSet, RankOneLink, dominant_rank_one
from .errors import InvalidArgumentError

_NAME = re.compile(r"^(h_d|G\d+|h_r\d+|lambda\d+|a\d+|b\d+)$")


class InstanceFormatError(InvalidArgumentError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _lines(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_instance(text: str) -> ChannelSet:
    it = _lines(text)
    try:
        lineno, header = next(it)
    except StopIteration:
        raise InstanceFormatError(0, "empty instance file") from None
    parts = header.split()
    if len(parts) != 4 or parts[0] != "irs-instance":
        raise InstanceFormatError(lineno, "expected 'irs-instance N M K'")
    try:
        n, m, k = (int(x) for x in parts[1:])
    except ValueError:
        raise InstanceFormatError(lineno, "N, M, K must be integers") from None
    if n < 1 or m < 1 or k < 0:
        raise InstanceFormatError(lineno, "need N >= 1, M >= 1, K >= 0")

    arrays: Dict[str, np.ndarray] = {}
    for lineno, line in it:
        parts = line.split()
        if len(parts) != 3 or not _NAME.match(parts[0]):
            raise InstanceFormatError(lineno, f"expected an array header 'name rows cols', got {line!r}")
        name = parts[0]
        try:
            rows, cols = int(parts[1]), int(parts[2])
        except ValueError:
            raise InstanceFormatError(lineno, "rows and cols must be integers") from None
        if name in arrays:
            raise InstanceFormatError(lineno, f"duplicate array {name}")
        values = []
        for _ in range(rows * cols):
            try:
                ln, entry = next(it)
            except StopIteration:
                raise InstanceFormatError(lineno, f"{name} ends early") from None
            try:
                re_s, im_s = entry.split(",")
                values.append(complex(float(re_s), float(im_s)))
            except ValueError:
                raise InstanceFormatError(ln, f"expected 're,im', got {entry!r}") from None
        arrays[name] = np.array(values, dtype=complex).reshape(rows, cols)

    def get(name, shape):
        if name not in arrays:
            raise InstanceFormatError(0, f"missing array {name}")
        a = arrays[name]
        if a.shape != shape:
            raise InstanceFormatError(0, f"{name} must be {shape[0]} x {shape[1]}, got {a.shape[0]} x {a.shape[1]}")
        return a

    h_d = get("h_d", (n, 1))[:, 0]
    gs, hs, links = [], [], []
    for i in range(1, k + 1):
        g = get(f"G{i}", (m, n))
        gs.append(g)
        hs.append(get(f"h_r{i}", (m, 1))[:, 0])
        if f"lambda{i}" in arrays:
            links.append(RankOneLink(get(f"lambda{i}", (1, 1))[0, 0], get(f"a{i}", (m, 1))[:, 0],
                                     get(f"b{i}", (n, 1))[:, 0]))
        else:
            links.append(dominant_rank_one(g))
    return ChannelSet(h_d, gs, hs, links)


def read_instance(path: str) -> ChannelSet:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def _block(name: str, a: np.ndarray) -> List[str]:
    a = np.atleast_2d(a)
    out = [f"{name} {a.shape[0]} {a.shape[1]}"]
    out += [f"{x.real:.17g},{x.imag:.17g}" for x in a.reshape(-1).astype(complex)]
    return out


def format_instance(ch: ChannelSet, with_rank_one: bool = True) -> str:
    m = ch.irs_user[0].shape[0] if ch.num_irs else 1
    lines = [f"irs-instance {ch.num_antennas} {m} {ch.num_irs}"]
    lines += _block("h_d", ch.bs_user[:, None])
    for i, (g, h) in enumerate(zip(ch.bs_irs, ch.irs_user), 1):
        lines += _block(f"G{i}", g)
        lines += _block(f"h_r{i}", h[:, None])
        if with_rank_one and ch.rank_one is not None:
            link = ch.rank_one[i - 1]
            lines += _block(f"lambda{i}", np.array([[link.gain]]))
            lines += _block(f"a{i}", link.irs_steering[:, None])
            lines += _block(f"b{i}", link.bs_steering[:, None])
    return "\n".join(lines) + "\n"
