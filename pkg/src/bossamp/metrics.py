"""Figures of merit and phase-transition contour extraction."""
from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from .model import DegenerateSignalError, SensingMatrix

SUCCESS_NMSE = 1e-4


def _energy(x_true) -> float:
    e = float(np.sum(np.asarray(x_true, dtype=float) ** 2))
    if e <= 0:
        raise DegenerateSignalError("the true signal is zero; normalised errors are undefined")
    return e


def nmse(x_true, x_hat) -> float:
    x_true = np.asarray(x_true, dtype=float)
    return float(np.sum((x_true - np.asarray(x_hat, dtype=float)) ** 2)) / _energy(x_true)


def fanmse(x_true, x_hat) -> float:
    """Energy of the estimate off the true support, relative to ||x||^2."""
    x_true = np.asarray(x_true, dtype=float)
    off = x_true == 0
    return float(np.sum(np.asarray(x_hat, dtype=float)[off] ** 2)) / _energy(x_true)


def snr(a, x, noise_var: float) -> float:
    A = a.entries if isinstance(a, SensingMatrix) else np.asarray(a)
    return float(np.sum((A @ x) ** 2)) / (A.shape[0] * noise_var)


def to_db(value: float) -> float:
    with np.errstate(divide="ignore"):
        return float(10.0 * np.log10(value))


def success_indicator(nmse_value: float) -> bool:
    return bool(nmse_value < SUCCESS_NMSE)


def average_success(indicators: Sequence[bool]) -> float:
    indicators = list(indicators)
    if not indicators:
        raise ValueError("average success of an empty list")
    return sum(bool(s) for s in indicators) / len(indicators)


# --------------------------------------------------------------------------
# marching squares
# --------------------------------------------------------------------------

# corner order: 0 = (i, j), 1 = (i, j+1), 2 = (i+1, j+1), 3 = (i+1, j)
# edge k joins corner k and corner (k+1) % 4
_EDGE_CORNERS = ((0, 1), (1, 2), (2, 3), (3, 0))


def _edge_key(i, j, k):
    # horizontal edges ('h', row, col) and vertical edges ('v', row, col), global ids
    return (("h", i, j), ("v", i, j + 1), ("h", i + 1, j), ("v", i, j))[k]


def _corner(i, j, c):
    return ((i, j), (i, j + 1), (i + 1, j + 1), (i + 1, j))[c]


def _values_of(grid):
    if hasattr(grid, "success"):
        return np.asarray(grid.success, dtype=float), grid.undersampling_axis, grid.sparsity_axis
    return np.asarray(grid, dtype=float), None, None


def _axis_map(axis, length):
    if axis is None:
        return lambda p: p
    axis = np.asarray(axis, dtype=float)
    if axis.size != length:
        raise ValueError(f"axis of length {axis.size} for {length} grid lines")

    def f(p):
        lo = int(np.floor(p))
        if lo >= length - 1:
            return float(axis[-1])
        return float(axis[lo] + (p - lo) * (axis[lo + 1] - axis[lo]))

    return f


def contour_half(grid, x_axis=None, y_axis=None, level: float = 0.5) -> List[np.ndarray]:
    """Polylines of the ``level`` set of a 2-D grid, by marching squares.

    ``grid`` is an array indexed ``[row, col]`` = ``[sparsity, undersampling]``
    or an object with ``success`` and axis attributes. Points are returned as
    (x, y) = (column, row) coordinates, mapped through the axes when given.
    Saddle cells are split according to the mean of their four corners.
    """
    v, gx, gy = _values_of(grid)
    x_axis = gx if x_axis is None else x_axis
    y_axis = gy if y_axis is None else y_axis
    ny, nx = v.shape
    above = v >= level

    points = {}

    def edge_point(i, j, k):
        key = _edge_key(i, j, k)
        if key not in points:
            (ia, ja), (ib, jb) = (_corner(i, j, c) for c in _EDGE_CORNERS[k])
            va, vb = v[ia, ja], v[ib, jb]
            s = (level - va) / (vb - va)
            points[key] = (ja + s * (jb - ja), ia + s * (ib - ia))
        return key

    segments = []
    for i in range(ny - 1):
        for j in range(nx - 1):
            up = [above[_corner(i, j, c)] for c in range(4)]
            crossing = [k for k, (a, b) in enumerate(_EDGE_CORNERS) if up[a] != up[b]]
            if not crossing:
                continue
            if len(crossing) == 2:
                pairs = [tuple(crossing)]
            else:
                centre_up = np.mean([v[_corner(i, j, c)] for c in range(4)]) >= level
                # edges around a corner c are (c - 1) % 4 and c; isolate the corners whose
                # state differs from the centre
                iso = [c for c in range(4) if up[c] != centre_up]
                pairs = [((c - 1) % 4, c) for c in iso]
            for ka, kb in pairs:
                segments.append((edge_point(i, j, ka), edge_point(i, j, kb)))

    # chain segments through shared edge points
    touching = {}
    for s, (a, b) in enumerate(segments):
        touching.setdefault(a, []).append(s)
        touching.setdefault(b, []).append(s)
    used = [False] * len(segments)

    def walk(start_seg, start_key):
        chain = [start_key]
        seg, key = start_seg, start_key
        while True:
            used[seg] = True
            a, b = segments[seg]
            key = b if a == key else a
            chain.append(key)
            nxt = [s for s in touching[key] if not used[s]]
            if not nxt:
                return chain
            seg = nxt[0]

    chains = []
    for s, (a, b) in enumerate(segments):
        if used[s]:
            continue
        ends = [k for k in (a, b) if len(touching[k]) == 1]
        if ends:
            chains.append(walk(s, ends[0]))
    for s, (a, b) in enumerate(segments):
        if not used[s]:
            chains.append(walk(s, a))

    fx = _axis_map(x_axis, nx)
    fy = _axis_map(y_axis, ny)
    return [np.array([(fx(points[k][0]), fy(points[k][1])) for k in chain]) for chain in chains]


def bilinear(values, x, y) -> float:
    """Bilinear interpolation of ``values[row, col]`` at fractional (col, row)."""
    v = np.asarray(values, dtype=float)
    ny, nx = v.shape
    j = min(int(np.floor(x)), nx - 2)
    i = min(int(np.floor(y)), ny - 2)
    s, t = x - j, y - i
    return float(
        (1 - s) * (1 - t) * v[i, j] + s * (1 - t) * v[i, j + 1] + s * t * v[i + 1, j + 1] + (1 - s) * t * v[i + 1, j]
    )


def success_area(grid, x_axis=None, y_axis=None, level: float = 0.5, subdivisions: int = 20) -> float:
    """Area of the region where the bilinear interpolant is >= level.

    Measured in axis units when axes are known, otherwise in cells.
    """
    v, gx, gy = _values_of(grid)
    x_axis = gx if x_axis is None else x_axis
    y_axis = gy if y_axis is None else y_axis
    ny, nx = v.shape
    dx = np.diff(np.asarray(x_axis, dtype=float)) if x_axis is not None else np.ones(nx - 1)
    dy = np.diff(np.asarray(y_axis, dtype=float)) if y_axis is not None else np.ones(ny - 1)
    f = (np.arange(subdivisions) + 0.5) / subdivisions
    s, t = np.meshgrid(f, f)
    area = 0.0
    for i in range(ny - 1):
        for j in range(nx - 1):
            interp = (
                (1 - s) * (1 - t) * v[i, j] + s * (1 - t) * v[i, j + 1] + s * t * v[i + 1, j + 1] + (1 - s) * t * v[i + 1, j]
            )
            area += np.mean(interp >= level) * dx[j] * dy[i]
    return float(area)
