"""Finite grids and the lattices they sit in.

The cyclic group with N points (N odd) is identified with the symmetric
grid ``epsilon * {-k, ..., k}`` per axis, where ``N = 2k + 1`` and
``epsilon = sqrt(2*pi/N)``, so that ``N * epsilon**2 = 2*pi``.  Grid points
and lattice points are plain integer coordinate vectors (tuples or arrays);
physical positions are always derived as ``epsilon * coords`` at the point
of use and never stored, so no float drift can accumulate between modules.

Basis ordering convention: lexicographic in the integer coordinates with
axis 0 slowest.  All operator matrices in :mod:`fklab.qops` use this
ordering, which makes them reproducible bit for bit across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_GRID_POINTS = 10**7


@dataclass(frozen=True)
class GridSpec:
    """A finite symmetric grid: N points per axis in d dimensions.

    Attributes
    ----------
    N : odd number of points per axis (N = 2k + 1)
    k : half-width, coordinates run over [-k, k]
    d : spatial dimension
    epsilon : grid spacing, sqrt(2*pi/N)
    """

    N: int
    k: int
    d: int
    epsilon: float

    @property
    def size(self) -> int:
        """Total number of grid points, N**d."""
        return self.N**self.d


def make_grid(N: int, d: int) -> GridSpec:
    """Build the grid spec for N points per axis in d dimensions.

    N must be an odd integer >= 3, d >= 1, and N**d must stay within the
    addressable-point budget (10**7).
    """
    if not isinstance(N, (int, np.integer)):
        raise ValueError(f"N must be an integer, got {type(N).__name__}")
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValueError("dimension d must be an integer >= 1")
    N = int(N)
    d = int(d)
    if N < 3:
        raise ValueError(f"N must be >= 3, got {N}")
    if N % 2 == 0:
        raise ValueError(f"N must be odd (N = 2k + 1), got {N}")
    if N**d > MAX_GRID_POINTS:
        raise ValueError(f"grid too large: N**d = {N**d} exceeds {MAX_GRID_POINTS}")
    k = (N - 1) // 2
    epsilon = float(np.sqrt(2.0 * np.pi / N))
    return GridSpec(N=N, k=k, d=d, epsilon=epsilon)


def enumerate_points(g: GridSpec) -> np.ndarray:
    """All grid coordinates in canonical order, shape (N**d, d), dtype int.

    Lexicographic in the coordinates with axis 0 slowest: the first point is
    (-k, ..., -k), the last is (k, ..., k).
    """
    axes = [np.arange(-g.k, g.k + 1)] * g.d
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)


def point_index(g: GridSpec, p) -> int:
    """Index of grid point p (integer coords) in enumerate_points order."""
    coords = np.asarray(p, dtype=np.int64).reshape(-1)
    if coords.shape != (g.d,):
        raise ValueError(f"expected {g.d} coordinates, got {coords.shape}")
    if np.any(np.abs(coords) > g.k):
        raise ValueError(f"coordinates {coords.tolist()} outside [-{g.k}, {g.k}]")
    idx = 0
    for c in coords:
        idx = idx * g.N + (int(c) + g.k)
    return idx


def index_point(g: GridSpec, i: int) -> np.ndarray:
    """Grid coordinates of flat index i; inverse of point_index."""
    if not 0 <= i < g.size:
        raise ValueError(f"index {i} outside [0, {g.size})")
    coords = np.empty(g.d, dtype=np.int64)
    rem = int(i)
    for a in range(g.d - 1, -1, -1):
        rem, c = divmod(rem, g.N)
        coords[a] = c - g.k
    return coords


def positions(g: GridSpec) -> np.ndarray:
    """Physical positions epsilon * coords of all grid points, (N**d, d)."""
    return g.epsilon * enumerate_points(g).astype(np.float64)
