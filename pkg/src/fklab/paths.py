"""Cadlag paths, random-walk and Brownian bridges, and path functionals.

Paths come in two flavors:

* :class:`CadlagPath` -- a right-continuous step function on [0, T] with
  finitely many jumps, the natural sample-path object for the lattice walk
  and for the p-adic jump process (at finite mesh resolution);
* :class:`MeshPath` -- values on a dyadic mesh interpreted piecewise
  linearly, the sampler surrogate for Brownian bridges.

The free walk on the lattice eps*Z^d jumps to each of its 2d nearest
neighbors at rate 1/(2 eps^2), so its generator is exactly (1/2)Delta_eps
and its transition semigroup is the free part of the walk Hamiltonian.
Bridges are sampled exactly in law: per-axis jump-count pairs from the
endpoint-conditioned Poisson product, jump times as uniform order
statistics, axes merged by a uniform shuffle of the jump labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, lgamma, log

import numpy as np

from .qops import PotentialSpec

BESSEL_TAIL_TOL = 1e-14


# ---------------------------------------------------------------------------
# path containers
# ---------------------------------------------------------------------------


def _states_equal(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(a, b)
    return a == b


class CadlagPath:
    """Right-continuous step function on [0, T] with finitely many jumps.

    ``states[i]`` is the value on [jump_times[i-1], jump_times[i]) (with
    jump_times[-1] read as 0), and the value at T is the last state.  Jump
    times are strictly increasing inside (0, T); a final jump exactly at T
    is admitted so that mesh-resolution surrogates of processes that move
    up to the horizon can keep their endpoint exact.
    """

    def __init__(self, horizon: float, jump_times, states):
        if not horizon > 0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        times = np.asarray(jump_times, dtype=np.float64)
        states = list(states)
        if times.ndim != 1:
            raise ValueError("jump_times must be a 1-d sequence")
        if len(states) != len(times) + 1:
            raise ValueError(
                f"need len(states) == len(jump_times) + 1, "
                f"got {len(states)} states and {len(times)} jumps"
            )
        if len(times):
            if np.any(np.diff(times) <= 0):
                raise ValueError("jump times must be strictly increasing")
            if times[0] <= 0 or times[-1] > horizon:
                raise ValueError("jump times must lie in (0, horizon]")
        for i in range(len(times)):
            if _states_equal(states[i], states[i + 1]):
                raise ValueError(f"consecutive states at jump {i} do not differ")
        self.horizon = float(horizon)
        self.jump_times = times
        self.states = states

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    def value(self, s: float):
        """The path value at time s in [0, horizon] (right-continuous)."""
        if not 0 <= s <= self.horizon:
            raise ValueError(f"time {s} outside [0, {self.horizon}]")
        i = int(np.searchsorted(self.jump_times, s, side="right"))
        return self.states[i]

    def __repr__(self):
        return f"CadlagPath(T={self.horizon}, jumps={self.n_jumps})"


class MeshPath:
    """Values at dyadic times i*T/2**J, interpreted piecewise linearly."""

    def __init__(self, horizon: float, level: int, values):
        if not horizon > 0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        if level < 0:
            raise ValueError("mesh level must be >= 0")
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != 2**level + 1:
            raise ValueError(
                f"level {level} mesh needs {2**level + 1} values, got {vals.shape[0]}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("mesh values must be finite")
        self.horizon = float(horizon)
        self.level = int(level)
        self.values = vals

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, 2**self.level + 1)

    def value(self, s: float) -> np.ndarray:
        if not 0 <= s <= self.horizon:
            raise ValueError(f"time {s} outside [0, {self.horizon}]")
        x = s / self.horizon * 2**self.level
        i = min(int(np.floor(x)), 2**self.level - 1)
        w = x - i
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def __repr__(self):
        return f"MeshPath(T={self.horizon}, level={self.level}, d={self.values.shape[1]})"


@dataclass(frozen=True)
class WalkParams:
    """Lattice walk parameters: spacing and dimension.

    The jump rate to each of the 2d nearest neighbors is 1/(2 eps^2), total
    rate d/eps^2, which makes the walk generator equal (1/2)Delta_eps.
    """

    epsilon: float
    d: int

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")

    @property
    def per_neighbor_rate(self) -> float:
        return 1.0 / (2.0 * self.epsilon**2)

    @property
    def total_rate(self) -> float:
        return self.d / self.epsilon**2


# ---------------------------------------------------------------------------
# free walk and its transition kernel
# ---------------------------------------------------------------------------


def _as_lattice_point(x, d: int) -> np.ndarray:
    coords = np.asarray(x, dtype=np.int64).reshape(-1)
    if coords.shape != (d,):
        raise ValueError(f"expected {d} integer coordinates, got {coords.shape}")
    return coords


def sample_free_walk(w: WalkParams, x, T: float, rng: np.random.Generator) -> CadlagPath:
    """One free-walk path started at lattice point x, on [0, T].

    Total jumps are Poisson(T*d/eps^2); jump times are uniform order
    statistics and each jump moves one step along a uniformly chosen signed
    axis -- equal in law to i.i.d. exponential holding times.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    x = _as_lattice_point(x, w.d)
    n = int(rng.poisson(w.total_rate * T))
    times = np.sort(rng.random(n)) * T
    axes = rng.integers(0, w.d, size=n)
    signs = 2 * rng.integers(0, 2, size=n) - 1
    states = [tuple(x)]
    cur = x.copy()
    for a, s in zip(axes, signs):
        cur[a] += s
        states.append(tuple(cur))
    return CadlagPath(T, times, states)


def _skellam_pmf(j: int, z: float) -> float:
    """P(net displacement = j) for one axis: e^{-z} I_{|j|}(z), z = T/eps^2.

    Evaluated by the ascending series of the modified Bessel function with
    the stated absolute tail bound; each scaled term is <= 1, so the log-sum
    form is overflow-safe for any z.
    """
    j = abs(int(j))
    if z < 0:
        raise ValueError("time parameter must be nonnegative")
    if z == 0.0:
        return 1.0 if j == 0 else 0.0
    lhalf = log(z / 2.0)
    total = 0.0
    m = 0
    while True:
        term = exp(-z + (2 * m + j) * lhalf - lgamma(m + 1) - lgamma(m + j + 1))
        total += term
        ratio = (z / 2.0) ** 2 / ((m + 1) * (m + j + 1))
        if ratio < 1.0 and term * ratio / (1.0 - ratio) < BESSEL_TAIL_TOL:
            break
        m += 1
        if m > 10_000_000:  # pragma: no cover - defensive
            raise ArithmeticError("Bessel series failed to converge")
    return total


def walk_transition(w: WalkParams, j, T: float) -> float:
    """Free-walk transition probability to displacement j over time T.

    Product over axes of e^{-T/eps^2} I_{|j_a|}(T/eps^2).
    """
    if T < 0:
        raise ValueError(f"time must be nonnegative, got {T}")
    disp = _as_lattice_point(j, w.d)
    z = T / w.epsilon**2
    out = 1.0
    for a in range(w.d):
        out *= _skellam_pmf(int(disp[a]), z)
    return out


# ---------------------------------------------------------------------------
# bridges
# ---------------------------------------------------------------------------


def _conditional_count_pmf(j: int, lam: float, tol: float = 1e-17) -> np.ndarray:
    """pmf of the smaller jump count n given net displacement j on one axis.

    The unconditioned (up, down) counts are independent Poisson(lam); given
    up - down = j the law of n = min-side count is proportional to
    lam^(2n+|j|) / (n! (n+|j|)!).  Normalized numerically.
    """
    j = abs(int(j))
    terms = [1.0]
    n = 0
    term = 1.0
    while True:
        ratio = lam * lam / ((n + 1) * (n + 1 + j))
        term *= ratio
        n += 1
        terms.append(term)
        if term < tol * sum(terms) and n > lam:
            break
        if n > 1_000_000:  # pragma: no cover - defensive
            raise ArithmeticError("conditional count pmf failed to converge")
    pmf = np.asarray(terms)
    return pmf / pmf.sum()


def sample_walk_bridge(w: WalkParams, a, b, T: float,
                       rng: np.random.Generator) -> CadlagPath:
    """A free-walk bridge from a at time 0 to b at time T, exact in law.

    Per axis, the (up, down) jump counts are drawn from the conditioned
    Poisson product; the axes are merged by a uniform shuffle of the jump
    labels and the jump times are uniform order statistics on (0, T).
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    a = _as_lattice_point(a, w.d)
    b = _as_lattice_point(b, w.d)
    lam = T / (2.0 * w.epsilon**2)
    ups = np.empty(w.d, dtype=np.int64)
    downs = np.empty(w.d, dtype=np.int64)
    for ax in range(w.d):
        j = int(b[ax] - a[ax])
        pmf = _conditional_count_pmf(j, lam)
        n = int(np.searchsorted(np.cumsum(pmf), rng.random()))
        ups[ax] = n + max(j, 0)
        downs[ax] = n + max(-j, 0)
    total = int(ups.sum() + downs.sum())
    if total == 0:
        return CadlagPath(T, [], [tuple(a)])
    moves = np.empty((total, w.d), dtype=np.int64)
    moves[:] = 0
    labels = []
    for ax in range(w.d):
        labels += [(ax, +1)] * int(ups[ax]) + [(ax, -1)] * int(downs[ax])
    order = rng.permutation(total)
    for pos, li in enumerate(order):
        ax, s = labels[li]
        moves[pos, ax] = s
    times = np.sort(rng.random(total)) * T
    states = [tuple(a)]
    cur = a.copy()
    for mv in moves:
        cur += mv
        states.append(tuple(cur))
    if tuple(cur) != tuple(b):  # pragma: no cover - construction guarantees it
        raise AssertionError("bridge endpoint mismatch")
    return CadlagPath(T, times, states)


def sample_bridge_marginal(w: WalkParams, a, b, T: float, s: float, count: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Vectorized draws of bridge values at one time s; exact in law.

    Given the per-axis jump counts, each jump lands before s independently
    with probability s/T (jump times are i.i.d. uniform), so the value at s
    is a + Binomial(up, s/T) - Binomial(down, s/T) per axis.  Returns an
    integer array (count, d) of lattice coordinates.
    """
    if not T > 0 or not 0 <= s <= T:
        raise ValueError("need T > 0 and s in [0, T]")
    a = _as_lattice_point(a, w.d)
    b = _as_lattice_point(b, w.d)
    lam = T / (2.0 * w.epsilon**2)
    frac = s / T
    out = np.empty((count, w.d), dtype=np.int64)
    for ax in range(w.d):
        j = int(b[ax] - a[ax])
        pmf = _conditional_count_pmf(j, lam)
        cdf = np.cumsum(pmf)
        n = np.searchsorted(cdf, rng.random(count))
        ups = n + max(j, 0)
        downs = n + max(-j, 0)
        out[:, ax] = a[ax] + rng.binomial(ups, frac) - rng.binomial(downs, frac)
    return out


def sample_brownian_bridge(x, y, T: float, J: int,
                           rng: np.random.Generator) -> MeshPath:
    """Brownian bridge from x to y on [0, T] by recursive midpoint displacement.

    The midpoint of a span of length h has conditional mean the average of
    the span endpoints and per-axis variance h/4.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if J < 1:
        raise ValueError("mesh level must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise ValueError("endpoint dimensions differ")
    d = x.shape[0]
    n = 2**J
    vals = np.zeros((n + 1, d))
    vals[0] = x
    vals[n] = y
    for lev in range(1, J + 1):
        half = n >> lev
        mids = np.arange(half, n, 2 * half)
        span = T * (2 * half) / n
        noise = np.sqrt(span / 4.0) * rng.standard_normal((len(mids), d))
        vals[mids] = 0.5 * (vals[mids - half] + vals[mids + half]) + noise
    return MeshPath(T, J, vals)


# ---------------------------------------------------------------------------
# functionals and diagnostics
# ---------------------------------------------------------------------------


def _potential_value(V, state) -> float:
    if isinstance(V, PotentialSpec):
        return float(V.evaluate(np.asarray(state, dtype=np.float64)))
    return float(V(state))


def integrate_potential(path, V) -> float:
    """The time integral of V along a path.

    Exact for step paths (sum of V(state) times holding duration); the
    trapezoid rule on the mesh for piecewise-linear paths.  V may be a
    PotentialSpec or any callable on the path's states; lattice states are
    passed as they are stored, so potentials in physical units should be
    wrapped with the lattice spacing by the caller.
    """
    if isinstance(path, CadlagPath):
        knots = np.concatenate(([0.0], path.jump_times, [path.horizon]))
        durations = np.diff(knots)
        vals = np.asarray([_potential_value(V, s) for s in path.states])
        return float(np.dot(vals, durations))
    if isinstance(path, MeshPath):
        if isinstance(V, PotentialSpec):
            vals = V.evaluate(path.values)
        else:
            vals = np.asarray([_potential_value(V, v) for v in path.values])
        dt = path.horizon / 2**path.level
        return float(np.trapezoid(vals, dx=dt))
    raise TypeError(f"cannot integrate over {type(path).__name__}")


def marginal_statistics(samples, s: float, f) -> tuple[float, float]:
    """Monte Carlo mean and standard error of f(path(s)) over sample paths."""
    if not samples:
        raise ValueError("need at least one sample path")
    vals = np.asarray([float(f(p.value(s))) for p in samples])
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return mean, stderr


def _state_distance(u, v) -> float:
    if hasattr(u, "norm") and not isinstance(u, np.ndarray):
        return float((u - v).norm())
    du = np.atleast_1d(np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64))
    return float(np.sqrt(np.dot(du, du)))


def _refined_grid(p: CadlagPath, q: CadlagPath, M: int) -> np.ndarray:
    knots = np.unique(np.concatenate(
        ([0.0, p.horizon], p.jump_times, q.jump_times)))
    pieces = [np.linspace(knots[i], knots[i + 1], M + 1)[:-1]
              for i in range(len(knots) - 1)]
    return np.concatenate(pieces + [[p.horizon]])


def _one_sided_j1_bound(p: CadlagPath, q: CadlagPath, M: int) -> float:
    """Min over restricted time changes of max(time distortion, value gap).

    p's jump times are re-placed onto the refined merged grid (order
    preserved, one per grid point); any such placement corresponds to a
    piecewise-linear time change lambda with ||lambda - id|| equal to the
    largest displacement, so the minimum over placements upper-bounds the
    J1 distance, and the identity placement reproduces the uniform distance.
    """
    grid = _refined_grid(p, q, M)
    R = len(grid)
    s_times = p.jump_times
    n_jumps = len(s_times)
    INF = float("inf")
    # q's state index just after each grid point
    q_idx = np.searchsorted(q.jump_times, grid, side="right")
    # cache pairwise state distances
    dist = np.empty((n_jumps + 1, len(q.states)))
    for i, ps in enumerate(p.states):
        for l, qs in enumerate(q.states):
            dist[i, l] = _state_distance(ps, qs)
    D = [INF] * (n_jumps + 1)
    D[0] = 0.0
    for gi in range(R - 1):
        g = grid[gi]
        if 0 < gi:  # interior grid point: may place the next jump of p here
            for jj in range(min(n_jumps, gi), 0, -1):
                cand = max(D[jj - 1], abs(s_times[jj - 1] - g))
                if cand < D[jj]:
                    D[jj] = cand
        ql = q_idx[gi]
        for jj in range(n_jumps + 1):
            if D[jj] < INF:
                gap = dist[jj, ql]
                if gap > D[jj]:
                    D[jj] = gap
    # a jump of p sitting exactly at the horizon can only align with the
    # horizon itself (time changes fix T); then compare the values at T
    if n_jumps and s_times[-1] == p.horizon:
        cand = D[n_jumps - 1]
        if cand < D[n_jumps]:
            D[n_jumps] = cand
    if D[n_jumps] == INF:
        return INF
    return max(D[n_jumps], dist[n_jumps, len(q.states) - 1])


def j1_distance_upper(p: CadlagPath, q: CadlagPath, M: int = 8) -> float:
    """An upper bound on the Skorokhod J1 distance between two step paths.

    Optimizes over piecewise-linear time changes whose breakpoints are
    restricted to the merged jump-time grid refined M-fold.  The bound is
    at least the true J1 distance and at most the uniform distance, and is
    symmetric in its arguments.
    """
    if p.horizon != q.horizon:
        raise ValueError("paths must share the same horizon")
    if M < 1:
        raise ValueError("refinement factor must be >= 1")
    return min(_one_sided_j1_bound(p, q, M), _one_sided_j1_bound(q, p, M))


def kolmogorov_distance(samples: np.ndarray, cdf) -> float:
    """Exact sup distance between an empirical law and a continuous CDF."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(x)
    if n == 0:
        raise ValueError("need at least one sample")
    vals, counts = np.unique(x, return_counts=True)
    hi = np.cumsum(counts) / n
    lo = hi - counts / n
    F = np.asarray(cdf(vals), dtype=np.float64)
    return float(max(np.max(np.abs(hi - F)), np.max(np.abs(F - lo))))
