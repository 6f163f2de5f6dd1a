"""Monte Carlo estimators for semigroup kernels and traces.

Three estimators, each pairing a free transition factor with the
expectation of exp(-integral of V) under the matching bridge law:

* lattice kernel: free-walk transition times the infinite-lattice bridge
  expectation (bridges by conditioned jump counts, exact in law);
* finite-grid diagonal/trace: the conservative walk confined to the grid,
  bridges by uniformization with exact conditioned event counts and a
  transition-matrix-power table;
* continuum kernel: the Gaussian heat kernel times a Brownian-bridge
  expectation with trapezoid integration on a dyadic mesh.

For V = 0 every estimator is deterministic and returns its closed-form
free value with zero standard error.  On grids small enough for dense
matrix exponentials the estimators are tested against them; that oracle
agreement is the module's primary correctness gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import qops
from .lattice import GridSpec
from .paths import WalkParams, _conditional_count_pmf, sample_bridge_marginal, \
    kolmogorov_distance, walk_transition
from .rng import RngStreams

# substream namespaces, so different estimators never share random numbers
_SALT_KERNEL = 1
_SALT_TRACE = 2
_SALT_CONTINUUM = 3
_SALT_MARGINAL = 4

_BLOCK_ROWS = 1 << 14


@dataclass(frozen=True)
class MCEstimate:
    """A Monte Carlo mean with its standard error and stream identity.

    Reproducibility contract: identical (seed, substreams, n_samples) give
    a bitwise-identical mean.
    """

    mean: float
    stderr: float
    n_samples: int
    seed: int
    substreams: int


@dataclass(frozen=True)
class ConvergenceRow:
    """One grid size in a convergence experiment."""

    N: int
    epsilon: float
    exact_trace: float
    mc_trace: MCEstimate
    trace_norm_gap: float
    marginal_gap: float


def _estimate(values: np.ndarray, streams: RngStreams, scale: float = 1.0) -> MCEstimate:
    n = len(values)
    mean = float(np.mean(values)) * scale
    stderr = float(np.std(values, ddof=1) / np.sqrt(n)) * scale if n > 1 else 0.0
    return MCEstimate(mean=mean, stderr=stderr, n_samples=n,
                      seed=streams.seed, substreams=streams.substreams)


# ---------------------------------------------------------------------------
# infinite-lattice kernel
# ---------------------------------------------------------------------------


def _bridge_functional_block(w: WalkParams, V: qops.PotentialSpec, T: float,
                             a: np.ndarray, disp: np.ndarray, count: int,
                             rng: np.random.Generator) -> np.ndarray:
    """exp(-integral of V) along `count` lattice bridges a -> a + disp."""
    d = w.d
    lam = T / (2.0 * w.epsilon**2)
    ups = np.empty((count, d), dtype=np.int64)
    downs = np.empty((count, d), dtype=np.int64)
    for ax in range(d):
        j = int(disp[ax])
        cdf = np.cumsum(_conditional_count_pmf(j, lam))
        n = np.searchsorted(cdf, rng.random(count))
        ups[:, ax] = n + max(j, 0)
        downs[:, ax] = n + max(-j, 0)
    total = ups.sum(axis=1) + downs.sum(axis=1)
    mmax = int(total.max()) if count else 0
    if mmax == 0:
        val = float(V.evaluate(w.epsilon * a.astype(np.float64)))
        return np.full(count, np.exp(-val * T))

    # per-jump type codes 2*ax (+1 along ax) and 2*ax+1 (-1 along ax),
    # first laid out sorted by code, then shuffled uniformly within each row
    counts_by_code = np.empty((count, 2 * d), dtype=np.int64)
    counts_by_code[:, 0::2] = ups
    counts_by_code[:, 1::2] = downs
    bounds = np.cumsum(counts_by_code, axis=1)
    cols = np.arange(mmax)
    codes = np.sum(cols[None, None, :] >= bounds[:, :, None], axis=1)
    keys = rng.random((count, mmax))
    sentinel = cols[None, :] >= total[:, None]
    keys[sentinel] = 2.0
    order = np.argsort(keys, axis=1, kind="stable")
    codes = np.take_along_axis(codes, order, axis=1)

    steps = np.zeros((2 * d + 1, d), dtype=np.int64)
    for ax in range(d):
        steps[2 * ax, ax] = 1
        steps[2 * ax + 1, ax] = -1
    moves = steps[codes]                                   # (count, mmax, d)
    states = np.empty((count, mmax + 1, d), dtype=np.int64)
    states[:, 0] = a
    np.cumsum(moves, axis=1, out=moves)
    states[:, 1:] = a + moves

    u = rng.random((count, mmax))
    u[sentinel] = 2.0
    u.sort(axis=1)
    ts = np.where(u <= 1.0, u * T, T)
    t_ext = np.concatenate(
        [np.zeros((count, 1)), ts, np.full((count, 1), T)], axis=1)
    dts = np.diff(t_ext, axis=1)                           # (count, mmax + 1)
    vvals = V.evaluate(w.epsilon * states.astype(np.float64))
    return np.exp(-np.sum(vvals * dts, axis=1))


def fk_kernel_lattice(w: WalkParams, V: qops.PotentialSpec, T: float, a, b,
                      n: int, streams: RngStreams) -> MCEstimate:
    """Estimate of the lattice kernel entry q_T(a,b) * E_bridge[e^{-int V}].

    The kernel convention includes the free transition factor, so for V = 0
    the estimate equals walk_transition exactly with zero standard error.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    a = np.asarray(a, dtype=np.int64).reshape(-1)
    b = np.asarray(b, dtype=np.int64).reshape(-1)
    if a.shape != (w.d,) or b.shape != (w.d,):
        raise ValueError(f"endpoints must have {w.d} integer coordinates")
    disp = b - a
    free = walk_transition(w, disp, T)
    chunks = []
    for k, count in streams.blocks(n):
        rng = streams.child(_SALT_KERNEL, k)
        done = 0
        while done < count:
            rows = min(_BLOCK_ROWS, count - done)
            chunks.append(_bridge_functional_block(w, V, T, a, disp, rows, rng))
            done += rows
    values = np.concatenate(chunks) if chunks else np.zeros(0)
    return _estimate(values, streams, scale=free)


# ---------------------------------------------------------------------------
# finite-grid diagonal and trace (uniformization)
# ---------------------------------------------------------------------------

_MAX_TABLE_ENTRIES = 50_000_000


class _UniformizedChain:
    """Tables for endpoint-conditioned sampling of the confined walk."""

    def __init__(self, g: GridSpec, V: qops.PotentialSpec, T: float):
        n = g.size
        h0 = qops.stochastic_hamiltonian(g, qops.PotentialSpec.zero())
        self.rate = g.d / g.epsilon**2
        P = np.eye(n) + (-h0.matrix) / self.rate
        mu = self.rate * T
        pois = [float(np.exp(-mu))]
        cum = pois[0]
        nmax = 0
        while 1.0 - cum > 1e-15 or nmax < 4:
            nmax += 1
            pois.append(pois[-1] * mu / nmax)
            cum += pois[-1]
            if nmax > 100_000:  # pragma: no cover - defensive
                raise ArithmeticError("Poisson tail failed to close")
        if (nmax + 1) * n * n > _MAX_TABLE_ENTRIES:
            raise ValueError(
                f"grid with {n} states needs {nmax + 1} matrix powers; "
                "too large for the transition-matrix tables")
        pows = np.empty((nmax + 1, n, n))
        pows[0] = np.eye(n)
        for i in range(1, nmax + 1):
            pows[i] = pows[i - 1] @ P
        self.g = g
        self.T = T
        self.n_states = n
        self.nmax = nmax
        self.pois = np.asarray(pois)
        self.P = P
        self.pows = pows
        self.free_semigroup = qops.semigroup(h0, T).matrix
        self.v_grid = qops.potential_on_grid(g, V)

    def functionals(self, a_idx: int, count: int,
                    rng: np.random.Generator) -> np.ndarray:
        """exp(-integral of V) along `count` confined bridges a -> a."""
        nmax, n = self.nmax, self.n_states
        cond = self.pois * self.pows[:, a_idx, a_idx]
        cdf = np.cumsum(cond)
        cdf /= cdf[-1]
        counts = np.searchsorted(cdf, rng.random(count))

        u = rng.random((count, nmax))
        cols = np.arange(nmax)
        u[cols[None, :] >= counts[:, None]] = 2.0
        u.sort(axis=1)
        ts = np.where(u <= 1.0, u * self.T, self.T)
        t_ext = np.concatenate(
            [np.zeros((count, 1)), ts, np.full((count, 1), self.T)], axis=1)
        dts = np.diff(t_ext, axis=1)                       # (count, nmax + 1)

        states = np.empty((count, nmax + 1), dtype=np.int64)
        states[:, 0] = a_idx
        for k in range(1, nmax + 1):
            active = counts >= k
            if not np.any(active):
                states[:, k] = states[:, k - 1]
                continue
            rem = counts[active] - k
            rows = self.P[states[active, k - 1], :]
            tails = self.pows[rem, :, a_idx]
            probs = rows * tails
            probs /= probs.sum(axis=1, keepdims=True)
            uu = rng.random(int(active.sum()))
            nxt = np.minimum(
                (np.cumsum(probs, axis=1) < uu[:, None]).sum(axis=1), n - 1)
            states[:, k] = states[:, k - 1]
            states[active, k] = nxt
        integral = np.sum(self.v_grid[states] * dts, axis=1)
        return np.exp(-integral)


def fk_diagonal(g: GridSpec, V: qops.PotentialSpec, T: float, n: int,
                streams: RngStreams) -> list[MCEstimate]:
    """Per-grid-point estimates of the confined-walk kernel diagonal.

    Entry a is q*_T(a,a) * E_bridge[e^{-int V}] with the bridge law of the
    reflecting walk, sampled by uniformization.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    chain = _UniformizedChain(g, V, T)
    out = []
    for a_idx in range(g.size):
        free = float(chain.free_semigroup[a_idx, a_idx])
        chunks = []
        for k, count in streams.blocks(n):
            rng = streams.child(_SALT_TRACE, g.N, a_idx, k)
            done = 0
            while done < count:
                rows = min(_BLOCK_ROWS, count - done)
                chunks.append(chain.functionals(a_idx, rows, rng))
                done += rows
        values = np.concatenate(chunks)
        out.append(_estimate(values, streams, scale=free))
    return out


def fk_trace(g: GridSpec, V: qops.PotentialSpec, T: float, n: int,
             streams: RngStreams) -> MCEstimate:
    """Estimate of the confined-walk trace: the summed kernel diagonal.

    Diagonal entries are estimated independently with n samples each and
    pooled; the standard error is the root of the summed variances.
    """
    diag = fk_diagonal(g, V, T, n, streams)
    mean = float(np.sum([e.mean for e in diag]))
    stderr = float(np.sqrt(np.sum([e.stderr**2 for e in diag])))
    return MCEstimate(mean=mean, stderr=stderr, n_samples=n,
                      seed=streams.seed, substreams=streams.substreams)


# ---------------------------------------------------------------------------
# continuum kernel (Brownian bridge)
# ---------------------------------------------------------------------------


def gaussian_kernel(x, y, T: float) -> float:
    """Free heat kernel p_T(x, y) = (2 pi T)^(-d/2) exp(-|x-y|^2 / 2T)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    d = x.shape[0]
    dist2 = float(np.sum((x - y) ** 2))
    return float((2.0 * np.pi * T) ** (-d / 2.0) * np.exp(-dist2 / (2.0 * T)))


def _brownian_block(x, y, T, J, rows, rng):
    d = x.shape[0]
    npts = 2**J
    vals = np.empty((rows, npts + 1, d))
    vals[:, 0] = x
    vals[:, npts] = y
    for lev in range(1, J + 1):
        half = npts >> lev
        mids = np.arange(half, npts, 2 * half)
        span = T * (2 * half) / npts
        noise = np.sqrt(span / 4.0) * rng.standard_normal((rows, len(mids), d))
        vals[:, mids] = 0.5 * (vals[:, mids - half] + vals[:, mids + half]) + noise
    return vals


def fk_kernel_continuum(V: qops.PotentialSpec, T: float, x, y, n: int, J: int,
                        streams: RngStreams) -> MCEstimate:
    """Estimate of the continuum kernel p_T(x,y) * E_bridge[e^{-int V}].

    Brownian bridges at dyadic level J; the potential integral uses the
    trapezoid rule on the mesh.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if J < 1:
        raise ValueError("mesh level must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise ValueError("endpoint dimensions differ")
    npts = 2**J
    dt = T / npts
    weights = np.full(npts + 1, dt)
    weights[0] = weights[-1] = dt / 2.0
    free = gaussian_kernel(x, y, T)
    max_rows = max(1, min(_BLOCK_ROWS, (1 << 22) // (npts + 1)))
    chunks = []
    for k, count in streams.blocks(n):
        rng = streams.child(_SALT_CONTINUUM, k)
        done = 0
        while done < count:
            rows = min(max_rows, count - done)
            vals = _brownian_block(x, y, T, J, rows, rng)
            vv = V.evaluate(vals)
            chunks.append(np.exp(-(vv @ weights)))
            done += rows
    values = np.concatenate(chunks)
    return _estimate(values, streams, scale=free)


# ---------------------------------------------------------------------------
# convergence experiment
# ---------------------------------------------------------------------------


def bridge_midpoint_gap(g: GridSpec, T: float, n: int,
                        streams: RngStreams) -> float:
    """Kolmogorov distance of the lattice-bridge midpoint law (a = b = 0)
    from the Brownian-bridge Gaussian midpoint law N(0, T/4)."""
    w = WalkParams(epsilon=g.epsilon, d=1)
    rng = streams.child(_SALT_MARGINAL, g.N)
    mid = sample_bridge_marginal(w, [0], [0], T, T / 2.0, n, rng)
    x = g.epsilon * mid[:, 0].astype(np.float64)
    sd = np.sqrt(T) / 2.0
    return kolmogorov_distance(x, lambda v: ndtr(v / sd))


def convergence_experiment(V: qops.PotentialSpec, T: float, N_list, n: int,
                           streams: RngStreams,
                           marginal_samples: int | None = None) -> list[ConvergenceRow]:
    """Exact and Monte Carlo convergence diagnostics across grid sizes.

    Per N (d = 1): the exact trace of the confined-walk semigroup, its
    Monte Carlo estimate, the trace-norm gap of the spectral semigroup to
    the closed-form harmonic reference (harmonic V only, else NaN), and the
    Kolmogorov gap of the bridge midpoint law to its Gaussian limit.
    """
    from .lattice import make_grid

    N_list = [int(N) for N in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("grid sizes must be strictly increasing")
    if marginal_samples is None:
        marginal_samples = n
    rows = []
    for N in N_list:
        g = make_grid(N, 1)
        h_walk = qops.stochastic_hamiltonian(g, V)
        exact = qops.semigroup(h_walk, T).trace()
        mc = fk_trace(g, V, T, n, streams)
        if V.is_harmonic:
            h_spec = qops.schwinger_hamiltonian(g, V)
            gap = qops.trace_norm_distance(
                qops.semigroup(h_spec, T), qops.mehler_reference(g, T))
        else:
            gap = float("nan")
        marg = bridge_midpoint_gap(g, T, marginal_samples, streams)
        rows.append(ConvergenceRow(N=N, epsilon=g.epsilon, exact_trace=exact,
                                   mc_trace=mc, trace_norm_gap=gap,
                                   marginal_gap=marg))
    return rows
