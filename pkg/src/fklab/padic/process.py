"""Samplers for the p-adic jump process, its bridges, and the FK kernel.

Increments are drawn exactly from the radial law: the norm exponent by
inverse CDF on the sphere masses, then uniform digits (the density is
radial, so uniform-on-sphere is the exact conditional).  Bridges are built
by recursive bisection with exact rejection: midpoints are proposed as a
free increment attached to one of the two span endpoints and accepted
against the product density, with the rejection bound supplied by the
density value at the endpoint separation (see ``_bisect_skeleton``).
Endpoint and midpoint laws are exact at mesh times.

Internally every value is an exact integer n with x = n * p**(-S) for one
fixed scale S per run, so additions, subtractions, and valuations (hence
norms and density lookups) are exact; the public surface converts to
:class:`PadicNumber`.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from ..paths import CadlagPath
from ..qops import PotentialSpec
from ..rng import RngStreams
from .density import RadialDensitySpec, radial_density, radius_distribution
from .numbers import PadicNumber

REJECTION_BUDGET = 1_000_000

_SALT_PADIC = 5


class RejectionBudgetError(RuntimeError):
    """Midpoint rejection sampling exceeded its proposal budget."""


class _Buffered:
    """Block-buffered draws from a Generator; deterministic refill order."""

    __slots__ = ("rng", "_u", "_ui", "_ints", "block")

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self.block = block
        self._u = rng.random(block)
        self._ui = 0
        self._ints: dict[int, tuple[np.ndarray, int]] = {}

    def uniform(self) -> float:
        i = self._ui
        if i == self.block:
            self._u = self.rng.random(self.block)
            i = 0
        self._ui = i + 1
        return self._u[i]

    def integer(self, high: int) -> int:
        """Uniform integer in [0, high)."""
        buf = self._ints.get(high)
        if buf is None or buf[1] == len(buf[0]):
            arr = self.rng.integers(0, high, size=self.block)
            buf = (arr, 0)
        arr, i = buf
        self._ints[high] = (arr, i + 1)
        return int(arr[i])


class _IncrementSampler:
    """Exact sampler of one increment at a fixed (p, b, t, L), scaled form."""

    def __init__(self, spec: RadialDensitySpec, precision: int):
        if precision < 1:
            raise ValueError("digit precision must be >= 1")
        self.spec = spec
        self.p = spec.p
        self.precision = precision
        dist = radius_distribution(spec)
        self.ms = sorted(dist)
        cdf = np.cumsum([dist[m] for m in self.ms])
        self.cdf = (cdf / cdf[-1]).tolist()
        # digit chunks: draw the L-1 trailing digits as base-p**w integers
        self.chunks = []
        left = precision - 1
        max_width = max(1, int(62 * 0.6931471805599453 / np.log(self.p)))
        while left > 0:
            w = min(left, max_width)
            self.chunks.append((self.p**w, w))
            left -= w

    @property
    def max_exponent(self) -> int:
        return self.ms[-1]

    def draw_unit(self, buf: _Buffered) -> int:
        """A uniform unit with `precision` digits, leading digit nonzero."""
        lead = 1 if self.p == 2 else buf.integer(self.p - 1) + 1
        unit = lead
        mult = self.p
        for high, width in self.chunks:
            unit += mult * buf.integer(high)
            mult *= self.p**width
        return unit

    def draw_exponent(self, buf: _Buffered) -> int:
        return self.ms[bisect_right(self.cdf, buf.uniform())]

    def draw_scaled(self, buf: _Buffered, scale_pow: dict[int, int]) -> int:
        """One increment as an exact integer times p**(-S)."""
        m = self.draw_exponent(buf)
        return self.draw_unit(buf) * scale_pow[m]


def _valuation_exponent(n: int, p: int, S: int) -> int | None:
    """Norm exponent m with |n * p**(-S)| = p**m; None for n = 0."""
    if n == 0:
        return None
    if p == 2:
        v = (n & -n).bit_length() - 1
    else:
        v = 0
        while n % p == 0:
            n //= p
            v += 1
    return S - v


class _DensityTable:
    """Lazy f-values on spheres for one (p, b, t); keyed by norm exponent."""

    __slots__ = ("spec", "f0", "table")

    def __init__(self, spec: RadialDensitySpec):
        self.spec = spec
        self.f0 = radial_density(spec, None)
        self.table: dict[int, float] = {}

    def value(self, m: int | None) -> float:
        if m is None:
            return self.f0
        v = self.table.get(m)
        if v is None:
            v = radial_density(self.spec, m)
            self.table[m] = v
        return v


class _BridgeContext:
    """Per-level samplers and density tables for one bisection setup."""

    def __init__(self, spec: RadialDensitySpec, T: float, J: int, precision: int):
        if not T > 0:
            raise ValueError(f"horizon must be positive, got {T}")
        if J < 1:
            raise ValueError("mesh level must be >= 1")
        self.spec = spec
        self.T = float(T)
        self.J = int(J)
        self.p = spec.p
        # level ell bisects spans of length T/2**(ell-1) into halves
        self.samplers = [_IncrementSampler(spec.with_time(T / 2.0**lev), precision)
                         for lev in range(1, J + 1)]
        self.tables = [_DensityTable(spec.with_time(T / 2.0**lev))
                       for lev in range(1, J + 1)]
        self.scale = max(s.max_exponent for s in self.samplers) + precision

    def scale_pows(self, sampler: _IncrementSampler) -> dict[int, int]:
        return {m: self.p ** (self.scale - m) for m in sampler.ms}

    def lift(self, x: PadicNumber) -> int:
        """x as an exact integer times p**(-scale); grows scale if needed."""
        if x.p != self.p:
            raise ValueError("point lives in a different Q_p")
        if x.is_zero:
            return 0
        shift = self.scale + x.valuation
        if shift < 0:
            raise ValueError(
                f"point valuation {x.valuation} is below the sampler scale")
        return x.unit * self.p**shift

    def to_padic(self, n: int, precision: int) -> PadicNumber:
        if n == 0:
            return PadicNumber.zero(self.p, precision)
        return PadicNumber.from_unit(self.p, -self.scale, n, precision)


def _bisect_skeleton(ctx: _BridgeContext, n0: int, nT: int, buf: _Buffered,
                     counters: dict | None = None) -> list[int]:
    """Scaled skeleton values at all 2**J + 1 mesh times, endpoints pinned.

    The midpoint target density is proportional to a(z) b(z) with
    a(z) = f(z - w1), b(z) = f(w2 - z).  Proposals come from the symmetric
    mixture (a + b)/2 -- an increment attached to one endpoint or the other
    -- and are accepted with probability a b / ((a + b) K), where
    K = f(|w2 - w1|) dominates min(a, b): by the ultrametric inequality the
    larger arm of any split is at least |w2 - w1|, and f is radially
    non-increasing.  One-sided proposals from w1 alone would need the loose
    bound f(0) instead, whose acceptance degenerates like f(R)/f(0) on
    spans straddling a large jump.
    """
    npts = 1 << ctx.J
    vals = [0] * (npts + 1)
    vals[0] = n0
    vals[npts] = nT
    for lev in range(1, ctx.J + 1):
        sampler = ctx.samplers[lev - 1]
        table = ctx.tables[lev - 1]
        pows = ctx.scale_pows(sampler)
        half = npts >> lev
        for mid in range(half, npts, 2 * half):
            w1 = vals[mid - half]
            w2 = vals[mid + half]
            diff = w2 - w1
            bound = table.value(_valuation_exponent(diff, ctx.p, ctx.scale))
            proposals = 0
            while True:
                proposals += 1
                if proposals > REJECTION_BUDGET:
                    raise RejectionBudgetError(
                        f"no acceptance after {REJECTION_BUDGET} proposals; "
                        "endpoints are numerically extreme for this span")
                m_inc = sampler.draw_exponent(buf)
                inc = sampler.draw_unit(buf) * pows[m_inc]
                near = table.value(m_inc)
                far = table.value(
                    _valuation_exponent(diff - inc, ctx.p, ctx.scale))
                if buf.uniform() * bound * (near + far) <= near * far:
                    # attach the increment to a uniformly chosen endpoint
                    vals[mid] = w1 + inc if buf.uniform() < 0.5 else w2 - inc
                    break
            if counters is not None:
                counters["proposals"] = counters.get("proposals", 0) + proposals
                counters["accepted"] = counters.get("accepted", 0) + 1
    return vals


# ---------------------------------------------------------------------------
# public samplers
# ---------------------------------------------------------------------------

_sampler_cache: dict = {}


def _cached_sampler(spec: RadialDensitySpec, precision: int) -> _IncrementSampler:
    key = (spec.p, spec.b, spec.t, spec.truncation, precision)
    s = _sampler_cache.get(key)
    if s is None:
        s = _IncrementSampler(spec, precision)
        _sampler_cache[key] = s
    return s


def sample_increment(spec: RadialDensitySpec, precision: int,
                     rng: np.random.Generator) -> PadicNumber:
    """One increment of the jump process over time spec.t, to `precision` digits."""
    s = _cached_sampler(spec, precision)
    buf = rng if isinstance(rng, _Buffered) else _Buffered(rng, block=64)
    m = s.draw_exponent(buf)
    unit = s.draw_unit(buf)
    return PadicNumber._raw(spec.p, -m, unit, precision)


def _mesh_path(T: float, J: int, states: list[PadicNumber]) -> CadlagPath:
    """Step path through mesh states, merging repeats; final jump may sit at T."""
    npts = 1 << J
    times = []
    kept = [states[0]]
    for i in range(1, npts + 1):
        if states[i] != kept[-1]:
            times.append(i * T / npts)
            kept.append(states[i])
    return CadlagPath(T, times, kept)


def sample_padic_path(spec: RadialDensitySpec, x: PadicNumber, T: float, J: int,
                      rng: np.random.Generator,
                      precision: int | None = None) -> CadlagPath:
    """A level-J surrogate path of the jump process started at x.

    Values at the dyadic times i*T/2**J are exact cumulative sums of
    independent increments with time step T/2**J, held as a step path.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if J < 0:
        raise ValueError("mesh level must be >= 0")
    if x.p != spec.p:
        raise ValueError("start point lives in a different Q_p")
    precision = x.precision if precision is None else precision
    step = _cached_sampler(spec.with_time(T / 2.0**J), precision)
    buf = _Buffered(rng)
    states = [x]
    cur = x
    for _ in range(1 << J):
        m = step.draw_exponent(buf)
        unit = step.draw_unit(buf)
        inc = PadicNumber._raw(spec.p, -m, unit, precision)
        cur = cur + inc
        states.append(cur)
    return _mesh_path(T, J, states)


def sample_padic_bridge(spec: RadialDensitySpec, x: PadicNumber, y: PadicNumber,
                        T: float, J: int, rng: np.random.Generator,
                        precision: int | None = None,
                        diagnostics: dict | None = None) -> CadlagPath:
    """A level-J bridge of the jump process from x at 0 to y at T.

    Recursive bisection with exact rejection: the midpoint of a span with
    endpoints (w1, w2) has density proportional to f(z - w1) f(w2 - z);
    proposing z = w1 + increment and accepting with f(w2 - z)/f(0) realizes
    it exactly.  Conditional midpoint laws at mesh times are exact.
    """
    if x.p != spec.p or y.p != spec.p:
        raise ValueError("endpoints must live in the spec's Q_p")
    precision = min(x.precision, y.precision) if precision is None else precision
    ctx = _BridgeContext(spec, T, J, precision)
    buf = _Buffered(rng)
    skeleton = _bisect_skeleton(ctx, ctx.lift(x), ctx.lift(y), buf, diagnostics)
    states = [ctx.to_padic(n, precision) for n in skeleton]
    states[0] = x
    states[-1] = y
    return _mesh_path(T, J, states)


# ---------------------------------------------------------------------------
# Feynman-Kac kernel estimator
# ---------------------------------------------------------------------------


def padic_fk_kernel(spec: RadialDensitySpec, V: PotentialSpec, T: float,
                    x: PadicNumber, y: PadicNumber, n: int, J: int,
                    streams: RngStreams,
                    precision: int | None = None):
    """Estimate of the propagator kernel f_{T,b}(x-y) * E_bridge[e^{-int V}].

    The potential must be radial (a function of the p-adic norm alone) and
    bounded below; the exponent uses the left-endpoint Riemann sum on the
    level-J mesh, which is exact for locally constant potentials once the
    mesh resolves the path's jump structure.
    """
    from ..feynman_kac import MCEstimate  # local import to avoid a cycle

    if x.p != spec.p or y.p != spec.p:
        raise ValueError("endpoints must live in the spec's Q_p")
    precision = min(x.precision, y.precision) if precision is None else precision
    ctx = _BridgeContext(spec, T, J, precision)
    n0 = ctx.lift(x)
    nT = ctx.lift(y)
    diff = x - y
    free = radial_density(spec.with_time(T), diff.norm_exponent())

    v_cache: dict[int | None, float] = {None: float(V.evaluate_radius(0.0))}

    def v_of(m: int | None) -> float:
        val = v_cache.get(m, None)
        if val is None:
            val = float(V.evaluate_radius(float(spec.p) ** m))
            v_cache[m] = val
        return val

    npts = 1 << J
    dt = T / npts
    p_, S = ctx.p, ctx.scale
    values = np.empty(n)
    pos = 0
    for k, count in streams.blocks(n):
        buf = _Buffered(streams.child(_SALT_PADIC, k))
        for _ in range(count):
            skel = _bisect_skeleton(ctx, n0, nT, buf)
            acc = 0.0
            for i in range(npts):  # left endpoints only
                acc += v_of(_valuation_exponent(skel[i], p_, S))
            values[pos] = np.exp(-acc * dt)
            pos += 1
    mean = float(np.mean(values)) * free
    stderr = (float(np.std(values, ddof=1) / np.sqrt(n)) * free) if n > 1 else 0.0
    return MCEstimate(mean=mean, stderr=stderr, n_samples=n,
                      seed=streams.seed, substreams=streams.substreams)
