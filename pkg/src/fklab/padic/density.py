"""The radial jump density on Q_p and its analytic checks.

``exp(-t |xi|^b)`` is the Fourier transform of a continuous, everywhere
positive probability density f on Q_p.  Because both the multiplier and
the character integrals are constant on norm spheres, f is radial and its
value on the sphere |x| = p^m is a one-dimensional series over the dual
sphere radii.  Grouping the series against the sphere-volume identity
sum_{gamma <= -m} (1 - 1/p) p^gamma = p^{-m} makes every term positive:

    f(m) = sum_{gamma <= -m} (1 - 1/p) p^gamma
           * (exp(-t p^(gamma b)) - exp(-t p^((1-m) b)))

evaluated through expm1 so the difference never cancels.  All routines
here are deterministic series summations with explicit tail bounds; they
are the oracle side for the jump-process samplers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, expm1, inf, log
from threading import Lock

import numpy as np

from .numbers import PadicNumber, _is_prime

DEFAULT_TRUNCATION = 1e-14

_REL_FLOOR = 5e-17  # one-sided geometric series: stop once terms are noise

_LOG_HUGE = 700.0  # beyond this, exp(-t * p**x) underflows to exactly 0


def _power(p: int, x: float) -> float:
    """p**x without OverflowError; saturates to inf."""
    from math import log

    if x * log(p) > _LOG_HUGE:
        return float("inf")
    return float(p) ** x


def _exp_neg(t: float, p: int, x: float) -> float:
    """exp(-t * p**x), 0.0 on underflow."""
    v = _power(p, x)
    arg = t * v
    if arg > _LOG_HUGE:
        return 0.0
    return exp(-arg)


@dataclass(frozen=True)
class RadialDensitySpec:
    """Parameters of the jump density: prime p, exponent b, time t."""

    p: int
    b: float
    t: float
    truncation: float = DEFAULT_TRUNCATION

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ValueError(f"p must be prime, got {self.p}")
        if not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")
        if not 0 < self.truncation < 1e-6:
            raise ValueError("truncation tolerance must be tiny and positive")

    def with_time(self, t: float) -> "RadialDensitySpec":
        return RadialDensitySpec(self.p, self.b, float(t), self.truncation)


def sphere_character_integral(p: int, m, gamma: int) -> float:
    """Integral of chi(x*xi) over the sphere |xi| = p**gamma, |x| = p**m.

    Haar measure normalized by vol(Z_p) = 1.  With m = None (or -inf)
    standing for x = 0, the integral is the sphere volume p^gamma (1-1/p);
    it stays that for m <= -gamma, drops to -p^(gamma-1) at m = 1 - gamma,
    and vanishes for m >= 2 - gamma.
    """
    if not _is_prime(int(p)):
        raise ValueError(f"p must be prime, got {p}")
    vol = float(p) ** gamma * (1.0 - 1.0 / p)
    if m is None or m == -inf:
        return vol
    m = int(m)
    if m <= -gamma:
        return vol
    if m == 1 - gamma:
        return -float(p) ** (gamma - 1)
    return 0.0


# ---------------------------------------------------------------------------
# the density and its radius law
# ---------------------------------------------------------------------------

_density_cache: dict = {}
_cache_lock = Lock()


def _f_at_zero(p: int, b: float, t: float) -> float:
    """f(0) = sum over all gamma of e^{-t p^(gamma b)} p^gamma (1 - 1/p)."""
    total = 0.0
    gamma = 0
    while True:  # downward: factor p^gamma closes the tail geometrically
        term = float(p) ** gamma * _exp_neg(t, p, gamma * b)
        total += term
        if float(p) ** gamma < _REL_FLOOR * total:
            break
        gamma -= 1
    gamma = 1
    while True:  # upward: the double exponential closes the tail
        core = _exp_neg(t, p, gamma * b)
        term = _power(p, gamma) * core if core else 0.0
        total += term
        ratio = p * core ** min(float(p) ** b - 1.0, 64.0) if core else 0.0
        if ratio < 0.5 and (core == 0.0 or
                            term * ratio / (1.0 - ratio) < _REL_FLOOR * total):
            break
        gamma += 1
        if gamma > 100_000:  # pragma: no cover - defensive
            raise ArithmeticError("density series failed to converge")
    if not total < float("inf"):
        raise ArithmeticError(
            "density overflows double precision for these parameters")
    return (1.0 - 1.0 / p) * total


def _f_on_sphere(p: int, b: float, t: float, m: int) -> float:
    """f on |x| = p^m by the positive-term (expm1) series; strictly > 0."""
    edge = t * _power(p, (1 - m) * b)
    total = 0.0
    gamma = -m
    while True:
        inner = t * _power(p, gamma * b)
        # e^{-inner} - e^{-edge} = e^{-inner} * (-expm1(inner - edge)), > 0
        if inner > _LOG_HUGE:
            bracket = 0.0
        elif edge - inner > _LOG_HUGE:
            bracket = exp(-inner)
        else:
            bracket = exp(-inner) * (-expm1(inner - edge))
        pg = _power(p, gamma)
        total += pg * bracket if bracket else 0.0
        if pg < _REL_FLOOR * max(total, 1e-300) and gamma < -m - 3:
            break
        gamma -= 1
        if gamma < -m - 200_000:  # pragma: no cover - defensive
            raise ArithmeticError("density series failed to converge")
    if not total < float("inf"):
        raise ArithmeticError(
            "density overflows double precision for these parameters")
    return (1.0 - 1.0 / p) * total


def radial_density(spec: RadialDensitySpec, m) -> float:
    """f_{t,b} on the sphere |x| = p**m; pass m = None (or -inf) for x = 0.

    The density is strictly positive everywhere; the returned double is
    positive wherever the true value is representable (it underflows to 0
    only for radii so large that f < 1e-308).  Cached per (p, b, t, m).
    """
    key = (spec.p, spec.b, spec.t, None if (m is None or m == -inf) else int(m))
    hit = _density_cache.get(key)
    if hit is not None:
        return hit
    if key[3] is None:
        val = _f_at_zero(spec.p, spec.b, spec.t)
    else:
        val = _f_on_sphere(spec.p, spec.b, spec.t, key[3])
    with _cache_lock:
        _density_cache[key] = val
    return val


def ball_mass(spec: RadialDensitySpec, M: int) -> float:
    """P(|X| <= p**M) = p^M sum_{gamma <= -M} (1-1/p) p^gamma e^{-t p^(gamma b)}."""
    p, b, t = spec.p, spec.b, spec.t
    total = 0.0
    gamma = -int(M)
    while True:
        core = _exp_neg(t, p, gamma * b)
        pg = _power(p, gamma)
        total += pg * core if core else 0.0
        if pg < _REL_FLOOR * max(total, 1e-300):
            break
        gamma -= 1
    return float(p) ** int(M) * (1.0 - 1.0 / p) * total


def upper_tail(spec: RadialDensitySpec, M: int) -> float:
    """P(|X| > p**M), computed as a positive series (no 1 - mass cancellation)."""
    p, b, t = spec.p, spec.b, spec.t
    total = 0.0
    gamma = -int(M)
    while True:
        arg = t * _power(p, gamma * b)
        pg = _power(p, gamma)
        total += pg * (1.0 if arg > _LOG_HUGE else -expm1(-arg))
        if pg < _REL_FLOOR * max(total, 1e-300):
            break
        gamma -= 1
    return float(p) ** int(M) * (1.0 - 1.0 / p) * total


def sphere_mass(spec: RadialDensitySpec, m: int) -> float:
    """P(|X| = p**m) = p^m (1 - 1/p) f(m)."""
    return float(spec.p) ** int(m) * (1.0 - 1.0 / spec.p) * radial_density(spec, m)


def radius_range(spec: RadialDensitySpec) -> tuple[int, int]:
    """Smallest [m_lo, m_hi] whose complement has mass below the truncation."""
    half = spec.truncation / 2.0
    m_hi = 0
    while upper_tail(spec, m_hi) > half:
        m_hi += 1
        if m_hi > 10_000:  # pragma: no cover - defensive
            raise ArithmeticError("radius upper tail failed to close")
    m_lo = 0
    while ball_mass(spec, m_lo - 1) > half:
        m_lo -= 1
        if m_lo < -10_000:  # pragma: no cover - defensive
            raise ArithmeticError("radius lower tail failed to close")
    return m_lo, m_hi


def radius_distribution(spec: RadialDensitySpec) -> dict[int, float]:
    """The law of the norm exponent: m -> P(|X| = p**m), truncated tails.

    The entries sum to 1 up to the spec's truncation tolerance.
    """
    m_lo, m_hi = radius_range(spec)
    return {m: sphere_mass(spec, m) for m in range(m_lo, m_hi + 1)}


# ---------------------------------------------------------------------------
# Proposition-style checks: moments, scaling, convolution, positive type
# ---------------------------------------------------------------------------


def absolute_moment(spec: RadialDensitySpec, k: float) -> float:
    """Integral of |x|^k f_{t,b}(x) dx, for 0 <= k < b.

    Summed over spheres with an explicit geometric bound on the heavy tail
    (f(m) <= t p^b p^{-m(1+b)} gives sphere terms <= c p^{m(k-b)}).
    """
    if k < 0:
        raise ValueError(f"moment order must be >= 0, got {k}")
    if k >= spec.b:
        raise ValueError(
            f"the |x|^k moment diverges for k >= b (k={k}, b={spec.b})")
    p, b, t = spec.p, spec.b, spec.t
    m_lo, m_hi = radius_range(spec)
    total = 0.0
    for m in range(m_lo, m_hi + 1):
        total += float(p) ** (m * k) * sphere_mass(spec, m)
    # extend the heavy side until the analytic tail bound is negligible
    m = m_hi + 1
    while True:
        bound = ((1.0 - 1.0 / p) * t * float(p) ** b
                 * float(p) ** (m * (k - b)) / (1.0 - float(p) ** (k - b)))
        if bound < 1e-16 * max(total, 1e-300):
            break
        total += float(p) ** (m * k) * sphere_mass(spec, m)
        m += 1
        if m > m_hi + 10_000:  # pragma: no cover - defensive
            raise ArithmeticError("moment tail failed to close")
    return total


@dataclass(frozen=True)
class MomentBoundReport:
    """sup_t checks of the time-scaling bounds, over a logarithmic t-grid."""

    k: float
    b: float
    t_grid: np.ndarray
    moment_ratios: np.ndarray      # integral / t^(k/b)
    density_scalings: np.ndarray   # f(0) * t^(1/b)
    sup_moment_ratio: float
    sup_density_scaling: float


def moment_and_bound_checks(spec: RadialDensitySpec, k: float,
                            t_points: int = 81,
                            t_min: float = 1e-3,
                            t_max: float = 1e3) -> MomentBoundReport:
    """Scan t over a log grid and report the scaling suprema.

    Both sup_t [moment / t^(k/b)] and sup_t [f(0) t^(1/b)] must come out
    finite (they are log-periodic in t, so refining the grid moves them by
    little).  Raises for k >= b, where the moment diverges.
    """
    if k >= spec.b:
        raise ValueError(
            f"the |x|^k moment diverges for k >= b (k={k}, b={spec.b})")
    ts = np.exp(np.linspace(log(t_min), log(t_max), int(t_points)))
    ratios = np.empty(len(ts))
    scalings = np.empty(len(ts))
    for i, t in enumerate(ts):
        s = spec.with_time(float(t))
        ratios[i] = absolute_moment(s, k) / t ** (k / spec.b)
        scalings[i] = radial_density(s, None) * t ** (1.0 / spec.b)
    return MomentBoundReport(
        k=float(k), b=spec.b, t_grid=ts, moment_ratios=ratios,
        density_scalings=scalings,
        sup_moment_ratio=float(np.max(ratios)),
        sup_density_scaling=float(np.max(scalings)),
    )


def convolve_radial(spec_s: RadialDensitySpec, spec_t: RadialDensitySpec,
                    m: int) -> float:
    """(f_s * f_t) on the sphere |x| = p^m by the sphere decomposition.

    Splitting the y-integral over norm spheres |y| = p^j and using the
    ultrametric geometry of the sphere around x gives

        mass_s(B_{m-1}) f_t(m) + f_s(m) mass_t(B_{m-1})
        + (p-2) p^{m-1} f_s(m) f_t(m)
        + sum_{j > m} p^j (1-1/p) f_s(j) f_t(j),

    which is symmetric in (s, t) term by term.
    """
    if (spec_s.p, spec_s.b) != (spec_t.p, spec_t.b):
        raise ValueError("convolution factors must share (p, b)")
    p = spec_s.p
    m = int(m)
    fs_m = radial_density(spec_s, m)
    ft_m = radial_density(spec_t, m)
    total = ball_mass(spec_s, m - 1) * ft_m + fs_m * ball_mass(spec_t, m - 1)
    total += (p - 2) * float(p) ** (m - 1) * (fs_m * ft_m)
    j = m + 1
    while True:
        term = float(p) ** j * (1.0 - 1.0 / p) * (
            radial_density(spec_s, j) * radial_density(spec_t, j))
        total += term
        if term < 1e-18 * max(total, 1e-300) and j > m + 4:
            break
        j += 1
        if j > m + 10_000:  # pragma: no cover - defensive
            raise ArithmeticError("convolution tail failed to close")
    return total


def semigroup_convolution_check(spec: RadialDensitySpec, s: float, t: float,
                                m_range: tuple[int, int] = (-12, 12)) -> float:
    """max_m |(f_s * f_t)(m) - f_{s+t}(m)| over the given sphere range."""
    if not (s > 0 and t > 0):
        raise ValueError("both times must be positive")
    spec_s = spec.with_time(s)
    spec_t = spec.with_time(t)
    spec_st = spec.with_time(s + t)
    dev = 0.0
    for m in range(m_range[0], m_range[1] + 1):
        dev = max(dev, abs(convolve_radial(spec_s, spec_t, m)
                           - radial_density(spec_st, m)))
    return dev


def positive_definiteness_check(spec: RadialDensitySpec,
                                points: list[PadicNumber]) -> float:
    """Smallest eigenvalue of the Gram matrix [f(x_i - x_j)].

    The density is of positive type, so the matrix must be PSD up to
    eigensolver noise.  Duplicate points are rejected.
    """
    n = len(points)
    if n == 0:
        raise ValueError("need at least one point")
    for x in points:
        if x.p != spec.p:
            raise ValueError("points must live in the spec's Q_p")
    G = np.empty((n, n))
    f0 = radial_density(spec, None)
    for i in range(n):
        G[i, i] = f0
        for j in range(i + 1, n):
            diff = points[i] - points[j]
            if diff.is_zero:
                raise ValueError(f"points {i} and {j} coincide")
            G[i, j] = G[j, i] = radial_density(spec, diff.norm_exponent())
    return float(np.linalg.eigvalsh(G)[0])
