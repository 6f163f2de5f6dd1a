"""The oracle comparison suite behind the `selfcheck` subcommand.

Each check recomputes a quantity two independent ways -- a Monte Carlo
estimator against a dense matrix exponential, a series evaluation against
a brute-force summation, a sampled law against its analytic pmf -- and
passes only if they agree at the stated tolerance.  Seeds are fixed, so
the suite is deterministic.  `fast=True` skips the two long Monte Carlo
comparisons (flagged "(slow)"), which take minutes.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from math import exp, pi, sqrt

import numpy as np
from scipy.special import ive
from scipy.stats import chi2

from . import feynman_kac as fk, lattice, qops
from .padic import (
    PadicNumber,
    RadialDensitySpec,
    VladimirovSpec,
    moment_and_bound_checks,
    padic_fk_kernel,
    positive_definiteness_check,
    radial_density,
    radius_distribution,
    sample_increment,
    sample_padic_bridge,
    semigroup_convolution_check,
    sphere_character_integral,
    vladimirov_hamiltonian,
    vladimirov_kernel_matrix,
)
from .paths import (
    WalkParams,
    integrate_potential,
    sample_brownian_bridge,
    sample_bridge_marginal,
    sample_walk_bridge,
    walk_transition,
)
from .rng import RngStreams, generator

SEED = 20260808


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _chi_square_pvalue(observed: np.ndarray, expected: np.ndarray) -> float:
    """Pearson chi-square p-value with tail pooling to expected >= 5."""
    obs = np.asarray(observed, dtype=np.float64)
    expd = np.asarray(expected, dtype=np.float64)
    order = np.argsort(expd)
    obs, expd = obs[order], expd[order]
    o_pool, e_pool = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(obs, expd):
        o_acc += o
        e_acc += e
        if e_acc >= 5.0:
            o_pool.append(o_acc)
            e_pool.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 and e_pool:
        o_pool[-1] += o_acc
        e_pool[-1] += e_acc
    o_arr = np.asarray(o_pool)
    e_arr = np.asarray(e_pool)
    e_arr *= o_arr.sum() / e_arr.sum()
    stat = float(np.sum((o_arr - e_arr) ** 2 / e_arr))
    dof = len(e_arr) - 1
    if dof < 1:
        return 1.0
    return float(chi2.sf(stat, dof))


def _within(name, value, target, tol, unit="abs") -> CheckResult:
    err = abs(value - target)
    ok = err <= tol
    return CheckResult(name, ok, f"value {value:.10g}, target {target:.10g}, "
                                 f"|err| {err:.3g} vs {unit} tol {tol:.3g}")


def _sigma(name, value, target, stderr, n_sigma=3.0) -> CheckResult:
    gap = abs(value - target)
    lim = n_sigma * max(stderr, 1e-300)
    return CheckResult(name, gap <= lim,
                       f"value {value:.8g}, target {target:.8g}, "
                       f"gap {gap:.3g} vs {n_sigma:g}*stderr {lim:.3g}")


# ---------------------------------------------------------------------------
# individual checks
# ---------------------------------------------------------------------------


def check_momentum_trace():
    g = lattice.make_grid(3, 1)
    p = qops.momentum_operators(g)[0]
    return _within("qops momentum trace (N=3)", abs(p.trace()), 0.0, 1e-12)


def check_schwinger_free_trace():
    g = lattice.make_grid(3, 1)
    H = qops.schwinger_hamiltonian(g, qops.PotentialSpec.zero())
    return _within("qops free spectral Hamiltonian trace = eps^2 (N=3)",
                   H.trace(), g.epsilon**2, 1e-12)


def check_harmonic_ground_state():
    g = lattice.make_grid(21, 1)
    dec = qops.eigendecompose(qops.schwinger_hamiltonian(g, qops.PotentialSpec.harmonic()))
    return _within("qops harmonic ground state (N=21)",
                   float(dec.eigenvalues[0]), 0.5, 1e-3)


def check_walk_hamiltonian_spectrum():
    g = lattice.make_grid(3, 1)
    dec = qops.eigendecompose(qops.stochastic_hamiltonian(g, qops.PotentialSpec.zero()))
    target = np.array([0.0, 3.0 / (4.0 * pi), 9.0 / (4.0 * pi)])
    err = float(np.max(np.abs(dec.eigenvalues - target)))
    return CheckResult("qops free walk Hamiltonian spectrum (N=3)", err < 1e-12,
                       f"max eigenvalue error {err:.3g}")


def check_mehler_trace():
    g = lattice.make_grid(101, 1)
    tr = qops.mehler_reference(g, 1.0).trace()
    return _within("qops reference kernel trace (N=101, t=1)",
                   tr, qops.harmonic_trace_exact(1.0), 1e-4)


def check_walk_transition_normalization():
    w = WalkParams(epsilon=1.0, d=1)
    total = sum(walk_transition(w, [j], 1.0) for j in range(-60, 61))
    return _within("paths transition kernel normalization", total, 1.0, 1e-10)


def check_skellam_law():
    from .paths import sample_free_walk

    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(SEED + 1)
    n = 100_000
    disp = np.array([sample_free_walk(w, [0], 1.0, rng).value(1.0)[0]
                     for _ in range(n)])
    js = np.arange(-8, 9)
    obs = np.array([(disp == j).sum() for j in js])
    # two opposed Poisson streams: pmf is the scaled Bessel ive(|j|, T/eps^2)
    expd = n * np.array([float(ive(abs(j), 1.0)) for j in js])
    pval = _chi_square_pvalue(obs, expd)
    return CheckResult("paths free-walk displacement law (chi-square)",
                       pval > 0.01, f"p-value {pval:.4f}")


def check_bridge_zero_jump_probability():
    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(SEED + 2)
    n = 20_000
    zero = sum(1 for _ in range(n)
               if sample_walk_bridge(w, [0], [0], 1.0, rng).n_jumps == 0)
    target = exp(-1.0) / walk_transition(w, [0], 1.0)
    stderr = sqrt(target * (1 - target) / n)
    return _sigma("paths bridge zero-jump probability", zero / n, target, stderr)


def check_bridge_midpoint_law():
    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(SEED + 3)
    n = 100_000
    mids = sample_bridge_marginal(w, [0], [0], 1.0, 0.5, n, rng)[:, 0]
    lo, hi = -6, 6
    obs = np.array([(mids == z).sum() for z in range(lo, hi + 1)])
    qT = walk_transition(w, [0], 1.0)
    expd = np.array([n * walk_transition(w, [z], 0.5) ** 2 / qT
                     for z in range(lo, hi + 1)])
    pval = _chi_square_pvalue(obs, expd)
    return CheckResult("paths bridge midpoint law (chi-square)", pval > 0.01,
                       f"p-value {pval:.4f}")


def check_brownian_trapezoid_refinement():
    # a fixed sample path; refinement gaps on one rough path are random at
    # scale 2^-J and a single near-cancellation can reorder them, so the
    # demonstration pins the path
    rng = generator(14)
    path = sample_brownian_bridge([0.0], [0.0], 1.0, 12, rng)
    V = qops.PotentialSpec.radial_power(1.0, 2.0)

    def restrict(level):
        from .paths import MeshPath

        stride = 2 ** (12 - level)
        return MeshPath(1.0, level, path.values[::stride])

    vals = [integrate_potential(restrict(J), V) for J in (8, 9, 10, 11, 12)]
    diffs = [abs(vals[i] - vals[i + 1]) for i in range(len(vals) - 1)]
    ok = all(diffs[i + 1] <= diffs[i] for i in range(len(diffs) - 1))
    return CheckResult("paths trapezoid refinement on a fixed bridge", ok,
                       "successive refinement gaps " +
                       ", ".join(f"{d:.3g}" for d in diffs))


def check_fk_kernel_lattice_oracle():
    g = lattice.make_grid(9, 1)
    w = WalkParams(epsilon=g.epsilon, d=1)
    V = qops.PotentialSpec.radial_power(1.0, 2.0)
    streams = RngStreams(SEED + 5, 16)
    est = fk.fk_kernel_lattice(w, V, 0.5, [0], [0], 100_000, streams)
    K = qops.semigroup(qops.stochastic_hamiltonian(g, V), 0.5).matrix
    target = float(K[g.k, g.k])
    return _sigma("feynman_kac lattice kernel vs matrix (N=9, V=q^2)",
                  est.mean, target, est.stderr)


def check_fk_trace_oracle():
    g = lattice.make_grid(9, 1)
    V = qops.PotentialSpec.harmonic()
    streams = RngStreams(SEED + 6, 16)
    est = fk.fk_trace(g, V, 1.0, 20_000, streams)
    target = qops.semigroup(qops.stochastic_hamiltonian(g, V), 1.0).trace()
    return _sigma("feynman_kac confined trace vs matrix (N=9, harmonic)",
                  est.mean, target, est.stderr)


def check_fk_continuum_oracle():
    V = qops.PotentialSpec.harmonic()
    streams = RngStreams(SEED + 7, 16)
    est = fk.fk_kernel_continuum(V, 1.0, [0.0], [0.0], 100_000, 12, streams)
    target = 1.0 / sqrt(2.0 * pi * np.sinh(1.0))
    return _sigma("feynman_kac continuum kernel vs closed form (harmonic)",
                  est.mean, target, est.stderr)


def check_convergence_tables():
    V = qops.PotentialSpec.harmonic()
    streams = RngStreams(SEED + 8, 16)
    rows = fk.convergence_experiment(V, 1.0, [9, 21, 41], 4000, streams,
                                     marginal_samples=50_000)
    target = qops.harmonic_trace_exact(1.0)
    gaps = [abs(r.exact_trace - target) for r in rows]
    ok_gap = all(b < a for a, b in zip(gaps, gaps[1:]))
    ok_marg = all(b.marginal_gap < a.marginal_gap for a, b in zip(rows, rows[1:]))
    ok_mc = all(abs(r.mc_trace.mean - r.exact_trace) <= 3 * r.mc_trace.stderr
                for r in rows)
    ok = ok_gap and ok_marg and ok_mc
    return CheckResult("feynman_kac convergence table (exact gap, marginal gap, MC)",
                       ok, f"trace gaps {['%.4g' % v for v in gaps]}, "
                           f"marginal gaps {['%.4g' % r.marginal_gap for r in rows]}, "
                           f"MC within 3 stderr: {ok_mc}")


def check_schwinger_beats_walk():
    V = qops.PotentialSpec.harmonic()
    details = []
    ok = True
    for N in (21, 41):
        g = lattice.make_grid(N, 1)
        ref = qops.mehler_reference(g, 1.0)
        ds = qops.trace_norm_distance(qops.semigroup(qops.schwinger_hamiltonian(g, V), 1.0), ref)
        dw = qops.trace_norm_distance(qops.semigroup(qops.stochastic_hamiltonian(g, V), 1.0), ref)
        ok = ok and ds < dw
        details.append(f"N={N}: spectral {ds:.3g} vs walk {dw:.3g}")
    return CheckResult("qops spectral Hamiltonian approximates better than walk",
                       ok, "; ".join(details))


def check_sphere_character_integral():
    results = []
    for p in (2, 3):
        for m in (1, 2):
            # brute force over residues xi = u mod p^2 on the unit sphere
            total = 0.0
            x_scale = p ** (-m)
            for u in range(1, p * p):
                if u % p == 0:
                    continue
                frac = (u * x_scale) % 1.0
                total += cmath.exp(2j * pi * frac).real * p ** (-2)
            got = sphere_character_integral(p, m, 0)
            results.append(abs(got - total))
    err = max(results)
    return CheckResult("padic sphere character integral vs brute force",
                       err < 1e-12, f"max |error| {err:.3g}")


def check_density_at_zero_series():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    direct = sum(exp(-(2.0 ** (g * 2.0))) * 2.0**g * 0.5 for g in range(-60, 9))
    got = radial_density(spec, None)
    return _within("padic density at zero vs partial summation (p=2,b=2,t=1)",
                   got, direct, 1e-14)


def check_radius_distribution_concentration():
    spec = RadialDensitySpec(2, 1.0, 1e-4)
    dist = radius_distribution(spec)
    mass = sum(v for m, v in dist.items() if m <= 0)
    return CheckResult("padic small-time concentration (t=1e-4)", mass >= 0.99,
                       f"P(|X| <= 1) = {mass:.6f}")


def check_increment_law():
    spec = RadialDensitySpec(2, 1.0, 1.0)
    rng = generator(SEED + 9)
    n = 100_000
    draws = np.array([sample_increment(spec, 32, rng).norm_exponent()
                      for _ in range(n)])
    dist = radius_distribution(spec)
    ms = sorted(dist)
    obs = np.array([(draws == m).sum() for m in ms])
    expd = np.array([n * dist[m] for m in ms])
    pval = _chi_square_pvalue(obs, expd)
    return CheckResult("padic increment radius law (chi-square)", pval > 0.01,
                       f"p-value {pval:.4f}")


def check_increment_convolution_law():
    spec = RadialDensitySpec(2, 1.0, 0.4)
    rng = generator(SEED + 10)
    n = 100_000
    sums = [(sample_increment(spec, 32, rng) + sample_increment(
        spec.with_time(0.6), 32, rng)).norm_exponent() for _ in range(n)]
    arr = np.array([-10**9 if m is None else m for m in sums])
    dist = radius_distribution(spec.with_time(1.0))
    ms = sorted(dist)
    obs = np.array([(arr == m).sum() for m in ms])
    expd = np.array([n * dist[m] for m in ms])
    pval = _chi_square_pvalue(obs, expd)
    return CheckResult("padic increment convolution-in-law (chi-square)",
                       pval > 0.01, f"p-value {pval:.4f}")


def check_bridge_midpoint_radius_law():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    rng = generator(SEED + 11)
    n = 30_000
    zero = PadicNumber.zero(2, 32)
    half = spec.with_time(0.5)
    mids = []
    for _ in range(n):
        br = sample_padic_bridge(spec, zero, zero, 1.0, 1, rng)
        mids.append(br.value(0.5).norm_exponent())
    arr = np.array([-10**9 if m is None else m for m in mids])
    fT0 = radial_density(spec, None)
    ms = list(range(-30, 26))
    expd = np.array([n * 2.0**m * 0.5 * radial_density(half, m) ** 2 / fT0
                     for m in ms])
    obs = np.array([(arr == m).sum() for m in ms])
    pval = _chi_square_pvalue(obs, expd)
    return CheckResult("padic bridge midpoint radius law (chi-square)",
                       pval > 0.01, f"p-value {pval:.4f}")


def check_bridge_acceptance_rate():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    rng = generator(SEED + 12)
    n = 20_000
    zero = PadicNumber.zero(2, 32)
    diag: dict = {}
    for _ in range(n):
        sample_padic_bridge(spec, zero, zero, 1.0, 1, rng, diagnostics=diag)
    half = spec.with_time(0.5)
    target = radial_density(spec, None) / (2.0 * radial_density(half, None))
    rate = diag["accepted"] / diag["proposals"]
    stderr = sqrt(target**2 * (1 - target) / n)  # delta method on neg. binomial
    return _sigma("padic bridge acceptance rate vs density ratio",
                  rate, target, stderr)


def check_vladimirov_two_state():
    spec = VladimirovSpec(p=2, b=2.0, M=0, Mp=1, V=qops.PotentialSpec.zero())
    w = np.linalg.eigvalsh(vladimirov_hamiltonian(spec).matrix)
    err = float(np.max(np.abs(w - np.array([0.0, 2.0**2.0]))))
    return CheckResult("padic two-state multiplier model spectrum", err < 1e-12,
                       f"max eigenvalue error {err:.3g}")


def check_vladimirov_free_kernel():
    spec = VladimirovSpec(p=2, b=2.0, M=6, Mp=6, V=qops.PotentialSpec.zero())
    K = vladimirov_kernel_matrix(spec, 1.0)
    target = radial_density(RadialDensitySpec(2, 2.0, 1.0), None)
    return _within("padic finite model free kernel vs density at zero",
                   float(K[0, 0]), target, 5e-6)


def check_moment_bounds():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    rep = moment_and_bound_checks(spec, 1.0, t_points=81)
    rep2 = moment_and_bound_checks(spec, 1.0, t_points=161)
    rel = abs(rep.sup_moment_ratio - rep2.sup_moment_ratio) / rep.sup_moment_ratio
    ok = (np.isfinite(rep.sup_moment_ratio) and np.isfinite(rep.sup_density_scaling)
          and rel < 0.01)
    return CheckResult("padic moment bound sup stable under grid refinement",
                       ok, f"sup {rep.sup_moment_ratio:.6g}, refined "
                           f"{rep2.sup_moment_ratio:.6g}, rel change {rel:.3g}")


def check_convolution_identities():
    from .padic import convolve_radial

    base = RadialDensitySpec(2, 1.0, 1.0)
    dev = semigroup_convolution_check(base, 0.5, 0.5)
    tiny = base.with_time(1e-6)
    dev_dirac = 0.0
    for m in range(-12, 13):
        dev_dirac = max(dev_dirac, abs(
            convolve_radial(tiny, base, m) - radial_density(base, m)))
    ok = dev < 1e-8 and dev_dirac < 1e-4
    return CheckResult("padic convolution semigroup identity",
                       ok, f"deviation {dev:.3g}; small-time limit {dev_dirac:.3g}")


def check_positive_definiteness():
    spec = RadialDensitySpec(3, 1.0, 1.0)
    rng = generator(SEED + 13)
    pts = []
    seen = set()
    while len(pts) < 16:
        cand = PadicNumber.from_unit(3, int(rng.integers(-4, 5)),
                                     int(rng.integers(1, 3**8)), 32)
        key = (cand.valuation, cand.unit)
        if key in seen:
            continue
        seen.add(key)
        pts.append(cand)
    mineig = positive_definiteness_check(spec, pts)
    return CheckResult("padic Gram matrix positive semidefinite",
                       mineig >= -1e-10, f"min eigenvalue {mineig:.3g}")


def check_padic_fk_oracle():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    V = qops.PotentialSpec.radial_power(1.0, 1.0)
    coarse = vladimirov_kernel_matrix(
        VladimirovSpec(p=2, b=2.0, M=5, Mp=5, V=V), 1.0)[0, 0]
    fine = vladimirov_kernel_matrix(
        VladimirovSpec(p=2, b=2.0, M=6, Mp=6, V=V), 1.0)[0, 0]
    stable = abs(fine - coarse) < 1e-3
    zero = PadicNumber.zero(2, 32)
    streams = RngStreams(SEED + 14, 16)
    est = padic_fk_kernel(spec, V, 1.0, zero, zero, 100_000, 7, streams)
    res = _sigma("padic Feynman-Kac kernel vs finite model (slow)",
                 est.mean, float(fine), est.stderr)
    res.passed = res.passed and stable
    res.detail += f"; oracle resolution drift {abs(fine - coarse):.3g}"
    return res


def check_cli_spectrum():
    from .cli import _RUNNERS, RunConfig

    cfg = RunConfig(command="spectrum",
                    parameters={"N": 21, "d": 1, "V": "0.5*x^2", "count": 5,
                                "hamiltonian": "schwinger"},
                    seed=SEED, substreams=8)
    header, rows = _RUNNERS["spectrum"](cfg)
    ok = len(rows) == 5 and abs(rows[0][1] - 0.5) < 1e-3
    return CheckResult("cli spectrum command ground state", ok,
                       f"first eigenvalue {rows[0][1]:.8f}")


FAST_CHECKS = [
    check_momentum_trace,
    check_schwinger_free_trace,
    check_harmonic_ground_state,
    check_walk_hamiltonian_spectrum,
    check_mehler_trace,
    check_walk_transition_normalization,
    check_skellam_law,
    check_bridge_zero_jump_probability,
    check_bridge_midpoint_law,
    check_brownian_trapezoid_refinement,
    check_fk_trace_oracle,
    check_convergence_tables,
    check_schwinger_beats_walk,
    check_sphere_character_integral,
    check_density_at_zero_series,
    check_radius_distribution_concentration,
    check_increment_law,
    check_increment_convolution_law,
    check_bridge_midpoint_radius_law,
    check_bridge_acceptance_rate,
    check_vladimirov_two_state,
    check_vladimirov_free_kernel,
    check_moment_bounds,
    check_convolution_identities,
    check_positive_definiteness,
    check_cli_spectrum,
]

SLOW_CHECKS = [
    check_fk_kernel_lattice_oracle,
    check_fk_continuum_oracle,
    check_padic_fk_oracle,
]


def run_selfcheck(fast: bool = False, log=None) -> list[CheckResult]:
    """Run all oracle comparisons; returns the individual results."""
    checks = list(FAST_CHECKS) + ([] if fast else list(SLOW_CHECKS))
    results = []
    for fn in checks:
        res = fn()
        results.append(res)
        if log is not None:
            log(f"[{'PASS' if res.passed else 'FAIL'}] {res.name}: {res.detail}")
    if log is not None:
        bad = sum(1 for r in results if not r.passed)
        log(f"selfcheck: {len(results) - bad}/{len(results)} checks passed")
    return results
