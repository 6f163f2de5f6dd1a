import numpy as np
import pytest

from fklab.padic import (
    PadicNumber,
    RadialDensitySpec,
    VladimirovSpec,
    padic_fk_kernel,
    radial_density,
    radius_distribution,
    sample_increment,
    sample_padic_bridge,
    sample_padic_path,
    vladimirov_kernel_matrix,
)
from fklab.paths import CadlagPath
from fklab.qops import PotentialSpec
from fklab.rng import RngStreams, generator
from fklab.selfcheck import _chi_square_pvalue

SPEC = RadialDensitySpec(2, 1.0, 1.0)
ZERO = PadicNumber.zero(2, 32)


def radius_counts(values, dist):
    ms = sorted(dist)
    arr = np.array([-10**9 if m is None else m for m in values])
    obs = np.array([(arr == m).sum() for m in ms])
    expd = np.array([dist[m] for m in ms]) * len(values)
    return obs, expd


# -- increments ----------------------------------------------------------------


def test_increment_radius_law():
    rng = generator(200)
    n = 100_000
    draws = [sample_increment(SPEC, 32, rng).norm_exponent() for _ in range(n)]
    obs, expd = radius_counts(draws, radius_distribution(SPEC))
    assert _chi_square_pvalue(obs, expd) > 0.01


def test_increment_digits_uniform():
    spec = RadialDensitySpec(3, 1.0, 1.0)
    rng = generator(201)
    n = 30_000
    # second digit of the expansion should be uniform on {0, 1, 2}
    seconds = np.array([sample_increment(spec, 8, rng).digits()[1]
                        for _ in range(n)])
    obs = np.array([(seconds == d).sum() for d in range(3)])
    assert _chi_square_pvalue(obs, np.full(3, n / 3.0)) > 0.01


def test_increment_convolution_in_law():
    rng = generator(202)
    n = 100_000
    s1 = SPEC.with_time(0.4)
    s2 = SPEC.with_time(0.6)
    sums = [(sample_increment(s1, 32, rng) + sample_increment(s2, 32, rng))
            .norm_exponent() for _ in range(n)]
    obs, expd = radius_counts(sums, radius_distribution(SPEC.with_time(1.0)))
    assert _chi_square_pvalue(obs, expd) > 0.01


def test_increment_deterministic_under_seed():
    a = [sample_increment(SPEC, 32, generator(7)) for _ in range(5)]
    b = [sample_increment(SPEC, 32, generator(7)) for _ in range(5)]
    assert a == b


def test_increment_precision_and_leading_digit():
    spec = RadialDensitySpec(5, 1.0, 1.0)
    rng = generator(203)
    for _ in range(200):
        x = sample_increment(spec, 12, rng)
        assert x.precision == 12
        assert x.digits()[0] != 0


# -- paths ----------------------------------------------------------------------


def test_path_starts_at_x():
    rng = generator(204)
    x = PadicNumber.from_integer(2, 3)
    path = sample_padic_path(SPEC, x, 1.0, 4, rng)
    assert path.value(0.0) == x
    assert isinstance(path, CadlagPath)


def test_path_marginal_radius_law():
    rng = generator(205)
    n = 30_000
    vals = [sample_padic_path(SPEC, ZERO, 1.0, 3, rng).value(1.0).norm_exponent()
            for _ in range(n)]
    obs, expd = radius_counts(vals, radius_distribution(SPEC))
    assert _chi_square_pvalue(obs, expd) > 0.01


def test_path_refinement_consistency():
    # the law of |omega(T/2)| must agree between level-J and level-(J+1) runs
    n = 30_000
    rng_a = generator(206)
    rng_b = generator(207)
    va = [sample_padic_path(SPEC, ZERO, 1.0, 2, rng_a).value(0.5).norm_exponent()
          for _ in range(n)]
    vb = [sample_padic_path(SPEC, ZERO, 1.0, 3, rng_b).value(0.5).norm_exponent()
          for _ in range(n)]
    half = radius_distribution(SPEC.with_time(0.5))
    oa, ea = radius_counts(va, half)
    ob, eb = radius_counts(vb, half)
    assert _chi_square_pvalue(oa, ea) > 0.01
    assert _chi_square_pvalue(ob, eb) > 0.01


# -- bridges -----------------------------------------------------------------------


def test_bridge_endpoints_exact():
    rng = generator(208)
    x = PadicNumber.from_integer(2, 3)
    y = PadicNumber.from_unit(2, -2, 1)
    for _ in range(50):
        br = sample_padic_bridge(SPEC, x, y, 1.0, 3, rng)
        assert br.value(0.0) == x
        assert br.value(1.0) == y


def test_bridge_midpoint_conditional_law():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    rng = generator(209)
    n = 30_000
    half = spec.with_time(0.5)
    mids = [sample_padic_bridge(spec, ZERO, ZERO, 1.0, 1, rng)
            .value(0.5).norm_exponent() for _ in range(n)]
    arr = np.array([-10**9 if m is None else m for m in mids])
    fT0 = radial_density(spec, None)
    ms = list(range(-30, 26))
    expd = np.array([n * 2.0**m * 0.5 * radial_density(half, m) ** 2 / fT0
                     for m in ms])
    obs = np.array([(arr == m).sum() for m in ms])
    assert _chi_square_pvalue(obs, expd) > 0.01


def test_bridge_acceptance_rate_matches_density_ratio():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    rng = generator(210)
    n = 20_000
    diag: dict = {}
    for _ in range(n):
        sample_padic_bridge(spec, ZERO, ZERO, 1.0, 1, rng, diagnostics=diag)
    # mixture proposal: per-proposal acceptance is f_T(y-x) / (2 f_{T/2}(|y-x|))
    target = radial_density(spec, None) / (2.0 * radial_density(spec.with_time(0.5), None))
    rate = diag["accepted"] / diag["proposals"]
    stderr = np.sqrt(target**2 * (1.0 - target) / n)
    assert abs(rate - target) <= 3.0 * stderr


def test_bridge_deterministic_under_seed():
    a = sample_padic_bridge(SPEC, ZERO, ZERO, 1.0, 4, generator(31))
    b = sample_padic_bridge(SPEC, ZERO, ZERO, 1.0, 4, generator(31))
    assert a.states == b.states
    assert np.array_equal(a.jump_times, b.jump_times)


def test_bridge_rejects_mixed_primes():
    other = PadicNumber.zero(3, 32)
    with pytest.raises(ValueError):
        sample_padic_bridge(SPEC, ZERO, other, 1.0, 2, generator(0))


# -- Feynman-Kac kernel ---------------------------------------------------------------


def test_padic_fk_free_exact():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    est = padic_fk_kernel(spec, PotentialSpec.zero(), 1.0, ZERO, ZERO, 100, 3,
                          RngStreams(11, 4))
    assert est.mean == radial_density(spec, None)
    assert est.stderr == 0.0


def test_padic_fk_free_off_origin():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    y = PadicNumber.from_unit(2, -1, 1)
    est = padic_fk_kernel(spec, PotentialSpec.zero(), 1.0, ZERO, y, 50, 2,
                          RngStreams(12, 2))
    assert est.mean == pytest.approx(radial_density(spec, 1), rel=1e-15)


def test_padic_fk_constant_potential():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    c = 1.3
    est = padic_fk_kernel(spec, PotentialSpec.constant(c), 1.0, ZERO, ZERO,
                          100, 3, RngStreams(13, 4))
    assert abs(est.mean - np.exp(-c) * radial_density(spec, None)) < 1e-12


def test_padic_fk_bounded_by_free_for_nonnegative_potential():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    V = PotentialSpec.radial_power(1.0, 1.0)
    est = padic_fk_kernel(spec, V, 1.0, ZERO, ZERO, 500, 4, RngStreams(14, 4))
    assert est.mean <= radial_density(spec, None)


def test_padic_fk_reproducible():
    spec = RadialDensitySpec(2, 2.0, 1.0)
    V = PotentialSpec.radial_power(1.0, 1.0)
    a = padic_fk_kernel(spec, V, 1.0, ZERO, ZERO, 400, 4, RngStreams(15, 4))
    b = padic_fk_kernel(spec, V, 1.0, ZERO, ZERO, 400, 4, RngStreams(15, 4))
    assert a.mean == b.mean


def test_padic_fk_mesh_stability():
    # J and J+1 runs agree within combined Monte Carlo error
    spec = RadialDensitySpec(2, 2.0, 1.0)
    V = PotentialSpec.radial_power(1.0, 1.0)
    a = padic_fk_kernel(spec, V, 1.0, ZERO, ZERO, 20_000, 6, RngStreams(16, 8))
    b = padic_fk_kernel(spec, V, 1.0, ZERO, ZERO, 20_000, 7, RngStreams(17, 8))
    assert abs(a.mean - b.mean) <= 3.0 * np.hypot(a.stderr, b.stderr) + 5e-4


def test_padic_fk_matrix_oracle_moderate():
    # moderate-n version of the oracle gate (the full version is acceptance)
    spec = RadialDensitySpec(2, 2.0, 1.0)
    V = PotentialSpec.radial_power(1.0, 1.0)
    oracle = vladimirov_kernel_matrix(
        VladimirovSpec(p=2, b=2.0, M=5, Mp=5, V=V), 1.0)[0, 0]
    est = padic_fk_kernel(spec, V, 1.0, ZERO, ZERO, 20_000, 7, RngStreams(18, 8))
    assert abs(est.mean - oracle) <= 3.0 * est.stderr + 1e-3
