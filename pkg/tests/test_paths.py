import numpy as np
import pytest
from scipy.special import ive, ndtr

from fklab.lattice import make_grid
from fklab.paths import (
    CadlagPath,
    MeshPath,
    WalkParams,
    integrate_potential,
    j1_distance_upper,
    kolmogorov_distance,
    marginal_statistics,
    sample_bridge_marginal,
    sample_brownian_bridge,
    sample_free_walk,
    sample_walk_bridge,
    walk_transition,
)
from fklab.qops import PotentialSpec
from fklab.rng import generator
from fklab.selfcheck import _chi_square_pvalue


# -- containers ---------------------------------------------------------------


def test_cadlag_construction_and_value():
    p = CadlagPath(2.0, [0.5, 1.5], [(0,), (1,), (0,)])
    assert p.value(0.0) == (0,)
    assert p.value(0.5) == (1,)  # right-continuous at the jump
    assert p.value(1.49) == (1,)
    assert p.value(2.0) == (0,)
    with pytest.raises(ValueError):
        p.value(2.1)


def test_cadlag_validation():
    with pytest.raises(ValueError):
        CadlagPath(1.0, [0.5, 0.5], [(0,), (1,), (2,)])  # not strictly increasing
    with pytest.raises(ValueError):
        CadlagPath(1.0, [0.0], [(0,), (1,)])  # jump at 0
    with pytest.raises(ValueError):
        CadlagPath(1.0, [0.5], [(0,), (0,)])  # equal consecutive states
    with pytest.raises(ValueError):
        CadlagPath(1.0, [0.5], [(0,)])  # wrong state count
    # a final jump exactly at the horizon is admitted
    p = CadlagPath(1.0, [1.0], [(0,), (1,)])
    assert p.value(1.0) == (1,)


def test_mesh_path_interpolation():
    m = MeshPath(2.0, 1, [[0.0], [1.0], [0.0]])
    assert m.value(0.5)[0] == pytest.approx(0.5)
    assert m.value(1.0)[0] == pytest.approx(1.0)
    assert m.value(2.0)[0] == pytest.approx(0.0)


def test_walk_params():
    w = WalkParams(epsilon=0.5, d=2)
    assert w.per_neighbor_rate == pytest.approx(2.0)
    assert w.total_rate == pytest.approx(8.0)
    with pytest.raises(ValueError):
        WalkParams(epsilon=0.0, d=1)


# -- free walk ----------------------------------------------------------------


def test_free_walk_starts_at_x():
    w = WalkParams(epsilon=1.0, d=2)
    rng = generator(1)
    for _ in range(20):
        p = sample_free_walk(w, [3, -2], 1.0, rng)
        assert p.value(0.0) == (3, -2)


def test_free_walk_jump_count_mean():
    w = WalkParams(epsilon=1.0, d=2)
    rng = generator(2)
    T = 1.5
    n = 10_000
    counts = np.array([sample_free_walk(w, [0, 0], T, rng).n_jumps
                       for _ in range(n)])
    lam = T * w.total_rate
    assert abs(counts.mean() - lam) <= 3.0 * np.sqrt(lam / n)


def test_free_walk_displacement_skellam():
    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(3)
    n = 100_000
    disp = np.array([sample_free_walk(w, [0], 1.0, rng).value(1.0)[0]
                     for _ in range(n)])
    js = np.arange(-8, 9)
    obs = np.array([(disp == j).sum() for j in js])
    # Skellam pmf via scipy's scaled Bessel, an oracle independent of
    # the package's own series
    expd = n * np.array([ive(abs(j), 1.0) for j in js])
    assert _chi_square_pvalue(obs, expd) > 0.01


# -- transition kernel ----------------------------------------------------------


def test_walk_transition_small_time():
    w = WalkParams(epsilon=1.0, d=1)
    assert walk_transition(w, [0], 1e-14) == pytest.approx(1.0, abs=1e-10)
    assert walk_transition(w, [0], 0.0) == 1.0
    assert walk_transition(w, [1], 0.0) == 0.0


def test_walk_transition_normalization():
    w = WalkParams(epsilon=1.0, d=1)
    total = sum(walk_transition(w, [j], 1.0) for j in range(-60, 61))
    assert abs(total - 1.0) < 1e-10


def test_walk_transition_symmetry():
    w = WalkParams(epsilon=0.7, d=1)
    for j in range(0, 6):
        assert walk_transition(w, [j], 0.9) == walk_transition(w, [-j], 0.9)


def test_walk_transition_matches_scipy():
    for eps, T in ((1.0, 1.0), (0.5, 0.7), (0.25, 2.0)):
        w = WalkParams(epsilon=eps, d=1)
        z = T / eps**2
        for j in range(0, 12):
            ours = walk_transition(w, [j], T)
            ref = float(ive(j, z))
            # the series carries a 1e-14 absolute tail bound
            assert abs(ours - ref) < 1e-13


def test_walk_transition_product_over_axes():
    w2 = WalkParams(epsilon=0.8, d=2)
    w1 = WalkParams(epsilon=0.8, d=1)
    got = walk_transition(w2, [2, -1], 1.3)
    expect = walk_transition(w1, [2], 1.3) * walk_transition(w1, [-1], 1.3)
    assert got == pytest.approx(expect, rel=1e-12)


# -- bridges --------------------------------------------------------------------


def test_bridge_endpoints_exact():
    w = WalkParams(epsilon=1.0, d=2)
    rng = generator(4)
    for _ in range(500):
        p = sample_walk_bridge(w, [0, 1], [2, -1], 1.0, rng)
        assert p.value(0.0) == (0, 1)
        assert p.value(1.0) == (2, -1)


def test_bridge_endpoints_exact_large_sample():
    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(5)
    for _ in range(100_000):
        p = sample_walk_bridge(w, [0], [0], 1.0, rng)
        assert p.states[-1] == (0,)
        assert p.value(1.0) == (0,)


def test_bridge_zero_jump_probability():
    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(6)
    n = 20_000
    zero = sum(1 for _ in range(n)
               if sample_walk_bridge(w, [0], [0], 1.0, rng).n_jumps == 0)
    target = np.exp(-1.0) / walk_transition(w, [0], 1.0)
    stderr = np.sqrt(target * (1.0 - target) / n)
    assert abs(zero / n - target) <= 3.0 * stderr


def test_bridge_midpoint_chi_square():
    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(7)
    n = 100_000
    mids = np.array([sample_walk_bridge(w, [0], [0], 1.0, rng).value(0.5)[0]
                     for _ in range(n)])
    zs = np.arange(-6, 7)
    qT = walk_transition(w, [0], 1.0)
    expd = n * np.array([walk_transition(w, [z], 0.5) ** 2 / qT for z in zs])
    obs = np.array([(mids == z).sum() for z in zs])
    assert _chi_square_pvalue(obs, expd) > 0.01


def test_bridge_marginal_sampler_agrees_with_paths():
    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(8)
    n = 40_000
    direct = np.array([sample_walk_bridge(w, [0], [1], 1.0, rng).value(0.3)[0]
                       for _ in range(n)])
    fast = sample_bridge_marginal(w, [0], [1], 1.0, 0.3, n, generator(9))[:, 0]
    zs = np.arange(-5, 7)
    obs = np.array([(fast == z).sum() for z in zs])
    expd = np.array([max((direct == z).sum(), 0) for z in zs], dtype=float)
    expd += 0.5  # avoid empty-cell division in the pooled test
    assert _chi_square_pvalue(obs, expd) > 0.001


def test_bridge_rejects_bad_input():
    w = WalkParams(epsilon=1.0, d=1)
    with pytest.raises(ValueError):
        sample_walk_bridge(w, [0], [0], 0.0, generator(0))
    with pytest.raises(ValueError):
        sample_walk_bridge(w, [0, 0], [0], 1.0, generator(0))


# -- Brownian bridge -------------------------------------------------------------


def test_brownian_bridge_endpoints():
    rng = generator(10)
    p = sample_brownian_bridge([1.0, -1.0], [0.5, 2.0], 2.0, 6, rng)
    assert np.allclose(p.values[0], [1.0, -1.0])
    assert np.allclose(p.values[-1], [0.5, 2.0])


def test_brownian_bridge_midpoint_variance():
    rng = generator(11)
    n = 100_000
    T = 1.0
    mids = np.array([sample_brownian_bridge([0.0], [0.0], T, 1, rng).values[1][0]
                     for _ in range(n)])
    var = mids.var()
    target = T / 4.0
    stderr = target * np.sqrt(2.0 / (n - 1))
    assert abs(var - target) <= 3.0 * stderr
    assert abs(mids.mean()) <= 3.0 * np.sqrt(target / n)


def test_brownian_bridge_degenerate():
    rng = generator(12)
    p = sample_brownian_bridge([1.5], [1.5], 1e-12, 5, rng)
    assert np.max(np.abs(p.values - 1.5)) < 1e-5


# -- functionals -----------------------------------------------------------------


def test_integrate_constant():
    p = CadlagPath(3.0, [1.0], [(0,), (1,)])
    assert integrate_potential(p, lambda s: 4.0) == pytest.approx(12.0)


def test_integrate_single_jump():
    p = CadlagPath(1.0, [0.5], [(0,), (1,)])
    V = {(0,): 0.0, (1,): 2.0}
    assert integrate_potential(p, lambda s: V[s]) == pytest.approx(1.0)


def test_integrate_mesh_trapezoid():
    m = MeshPath(1.0, 2, [[0.0], [1.0], [2.0], [3.0], [4.0]])
    # trapezoid of V=x over a linear ramp = exact integral 2
    assert integrate_potential(m, PotentialSpec.radial_power(1.0, 1.0)) == \
        pytest.approx(2.0)


def test_integrate_additive_over_concatenation():
    rng = generator(13)
    w = WalkParams(epsilon=1.0, d=1)
    p = sample_free_walk(w, [0], 2.0, rng)
    V = PotentialSpec.radial_power(1.0, 2.0)
    whole = integrate_potential(p, V)
    # split at t=1: same states, clocks restricted
    before = [i for i, t in enumerate(p.jump_times) if t <= 1.0]
    k = len(before)
    left = CadlagPath(1.0, p.jump_times[:k], p.states[:k + 1]) if k else \
        CadlagPath(1.0, [], p.states[:1])
    right_times = p.jump_times[k:] - 1.0
    right = CadlagPath(1.0, right_times, p.states[k:])
    split = integrate_potential(left, V) + integrate_potential(right, V)
    assert split == pytest.approx(whole, rel=1e-12)


def test_trapezoid_refinement_converges():
    rng = generator(14)
    path = sample_brownian_bridge([0.0], [0.0], 1.0, 12, rng)
    V = PotentialSpec.radial_power(1.0, 2.0)

    def restrict(level):
        stride = 2 ** (12 - level)
        return MeshPath(1.0, level, path.values[::stride])

    vals = [integrate_potential(restrict(J), V) for J in (8, 9, 10, 11, 12)]
    diffs = [abs(a - b) for a, b in zip(vals, vals[1:])]
    assert all(b <= a for a, b in zip(diffs, diffs[1:]))


def test_marginal_statistics():
    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(15)
    samples = [sample_free_walk(w, [0], 1.0, rng) for _ in range(4000)]
    mean, err = marginal_statistics(samples, 0.7, lambda s: 1.0)
    assert mean == 1.0 and err == 0.0
    mean, err = marginal_statistics(samples, 1.0, lambda s: float(s[0]))
    assert abs(mean) <= 3.0 * max(err, 1e-12)
    with pytest.raises(ValueError):
        marginal_statistics([], 0.5, lambda s: 1.0)


def test_marginal_indicator_matches_conditional():
    w = WalkParams(epsilon=1.0, d=1)
    rng = generator(16)
    samples = [sample_walk_bridge(w, [0], [0], 1.0, rng) for _ in range(40_000)]
    mean, err = marginal_statistics(samples, 0.5,
                                    lambda s: 1.0 if s == (0,) else 0.0)
    target = walk_transition(w, [0], 0.5) ** 2 / walk_transition(w, [0], 1.0)
    assert abs(mean - target) <= 3.0 * err


# -- J1 diagnostic ----------------------------------------------------------------


def test_j1_zero_on_identical():
    p = CadlagPath(1.0, [0.3, 0.6], [(0,), (2,), (1,)])
    assert j1_distance_upper(p, p) == 0.0


def test_j1_shifted_jump():
    delta = 0.07
    p = CadlagPath(1.0, [0.50], [(0,), (1,)])
    q = CadlagPath(1.0, [0.50 + delta], [(0,), (1,)])
    bound = j1_distance_upper(p, q, M=4)
    assert bound <= delta + 1e-12
    assert bound > 0.0


def test_j1_sandwich_and_symmetry():
    rng = generator(17)
    w = WalkParams(epsilon=1.0, d=1)
    for _ in range(10):
        p = sample_free_walk(w, [0], 1.0, rng)
        q = sample_free_walk(w, [0], 1.0, rng)
        b1 = j1_distance_upper(p, q, M=3)
        b2 = j1_distance_upper(q, p, M=3)
        assert b1 == b2
        sup = _sup_distance(p, q)
        assert b1 <= sup + 1e-12
        assert b1 >= 0.0


def _sup_distance(p, q):
    ts = np.unique(np.concatenate([[0.0], p.jump_times, q.jump_times,
                                   [p.horizon]]))
    out = 0.0
    for t in ts:
        out = max(out, abs(p.value(t)[0] - q.value(t)[0]))
    return out


def test_j1_horizon_mismatch():
    p = CadlagPath(1.0, [], [(0,)])
    q = CadlagPath(2.0, [], [(0,)])
    with pytest.raises(ValueError):
        j1_distance_upper(p, q)


# -- weak-convergence diagnostics ---------------------------------------------------


def test_kolmogorov_distance_exact():
    # empirical law {0, 1} vs U(0,1)-ish cdf: hand-computable
    d = kolmogorov_distance(np.array([0.25, 0.75]), lambda x: np.asarray(x))
    assert d == pytest.approx(0.25)


def test_midpoint_gap_shrinks_with_n():
    gaps = []
    for N in (9, 81):
        g = make_grid(N, 1)
        w = WalkParams(epsilon=g.epsilon, d=1)
        mid = sample_bridge_marginal(w, [0], [0], 1.0, 0.5, 20_000, generator(18))
        x = g.epsilon * mid[:, 0]
        gaps.append(kolmogorov_distance(x, lambda v: ndtr(np.asarray(v) / 0.5)))
    assert gaps[1] < gaps[0]
