import math
from fractions import Fraction

import numpy as np
import pytest

from paged_cuckoo.bounds import (BoundConfig, DistVector, SolverError, c0_c1, c5, c6_c7,
                                 c8_c9, log_c5, log_c5_array, log_c9, log_multinomial,
                                 log_multinomial_bound, max_log_c9, multinomial_coeff,
                                 p_bad_given, p_hit_global, p_hit_paged, p_one_global,
                                 p_one_paged, ptilde_hit, solve_beta_infinite,
                                 solve_beta_paged, x0, x1)

DK_PAIRS = [(d, k) for d in (2, 3) for k in (1, 2, 3, 4)]


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# -- closed forms ------------------------------------------------------------

def test_x0_x1_examples():
    assert x0(2, 2) == pytest.approx(0.367879, abs=1e-6)
    assert x0(2, 3) == pytest.approx(0.606531, abs=1e-6)
    assert x1(2, 2) == pytest.approx(0.049787, abs=1e-6)
    assert x1(2, 3) == pytest.approx(0.135335, abs=1e-6)
    with pytest.raises(ValueError):
        x0(2, 1)
    with pytest.raises(ValueError):
        x1(1, 2)


def test_p_hit_global_examples():
    assert p_hit_global(10, 10, 2, 2) == pytest.approx(1.0, rel=1e-12)
    assert p_hit_global(2, 4, 2, 2) == pytest.approx(1 / 36, rel=1e-12)
    assert p_hit_global(1, 4, 2, 2) == 0.0
    vals = [p_hit_global(v, 50, 2, 3) for v in range(51)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_p_one_global_examples():
    assert p_one_global(10, 10, 2, 2) == 0.0
    assert p_one_global(2, 4, 2, 2) == pytest.approx(2 / 9, rel=1e-12)
    for d, k in DK_PAIRS:
        for n in (k + 1, 9, 40):
            for v in range(max(k - 1, 0), n + 1):
                assert p_one_global(v, n, d, k) + p_hit_global(v, n, d, k) <= 1 + 1e-12


def _naive(v, n, d, k):
    ck = Fraction(math.comb(n, k))
    hit = (Fraction(math.comb(v, k)) / ck) ** d
    one = d * Fraction((n - v) * math.comb(v, k - 1)) / ck * (Fraction(math.comb(v, k)) / ck) ** (d - 1)
    return hit, one


def test_log_domain_matches_exact_arithmetic(rng):
    for _ in range(400):
        d = int(rng.integers(2, 4))
        k = int(rng.integers(1, 5))
        if d * k <= 2:
            continue
        n = int(rng.integers(k + 1, 501))
        v = int(rng.integers(k, n + 1))
        hit, one = _naive(v, n, d, k)
        for got, want in ((p_hit_global(v, n, d, k), float(hit)),
                          (p_one_global(v, n, d, k), float(one))):
            if want > 1e-300:
                assert rel(got, want) < 1e-9
        m = int(rng.integers(v + 1, v + 40))
        want = math.comb(m, v + 1) * hit ** (v + 1) * (1 - hit - one) ** (m - v - 1)
        if float(want) > 1e-300:
            assert rel(p_bad_given(v, m, n, d, k), float(want)) < 1e-9


def test_p_bad_degenerate_and_range(rng):
    assert p_bad_given(1, 5, 10, 2, 2) == 0.0
    assert p_bad_given(6, 5, 10, 2, 2) == 0.0
    for _ in range(500):
        n = int(rng.integers(4, 200))
        v = int(rng.integers(2, n + 1))
        m = int(rng.integers(1, 2 * n))
        assert 0.0 <= p_bad_given(v, m, n, 2, 2) <= 1.0


@pytest.mark.parametrize("v", [3, 10, 30])
def test_p_bad_grows_with_m(v):
    n = 60
    vals = [p_bad_given(v, m, n, 2, 2) for m in range(v + 1, n + 1)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def _monte_carlo_p_bad(n, m, v, draws, seed):
    # one page of n cells; each of m items picks 2 buckets among all 2-subsets;
    # the fixed set is cells 0..v-1
    rng = np.random.default_rng(seed)
    pairs = np.array([(a, b) for a in range(n) for b in range(a + 1, n)])
    inside = (pairs < v).sum(axis=1)
    hits = np.zeros(draws, dtype=np.int64)
    ones = np.zeros(draws, dtype=np.int64)
    for _ in range(m):
        c = inside[rng.integers(len(pairs), size=(draws, 2))]
        c.sort(axis=1)
        hits += (c[:, 0] == 2)
        ones += (c[:, 0] == 1) & (c[:, 1] == 2)
    event = (hits == v + 1) & (ones == 0)
    p = event.mean()
    return p, math.sqrt(p * (1 - p) / draws)


@pytest.mark.parametrize("n,m,v", [(6, 5, 4), (6, 6, 4)])
def test_p_bad_against_monte_carlo(n, m, v):
    p, se = _monte_carlo_p_bad(n, m, v, 1_000_000, seed=m)
    want = p_bad_given(v, m, n, 2, 2)
    assert abs(p - want) < 3 * se


def test_p_bad_all_items_inside():
    # n=6, m=5, v=4: all five items inside, (6/15)**10
    assert p_bad_given(4, 5, 6, 2, 2) == pytest.approx(0.4 ** 10, rel=1e-12)


@pytest.mark.parametrize("d,k", [p for p in DK_PAIRS if p[0] * p[1] > 2])
def test_c1_is_one_at_x0(d, k):
    assert rel(c0_c1(x0(d, k), d, k)[1], 1.0) < 1e-12


@pytest.mark.parametrize("d,k", [p for p in DK_PAIRS if p[0] * p[1] > p[1] + 1])
def test_c7_is_one_at_x1(d, k):
    assert rel(c6_c7(x1(d, k), d, k)[1], 1.0) < 1e-12


def test_c0_c1_values():
    c0, c1 = c0_c1(0.1, 2, 2)
    assert c0 == pytest.approx(math.e * 1e-3, rel=1e-12)
    assert c1 == pytest.approx(math.exp(0.2) * 0.1 ** 0.2, rel=1e-12)
    assert c1 == pytest.approx(0.77069, abs=1e-4)
    xs = np.arange(0.01, x0(2, 2) - 1e-6, 1e-4)
    assert all(c0_c1(float(x), 2, 2)[1] < 1 for x in xs)
    with pytest.raises(ValueError):
        c0_c1(1.0, 2, 2)


def test_c6_c7_values():
    c6, c7 = c6_c7(0.02, 2, 2)
    assert c6 == pytest.approx(math.e * 0.02, rel=1e-12)
    assert c7 == pytest.approx(math.exp(0.03) * 0.02 ** 0.01, rel=1e-12)
    assert c7 == pytest.approx(0.99088, abs=1e-4)
    xs = np.linspace(x1(2, 2) / 2, x1(2, 2) - 1e-6, 2000)
    assert all(c6_c7(float(x), 2, 2)[1] < 1 for x in xs)


def _c5_direct(x, beta, d, k):
    dk = d * k
    return ((1 / (1 - x)) ** (1 - x) * (1 / x) ** x * (beta / (beta - x)) ** (beta - x)
            * (beta / x) ** x * x ** (dk * x)
            * (1 - dk * (1 - x) * x ** (dk - 1) - x ** dk) ** (beta - x))


def test_c5_matches_direct_product():
    for beta in (0.8, 0.9, 0.95, 1.0):
        for x in np.linspace(0.37, beta - 1e-3, 40):
            assert rel(c5(float(x), beta, 2, 2), _c5_direct(float(x), beta, 2, 2)) < 1e-9
    xs = np.linspace(0.4, 0.89, 50)
    assert np.allclose(log_c5_array(xs, 0.9, 2, 2), [log_c5(float(x), 0.9, 2, 2) for x in xs],
                       rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        c5(0.9, 0.9, 2, 2)


def test_c5_feasibility_around_the_bound():
    step = 1e-3
    xs = np.arange(x0(2, 2), 0.90 - 1e-6, step)
    assert max(c5(float(x), 0.90, 2, 2) for x in xs) < 1
    xs = np.arange(x0(2, 2), 0.99 - 1e-6, step)
    assert max(c5(float(x), 0.99, 2, 2) for x in xs) >= 1


def test_c5_is_continuous():
    step = 1e-3
    xs = np.arange(x0(2, 2) + 1e-6, 0.95 - 1e-6, step)
    vals = np.array([c5(float(x), 0.95, 2, 2) for x in xs])
    jumps = np.abs(np.diff(vals))
    slope = np.abs(np.gradient(vals, step))
    assert np.all(jumps < 10 * step * np.maximum(slope[:-1], slope[1:]) + 1e-12)


# -- paged formulas ----------------------------------------------------------

def _point(t, i):
    a = np.zeros(t + 1)
    a[i] = 1.0
    return a


def test_paged_extremes():
    for t, k in ((2, 2), (4, 2), (8, 2), (9, 3)):
        assert p_hit_paged(_point(t, t), 2, k, t) == pytest.approx(1.0, rel=1e-12)
        assert p_hit_paged(_point(t, 0), 2, k, t) == 0.0
        assert p_one_paged(_point(t, t), 2, k, t) == 0.0
        assert p_one_paged(_point(t, 0), 2, k, t) == 0.0


@pytest.mark.parametrize("d,k", [p for p in DK_PAIRS if p[0] * p[1] > 2])
def test_single_page_reduces_to_global(d, k):
    for n in (k, 2 * k, 12, 24):
        if n < k:
            continue
        for v in range(k, n + 1):
            a = _point(n, v)
            assert rel(p_hit_paged(a, d, k, n), p_hit_global(v, n, d, k)) < 1e-12
            want = p_one_global(v, n, d, k)
            got = p_one_paged(a, d, k, n)
            assert got == want == 0.0 or rel(got, want) < 1e-12


def _c9_direct(a, beta, d, k, t):
    x = sum(i * ai for i, ai in enumerate(a)) / t
    ph = p_hit_paged(a, d, k, t)
    p1 = p_one_paged(a, d, k, t)
    out = 1.0
    for i, ai in enumerate(a):
        if ai > 0:
            out *= (1 / ai) ** (ai / t) * math.comb(t, i) ** (ai / t)
    return out * (beta / (beta - x)) ** (beta - x) * (beta / x) ** x * ph ** x * (1 - p1 - ph) ** (beta - x)


def test_c9_matches_direct_product(rng):
    for _ in range(200):
        t = int(rng.choice([2, 4, 6, 8]))
        a = rng.dirichlet(np.ones(t + 1))
        x = DistVector(a).x
        beta = x + (1 - x) * float(rng.uniform(0.05, 1.0))
        assert rel(c8_c9(a, beta, 2, 2, t)[1], _c9_direct(a, beta, 2, 2, t)) < 1e-9


@pytest.mark.parametrize("k", [2, 3])
def test_c9_at_t_equals_k(k):
    # mass only on empty and full pages: p_hit = x**d, nothing reaches out by one
    d = 2
    for x in (0.06, 0.2, 0.5, 0.8):
        beta = min(1.0, x + 0.15)
        a = np.zeros(k + 1)
        a[0], a[k] = 1 - x, x
        entropy = -(1 - x) * math.log(1 - x) - x * math.log(x)
        want = (entropy / k + (beta - x) * math.log(beta / (beta - x)) + x * math.log(beta / x)
                + d * x * math.log(x) + (beta - x) * math.log(1 - x ** d))
        assert log_c9(a, beta, d, k, k) == pytest.approx(want, abs=1e-12)
        # and the entropy factor is the c6/c7 style exp(H(x)/k)
        assert p_one_paged(a, d, k, k) == 0.0


def test_c9_degenerate_and_errors():
    with pytest.raises(ValueError):
        log_c9(_point(4, 0), 0.9, 2, 2, 4)
    with pytest.raises(ValueError):
        log_c9(_point(4, 4), 0.9, 2, 2, 4)
    with pytest.raises(ValueError):
        DistVector([0.5, 0.6])
    with pytest.raises(ValueError):
        DistVector([1.2, -0.2])
    with pytest.raises(ValueError):
        p_hit_paged([0.5, 0.5], 2, 2, 4)


def test_c9_is_finite_and_positive_on_random_draws(rng):
    t = 8
    for _ in range(1000):
        a = rng.dirichlet(rng.uniform(0.1, 3, t + 1))
        x = DistVector(a).x
        beta = x + (1 - x) * float(rng.uniform(0.01, 1.0))
        c9 = c8_c9(a, beta, 2, 2, t)[1]
        assert 0 < c9 < math.inf


def test_distvector_helpers():
    v = DistVector.from_counts([1, 0, 3])
    assert v.t == 2
    assert v.x == pytest.approx(0.75)


# -- bound properties --------------------------------------------------------

def test_multinomial_examples():
    assert multinomial_coeff(4, [2, 2]) == 6
    assert multinomial_coeff(3, [1, 1, 1]) == 6
    with pytest.raises(ValueError):
        multinomial_coeff(4, [2, 1])


def test_multinomial_bound(rng):
    for _ in range(1000):
        g = int(rng.integers(1, 21))
        t = int(rng.integers(1, 9))
        a = rng.multinomial(g, rng.dirichlet(np.ones(t + 1)))
        exact = multinomial_coeff(g, a)
        assert math.log(exact) <= log_multinomial_bound(g, a) + 1e-12
        assert log_multinomial(g, a) == pytest.approx(math.log(exact), abs=1e-9)


def test_merging_pages_never_raises_hit_bound(rng):
    for _ in range(1000):
        t = int(rng.integers(1, 9))
        c = int(rng.integers(2, 5))
        groups = int(rng.integers(1, 6))
        k = int(rng.integers(1, t + 1))
        v = rng.integers(0, t + 1, size=c * groups)
        merged = v.reshape(groups, c).sum(axis=1)
        assert ptilde_hit(v, t, k, 2) >= ptilde_hit(merged, c * t, k, 2) - 1e-15


# -- solvers -----------------------------------------------------------------

def test_infinite_solver_values():
    r22 = solve_beta_infinite(2, 2)
    assert 0.932 <= r22.beta_lower <= 0.945
    assert r22.beta_lower == pytest.approx(0.936688, abs=2e-4)
    assert r22.witness_value < math.log1p(-r22.config.margin)
    r23 = solve_beta_infinite(2, 3)
    assert r23.beta_lower >= 0.990
    r24 = solve_beta_infinite(2, 4)
    assert r24.beta_lower > 0.993
    assert r24.beta_lower >= r23.beta_lower >= r22.beta_lower


def test_infinite_solver_witness_reproduces():
    r = solve_beta_infinite(2, 2)
    assert log_c5(r.witness_x, r.beta_lower, 2, 2) == r.witness_value


def test_infinite_solver_rejects_bad_pairs():
    with pytest.raises(ValueError):
        solve_beta_infinite(2, 1)


def test_floor_infeasible_raises():
    with pytest.raises(SolverError):
        solve_beta_infinite(2, 2, BoundConfig(beta_floor=0.99))


def _grid_max(x, beta, d, k, t, points=20001):
    # independent check at t = k = 2: the slice is the segment
    # a = (1 - 2x + a2, 2x - 2 a2, a2), and only full pages are hit
    assert t == k == 2
    a2 = np.linspace(max(0.0, 2 * x - 1), x, points)
    a1 = 2 * x - 2 * a2
    a0 = 1 - a1 - a2
    keep = (a0 >= 0) & (a1 >= 0) & (a2 > 0)
    a0, a1, a2 = a0[keep], a1[keep], a2[keep]

    def xlogy(p, q):
        return np.where(p > 0, p * np.log(np.where(p > 0, q, 1.0)), 0.0)

    ent = (-xlogy(a0, a0) + xlogy(a1, 2 / np.where(a1 > 0, a1, 1)) - xlogy(a2, a2)) / t
    w = beta - x
    vals = (ent + w * math.log(beta / w) + x * math.log(beta / x) + d * x * np.log(a2)
            + w * np.log1p(-a2 ** d))
    return float(vals.max())


def _slsqp_max(x, beta, d, k, t, starts=30, seed=0):
    from scipy.optimize import minimize
    rng = np.random.default_rng(seed)
    idx = np.arange(t + 1)
    cons = [{"type": "eq", "fun": lambda a: a.sum() - 1},
            {"type": "eq", "fun": lambda a: a @ idx - x * t}]

    def f(a):
        a = np.clip(a, 0, None)
        a = a / a.sum()
        try:
            v = log_c9(DistVector(a, atol=1e-6), beta, d, k, t)
        except ValueError:
            return 1e3
        return -v if np.isfinite(v) else 1e3

    best = -math.inf
    for _ in range(starts):
        a0 = rng.dirichlet(np.ones(t + 1))
        res = minimize(f, a0, method="SLSQP", constraints=cons, bounds=[(0, 1)] * (t + 1),
                       options={"ftol": 1e-12, "maxiter": 500})
        if res.success and abs(res.x.sum() - 1) < 1e-6 and abs(res.x @ idx - x * t) < 1e-6:
            best = max(best, -res.fun)
    return best


@pytest.mark.parametrize("x", [0.06, 0.3, 0.6, 0.85])
def test_slice_max_t2_matches_grid(x):
    got = max_log_c9(x, 0.9, 2, 2, 2)
    assert got.value >= _grid_max(x, 0.9, 2, 2, 2) - 1e-9
    assert got.value == pytest.approx(_grid_max(x, 0.9, 2, 2, 2), abs=1e-6)
    assert DistVector(got.dist).x == pytest.approx(x, abs=1e-9)


@pytest.mark.parametrize("t,x", [(4, 0.2), (4, 0.7), (8, 0.5), (8, 0.85)])
def test_slice_max_not_beaten_by_slsqp(t, x):
    got = max_log_c9(x, 0.9, 2, 2, t)
    assert got.value >= _slsqp_max(x, 0.9, 2, 2, t) - 1e-7


def test_slice_max_seed_is_deterministic():
    a = max_log_c9(0.7, 0.85, 2, 2, 8, seed=3)
    b = max_log_c9(0.7, 0.85, 2, 2, 8, seed=3)
    assert a.value == b.value and np.array_equal(a.dist, b.dist)


FAST = BoundConfig(x_grid_step=5e-3, beta_tolerance=1e-3, random_starts=8)


def test_paged_solver_small_t_and_witness():
    r = solve_beta_paged(2, 2, 2, FAST)
    assert 0.5 < r.beta_lower < solve_beta_infinite(2, 2).beta_lower
    assert r.witness_dist is not None
    assert log_c9(r.witness_dist, r.beta_lower, 2, 2, 2) == r.witness_value
    assert r.witness_value < math.log1p(-FAST.margin)
    assert r.witness_dist.x == pytest.approx(r.witness_x, abs=1e-9)


def test_paged_solver_is_worker_independent():
    a = solve_beta_paged(2, 2, 4, FAST)
    b = solve_beta_paged(2, 2, 4, BoundConfig(x_grid_step=5e-3, beta_tolerance=1e-3,
                                              random_starts=8, workers=3))
    assert a.beta_lower == b.beta_lower and a.witness_value == b.witness_value


def test_paged_solver_requires_k_divides_t():
    with pytest.raises(ValueError):
        solve_beta_paged(2, 2, 3, FAST)
    with pytest.raises(ValueError):
        solve_beta_paged(2, 1, 4, FAST)


def test_paged_t_equals_k_matches_direct_scan():
    # at t = k = 2 the slice is one-dimensional, so the whole bound can be
    # recomputed with a dense grid in place of the optimiser
    cfg = BoundConfig(x_grid_step=1e-2, beta_tolerance=1e-3, random_starts=8)
    r = solve_beta_paged(2, 2, 2, cfg)
    limit = math.log1p(-cfg.margin)

    def feasible(beta):
        xs = np.append(np.arange(x1(2, 2), beta - cfg.delta, cfg.x_grid_step), beta - cfg.delta)
        return all(_grid_max(float(x), beta, 2, 2, 2) < limit for x in xs)

    assert feasible(r.beta_lower)
    assert not feasible(r.beta_lower + 2 * cfg.beta_tolerance)


def test_bound_config_validation():
    with pytest.raises(ValueError):
        BoundConfig(margin=0)
    with pytest.raises(ValueError):
        BoundConfig(delta=0.5)
    with pytest.raises(ValueError):
        BoundConfig(x_grid_step=0)
