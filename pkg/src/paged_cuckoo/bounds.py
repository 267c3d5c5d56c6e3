"""Union-bound exponents for paged cuckoo hashing and the lower-bound solvers.

Everything that multiplies large powers is evaluated as a sum of logs;
binomials go through ``lgamma``.  Two solvers are provided:

* :func:`solve_beta_infinite` for a single page spanning the table
  (constraint on ``c5`` over ``x0 <= x < beta``)
* :func:`solve_beta_paged` for constant page size ``t``
  (constraint on ``max_a c9`` over ``x1 <= x < beta``)

Both return the largest load ``beta`` whose constraint value stays below
``1 - margin`` on the whole x grid.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _optim

log = logging.getLogger(__name__)

INFINITE = "infinite"


# -- combinatorics ---------------------------------------------------------

def log_binom(a: float, b: float) -> float:
    if b < 0 or b > a:
        return -math.inf
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def multinomial_coeff(g: int, a) -> int:
    """Exact ``g! / prod(a_i!)``."""
    a = [int(v) for v in a]
    if any(v < 0 for v in a) or sum(a) != g:
        raise ValueError(f"occupancies {a} must be non-negative and sum to g={g}")
    out = math.factorial(g)
    for v in a:
        out //= math.factorial(v)
    return out


def log_binom_ratio(a: int, b: int, n: int, k: int) -> float:
    """``log(C(a, b) / C(n, k))``.

    For small ``k`` and ``b`` this is a short sum of log ratios, which keeps
    full relative precision where differences of large ``lgamma`` values
    would not.
    """
    if b < 0 or b > a:
        return -math.inf
    if max(b, k) > 64:
        return log_binom(a, b) - log_binom(n, k)
    out = math.fsum(math.log(a - j) - math.log(j + 1) for j in range(b))
    return out - math.fsum(math.log(n - j) - math.log(j + 1) for j in range(k))


def log_multinomial(g: int, a) -> float:
    if sum(a) != g or min(a) < 0:
        raise ValueError(f"occupancies {list(a)} must be non-negative and sum to g={g}")
    return math.lgamma(g + 1) - sum(math.lgamma(v + 1) for v in a)


def log_multinomial_bound(g: int, a) -> float:
    """``log prod (g / a_i) ** a_i`` with ``0 ** 0 = 1``."""
    return sum(v * math.log(g / v) for v in a if v > 0)


# -- regime boundaries -----------------------------------------------------

def x0(d: int, k: int) -> float:
    if d * k <= 2:
        raise ValueError(f"x0 needs d*k > 2, got d={d}, k={k}")
    return math.exp(-2.0 / (d * k - 2))


def x1(d: int, k: int) -> float:
    if d * k <= k + 1:
        raise ValueError(f"x1 needs d*k > k+1, got d={d}, k={k}")
    return math.exp(-(k + 1.0) / (d * k - (k + 1)))


# -- single page (t = n) ---------------------------------------------------

def log_p_hit_global(v: int, n: int, d: int, k: int) -> float:
    return d * log_binom_ratio(v, k, n, k)


def p_hit_global(v: int, n: int, d: int, k: int) -> float:
    """Chance that all ``d`` buckets of a random item fall inside a fixed set of ``v`` cells."""
    if v > n:
        raise ValueError(f"v={v} exceeds n={n}")
    if v < k:
        return 0.0
    return math.exp(log_p_hit_global(v, n, d, k))


def p_one_global(v: int, n: int, d: int, k: int) -> float:
    """Chance that a random item reaches exactly one cell outside the set.

    One bucket holds ``k-1`` cells of the set plus one outside; the other
    ``d-1`` buckets lie inside.
    """
    if not k - 1 <= v <= n:
        raise ValueError(f"need k-1 <= v <= n, got v={v}, n={n}, k={k}")
    if v == n or (v < k and d > 1):
        return 0.0
    out = math.log(d) + math.log(n - v) + log_binom_ratio(v, k - 1, n, k)
    out += (d - 1) * log_binom_ratio(v, k, n, k)
    return math.exp(out)


def p_bad_given(v: int, m: int, n: int, d: int, k: int) -> float:
    """Chance that a given ``v``-cell set is hit by exactly ``v+1`` of ``m``
    items while no other item reaches exactly one cell outside it."""
    if v + 1 > m or v < k:
        return 0.0
    ph = p_hit_global(v, n, d, k)
    rest = m - (v + 1)
    out = log_binom(m, v + 1) + (v + 1) * math.log(ph)
    if rest > 0:
        miss = _miss_given(v, n, d, k)
        if miss <= 0.0:
            return 0.0
        out += rest * math.log(miss)
    return math.exp(out)


def _miss_given(v: int, n: int, d: int, k: int) -> float:
    """``1 - p_one - p_hit`` written as a sum of non-negative terms.

    Per bucket: ``q`` inside, ``r`` exactly one cell outside, ``s`` two or
    more outside.  The item misses when some bucket has ``s`` or at least two
    buckets have ``r``.  Subtracting directly loses all precision when the
    result is small.
    """
    s = math.fsum(math.exp(log_binom(n - v, j) + log_binom_ratio(v, k - j, n, k))
                  for j in range(2, min(k, n - v) + 1))
    q = math.exp(log_binom_ratio(v, k, n, k))
    r = (n - v) * math.exp(log_binom_ratio(v, k - 1, n, k)) if v >= k - 1 else 0.0
    out = -math.expm1(d * math.log1p(-s)) if s < 1 else 1.0
    out += math.fsum(math.comb(d, j) * r ** j * q ** (d - j) for j in range(2, d + 1))
    return out


def c0_c1(x: float, d: int, k: int) -> tuple[float, float]:
    if not 0 < x < 1:
        raise ValueError(f"x must lie in (0, 1), got {x}")
    dk = d * k
    c0 = math.e * x ** (dk - 1)
    c1 = math.exp(2 * x + (dk - 2) * x * math.log(x))
    return c0, c1


def _miss_global(x: float, dk: int) -> float:
    return 1.0 - dk * (1 - x) * x ** (dk - 1) - x ** dk


def log_c5(x: float, beta: float, d: int, k: int) -> float:
    if not 0 < x < beta <= 1:
        raise ValueError(f"need 0 < x < beta <= 1, got x={x}, beta={beta}")
    dk = d * k
    out = -x * math.log(x) + x * math.log(beta / x) + dk * x * math.log(x)
    if x < 1:
        out -= (1 - x) * math.log(1 - x)
    w = beta - x
    out += w * math.log(beta / w) + w * math.log(_miss_global(x, dk))
    return out


def c5(x: float, beta: float, d: int, k: int) -> float:
    return math.exp(log_c5(x, beta, d, k))


def log_c5_array(xs: np.ndarray, beta: float, d: int, k: int) -> np.ndarray:
    dk = d * k
    xs = np.asarray(xs, dtype=float)
    w = beta - xs
    miss = 1.0 - dk * (1 - xs) * xs ** (dk - 1) - xs ** dk
    return (-(1 - xs) * np.log1p(-xs) - xs * np.log(xs) + w * np.log(beta / w)
            + xs * np.log(beta / xs) + dk * xs * np.log(xs) + w * np.log(miss))


def c6_c7(x: float, d: int, k: int) -> tuple[float, float]:
    if not 0 < x < 1:
        raise ValueError(f"x must lie in (0, 1), got {x}")
    c6 = math.e * x ** (d - 1)
    c7 = math.exp((k + 1) * x / k + (d * k - 1 - k) * x / k * math.log(x))
    return c6, c7


# -- constant page size ----------------------------------------------------

class DistVector:
    """Fraction of pages holding ``i`` chosen cells, for ``i = 0..t``."""

    def __init__(self, entries, atol: float = 1e-9):
        a = np.array(entries, dtype=float)
        if a.ndim != 1 or len(a) < 2:
            raise ValueError("need entries a_0..a_t with t >= 1")
        if np.any(a < 0):
            raise ValueError("entries must be non-negative")
        if abs(a.sum() - 1.0) > atol:
            raise ValueError(f"entries sum to {a.sum()}, not 1")
        self.entries = a

    @classmethod
    def from_counts(cls, counts) -> "DistVector":
        counts = np.asarray(counts, dtype=float)
        return cls(counts / counts.sum())

    @property
    def t(self) -> int:
        return len(self.entries) - 1

    @property
    def x(self) -> float:
        return float(np.dot(np.arange(self.t + 1), self.entries)) / self.t

    def __repr__(self):
        return f"DistVector({np.array2string(self.entries, precision=6)})"


@lru_cache(maxsize=None)
def _page_features(t: int, k: int):
    """Per-occupancy weights: ``ell_i = C(i,k)/C(t,k)``,
    ``mu_i = (t-i) C(i,k-1)/C(t,k)`` (``i >= k`` only), ``log C(t,i)``."""
    ctk = math.comb(t, k)
    ell = np.array([math.comb(i, k) / ctk for i in range(t + 1)])
    mu = np.array([(t - i) * math.comb(i, k - 1) / ctk if i >= k else 0.0 for i in range(t + 1)])
    lct = np.array([log_binom(t, i) for i in range(t + 1)])
    for arr in (ell, mu, lct):
        arr.flags.writeable = False
    return ell, mu, lct


def _as_dist(ahat) -> np.ndarray:
    return ahat.entries if isinstance(ahat, DistVector) else DistVector(ahat).entries


def _check_t(a: np.ndarray, t: int):
    if len(a) != t + 1:
        raise ValueError(f"distribution has {len(a)} entries, expected t+1 = {t + 1}")


def p_hit_paged(ahat, d: int, k: int, t: int) -> float:
    a = _as_dist(ahat)
    _check_t(a, t)
    ell, _, _ = _page_features(t, k)
    return float(np.dot(a, ell)) ** d


def p_one_paged(ahat, d: int, k: int, t: int) -> float:
    a = _as_dist(ahat)
    _check_t(a, t)
    ell, mu, _ = _page_features(t, k)
    return d * float(np.dot(a, mu)) * float(np.dot(a, ell)) ** (d - 1)


def _entropy_terms(a: np.ndarray, t: int, lct: np.ndarray) -> float:
    pos = a > 0
    return float(np.sum(a[pos] * (lct[pos] - np.log(a[pos])))) / t


def log_c9(ahat, beta: float, d: int, k: int, t: int) -> float:
    a = _as_dist(ahat)
    _check_t(a, t)
    x = float(np.dot(np.arange(t + 1), a)) / t
    if not 0 < x < beta:
        raise ValueError(f"need 0 < x < beta, got x={x}, beta={beta}")
    ell, mu, lct = _page_features(t, k)
    L = float(np.dot(a, ell))
    M = float(np.dot(a, mu))
    if L <= 0:
        return -math.inf
    miss = 1.0 - d * M * L ** (d - 1) - L ** d
    if miss <= 0:
        return -math.inf
    w = beta - x
    return (_entropy_terms(a, t, lct) + w * math.log(beta / w) + x * math.log(beta / x)
            + x * d * math.log(L) + w * math.log(miss))


def c8_c9(ahat, beta: float, d: int, k: int, t: int) -> tuple[float, float]:
    a = _as_dist(ahat)
    x = float(np.dot(np.arange(t + 1), a)) / t
    lc9 = log_c9(a, beta, d, k, t)
    ph = p_hit_paged(a, d, k, t)
    p1 = p_one_paged(a, d, k, t)
    miss = 1.0 - p1 - ph
    c8 = ph / miss * (beta - x) / x if miss > 0 else math.inf
    return c8, math.exp(lc9)


def ptilde_hit(page_counts, t: int, k: int, d: int) -> float:
    """Convex upper bound ``(mean_i (v_i/t)**k) ** d`` on the hit probability."""
    v = np.asarray(page_counts, dtype=float)
    return float(np.mean((v / t) ** k)) ** d


# -- solvers ---------------------------------------------------------------

@dataclass(frozen=True)
class BoundConfig:
    """Grid and optimiser settings shared by both solvers."""

    x_grid_step: float = 1e-3
    beta_tolerance: float = 1e-4
    margin: float = 1e-6
    delta: float = 1e-6
    beta_floor: float = 0.5
    scan_step: float = 0.02
    coarse_x_step: float = 1e-2
    random_starts: int = 32
    seed: int = 0
    blend: float = 1e-3
    newton_iter: int = 100
    exchange_tol: float = 1e-10
    exchange_sweeps: int = 50
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.margin < 0.1:
            raise ValueError(f"margin must be small and positive, got {self.margin}")
        if not 0 < self.delta < 0.1:
            raise ValueError(f"delta must be small and positive, got {self.delta}")
        if self.x_grid_step <= 0 or self.beta_tolerance <= 0:
            raise ValueError("grid step and beta tolerance must be positive")


@dataclass
class BoundResult:
    beta_lower: float
    d: int
    k: int
    t: int | str
    config: BoundConfig
    witness_x: float
    witness_value: float
    witness_dist: DistVector | None = None
    evaluations: int = 0
    notes: list[str] = field(default_factory=list)


class SolverError(RuntimeError):
    pass


def _x_grid(lo: float, beta: float, step: float, delta: float) -> np.ndarray:
    hi = beta - delta
    if hi <= lo:
        return np.empty(0)
    n = int(math.floor((hi - lo) / step))
    xs = lo + step * np.arange(n + 1)
    xs = xs[xs < hi]
    return np.append(xs, hi)


def _bisect(feasible, cfg: BoundConfig, scan_step: float, coarse_scan: bool):
    """Scan upward from the floor to bracket the first infeasible beta, then bisect.

    Scanning first keeps the answer on the lowest feasible/infeasible
    transition, since feasibility need not be monotone close to beta = 1.
    """
    lo = cfg.beta_floor
    if not feasible(lo, coarse=False):
        raise SolverError(f"no feasible beta at or above the floor {lo}")
    hi = None
    b = lo
    while b < 1.0:
        nxt = min(b + scan_step, 1.0)
        if not feasible(nxt, coarse=coarse_scan):
            hi = nxt
            break
        b = nxt
    if hi is None:
        if feasible(1.0, coarse=False):
            return 1.0
        hi = 1.0
    lo = b
    # the coarse grid may have passed a beta the fine grid rejects
    while lo > cfg.beta_floor and not feasible(lo, coarse=False):
        hi, lo = lo, max(cfg.beta_floor, lo - scan_step)
    while hi - lo > cfg.beta_tolerance:
        mid = 0.5 * (lo + hi)
        if feasible(mid, coarse=False):
            lo = mid
        else:
            hi = mid
    return lo


def solve_beta_infinite(d: int, k: int, config: BoundConfig | None = None) -> BoundResult:
    """Largest beta with ``c5(x, beta) < 1 - margin`` for every grid ``x`` in ``[x0, beta)``."""
    cfg = config or BoundConfig()
    lo_x = x0(d, k)
    limit = math.log1p(-cfg.margin)
    evals = 0

    def worst(beta, step):
        nonlocal evals
        xs = _x_grid(lo_x, beta, step, cfg.delta)
        if len(xs) == 0:
            return -math.inf, beta
        vals = log_c5_array(xs, beta, d, k)
        evals += len(xs)
        j = int(np.argmax(vals))
        return float(vals[j]), float(xs[j])

    def feasible(beta, coarse):
        return worst(beta, cfg.coarse_x_step if coarse else cfg.x_grid_step)[0] < limit

    # evaluation is cheap here, so scan finely on the full grid
    beta = _bisect(feasible, cfg, min(cfg.scan_step, 1e-3), coarse_scan=False)
    _, wx = worst(beta, cfg.x_grid_step)
    # stored value comes from the scalar form so it reproduces exactly
    value = log_c5(wx, beta, d, k)
    return BoundResult(beta, d, k, INFINITE, cfg, wx, value, evaluations=evals)


@lru_cache(maxsize=None)
def _null_basis(t: int) -> np.ndarray:
    A = np.vstack([np.ones(t + 1), np.arange(t + 1, dtype=float)])
    _, _, vt = np.linalg.svd(A)
    basis = np.ascontiguousarray(vt[2:].T)
    basis.flags.writeable = False
    return basis


@dataclass
class SliceMax:
    x: float
    value: float  # log c9 at the maximiser
    dist: np.ndarray
    converged: int


def max_log_c9(x: float, beta: float, d: int, k: int, t: int, cfg: BoundConfig | None = None,
               seed: int | None = None) -> SliceMax:
    """Maximise ``log c9`` over distributions with mean occupancy ``x * t``."""
    cfg = cfg or BoundConfig()
    if not 0 < x < beta:
        raise ValueError(f"need 0 < x < beta, got x={x}, beta={beta}")
    ell, mu, lct = _page_features(t, k)
    w = beta - x
    const = w * math.log(beta / w) + x * math.log(beta / x)
    if t == 1:
        a = np.array([1 - x, x])
        return SliceMax(x, log_c9(a, beta, d, k, t), a, 1)
    seed = cfg.seed if seed is None else seed
    f, a, ok = _optim.maximize_slice(x, w, d, t, ell, mu, lct, _null_basis(t), cfg.random_starts,
                                     seed, cfg.blend, cfg.newton_iter, cfg.exchange_tol,
                                     cfg.exchange_sweeps)
    if ok == 0 or not np.isfinite(f):
        raise SolverError(f"inner optimiser found no finite point at x={x}, beta={beta}, t={t}")
    return SliceMax(x, f + const, a, int(ok))


def solve_beta_paged(d: int, k: int, t: int, config: BoundConfig | None = None) -> BoundResult:
    """Largest beta with ``max_a c9(a, beta) < 1 - margin`` for every grid ``x`` in ``[x1, beta)``.

    The inner maximum is taken over the slice of the simplex with mean
    occupancy ``x * t``.  Grid point ``j`` always uses seed ``seed + j`` so the
    answer does not depend on ``workers``.
    """
    cfg = config or BoundConfig()
    if t % k:
        raise ValueError(f"paged bound needs k | t, got t={t}, k={k}")
    lo_x = x1(d, k)
    limit = math.log1p(-cfg.margin)
    evals = 0
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None

    def evaluate(beta, step, stop_early):
        nonlocal evals
        xs = _x_grid(lo_x, beta, step, cfg.delta)
        # violations tend to sit near the top of the range; scan it first
        order = list(range(len(xs) - 1, -1, -1))
        best = None

        def one(j):
            return max_log_c9(float(xs[j]), beta, d, k, t, cfg, cfg.seed + j)

        chunk = max(1, cfg.workers) * 4
        for start in range(0, len(order), chunk):
            idx = order[start:start + chunk]
            results = list(pool.map(one, idx)) if pool else [one(j) for j in idx]
            evals += len(results)
            for r in results:
                if best is None or r.value > best.value:
                    best = r
            if stop_early and best.value >= limit:
                break
        return best

    def feasible(beta, coarse):
        best = evaluate(beta, cfg.coarse_x_step if coarse else cfg.x_grid_step, True)
        return best is None or best.value < limit

    try:
        beta = _bisect(feasible, cfg, cfg.scan_step, coarse_scan=True)
        best = evaluate(beta, cfg.x_grid_step, False)
    finally:
        if pool:
            pool.shutdown()
    if best is None:
        return BoundResult(beta, d, k, t, cfg, beta, -math.inf, None, evals)
    witness = DistVector(best.dist)
    return BoundResult(beta, d, k, t, cfg, best.x, log_c9(witness, beta, d, k, t), witness, evals)
