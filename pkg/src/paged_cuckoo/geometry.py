"""Bucket layouts inside pages and the hashing that picks them.

A table of ``n`` cells is cut into ``g = n / t`` pages of ``t`` cells.  Every
bucket holds ``k`` cells of a single page; the three variants differ only in
which k-subsets of a page count as buckets:

* ``DISJOINT``: aligned runs ``[r*k, r*k + k)``, ``t/k`` per page
* ``OVERLAP``: every contiguous window ``[r, r + k)``, ``t - k + 1`` per page
* ``CHOOSE``: every k-subset of the page, ``C(t, k)`` per page
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

MASK64 = (1 << 64) - 1
INT64_MAX = (1 << 63) - 1
GOLDEN = 0x9E3779B97F4A7C15


class Variant(str, enum.Enum):
    DISJOINT = "disjoint"
    OVERLAP = "overlap"
    CHOOSE = "choose"

    @property
    def code(self) -> int:
        return _VARIANT_CODES[self]


_VARIANT_CODES = {Variant.DISJOINT: 0, Variant.OVERLAP: 1, Variant.CHOOSE: 2}


def binom(a: int, b: int) -> int:
    """Exact binomial coefficient, 0 when ``b > a``."""
    if a < 0 or b < 0:
        raise ValueError(f"binom arguments must be non-negative, got ({a}, {b})")
    return math.comb(a, b)


def binom_int64(a: int, b: int) -> int:
    """``binom`` restricted to values that fit a signed 64-bit integer."""
    value = binom(a, b)
    if value > INT64_MAX:
        raise OverflowError(f"C({a}, {b}) = {value} does not fit in int64")
    return value


@dataclass(frozen=True)
class TableParams:
    """Geometry of a paged cuckoo table.

    ``relaxed`` drops the ``k | t`` requirement for the overlap and choose
    variants, which are well defined for any ``t >= k`` (e.g. ``t=3, k=2``).
    The disjoint layout always needs it.
    """

    n: int
    t: int
    k: int
    d: int
    variant: Variant = Variant.CHOOSE
    relaxed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        n, t, k, d = self.n, self.t, self.k, self.d
        if k < 1:
            raise ValueError(f"bucket size k must be >= 1, got {k}")
        if d < 2:
            raise ValueError(f"buckets per item d must be >= 2, got {d}")
        if d * k <= 2:
            raise ValueError(f"need d*k > 2, got d={d}, k={k}")
        if t < k:
            raise ValueError(f"page size t={t} smaller than bucket size k={k}")
        if t % k and (not self.relaxed or self.variant is Variant.DISJOINT):
            raise ValueError(f"k={k} does not divide t={t}")
        if n < 1 or n % t:
            raise ValueError(f"t={t} does not divide n={n}")

    @property
    def g(self) -> int:
        return self.n // self.t

    @property
    def buckets_per_page(self) -> int:
        return buckets_per_page(self)

    @property
    def total_buckets(self) -> int:
        return self.g * self.buckets_per_page


@dataclass(frozen=True)
class BucketRef:
    page: int
    rank: int


def buckets_per_page(params: TableParams) -> int:
    t, k = params.t, params.k
    if params.variant is Variant.DISJOINT:
        return t // k
    if params.variant is Variant.OVERLAP:
        return t - k + 1
    return binom(t, k)


def unrank_k_subset(t: int, k: int, rank: int) -> list[int]:
    """Return the ``rank``-th k-subset of ``range(t)`` in lexicographic order.

    >>> unrank_k_subset(4, 2, 5)
    [2, 3]
    """
    total = binom(t, k)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} outside [0, {total})")
    out = []
    lo = 0
    for pos in range(k):
        r = k - pos
        # subsets whose next element is >= c number C(t - c, r)
        target = binom(t - lo, r) - rank
        a, b = lo, t - r  # answer c lies in [lo, t - r]
        while a < b:
            mid = (a + b + 1) // 2
            if binom(t - mid, r) >= target:
                a = mid
            else:
                b = mid - 1
        c = a
        rank -= binom(t - lo, r) - binom(t - c, r)
        out.append(c)
        lo = c + 1
    return out


def rank_k_subset(t: int, subset) -> int:
    """Inverse of :func:`unrank_k_subset`."""
    subset = sorted(subset)
    k = len(subset)
    rank = 0
    lo = 0
    for pos, c in enumerate(subset):
        r = k - pos
        rank += binom(t - lo, r) - binom(t - c, r)
        lo = c + 1
    return rank


def bucket_cells(params: TableParams, ref: BucketRef) -> list[int]:
    bpp = buckets_per_page(params)
    if not (0 <= ref.page < params.g and 0 <= ref.rank < bpp):
        raise ValueError(f"invalid bucket {ref} for {params}")
    base = ref.page * params.t
    k = params.k
    if params.variant is Variant.DISJOINT:
        start = base + ref.rank * k
        return list(range(start, start + k))
    if params.variant is Variant.OVERLAP:
        start = base + ref.rank
        return list(range(start, start + k))
    return [base + c for c in unrank_k_subset(params.t, k, ref.rank)]


def mix64(x: int) -> int:
    """splitmix64 finalizer on Python ints."""
    x &= MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    x ^= x >> 31
    return x


def bucket_hash(key: int, seed: int, j: int) -> int:
    """64-bit hash of ``key`` for hash function number ``j``."""
    salt = mix64((seed + (j + 1) * GOLDEN) & MASK64)
    return mix64((key & MASK64) ^ salt)


def hash_to_buckets(key: int, seed: int, params: TableParams) -> list[BucketRef]:
    """The ``d`` candidate buckets of ``key``; duplicates are possible."""
    bpp = buckets_per_page(params)
    total = params.g * bpp
    refs = []
    for j in range(params.d):
        idx = bucket_hash(key, seed, j) % total
        refs.append(BucketRef(idx // bpp, idx % bpp))
    return refs


def item_cells(key: int, seed: int, params: TableParams) -> list[int]:
    """Concatenated cells of the item's ``d`` buckets, in hash order."""
    cells = []
    for ref in hash_to_buckets(key, seed, params):
        cells.extend(bucket_cells(params, ref))
    return cells
