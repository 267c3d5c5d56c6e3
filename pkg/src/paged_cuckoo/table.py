"""Paged cuckoo hash table with breadth-first displacement search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .geometry import INT64_MAX, TableParams, Variant, binom_int64

UNLIMITED = -1


@dataclass(frozen=True)
class InsertOutcome:
    """Cost of one insert.

    ``lookups`` counts bucket examinations: ``d`` for the new item plus ``d``
    per occupant expanded by the search.  ``cell_reads`` is the same work in
    cells, ``k`` per bucket examined.
    """

    placed: bool
    lookups: int
    moves: int
    cell_reads: int = 0


@dataclass
class FillResult:
    """Outcome of inserting a key stream until the first failure."""

    beta: float
    live: int
    failed: bool
    consumed: int
    lookups: np.ndarray
    moves: np.ndarray
    live_before: np.ndarray

    k: int = 1

    @property
    def cell_reads(self) -> np.ndarray:
        return self.lookups * self.k

    def outcomes(self) -> list[InsertOutcome]:
        placed = np.ones(len(self.lookups), dtype=bool)
        if self.failed:
            placed[-1] = False
        return [InsertOutcome(bool(p), int(lk), int(mv), int(lk) * self.k)
                for p, lk, mv in zip(placed, self.lookups, self.moves)]


def _binom_table(params: TableParams) -> np.ndarray:
    t, k = params.t, params.k
    if params.variant is not Variant.CHOOSE:
        return np.zeros((1, 1), dtype=np.int64)
    # overflow is caught here, before anything reaches compiled code
    if params.g * binom_int64(t, k) > INT64_MAX:
        raise OverflowError(f"{params.g} pages x C({t},{k}) buckets overflow int64")
    ctab = np.zeros((t + 1, k + 1), dtype=np.int64)
    for a in range(t + 1):
        for r in range(k + 1):
            ctab[a, r] = binom_int64(a, r)
    return ctab


class CuckooTable:
    """``n`` cells, each empty or holding one key.

    Every stored key sits in a cell of one of its ``d`` buckets.  Inserting a
    key that is already present is a caller error; :meth:`insert` does not
    check for it.  Single writer; no internal locking.
    """

    def __init__(self, params: TableParams, seed: int = 0, max_expansions: int = UNLIMITED):
        self.params = params
        self.seed = int(seed) & ((1 << 64) - 1)
        self.max_expansions = max_expansions
        n, dk = params.n, params.d * params.k
        self._bpp = params.buckets_per_page
        self._total = params.g * self._bpp
        self._ctab = _binom_table(params)
        self.cells = np.full(n, K.EMPTY, dtype=np.int64)
        # one spare slot carries the item currently being inserted
        self._slot_keys = np.zeros(n + 1, dtype=np.uint64)
        self._slot_cells = np.zeros((n + 1, dk), dtype=np.int64)
        self._free = np.arange(n, -1, -1, dtype=np.int64)
        self._n_free = n + 1
        self.live_count = 0
        self._visited = np.zeros(n, dtype=np.int64)
        self._epoch = 0
        self._parent = np.empty(n, dtype=np.int64)
        self._queue = np.empty(n, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def load(self) -> float:
        return self.live_count / self.params.n

    def candidate_cells(self, key: int) -> np.ndarray:
        p = self.params
        out = np.empty(p.d * p.k, dtype=np.int64)
        K.fill_item_cells(np.uint64(key), np.uint64(self.seed), p.d, p.k, p.t, p.variant.code,
                          self._bpp, self._total, self._ctab, out)
        return out

    def _find(self, key: int) -> int:
        return int(K.find(self.cells, self._slot_keys, self.candidate_cells(key), np.uint64(key)))

    def lookup(self, key: int) -> bool:
        return self._find(key) >= 0

    def __contains__(self, key: int) -> bool:
        return self.lookup(key)

    def __len__(self) -> int:
        return self.live_count

    def insert(self, key: int) -> InsertOutcome:
        p = self.params
        slot = int(self._free[self._n_free - 1])
        self._slot_cells[slot] = self.candidate_cells(key)
        self._slot_keys[slot] = np.uint64(key)
        self._epoch += 1
        placed, buckets, moves = K.bfs_insert(self.cells, self._slot_cells, slot, p.d, p.k,
                                              self._visited, self._epoch, self._parent,
                                              self._queue, self.max_expansions)
        if placed:
            self._n_free -= 1
            self.live_count += 1
        return InsertOutcome(bool(placed), int(buckets), int(moves), int(buckets) * p.k)

    def remove(self, key: int) -> bool:
        c = self._find(key)
        if c < 0:
            return False
        slot = self.cells[c]
        self.cells[c] = K.EMPTY
        self._free[self._n_free] = slot
        self._n_free += 1
        self.live_count -= 1
        return True

    def keys(self) -> np.ndarray:
        occupied = self.cells[self.cells != K.EMPTY]
        return self._slot_keys[occupied]

    def placements(self) -> list[tuple[int, int, np.ndarray]]:
        """``(cell, key, candidate cells)`` for every stored item."""
        out = []
        for c in np.flatnonzero(self.cells != K.EMPTY):
            s = self.cells[c]
            out.append((int(c), int(self._slot_keys[s]), self._slot_cells[s].copy()))
        return out

    def fill(self, keys: np.ndarray, max_items: int | None = None) -> FillResult:
        """Insert ``keys`` in order, skipping ones already stored, until an
        insert fails, the stream ends or ``max_items`` keys are live."""
        p = self.params
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        cap = len(keys)
        lookups = np.zeros(cap, dtype=np.int64)
        moves = np.zeros(cap, dtype=np.int64)
        live_before = np.zeros(cap, dtype=np.int64)
        limit = p.n if max_items is None else min(max_items, p.n)
        consumed, n_free, live, epoch, rec, failed = K.fill_stream(
            keys, np.uint64(self.seed), p.d, p.k, p.t, p.variant.code, self._bpp, self._total,
            self._ctab, self.cells, self._slot_keys, self._slot_cells, self._free, self._n_free,
            self.live_count, self._visited, self._epoch, self._parent, self._queue,
            limit + 1 if max_items is None else limit, self.max_expansions,
            lookups, moves, live_before)
        self._n_free, self.live_count, self._epoch = int(n_free), int(live), int(epoch)
        return FillResult(beta=self.load, live=self.live_count, failed=bool(failed),
                          consumed=int(consumed), lookups=lookups[:rec], moves=moves[:rec],
                          live_before=live_before[:rec], k=p.k)


def new_table(params: TableParams, seed: int = 0) -> CuckooTable:
    return CuckooTable(params, seed)


def key_stream(seed: int, count: int) -> np.ndarray:
    """``count`` uniform 64-bit keys from the trial's generator."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x6B6579])))
    return rng.integers(0, np.iinfo(np.uint64).max, size=count, dtype=np.uint64, endpoint=True)


def fill_until_failure(table: CuckooTable, keys: np.ndarray) -> FillResult:
    """Insert until the first failure; ``beta`` is the load at that point.

    If the stream runs dry first, ``failed`` is False and ``beta`` is the load
    reached.
    """
    return table.fill(keys)
