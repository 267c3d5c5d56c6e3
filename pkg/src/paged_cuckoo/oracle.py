"""Ground truth for placement feasibility on small instances.

Two independent views of the same question:

* bipartite matching between items and cells (:func:`max_assignable`)
* an exhaustive search for a cell set ``V`` that more items are confined to
  than it has cells (:func:`has_overloaded_subgraph`)

By Hall's theorem all items fit exactly when no such ``V`` exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import TableParams, item_cells

MAX_EXHAUSTIVE_CELLS = 24


@dataclass
class Instance:
    params: TableParams
    items: list[frozenset[int]] = field(default_factory=list)

    def __post_init__(self):
        self.items = [frozenset(int(c) for c in s) for s in self.items]
        n = self.params.n
        for s in self.items:
            if not s or max(s) >= n or min(s) < 0:
                raise ValueError(f"item cell set {sorted(s)} out of range for n={n}")

    @property
    def m(self) -> int:
        return len(self.items)


def instance_from_keys(params: TableParams, seed: int, keys) -> Instance:
    return Instance(params, [frozenset(item_cells(int(key), seed, params)) for key in keys])


def max_assignable(instance: Instance) -> int:
    """Size of a maximum matching between items and cells (augmenting paths)."""
    owner: dict[int, int] = {}
    adj = [sorted(s) for s in instance.items]
    matched = 0
    for root in range(len(adj)):
        # iterative DFS for an augmenting path from ``root``
        seen: set[int] = set()
        stack = [(root, iter(adj[root]))]
        via: dict[int, int] = {}  # item -> cell it will take
        found = False
        while stack and not found:
            item, it = stack[-1]
            for cell in it:
                if cell in seen:
                    continue
                seen.add(cell)
                via[item] = cell
                if cell not in owner:
                    found = True
                    break
                nxt = owner[cell]
                stack.append((nxt, iter(adj[nxt])))
                break
            else:
                stack.pop()
        if found:
            for item, _ in stack:
                owner[via[item]] = item
            matched += 1
    return matched


def _subset_counts(masks: np.ndarray, n_cells: int, chunk: int = 1 << 20):
    """Yield ``(V, items_inside_V)`` over all subsets ``V`` of ``n_cells``."""
    total = 1 << n_cells
    for start in range(0, total, chunk):
        v = np.arange(start, min(start + chunk, total), dtype=np.uint32)
        inv = ~v
        count = np.zeros(len(v), dtype=np.int32)
        for mk in masks:
            count += (inv & mk) == 0
        yield v, count


def has_overloaded_subgraph(instance: Instance) -> bool:
    """True iff some cell set ``V`` wholly contains more than ``|V|`` item sets."""
    used = sorted(set().union(*instance.items)) if instance.items else []
    if len(used) > MAX_EXHAUSTIVE_CELLS:
        raise ValueError(f"{len(used)} distinct cells exceeds exhaustive limit {MAX_EXHAUSTIVE_CELLS}")
    pos = {c: i for i, c in enumerate(used)}
    masks = np.array([sum(1 << pos[c] for c in s) for s in instance.items], dtype=np.uint32)
    for v, count in _subset_counts(masks, len(used)):
        if np.any(count > np.bitwise_count(v)):
            return True
    return False



# small geometries (n, t, k, d) for the equivalence battery
SMALL_GEOMETRIES = [
    (8, 4, 2, 2), (12, 4, 2, 2), (16, 4, 2, 2), (16, 8, 2, 2), (24, 8, 2, 2), (32, 8, 2, 2),
    (32, 16, 2, 2), (16, 16, 2, 2), (12, 6, 3, 2), (18, 6, 3, 2), (24, 12, 3, 2),
    (12, 2, 2, 2), (20, 4, 2, 2), (16, 4, 1, 3), (24, 6, 2, 3),
]


@dataclass
class VerifyReport:
    instances: int = 0
    mismatches: int = 0
    hall_checked: int = 0
    hall_mismatches: int = 0
    failures: list[str] = field(default_factory=list)


def verify_battery(instances: int, seed: int = 0, max_n: int = 32, hall_cells: int = 20) -> VerifyReport:
    """Fill random small tables until failure and compare with the oracles.

    For each instance the table must have placed exactly ``max_assignable``
    of the keys it was offered.  When the offered keys touch at most
    ``hall_cells`` distinct cells the exhaustive subgraph test is checked as
    well.
    """
    from .geometry import Variant
    from .table import CuckooTable, key_stream

    rng = np.random.default_rng(seed)
    geoms = [g for g in SMALL_GEOMETRIES if g[0] <= max_n]
    variants = list(Variant)
    report = VerifyReport()
    for i in range(instances):
        n, t, k, d = geoms[int(rng.integers(len(geoms)))]
        variant = variants[i % len(variants)]
        params = TableParams(n, t, k, d, variant)
        tseed = int(rng.integers(1 << 62))
        table = CuckooTable(params, tseed)
        keys = key_stream(tseed, 2 * n + 2)
        res = table.fill(keys)
        offered = keys[:res.consumed]
        inst = instance_from_keys(params, tseed, offered)
        expect = max_assignable(inst)
        report.instances += 1
        if expect != res.live:
            report.mismatches += 1
            report.failures.append(f"{params} seed={tseed}: placed {res.live}, matching {expect}")
        if len(set().union(*inst.items)) <= hall_cells:
            report.hall_checked += 1
            if has_overloaded_subgraph(inst) != (expect < inst.m):
                report.hall_mismatches += 1
                report.failures.append(f"{params} seed={tseed}: Hall check disagrees")
    return report
