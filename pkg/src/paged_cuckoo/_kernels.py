"""Compiled hot paths for the table: hashing, unranking and BFS insertion.

Cell array convention: ``cells[c] == -1`` means empty, otherwise it holds the
slot id of the stored item.  ``slot_cells[s]`` lists the ``d*k`` candidate
cells of slot ``s`` (bucket 0 first, cells ascending within a bucket).
"""

import numpy as np
from numba import njit

EMPTY = -1

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_ONE = np.uint64(1)


@njit(cache=True, nogil=True)
def mix64(x):
    x = x ^ (x >> _S30)
    x = x * _M1
    x = x ^ (x >> _S27)
    x = x * _M2
    x = x ^ (x >> _S31)
    return x


@njit(cache=True, nogil=True)
def bucket_index(key, seed, j, total):
    salt = mix64(seed + (np.uint64(j) + _ONE) * _GOLDEN)
    h = mix64(key ^ salt)
    return np.int64(h % np.uint64(total))


@njit(cache=True, nogil=True)
def unrank_into(t, k, rank, ctab, out, off):
    # ctab[a, r] = C(a, r) for a <= t, r <= k
    lo = 0
    for pos in range(k):
        r = k - pos
        target = ctab[t - lo, r] - rank
        a = lo
        b = t - r
        while a < b:
            mid = (a + b + 1) // 2
            if ctab[t - mid, r] >= target:
                a = mid
            else:
                b = mid - 1
        rank -= ctab[t - lo, r] - ctab[t - a, r]
        out[off + pos] = a
        lo = a + 1


@njit(cache=True, nogil=True)
def fill_item_cells(key, seed, d, k, t, variant, bpp, total, ctab, out):
    for j in range(d):
        idx = bucket_index(key, seed, j, total)
        page = idx // bpp
        rank = idx % bpp
        base = page * t
        off = j * k
        if variant == 0:
            for c in range(k):
                out[off + c] = base + rank * k + c
        elif variant == 1:
            for c in range(k):
                out[off + c] = base + rank + c
        else:
            unrank_into(t, k, rank, ctab, out, off)
            for c in range(k):
                out[off + c] += base


@njit(cache=True, nogil=True)
def find(cells, slot_keys, slot_cells_row, key):
    """Cell holding ``key`` among its candidate cells, or -1."""
    for c in slot_cells_row:
        s = cells[c]
        if s != EMPTY and slot_keys[s] == key:
            return c
    return -1


@njit(cache=True, nogil=True)
def bfs_insert(cells, slot_cells, slot, d, k, visited, epoch, parent, queue, max_expansions):
    """Place ``slot`` by breadth-first search for a vacancy.

    Returns ``(placed, buckets_examined, moves)``.  ``visited`` uses epoch stamps so it
    is never cleared.  On failure ``cells`` is untouched.
    """
    own = slot_cells[slot]
    lookups = d
    head = 0
    tail = 0
    vacancy = -1
    for c in own:
        if visited[c] == epoch:
            continue
        visited[c] = epoch
        parent[c] = -1
        if cells[c] == EMPTY:
            vacancy = c
            break
        queue[tail] = c
        tail += 1
    expansions = 0
    while vacancy < 0 and head < tail:
        if max_expansions >= 0 and expansions >= max_expansions:
            break
        c = queue[head]
        head += 1
        expansions += 1
        lookups += d
        for c2 in slot_cells[cells[c]]:
            if visited[c2] == epoch:
                continue
            visited[c2] = epoch
            parent[c2] = c
            if cells[c2] == EMPTY:
                vacancy = c2
                break
            queue[tail] = c2
            tail += 1
    if vacancy < 0:
        return False, lookups, 0
    moves = 0
    cur = vacancy
    while parent[cur] != -1:
        p = parent[cur]
        cells[cur] = cells[p]
        moves += 1
        cur = p
    cells[cur] = slot
    return True, lookups, moves


@njit(cache=True, nogil=True)
def fill_stream(keys, seed, d, k, t, variant, bpp, total, ctab,
                cells, slot_keys, slot_cells, free_slots, n_free, live,
                visited, epoch0, parent, queue, max_items, max_expansions,
                out_lookups, out_moves, out_live):
    """Insert ``keys`` in order until one fails or ``max_items`` are stored.

    Keys already present are skipped.  The slot pool must hold one spare slot
    beyond the cell count.  Returns ``(n_consumed, n_free, live, epoch,
    n_recorded, failed)``; ``out_*[i]`` describe the i-th attempted insert
    (``out_lookups`` in bucket examinations),
    ``out_live[i]`` being the live count *before* it.
    """
    epoch = epoch0
    rec = 0
    failed = False
    i = 0
    scratch = np.empty(d * k, dtype=np.int64)
    while i < keys.shape[0]:
        if live >= max_items:
            break
        key = keys[i]
        i += 1
        fill_item_cells(key, seed, d, k, t, variant, bpp, total, ctab, scratch)
        if find(cells, slot_keys, scratch, key) >= 0:
            continue
        slot = free_slots[n_free - 1]
        slot_cells[slot, :] = scratch
        slot_keys[slot] = key
        epoch += 1
        placed, lookups, moves = bfs_insert(cells, slot_cells, slot, d, k, visited, epoch,
                                            parent, queue, max_expansions)
        out_lookups[rec] = lookups
        out_moves[rec] = moves
        out_live[rec] = live
        rec += 1
        if not placed:
            failed = True
            break
        n_free -= 1
        live += 1
    return i, n_free, live, epoch, rec, failed
