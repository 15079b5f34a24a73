"""Slot allocation algorithms: greedy top-down, exact max-weight, brute force.

All three operate on the weight matrix ``delta[i, s] * bid[i]`` and share the
same deterministic tie conventions:

* greedy breaks ties at a slot by lowest bidder id;
* the exact algorithms break ties between equal-weight matchings by the
  lexicographically smallest per-bidder slot vector (unallocated sorts last).
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .model import Assignment, AuctionError, AuctionInstance, as_bids

# Enumeration guard: number of candidate matchings we are willing to score.
MAX_CANDIDATES = 2_000_000

_perm_cache: dict[tuple[int, int], np.ndarray] = {}


def _perm_table(k: int, m: int) -> np.ndarray:
    """All ordered selections of m items out of range(k), as a (count, m) array."""
    key = (k, m)
    table = _perm_cache.get(key)
    if table is None:
        count = math.perm(k, m)
        if count > MAX_CANDIDATES:
            raise AuctionError(
                f"instance too large for exact matching by enumeration ({count} candidates)")
        table = np.fromiter(
            itertools.chain.from_iterable(itertools.permutations(range(k), m)),
            dtype=np.intp, count=count * m).reshape(count, m)
        table.flags.writeable = False
        _perm_cache[key] = table
    return table


def weight_matrix(instance: AuctionInstance, bids: np.ndarray) -> np.ndarray:
    return instance.delta * bids[:, None]


def greedy_slot_vector(weights: np.ndarray, active: np.ndarray | None = None) -> np.ndarray:
    """Greedy assignment on a weight matrix; returns per-bidder slots, -1 if none.

    Slots are processed in order; each receives the unallocated bidder with
    the highest weight there, even when that weight is zero.
    """
    n, m = weights.shape
    slot_of = np.full(n, -1, dtype=np.intp)
    remaining = np.ones(n, dtype=bool) if active is None else active.copy()
    for s in range(m):
        if not remaining.any():
            break
        eff = np.where(remaining, weights[:, s], -1.0)
        winner = int(np.argmax(eff))  # first maximum = lowest id
        slot_of[winner] = s + 1
        remaining[winner] = False
    return slot_of


def optimal_slot_vector(weights: np.ndarray, active: np.ndarray | None = None) -> np.ndarray:
    """Max-weight assignment by scored enumeration with lexicographic ties."""
    n, m = weights.shape
    idx = np.arange(n) if active is None else np.flatnonzero(active)
    k = idx.size
    slot_of = np.full(n, -1, dtype=np.intp)
    if k == 0:
        return slot_of
    if k >= m:
        table = _perm_table(k, m)          # row r: slot s -> local bidder table[r, s]
        cand = idx[table]
        scores = weights[cand, np.arange(m)].sum(axis=1)
        rows = np.flatnonzero(scores == scores.max())
        if rows.size > 1:
            mats = np.full((rows.size, n), m + 1, dtype=np.intp)
            mats[np.arange(rows.size)[:, None], cand[rows]] = np.arange(1, m + 1)[None, :]
            rows = rows[np.lexsort(mats.T[::-1])[:1]]
        for s, b in enumerate(cand[rows[0]]):
            slot_of[b] = s + 1
    else:
        table = _perm_table(m, k)          # row r: local bidder j -> slot table[r, j]
        sub = weights[idx]
        scores = sub[np.arange(k), table].sum(axis=1)
        rows = np.flatnonzero(scores == scores.max())
        if rows.size > 1:
            # bidder order is id order, so the rows themselves compare lexicographically
            rows = rows[np.lexsort(table[rows].T[::-1])[:1]]
        slot_of[idx] = table[rows[0]] + 1
    return slot_of


def allocate_greedy(instance: AuctionInstance, bids) -> Assignment:
    b = as_bids(instance, bids)
    return Assignment.from_slot_vector(greedy_slot_vector(weight_matrix(instance, b)))


def allocate_optimal(instance: AuctionInstance, bids) -> Assignment:
    b = as_bids(instance, bids)
    return Assignment.from_slot_vector(optimal_slot_vector(weight_matrix(instance, b)))


def allocate_bruteforce(instance: AuctionInstance, bids, max_bidders: int = 8) -> Assignment:
    """Exact optimum by plain enumeration; the ground-truth oracle for tests.

    Deliberately written from first principles (no shared weight-matrix code)
    so it stays independent of :func:`allocate_optimal`.
    """
    b = as_bids(instance, bids)
    n, m = instance.n, instance.slot_count
    if n > max_bidders:
        raise AuctionError(f"refusing to enumerate: {n} bidders > {max_bidders}")

    best_score = -math.inf
    best_slots: tuple[int, ...] | None = None
    if n >= m:
        for combo in itertools.permutations(range(n), m):
            score = sum(instance.discount(combo[s], s + 1) * b[combo[s]] for s in range(m))
            slots = [m + 1] * n
            for s, i in enumerate(combo):
                slots[i] = s + 1
            slots = tuple(slots)
            if score > best_score or (score == best_score and slots < best_slots):
                best_score, best_slots = score, slots
    else:
        for combo in itertools.permutations(range(1, m + 1), n):
            score = sum(instance.discount(i, combo[i]) * b[i] for i in range(n))
            if score > best_score or (score == best_score and combo < best_slots):
                best_score, best_slots = score, combo
    return Assignment.from_slot_vector([s if s <= m else -1 for s in best_slots])
