"""GSP and VCG pricing meta-rules, parameterized by the allocation algorithm.

GSP charges the minimum bid under which a bidder retains the slot it was
assigned (closed threshold: the critical bid itself retains).  VCG charges
the externality, re-running the allocation with the bidder removed and
measuring everyone else's change in discounted bids.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .allocation import greedy_slot_vector, optimal_slot_vector, weight_matrix
from .model import AuctionError, AuctionInstance, TOL, as_bids

AllocationName = Literal["greedy", "optimal"]

#: Bracket width for the bisection that finds critical bids under the
#: optimal allocator (well inside the 1e-9 contract).
BISECT_WIDTH = 1e-10

_SLOT_FN: dict[str, Callable] = {"greedy": greedy_slot_vector, "optimal": optimal_slot_vector}


def _slot_fn(allocation: str) -> Callable:
    try:
        return _SLOT_FN[allocation]
    except KeyError:
        raise AuctionError(f"unknown allocation algorithm {allocation!r}") from None


@dataclass(frozen=True)
class PriceVector:
    """Per-conversion prices plus the expected (discounted) payments.

    When a winner's discount at its slot is zero the per-conversion price is
    recorded as 0 and the expected payment carries the whole charge.
    """

    per_conversion: tuple[float, ...]
    expected: tuple[float, ...]


def price_gsp(instance: AuctionInstance, bids, allocation: AllocationName, *,
              bid_grid=None) -> PriceVector:
    """Critical-bid prices for the given allocator.

    Under greedy allocation the critical bid has a closed form: the best
    discounted bid among bidders still unallocated when the winner's slot was
    filled.  Under optimal allocation it is found by bisection on the
    winner's own bid, or by an exact scan when ``bid_grid`` restricts bids to
    a discrete grid (pass one grid, or one per bidder).
    """
    b = as_bids(instance, bids)
    if allocation == "greedy":
        return _gsp_greedy(instance, b)
    if allocation != "optimal":
        raise AuctionError(f"unknown allocation algorithm {allocation!r}")
    weights = weight_matrix(instance, b)
    slot_of = optimal_slot_vector(weights)
    n = instance.n
    per_conv = np.zeros(n)
    expected = np.zeros(n)
    for i in range(n):
        s = int(slot_of[i])
        if s < 0:
            continue
        grid = _grid_for(bid_grid, i)
        crit = _critical_bid_optimal(instance, b, i, s, grid)
        d = instance.delta[i, s - 1]
        per_conv[i] = crit if d > 0 else 0.0
        expected[i] = d * crit
    return PriceVector(tuple(map(float, per_conv)), tuple(map(float, expected)))


def _grid_for(bid_grid, i: int):
    if bid_grid is None:
        return None
    if isinstance(bid_grid, (list, tuple)) and bid_grid and hasattr(bid_grid[0], "__len__"):
        return np.asarray(bid_grid[i], dtype=float)
    return np.asarray(bid_grid, dtype=float)


def _gsp_greedy(instance: AuctionInstance, b: np.ndarray) -> PriceVector:
    weights = weight_matrix(instance, b)
    n, m = weights.shape
    per_conv = np.zeros(n)
    expected = np.zeros(n)
    remaining = np.ones(n, dtype=bool)
    for s in range(m):
        if not remaining.any():
            break
        eff = np.where(remaining, weights[:, s], -1.0)
        winner = int(np.argmax(eff))
        eff[winner] = -1.0
        runner_up = float(eff.max()) if n > 1 else -1.0
        # The winner keeps slot s as long as its discounted bid matches the
        # best remaining competitor; if the winner's own discount is zero the
        # competitor field is necessarily all-zero too.
        expected[winner] = max(runner_up, 0.0)
        d = instance.delta[winner, s]
        per_conv[winner] = expected[winner] / d if d > 0 else 0.0
        remaining[winner] = False
    return PriceVector(tuple(map(float, per_conv)), tuple(map(float, expected)))


def _critical_bid_optimal(instance: AuctionInstance, b: np.ndarray, i: int, slot: int,
                          grid: np.ndarray | None) -> float:
    delta = instance.delta

    def keeps(x: float) -> bool:
        trial = b.copy()
        trial[i] = x
        return int(optimal_slot_vector(delta * trial[:, None])[i]) == slot

    if grid is not None:
        for g in np.sort(grid):
            if keeps(float(g)):
                return float(g)
        return float(b[i])  # the realized bid always keeps its own slot
    if keeps(0.0):
        return 0.0
    lo, hi = 0.0, float(b[i])
    while hi - lo > BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        if keeps(mid):
            hi = mid
        else:
            lo = mid
    return hi


def price_vcg(instance: AuctionInstance, bids, allocation: AllocationName) -> PriceVector:
    """Externality payments: others' discounted bids without i, minus with i.

    The expected payment is the quantity VCG defines directly; per-conversion
    divides by the winner's discount when positive.  Expected payments that
    come out negative within tolerance are clamped to zero.
    """
    b = as_bids(instance, bids)
    slot_fn = _slot_fn(allocation)
    weights = weight_matrix(instance, b)
    slot_of = slot_fn(weights)
    n = instance.n
    contrib = _contributions(weights, slot_of)
    total = float(contrib.sum())
    per_conv = np.zeros(n)
    expected = np.zeros(n)
    for i in range(n):
        s = int(slot_of[i])
        if s < 0:
            continue
        active = np.ones(n, dtype=bool)
        active[i] = False
        without = slot_fn(weights, active)
        others_without = float(_contributions(weights, without).sum())
        others_with = total - float(contrib[i])
        e = others_without - others_with
        if -TOL <= e < 0.0:
            e = 0.0
        expected[i] = e
        d = instance.delta[i, s - 1]
        per_conv[i] = e / d if d > 0 else 0.0
    return PriceVector(tuple(map(float, per_conv)), tuple(map(float, expected)))


def _contributions(weights: np.ndarray, slot_of: np.ndarray) -> np.ndarray:
    out = np.zeros(len(slot_of))
    allocated = slot_of > 0
    idx = np.flatnonzero(allocated)
    out[idx] = weights[idx, slot_of[idx] - 1]
    return out


def vcg_greedy_payment_recursion(instance: AuctionInstance, bids) -> np.ndarray:
    """Expected greedy-VCG payments via the bottom-up displacement recursion.

    Each winner pays what its displaced successor pays, plus the successor's
    discounted-bid gain from moving up into the winner's slot.  Serves as an
    independent check of :func:`price_vcg` under greedy allocation.
    """
    b = as_bids(instance, bids)
    weights = weight_matrix(instance, b)
    slot_of = greedy_slot_vector(weights)
    n, m = weights.shape
    p = np.zeros(n)
    occupant = {int(s): i for i, s in enumerate(slot_of) if s > 0}
    for s in range(m, 0, -1):  # bottom-up: successors are priced first
        if s not in occupant:
            continue
        i = occupant[s]
        active = np.ones(n, dtype=bool)
        active[i] = False
        without = greedy_slot_vector(weights, active)
        successor = np.flatnonzero(without == s)
        if successor.size == 0:
            p[i] = 0.0
            continue
        j = int(successor[0])
        realized = weights[j, slot_of[j] - 1] if slot_of[j] > 0 else 0.0
        p[i] = p[j] + (instance.delta[j, s - 1] * b[j] - realized)
    return p


def certify_no_overcharge(instance: AuctionInstance, bids,
                          allocation: AllocationName, pricing: Literal["gsp", "vcg"],
                          tolerance: float = TOL, *,
                          prices: PriceVector | None = None) -> tuple[bool, int | None]:
    """Check expected payment <= discounted bid for every bidder.

    For (greedy, vcg) additionally validates the payment recursion against
    the externality computation.  Returns ``(ok, witness)`` where witness is
    the first violating bidder id, if any.  ``prices`` overrides the computed
    vector (negative-control seam for tests).
    """
    b = as_bids(instance, bids)
    if prices is None:
        if pricing == "gsp":
            prices = price_gsp(instance, b, allocation)
        elif pricing == "vcg":
            prices = price_vcg(instance, b, allocation)
        else:
            raise AuctionError(f"unknown pricing rule {pricing!r}")
    slot_fn = _slot_fn(allocation)
    weights = weight_matrix(instance, b)
    slot_of = slot_fn(weights)
    for i in range(instance.n):
        s = int(slot_of[i])
        bound = weights[i, s - 1] if s > 0 else 0.0
        if prices.expected[i] > bound + tolerance:
            return False, i
    if allocation == "greedy" and pricing == "vcg":
        rec = vcg_greedy_payment_recursion(instance, b)
        gap = np.abs(rec - np.asarray(prices.expected))
        if gap.max(initial=0.0) > tolerance:
            return False, int(np.argmax(gap))
    return True, None
