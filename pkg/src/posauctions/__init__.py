"""Position auctions with typed per-slot discount curves.

Greedy or exact allocation crossed with GSP or VCG pricing, closed-form
two-bidder equilibrium analysis with simulation oracles, hand-proved
bad-equilibrium fixtures, and exponential-weights learning experiments.
"""
from .engine import ALL_FORMATS, Format, counterfactual_utility, empirical_poa, run_auction
from .model import (Assignment, AuctionError, AuctionInstance, AuctionOutcome, Bidder,
                    BidProfile, DiscountCurve, geometric_curve, utility, welfare)

__all__ = [
    "ALL_FORMATS", "Assignment", "AuctionError", "AuctionInstance", "AuctionOutcome",
    "Bidder", "BidProfile", "DiscountCurve", "Format", "counterfactual_utility",
    "empirical_poa", "geometric_curve", "run_auction", "utility", "welfare",
]
