"""Single position auction: allocation by bid rank, GSP/VCG payments, utilities.

Bidders are identified by their column index in a profile.  Ties in bids are
broken by ascending index, so the whole module is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

DEFAULT_VALUES = (21.0, 27.0, 33.0, 39.0, 45.0)


class Mechanism(str, Enum):
    GSP = "gsp"
    VCG = "vcg"

    @classmethod
    def parse(cls, tag: "str | Mechanism") -> "Mechanism":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ValueError(f"unknown mechanism {tag!r}; expected 'gsp' or 'vcg'") from None


@dataclass(frozen=True)
class CtrProfile:
    """Click-through rates by position, top slot first."""

    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if len(rates) < 2:
            raise ValueError("need at least two positions")
        if any(not (0.0 < r <= 1.0) for r in rates):
            raise ValueError(f"click-through rates must lie in (0, 1]: {rates}")
        if any(a <= b for a, b in zip(rates, rates[1:])):
            raise ValueError(f"click-through rates must be strictly decreasing: {rates}")

    @property
    def n(self) -> int:
        return len(self.rates)

    def array(self) -> np.ndarray:
        return np.asarray(self.rates, dtype=float)

    def __getitem__(self, position: int) -> float:
        """Rate of a 1-based position."""
        if not 1 <= position <= self.n:
            raise IndexError(position)
        return self.rates[position - 1]


DEFAULT_CTRS = CtrProfile((0.38, 0.29, 0.20, 0.11, 0.02))


@dataclass(frozen=True)
class AuctionOutcome:
    positions: np.ndarray  # 1-based slot per bidder
    expenditures: np.ndarray
    utilities: np.ndarray | None
    welfare: float | None


def _check_profile(bids) -> np.ndarray:
    bids = np.asarray(bids, dtype=float)
    if bids.ndim != 1:
        raise ValueError("a bid profile is one-dimensional")
    if not np.all(np.isfinite(bids)) or np.any(bids < 0):
        raise ValueError(f"bids must be finite and nonnegative: {bids.tolist()}")
    return bids


def ranking(bids) -> np.ndarray:
    """Bidder indices from top slot to bottom (stable: lower index wins ties)."""
    bids = _check_profile(bids)
    return np.argsort(-bids, kind="stable")


def allocate(bids) -> np.ndarray:
    """1-based position of every bidder."""
    order = ranking(bids)
    positions = np.empty(len(order), dtype=int)
    positions[order] = np.arange(1, len(order) + 1)
    return positions


def payments(mechanism: Mechanism | str, ranked_bids, ctrs: CtrProfile) -> np.ndarray:
    """Expenditure at each position given bids already sorted in decreasing order.

    GSP charges the next bid per click; VCG charges the externality
    sum_{j>k} b_(j) * (alpha_{j-1} - alpha_j).
    """
    mechanism = Mechanism.parse(mechanism)
    rb = [float(b) for b in ranked_bids]
    n = len(rb)
    if n != ctrs.n:
        raise ValueError(f"{n} bids for {ctrs.n} positions")
    if any(x < y for x, y in zip(rb, rb[1:])):
        raise ValueError("ranked_bids must be sorted in decreasing order")
    a = ctrs.rates
    out = np.zeros(n)
    for k in range(1, n + 1):
        if mechanism is Mechanism.GSP:
            out[k - 1] = a[k - 1] * rb[k] if k < n else 0.0
        else:
            acc = 0.0
            for j in range(k + 1, n + 1):
                acc = acc + rb[j - 1] * (a[j - 2] - a[j - 1])
            out[k - 1] = acc
    return out


def resolve(mechanism: Mechanism | str, bids, ctrs: CtrProfile = DEFAULT_CTRS,
            values=None) -> AuctionOutcome:
    bids = _check_profile(bids)
    if len(bids) != ctrs.n:
        raise ValueError(f"{len(bids)} bidders for {ctrs.n} positions")
    order = ranking(bids)
    positions = np.empty(len(order), dtype=int)
    positions[order] = np.arange(1, len(order) + 1)
    by_pos = payments(mechanism, bids[order], ctrs)
    expenditures = by_pos[positions - 1]
    if values is None:
        return AuctionOutcome(positions, expenditures, None, None)
    values = np.asarray(values, dtype=float)
    if values.shape != bids.shape:
        raise ValueError(f"{len(values)} values for {len(bids)} bidders")
    alpha = ctrs.array()[positions - 1]
    utilities = alpha * values - expenditures
    welfare = float(np.dot(alpha, values))
    return AuctionOutcome(positions, expenditures, utilities, welfare)


def counterfactual_utility(mechanism: Mechanism | str, b: float, others: Sequence[float],
                           ctrs: CtrProfile, v: float, bidder: int | None = None) -> float:
    """Utility of bidding ``b`` with value ``v`` against fixed opponent bids.

    ``bidder`` is the bidder's index in the full profile (default: last), which
    decides ties against opponents with equal bids.
    """
    others = list(others)
    if bidder is None:
        bidder = len(others)
    profile = others[:bidder] + [b] + others[bidder:]
    out = resolve(mechanism, profile, ctrs)
    k = int(out.positions[bidder])
    return ctrs[k] * float(v) - float(out.expenditures[bidder])


def welfare_bounds(values, ctrs: CtrProfile = DEFAULT_CTRS) -> tuple[float, float]:
    """(worst, best) welfare over all allocations: reverse-sorted and sorted pairing."""
    a = np.sort(ctrs.array())[::-1]
    v = np.sort(np.asarray(values, dtype=float))[::-1]
    return float(np.dot(a, v[::-1])), float(np.dot(a, v))


def replay_tables(mechanism: Mechanism | str, bids: np.ndarray, bidder: int,
                  grid, ctrs: CtrProfile) -> tuple[np.ndarray, np.ndarray]:
    """Counterfactual CTR and expenditure of every grid bid in every auction.

    ``bids`` is a (T, n) log; the opponents of column ``bidder`` are held fixed
    while the grid bid replaces its own.  Returns two (T, len(grid)) arrays.
    Per-auction arithmetic matches :func:`payments` operation for operation, so
    sums built from these tables reproduce a per-auction re-simulation exactly.
    """
    bids = np.asarray(bids, dtype=float)
    grid = np.asarray(grid, dtype=float)
    return _tables_for(mechanism, bids, bidder, grid[None, :], ctrs)


def own_tables(mechanism: Mechanism | str, bids: np.ndarray, bidder: int,
               ctrs: CtrProfile) -> tuple[np.ndarray, np.ndarray]:
    """CTR and expenditure of the bidder's logged bid in each auction, shape (T,)."""
    bids = np.asarray(bids, dtype=float)
    own = bids[:, bidder]
    ctr, pay = _tables_for(mechanism, bids, bidder, own[:, None], ctrs)
    return ctr[:, 0], pay[:, 0]


def _tables_for(mechanism, bids, bidder, cand, ctrs):
    mechanism = Mechanism.parse(mechanism)
    T, n = bids.shape
    if n != ctrs.n:
        raise ValueError(f"{n} bidders for {ctrs.n} positions")
    alpha = ctrs.array()
    idx = np.delete(np.arange(n), bidder)
    opp = bids[:, idx]
    # rank opponents: higher bid first, lower index first among equals
    order = np.lexsort((np.broadcast_to(idx, opp.shape), -opp), axis=-1)
    ranked = np.take_along_axis(opp, order, axis=1)

    # expenditure if the bidder lands in position k (column k-1)
    pay_by_pos = np.zeros((T, n))
    for k in range(1, n + 1):
        if mechanism is Mechanism.GSP:
            if k < n:
                pay_by_pos[:, k - 1] = alpha[k - 1] * ranked[:, k - 1]
        else:
            acc = np.zeros(T)
            for j in range(k - 1, n - 1):
                acc = acc + ranked[:, j] * (alpha[j] - alpha[j + 1])
            pay_by_pos[:, k - 1] = acc
    return _gather(opp, idx, bidder, cand, alpha, pay_by_pos)


def _gather(opp, idx, bidder, cand, alpha, pay_by_pos):
    # cand broadcasts against (T, m); count opponents ranked above the bidder
    o = opp[:, :, None]
    above = (o > cand[:, None, :]) | ((o == cand[:, None, :]) & (idx < bidder)[None, :, None])
    k0 = above.sum(axis=1)  # 0-based position
    ctr = alpha[k0]
    pay = np.take_along_axis(pay_by_pos, k0, axis=1)
    return ctr, pay
