"""Value recovery assuming each auction sits at the envy-free equilibrium with VCG prices.

Per auction the bids are ranked, every bidder below the top gets the
incremental cost per click of moving up one slot, and profiles that violate
the monotone value chain are repaired by the smallest multiplicative
perturbation of the next-bid terms (a tiny QP solved exactly).
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .auction import DEFAULT_CTRS, CtrProfile, Mechanism, ranking
from .estimators import EstimateRecord, Method
from .regret import BidSequence, Window

CHAIN_TOL = 1e-9


def icc_values(sorted_bids, ctrs: CtrProfile = DEFAULT_CTRS, d=None) -> np.ndarray:
    """Per-position values implied by bids in decreasing order.

    Position k > 1 gets (a_{k-1} b_k - a_k b_{k+1} d_k) / (a_{k-1} - a_k) with
    b_{n+1} = 0; the top position is unbounded (``inf``).  ``d`` optionally
    scales the next-bid terms (length n, entries 1 and n unused).
    """
    b = np.asarray(sorted_bids, dtype=float)
    n = len(b)
    if n != ctrs.n:
        raise ValueError(f"{n} bids for {ctrs.n} positions")
    if np.any(np.diff(b) > 0):
        raise ValueError("bids must be sorted in decreasing order")
    d = np.ones(n) if d is None else np.asarray(d, dtype=float)
    a = ctrs.rates
    v = np.empty(n)
    v[0] = np.inf
    for k in range(2, n + 1):
        nxt = b[k] * d[k - 1] if k < n else 0.0
        v[k - 1] = (a[k - 2] * b[k - 1] - a[k - 1] * nxt) / (a[k - 2] - a[k - 1])
    return v


def equilibrium_bids(values, ctrs: CtrProfile = DEFAULT_CTRS, top_bid: float | None = None) -> np.ndarray:
    """Bids whose implied values are exactly ``values`` (sorted decreasing).

    Built bottom-up from the equality version of the value chain.  The top bid
    is free; it defaults to the top value.
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n != ctrs.n or np.any(np.diff(v) > 0):
        raise ValueError("need one value per position, sorted decreasing")
    a = ctrs.rates
    b = np.zeros(n)
    nxt = 0.0
    for k in range(n, 1, -1):
        b[k - 1] = (v[k - 1] * (a[k - 2] - a[k - 1]) + a[k - 1] * nxt) / a[k - 2]
        nxt = b[k - 1]
    b[0] = v[0] if top_bid is None else float(top_bid)
    if b[0] < b[1]:
        raise ValueError(f"top bid {b[0]} below second bid {b[1]}")
    return b


def is_consistent(v: np.ndarray, tol: float = CHAIN_TOL) -> bool:
    """Whether positions 2..n satisfy the nonincreasing value chain."""
    tail = v[1:]
    return bool(np.all(tail[:-1] >= tail[1:] - tol))


def _constraints(b: np.ndarray, ctrs: CtrProfile):
    """Linear form G d <= h of the chain over the free factors d_2..d_{n-1}."""
    n = len(b)
    a = ctrs.rates
    m = n - 2
    p = np.zeros(n + 1)
    q = np.zeros(n + 1)
    for k in range(2, n + 1):
        gap = a[k - 2] - a[k - 1]
        p[k] = a[k - 2] * b[k - 1] / gap
        q[k] = a[k - 1] * b[k] / gap if k < n else 0.0
    G = np.zeros((m, m))
    h = np.zeros(m)
    for r, i in enumerate(range(2, n)):
        G[r, i - 2] = q[i]
        if i + 1 < n:
            G[r, i - 1] = -q[i + 1]
        h[r] = p[i] - p[i + 1]
    return G, h


@dataclass(frozen=True)
class Perturbation:
    d: np.ndarray  # length n, d[0] = d[-1] = 1
    objective: float

    @property
    def mean_abs_deviation(self) -> float:
        return float(np.mean(np.abs(self.d - 1.0)))


def minimal_perturbations(sorted_bids, ctrs: CtrProfile = DEFAULT_CTRS,
                          tol: float = CHAIN_TOL) -> Perturbation | None:
    """Smallest sum (d_i - 1)^2 making the implied values a nonincreasing chain.

    Exact active-set enumeration: the optimum is the projection of the all-ones
    point onto the face of some subset of constraints, so every subset is
    projected and the best feasible projection wins.  Returns None when no
    feasible positive perturbation exists.
    """
    b = np.asarray(sorted_bids, dtype=float)
    n = len(b)
    if n != ctrs.n:
        raise ValueError(f"{n} bids for {ctrs.n} positions")
    if np.any(np.diff(b) > 0):
        raise ValueError("bids must be sorted in decreasing order")
    m = n - 2
    if m <= 0:
        return Perturbation(np.ones(n), 0.0)
    G, h = _constraints(b, ctrs)
    one = np.ones(m)
    scale = tol * max(1.0, float(np.abs(h).max()))
    best = None
    for r in range(m + 1):
        for S in itertools.combinations(range(m), r):
            S = list(S)
            if S:
                Gs = G[S]
                lam, *_ = np.linalg.lstsq(Gs @ Gs.T, Gs @ one - h[S], rcond=None)
                x = one - Gs.T @ lam
                if np.any(np.abs(Gs @ x - h[S]) > scale):
                    continue
            else:
                x = one.copy()
            if np.any(G @ x > h + scale) or np.any(x <= 0):
                continue
            obj = float(np.sum((x - 1.0) ** 2))
            if best is None or obj < best[0]:
                best = (obj, x)
    if best is None:
        return None
    d = np.ones(n)
    d[1:n - 1] = best[1]
    return Perturbation(d, best[0])


@dataclass
class VcgNeResult:
    records: list[EstimateRecord]
    deviations: np.ndarray  # per auction in the window; NaN when excluded
    consistent: np.ndarray  # per auction: no perturbation needed
    excluded: int

    @property
    def consistency_rate(self) -> float:
        return float(self.consistent.mean())


def estimate_vcg_like_ne(seq: BidSequence, ctrs: CtrProfile | None = None,
                         window: Window | None = None, perturb: bool = True,
                         top_rule: str = "second", average_by: str = "identity") -> VcgNeResult:
    """Time-average of per-auction equilibrium values for every bidder.

    ``top_rule``: ``second`` copies the second value to the top bidder,
    ``max_second_own`` takes the larger of that and its own bid.
    ``average_by``: ``identity`` averages each bidder's own per-auction values;
    ``rank`` averages by slot and hands the slot averages to bidders in order
    of their mean slot.
    """
    if top_rule not in ("second", "max_second_own"):
        raise ValueError(f"unknown top rule {top_rule!r}")
    if average_by not in ("identity", "rank"):
        raise ValueError(f"unknown averaging {average_by!r}")
    ctrs = ctrs or seq.ctrs or DEFAULT_CTRS
    w = (window or seq.default_window()).check(seq.T)
    flags: tuple[str, ...] = ()
    if seq.mechanism is Mechanism.VCG:
        warnings.warn("VCG-like-NE assumes GSP equilibrium bids; log is from a VCG auction")
        flags = ("mechanism_mismatch",)

    bids = seq.bids[w.slice()]
    T, n = bids.shape
    by_bidder = np.full((T, n), np.nan)
    by_rank = np.full((T, n), np.nan)
    slots = np.zeros((T, n), dtype=int)
    dev = np.full(T, np.nan)
    consistent = np.zeros(T, dtype=bool)
    for t in range(T):
        order = ranking(bids[t])
        sb = bids[t][order]
        slots[t, order] = np.arange(1, n + 1)
        v = icc_values(sb, ctrs)
        consistent[t] = is_consistent(v)
        if consistent[t]:
            dev[t] = 0.0
        elif perturb:
            pert = minimal_perturbations(sb, ctrs)
            if pert is None:
                continue
            v = icc_values(sb, ctrs, pert.d)
            dev[t] = pert.mean_abs_deviation
        v[0] = v[1] if top_rule == "second" else max(v[1], sb[0])
        by_bidder[t, order] = v
        by_rank[t] = v
    excluded = int(np.isnan(by_rank[:, 0]).sum())
    extra = flags + (("excluded_auctions",) if excluded else ())

    if average_by == "identity":
        est = np.nanmean(by_bidder, axis=0)
    else:
        slot_avg = np.nanmean(by_rank, axis=0)
        mean_slot = slots.mean(axis=0)
        est = np.empty(n)
        est[np.lexsort((np.arange(n), mean_slot))] = slot_avg
    method = (Method.VCG_NE if perturb else Method.VCG_NE_RAW).value
    records = [
        EstimateRecord(bid, method, float(est[j]), w, extra,
                       {"top_rule": top_rule, "average_by": average_by, "excluded": excluded})
        for j, bid in enumerate(seq.bidder_ids)
    ]
    return VcgNeResult(records, dev, consistent, excluded)
