"""Value recovery assuming a bidder best-responds to the opponent bids it faced.

Expected CTR Q(b) and expected expenditure TE(b) come from replaying every
grid bid against the logged opponents.  A bid statistic b* is then inverted
through the best-response correspondence BR(v) = argmax_b Q(b) v - TE(b),
either by grid search or through the first-order condition v = dTE/dQ.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .auction import DEFAULT_CTRS, CtrProfile, Mechanism, replay_tables
from .estimators import EstimateRecord, Method
from .regret import DEFAULT_GRID, BidSequence, Window

BR_TOL = 1e-9


@dataclass(frozen=True)
class ResponseCurves:
    bidder_id: int
    window: Window
    grid: np.ndarray
    Q: np.ndarray
    TE: np.ndarray

    def utility(self, v: float) -> np.ndarray:
        return self.Q * v - self.TE


def response_curves(seq: BidSequence, bidder_id: int, grid=DEFAULT_GRID,
                    window: Window | None = None, mechanism=Mechanism.GSP,
                    ctrs: CtrProfile | None = None) -> ResponseCurves:
    w = (window or seq.default_window()).check(seq.T)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or not len(grid):
        raise ValueError("bid grid must be nonempty")
    ctr, pay = replay_tables(mechanism, seq.bids[w.slice()], seq.column(bidder_id), grid,
                             ctrs or seq.ctrs or DEFAULT_CTRS)
    return ResponseCurves(bidder_id, w, grid, ctr.mean(axis=0), pay.mean(axis=0))


def best_response_set(curves: ResponseCurves, v: float, tol: float = BR_TOL) -> np.ndarray:
    """Every grid bid whose expected utility is within ``tol`` (relative) of the best."""
    u = curves.utility(v)
    top = u.max()
    return curves.grid[u >= top - tol * max(1.0, abs(top))]


@dataclass(frozen=True)
class Variant:
    span: str = "second_half"  # or full_game
    bid_stat: str = "mean"  # or mean_excluding_outliers
    solver: str = "grid"  # or foc
    aggregation: str = "pooled"  # or per_auction

    def __post_init__(self):
        for name, allowed in (("span", ("second_half", "full_game")),
                              ("bid_stat", ("mean", "mean_excluding_outliers")),
                              ("solver", ("grid", "foc")),
                              ("aggregation", ("pooled", "per_auction"))):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}")


VARIANTS = {
    Method.BEST_RESPONSE: Variant(),
    Method.BR_FOC: Variant(solver="foc"),
    Method.BR_FOC_OUTLIERS: Variant(solver="foc", bid_stat="mean_excluding_outliers"),
    Method.BR_FULL_GAME: Variant(span="full_game"),
    Method.BR_AVG_VALUE: Variant(aggregation="per_auction"),
}


def _method_tag(variant: Variant) -> str:
    for m, v in VARIANTS.items():
        if v == variant:
            return m.value
    return (f"best-response[{variant.span},{variant.bid_stat},"
            f"{variant.solver},{variant.aggregation}]")


def trimmed_mean(bids: np.ndarray, k: float = 2.0) -> float:
    """Mean after dropping bids more than ``k`` standard deviations from the mean."""
    mu = bids.mean()
    sd = bids.std()
    return float(bids[np.abs(bids - mu) <= k * sd].mean())


class Inverter:
    """Maps a bid to the value(s) for which it is a best response."""

    def __init__(self, curves: ResponseCurves, values=DEFAULT_GRID, tol: float = BR_TOL):
        self.curves = curves
        self.values = np.asarray(values, dtype=float)
        sets = [best_response_set(curves, v, tol) for v in self.values]
        self.sets = sets
        self.lo = np.array([s.min() for s in sets])
        self.hi = np.array([s.max() for s in sets])

    def grid(self, b: float) -> tuple[float, tuple[str, ...]]:
        V = self.values
        member = np.array([np.any(np.abs(s - b) <= BR_TOL) for s in self.sets])
        if member.any():
            hits = V[member]
            flags = ("br_range",) if len(hits) > 1 else ()
            return float((hits.min() + hits.max()) / 2), flags
        for k in range(len(V) - 1):
            if self.hi[k] < b < self.lo[k + 1]:
                return float((V[k] + V[k + 1]) / 2), ()
        if b > self.hi[-1]:
            return float(V[-1]), ("above_grid",)
        if b < self.lo[0]:
            return float(V[0]), ("below_grid",)
        hull = (self.lo <= b) & (b <= self.hi)
        if hull.any():
            hits = V[hull]
            return float((hits.min() + hits.max()) / 2), ("hull_membership",)
        # BR not monotone around b: take the value whose BR set lies nearest
        gap = np.maximum(self.lo - b, b - self.hi)
        return float(V[np.argmin(gap)]), ("unresolved_nearest",)

    def foc(self, b: float) -> tuple[float, tuple[str, ...]]:
        g = self.curves.grid
        r = int(np.argmin(np.abs(g - b)))
        lo, hi = max(r - 1, 0), min(r + 1, len(g) - 1)
        dq = self.curves.Q[hi] - self.curves.Q[lo]
        if hi == lo or dq == 0:
            est, flags = self.grid(b)
            return est, ("foc_degenerate",) + flags
        return float((self.curves.TE[hi] - self.curves.TE[lo]) / dq), ()


def estimate_best_response(seq: BidSequence, bidder_id: int, variant: Variant = Variant(),
                           window: Window | None = None, values=DEFAULT_GRID,
                           grid=DEFAULT_GRID, mechanism=Mechanism.GSP,
                           ctrs: CtrProfile | None = None) -> EstimateRecord:
    """Best-response estimate of one bidder's value.

    ``window`` overrides the variant's span when given.
    """
    if window is None:
        window = Window.full(seq.T) if variant.span == "full_game" else seq.default_window()
    w = window.check(seq.T)
    curves = response_curves(seq, bidder_id, grid, w, mechanism, ctrs)
    inv = Inverter(curves, values)
    solve = inv.grid if variant.solver == "grid" else inv.foc
    own = seq.bids[w.slice(), seq.column(bidder_id)]
    diag = {"variant": variant.__dict__.copy()}

    if variant.aggregation == "pooled":
        b_star = float(own.mean()) if variant.bid_stat == "mean" else trimmed_mean(own)
        est, flags = solve(b_star)
        diag["b_star"] = b_star
    else:
        cache: dict[float, tuple[float, tuple[str, ...]]] = {}
        per = np.empty(len(own))
        seen: set[str] = set()
        for t, b in enumerate(own):
            if b not in cache:
                cache[b] = solve(float(b))
            per[t] = cache[b][0]
            seen.update(cache[b][1])
        est, flags = float(per.mean()), tuple(sorted(seen))
    return EstimateRecord(bidder_id, _method_tag(variant), est, w, flags, diag)
