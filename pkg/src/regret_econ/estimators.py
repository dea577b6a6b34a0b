"""Value estimators built on regret curves and raw bid averages."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .regret import BidSequence, RegretCurve, Window

ZERO_REGRET_TOL = 1e-9
# relative slack when collecting the argmin set, absorbs summation rounding
ARGMIN_RTOL = 1e-9


class Method(str, Enum):
    REGRET_MIN = "regret-min"
    AVG_BID = "avg-bid"
    REGRET_WEIGHTED = "regret-weighted"
    COMBINED = "combined"
    VCG_NE = "vcg-ne"
    VCG_NE_RAW = "vcg-ne-raw"
    BEST_RESPONSE = "best-response"
    BR_FOC = "br-foc"
    BR_FOC_OUTLIERS = "br-foc-outliers"
    BR_FULL_GAME = "br-full-game"
    BR_AVG_VALUE = "br-avg-value"


@dataclass
class EstimateRecord:
    bidder_id: int
    method: str
    estimate: float
    window: Window
    flags: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict, repr=False)


def _contiguous_runs(idx: np.ndarray) -> list[np.ndarray]:
    return np.split(idx, np.flatnonzero(np.diff(idx) != 1) + 1)


def estimate_regret_min(curve: RegretCurve, objective: str = "absolute") -> EstimateRecord:
    """Value with the smallest regret; midpoint of a flat minimum.

    ``objective="relative"`` minimizes regret / opt instead, ignoring values
    whose optimum is not positive.
    """
    if objective == "absolute":
        score = curve.regret
    elif objective == "relative":
        score = curve.relative
    else:
        raise ValueError(f"unknown objective {objective!r}")
    if not len(score) or np.all(np.isnan(score)):
        raise ValueError("regret curve has no usable entries")
    best = np.nanmin(score)
    slack = ARGMIN_RTOL * max(1.0, abs(best))
    idx = np.flatnonzero(score <= best + slack)
    runs = _contiguous_runs(idx)
    flags = ()
    if len(runs) > 1:
        flags = ("noncontiguous_argmin",)
    run = runs[0]
    lo, hi = curve.values[run[0]], curve.values[run[-1]]
    return EstimateRecord(
        curve.bidder_id, Method.REGRET_MIN.value, float((lo + hi) / 2), curve.window, flags,
        {"argmin": [float(curve.values[i]) for i in idx], "min_regret": float(best),
         "objective": objective})


def estimate_average_bid(seq: BidSequence, bidder_id: int,
                         window: Window | None = None) -> EstimateRecord:
    w = (window or seq.default_window()).check(seq.T)
    bids = seq.bids[w.slice(), seq.column(bidder_id)]
    return EstimateRecord(bidder_id, Method.AVG_BID.value, float(bids.mean()), w,
                          diagnostics={"bid_count": int(len(bids))})


def estimate_regret_weighted(curve: RegretCurve, tol: float = ZERO_REGRET_TOL) -> EstimateRecord:
    """Average of candidate values weighted by inverse regret.

    If some regret is at or below ``tol`` the weights blow up; the limit is the
    plain mean of those values, which is returned with a flag.
    """
    reg = curve.regret
    v = curve.values
    zero = reg <= tol
    if zero.any():
        est = float(v[zero].mean())
        return EstimateRecord(curve.bidder_id, Method.REGRET_WEIGHTED.value, est, curve.window,
                              ("zero_regret_limit",), {"zero_set": v[zero].tolist()})
    w = 1.0 / reg
    est = float(np.sum(w * v) / np.sum(w))
    return EstimateRecord(curve.bidder_id, Method.REGRET_WEIGHTED.value, est, curve.window)


def combine_mean(records: Sequence[EstimateRecord]) -> EstimateRecord:
    if len(records) < 2:
        raise ValueError("combining needs at least two estimates")
    ids = {r.bidder_id for r in records}
    if len(ids) != 1:
        raise ValueError(f"estimates belong to different bidders: {sorted(ids)}")
    est = float(np.mean([r.estimate for r in records]))
    parts = "+".join(r.method for r in records)
    flags = tuple(sorted({f for r in records for f in r.flags}))
    return EstimateRecord(records[0].bidder_id, Method.COMBINED.value, est, records[0].window,
                          flags, {"constituents": parts})
