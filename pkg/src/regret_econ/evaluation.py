"""Accuracy metrics, rank-based bias correction, welfare and correlations."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .auction import DEFAULT_CTRS, CtrProfile, welfare_bounds
from .estimators import EstimateRecord
from .regret import BidSequence, Window

REPORT_SCHEMA_VERSION = "1.0"


def relative_error(v: float, v_hat: float) -> float:
    if v <= 0:
        raise ValueError(f"true value must be positive, got {v}")
    return abs(v - v_hat) / v


def rms_error(errors: Iterable[float]) -> float:
    e = np.asarray(list(errors), dtype=float)
    if not len(e):
        raise ValueError("rms of an empty set")
    return float(np.sqrt(np.mean(e ** 2)))


def modal_position(seq: BidSequence, bidder_id: int,
                   window: Window | None = None) -> tuple[int, bool]:
    """Most frequent slot of a bidder and whether that mode was tied.

    Ties go to the better (smaller) slot.
    """
    w = (window or seq.default_window()).check(seq.T)
    bids = seq.bids[w.slice()]
    col = seq.column(bidder_id)
    # slot = 1 + bidders strictly above, with lower column winning equal bids
    own = bids[:, [col]]
    above = (bids > own) | ((bids == own) & (np.arange(seq.n) < col))
    slots = 1 + above.sum(axis=1)
    counts = np.bincount(slots, minlength=seq.n + 1)[1:]
    best = counts.max()
    winners = np.flatnonzero(counts == best)
    return int(winners[0]) + 1, len(winners) > 1


def bias_factors(estimates: Mapping[int, float], true_values: Mapping[int, float],
                 modal_ranks: Mapping[int, int]) -> dict[int, float]:
    """Mean of estimate / truth among bidders sharing a modal rank.

    Uses the true values, so it is an in-sample, evaluation-only device.
    Ranks with no bidders are absent.
    """
    ratios: dict[int, list[float]] = defaultdict(list)
    for i, est in estimates.items():
        ratios[modal_ranks[i]].append(est / true_values[i])
    return {k: float(np.mean(r)) for k, r in sorted(ratios.items())}


def unbias(v_hat: float, factor: float) -> float:
    if factor <= 0:
        raise ValueError(f"bias factor must be positive, got {factor}")
    return v_hat / factor


def welfare_series(seq: BidSequence, values: Mapping[int, float], window_len: int = 60,
                   ctrs: CtrProfile | None = None) -> list[float] | None:
    """Mean normalized welfare per block: 0 for the worst allocation, 1 for the best.

    None when every value is equal (the scale collapses).
    """
    if window_len < 1:
        raise ValueError("window_len must be at least 1")
    ctrs = ctrs or seq.ctrs or DEFAULT_CTRS
    v = np.array([values[i] for i in seq.bidder_ids], dtype=float)
    worst, best = welfare_bounds(v, ctrs)
    if best == worst:
        return None
    alpha = ctrs.array()
    bids = seq.bids
    above = (bids[:, None, :] > bids[:, :, None]) | (
        (bids[:, None, :] == bids[:, :, None]) & (np.arange(seq.n)[None, :] < np.arange(seq.n)[:, None])[None])
    slots = above.sum(axis=2)  # 0-based slot of each bidder
    sw = (alpha[slots] * v[None, :]).sum(axis=1)
    norm = (sw - worst) / (best - worst)
    return [float(norm[s:s + window_len].mean()) for s in range(0, seq.T, window_len)]


def _flat(x: np.ndarray) -> bool:
    # spread at rounding level counts as constant
    return bool(np.ptp(x) <= 1e-12 * max(1.0, float(np.abs(x).max())))


def correlation(x: Sequence[float], y: Sequence[float], kind: str = "pearson") -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    if _flat(x) or _flat(y):
        raise ValueError("correlation undefined for a constant sample")
    if kind == "pearson":
        return float(stats.pearsonr(x, y)[0])
    if kind == "spearman":
        return float(stats.spearmanr(x, y)[0])
    raise ValueError(f"unknown correlation kind {kind!r}")


@dataclass
class EvaluationReport:
    rows: list[dict]  # one per (method, bidder)
    methods: dict[str, dict] = field(default_factory=dict)
    by_type: dict[str, dict[str, dict]] = field(default_factory=dict)
    by_rank: dict[str, dict[str, dict]] = field(default_factory=dict)
    bias: dict[str, dict] = field(default_factory=dict)
    correlations: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema_version": REPORT_SCHEMA_VERSION, "bidders": self.rows,
                "methods": self.methods, "by_type": self.by_type, "by_rank": self.by_rank,
                "bias_correction": self.bias, "correlations": self.correlations}


def _summary(errors: list[float]) -> dict:
    e = np.asarray(errors)
    return {"n": int(len(e)), "rms": rms_error(e), "mean": float(e.mean()),
            "std": float(e.std())}


def evaluate(records: Sequence[EstimateRecord], values: Mapping[int, float],
             modal_ranks: Mapping[int, tuple[int, bool]] | None = None,
             group: Mapping[int, str] | None = None) -> EvaluationReport:
    """Score estimates against ground truth.

    ``modal_ranks`` (bidder -> (rank, tied)) enables the per-rank tables and
    in-sample bias correction.  ``group`` optionally tags each bidder (for
    instance with a session or condition label) and is carried into the rows.
    """
    by_method: dict[str, list[EstimateRecord]] = defaultdict(list)
    for r in records:
        if r.bidder_id not in values:
            raise ValueError(f"no true value for bidder {r.bidder_id}")
        by_method[r.method].append(r)

    rows = []
    rep = EvaluationReport(rows)
    for method, recs in by_method.items():
        errs = []
        per_type: dict[float, list[float]] = defaultdict(list)
        per_rank: dict[int, list[float]] = defaultdict(list)
        for r in recs:
            v = values[r.bidder_id]
            e = relative_error(v, r.estimate)
            errs.append(e)
            per_type[v].append(e)
            row = {"method": method, "bidder_id": r.bidder_id, "value": v,
                   "estimate": r.estimate, "relative_error": e, "flags": list(r.flags)}
            if group is not None:
                row["group"] = group.get(r.bidder_id)
            if modal_ranks is not None:
                rank, tied = modal_ranks[r.bidder_id]
                row["modal_rank"] = rank
                row["modal_rank_tied"] = tied
                per_rank[rank].append(e)
            rows.append(row)
        rep.methods[method] = _summary(errs)
        rep.by_type[method] = {f"{v:g}": _summary(e) for v, e in sorted(per_type.items())}
        types = [values[r.bidder_id] for r in recs]
        corr = {}
        for kind in ("pearson", "spearman"):
            try:
                corr[kind] = correlation(types, errs, kind)
            except ValueError:
                corr[kind] = None
        rep.correlations[method] = {"x": "true_value", "y": "relative_error", **corr}
        if modal_ranks is not None:
            rep.by_rank[method] = {str(k): _summary(e) for k, e in sorted(per_rank.items())}
            ranks = {r.bidder_id: modal_ranks[r.bidder_id][0] for r in recs}
            est = {r.bidder_id: r.estimate for r in recs}
            factors = bias_factors(est, values, ranks)
            fixed = [relative_error(values[i], unbias(est[i], factors[ranks[i]])) for i in est]
            rep.bias[method] = {"factors": {str(k): f for k, f in factors.items()},
                                "raw_rms": rms_error(errs), "unbiased_rms": rms_error(fixed)}
    return rep
