"""Regret of a bidder against the best fixed bid in hindsight.

All utility totals are accumulated left to right over auctions (``np.cumsum``),
so a result can be reproduced bit for bit by a plain per-auction loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .auction import DEFAULT_CTRS, CtrProfile, Mechanism, own_tables, replay_tables

DEFAULT_GRID = np.arange(1, 61, dtype=float)


@dataclass(frozen=True)
class Window:
    """Inclusive, 1-based range of auction indices."""

    first: int
    last: int

    def __post_init__(self):
        if not 1 <= self.first <= self.last:
            raise ValueError(f"invalid window {self.first}:{self.last}")

    @classmethod
    def second_half(cls, T: int) -> "Window":
        return cls(T // 2 + 1, T) if T > 1 else cls(1, 1)

    @classmethod
    def full(cls, T: int) -> "Window":
        return cls(1, T)

    @classmethod
    def parse(cls, text: str) -> "Window":
        try:
            a, b = text.split(":")
            return cls(int(a), int(b))
        except ValueError:
            raise ValueError(f"window must look like FIRST:LAST, got {text!r}") from None

    @property
    def size(self) -> int:
        return self.last - self.first + 1

    def check(self, T: int) -> "Window":
        if self.last > T:
            raise ValueError(f"window {self.first}:{self.last} out of range for {T} auctions")
        return self

    def slice(self) -> slice:
        return slice(self.first - 1, self.last)

    def __str__(self):
        return f"{self.first}:{self.last}"


@dataclass(frozen=True)
class BidSequence:
    """Bid log: ``bids[t, j]`` is bidder ``bidder_ids[j]``'s bid in auction t+1.

    Column order is identity order and decides ties.
    """

    bids: np.ndarray
    bidder_ids: tuple[int, ...] = ()
    mechanism: Mechanism | None = None
    ctrs: CtrProfile | None = None

    def __post_init__(self):
        bids = np.array(self.bids, dtype=float)
        if bids.ndim != 2 or bids.shape[0] < 1 or bids.shape[1] < 2:
            raise ValueError("bids must be a (T, n) array with T >= 1 and n >= 2")
        if not np.all(np.isfinite(bids)) or np.any(bids < 0):
            raise ValueError("bids must be finite and nonnegative")
        bids.setflags(write=False)
        object.__setattr__(self, "bids", bids)
        ids = tuple(int(i) for i in self.bidder_ids) or tuple(range(1, bids.shape[1] + 1))
        if len(ids) != bids.shape[1]:
            raise ValueError(f"{len(ids)} bidder ids for {bids.shape[1]} columns")
        if list(ids) != sorted(set(ids)):
            raise ValueError("bidder ids must be distinct and ascending")
        object.__setattr__(self, "bidder_ids", ids)
        if self.mechanism is not None:
            object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))

    @property
    def T(self) -> int:
        return self.bids.shape[0]

    @property
    def n(self) -> int:
        return self.bids.shape[1]

    def column(self, bidder_id: int) -> int:
        try:
            return self.bidder_ids.index(int(bidder_id))
        except ValueError:
            raise KeyError(f"unknown bidder {bidder_id}") from None

    def default_window(self) -> Window:
        return Window.second_half(self.T)


@dataclass(frozen=True)
class RegretReport:
    actual: float
    opt: float
    opt_bids: tuple[float, ...]

    @property
    def regret(self) -> float:
        return self.opt - self.actual

    @property
    def relative(self) -> float | None:
        """Regret as a fraction of the optimum; None when the optimum is not positive."""
        return self.regret / self.opt if self.opt > 0 else None


@dataclass
class RegretCurve:
    """Regret of one bidder as a function of its hypothetical value."""

    bidder_id: int
    window: Window
    values: np.ndarray
    actual: np.ndarray
    opt: np.ndarray
    opt_bids: list[tuple[float, ...]] = field(repr=False)

    @property
    def regret(self) -> np.ndarray:
        return self.opt - self.actual

    @property
    def relative(self) -> np.ndarray:
        """Relative regret, NaN where the optimum is not positive."""
        out = np.full(len(self.values), np.nan)
        ok = self.opt > 0
        out[ok] = self.regret[ok] / self.opt[ok]
        return out

    def report(self, v: float) -> RegretReport:
        hit = np.flatnonzero(self.values == v)
        if not len(hit):
            raise KeyError(f"value {v} not on the curve grid")
        k = hit[0]
        return RegretReport(float(self.actual[k]), float(self.opt[k]), self.opt_bids[k])

    def scaled(self, c: float) -> "RegretCurve":
        """Same curve with every utility multiplied by ``c``."""
        return RegretCurve(self.bidder_id, self.window, self.values, self.actual * c,
                           self.opt * c, self.opt_bids)


def _resolve_ctx(seq: BidSequence, mechanism, ctrs):
    mechanism = mechanism if mechanism is not None else seq.mechanism
    if mechanism is None:
        raise ValueError("mechanism not given and not recorded on the bid sequence")
    ctrs = ctrs if ctrs is not None else (seq.ctrs or DEFAULT_CTRS)
    return Mechanism.parse(mechanism), ctrs


def _total(x: np.ndarray) -> np.ndarray:
    # sequential left-to-right sum over axis 0
    return np.cumsum(x, axis=0)[-1]


class BidderReplay:
    """Counterfactual tables for one bidder over a whole log, reused across windows."""

    def __init__(self, seq: BidSequence, bidder_id: int, grid=DEFAULT_GRID,
                 mechanism=None, ctrs=None):
        self.seq = seq
        self.bidder_id = bidder_id
        self.col = seq.column(bidder_id)
        self.grid = np.asarray(grid, dtype=float)
        if self.grid.ndim != 1 or not len(self.grid):
            raise ValueError("bid grid must be a nonempty 1-d sequence")
        self.mechanism, self.ctrs = _resolve_ctx(seq, mechanism, ctrs)
        self.grid_ctr, self.grid_pay = replay_tables(self.mechanism, seq.bids, self.col,
                                                     self.grid, self.ctrs)
        self.own_ctr, self.own_pay = own_tables(self.mechanism, seq.bids, self.col, self.ctrs)

    def _window(self, window):
        return (window or self.seq.default_window()).check(self.seq.T)

    def actual(self, v: float, window: Window | None = None) -> float:
        s = self._window(window).slice()
        return float(_total(v * self.own_ctr[s] - self.own_pay[s]))

    def fixed_bid_totals(self, v: float, window: Window | None = None) -> np.ndarray:
        """Summed utility of each grid bid played in every auction of the window."""
        s = self._window(window).slice()
        return _total(v * self.grid_ctr[s] - self.grid_pay[s])

    def report(self, v: float, window: Window | None = None) -> RegretReport:
        totals = self.fixed_bid_totals(v, window)
        best = totals.max()
        opt_bids = tuple(float(b) for b in self.grid[totals == best])
        return RegretReport(self.actual(v, window), float(best), opt_bids)

    def curve(self, values=DEFAULT_GRID, window: Window | None = None,
              vcg_shortcut: bool = False) -> RegretCurve:
        w = self._window(window)
        s = w.slice()
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or not len(values):
            raise ValueError("value grid must be a nonempty 1-d sequence")
        ctr, pay = self.grid_ctr[s], self.grid_pay[s]
        util = values[:, None, None] * ctr[None] - pay[None]  # (V, T, B)
        totals = np.cumsum(util, axis=1)[:, -1, :]
        own = values[:, None] * self.own_ctr[s][None] - self.own_pay[s][None]
        actual = np.cumsum(own, axis=1)[:, -1]
        if vcg_shortcut and self.mechanism is Mechanism.VCG:
            # truthful bidding is optimal in VCG: read off the b = v column
            cols = np.searchsorted(self.grid, values)
            on_grid = (cols < len(self.grid)) & (self.grid[np.minimum(cols, len(self.grid) - 1)] == values)
            opt = np.where(on_grid, totals[np.arange(len(values)), np.minimum(cols, len(self.grid) - 1)],
                           totals.max(axis=1))
        else:
            opt = totals.max(axis=1)
        opt_bids = [tuple(float(b) for b in self.grid[row == row.max()]) for row in totals]
        return RegretCurve(self.bidder_id, w, values, actual, opt, opt_bids)


def actual_utility(seq: BidSequence, bidder_id: int, v: float, window: Window | None = None,
                   mechanism=None, ctrs=None) -> float:
    mechanism, ctrs = _resolve_ctx(seq, mechanism, ctrs)
    w = (window or seq.default_window()).check(seq.T)
    col = seq.column(bidder_id)
    own_ctr, own_pay = own_tables(mechanism, seq.bids[w.slice()], col, ctrs)
    return float(_total(v * own_ctr - own_pay))


def optimal_fixed_utility(seq: BidSequence, bidder_id: int, v: float,
                          window: Window | None = None, grid=DEFAULT_GRID,
                          mechanism=None, ctrs=None) -> tuple[float, tuple[float, ...]]:
    """Best summed utility of a single bid from ``grid`` and every bid attaining it."""
    rep = BidderReplay(seq, bidder_id, grid, mechanism, ctrs).report(v, window)
    return rep.opt, rep.opt_bids


def regret(seq: BidSequence, bidder_id: int, v: float, window: Window | None = None,
           grid=DEFAULT_GRID, mechanism=None, ctrs=None) -> RegretReport:
    return BidderReplay(seq, bidder_id, grid, mechanism, ctrs).report(v, window)


def regret_curve(seq: BidSequence, bidder_id: int, values=DEFAULT_GRID, grid=DEFAULT_GRID,
                 window: Window | None = None, mechanism=None, ctrs=None,
                 vcg_shortcut: bool = False) -> RegretCurve:
    return BidderReplay(seq, bidder_id, grid, mechanism, ctrs).curve(values, window, vcg_shortcut)


def group_relative_regret(reports: Iterable[RegretReport]) -> float | None:
    """Summed regret over summed optimum; None when the summed optimum is not positive."""
    reports = list(reports)
    if not reports:
        raise ValueError("empty group")
    opt = sum(r.opt for r in reports)
    reg = sum(r.regret for r in reports)
    return reg / opt if opt > 0 else None


def group_regret(seq: BidSequence, values: dict[int, float], group: Sequence[int] | None = None,
                 window: Window | None = None, grid=DEFAULT_GRID, mechanism=None,
                 ctrs=None) -> float | None:
    group = list(group) if group is not None else list(seq.bidder_ids)
    missing = [i for i in group if i not in values]
    if missing:
        raise ValueError(f"no value for bidders {missing}")
    return group_relative_regret(
        regret(seq, i, values[i], window, grid, mechanism, ctrs) for i in group)


@dataclass(frozen=True)
class MomentaryPoint:
    block: int
    first: int
    last: int
    group: str
    relative: float | None
    partial: bool


def momentary_regret_series(seq: BidSequence, values: dict[int, float], window_len: int = 60,
                            grid=DEFAULT_GRID, mechanism=None, ctrs=None,
                            groups: dict[str, Sequence[int]] | None = None) -> list[MomentaryPoint]:
    """Group relative regret per consecutive block, with Opt recomputed inside each block.

    ``groups`` maps labels to bidder sets; the default is ``all`` plus one group
    per distinct value (labelled ``v=<value>``).
    """
    if window_len < 1:
        raise ValueError("window_len must be at least 1")
    if groups is None:
        groups = {"all": list(seq.bidder_ids)}
        for val in sorted(set(values[i] for i in seq.bidder_ids)):
            groups[f"v={val:g}"] = [i for i in seq.bidder_ids if values[i] == val]
    replays = {i: BidderReplay(seq, i, grid, mechanism, ctrs) for i in seq.bidder_ids}
    out = []
    for b, start in enumerate(range(1, seq.T + 1, window_len), start=1):
        w = Window(start, min(start + window_len - 1, seq.T))
        reports = {i: replays[i].report(values[i], w) for i in seq.bidder_ids}
        partial = w.size < window_len
        for label, members in groups.items():
            out.append(MomentaryPoint(b, w.first, w.last, label,
                                      group_relative_regret(reports[i] for i in members), partial))
    return out


def block_means(series: Sequence[MomentaryPoint], group: str = "all") -> np.ndarray:
    """Relative regret per block for one group (NaN where undefined)."""
    pts = [p for p in series if p.group == group]
    return np.array([np.nan if p.relative is None else p.relative for p in pts])
