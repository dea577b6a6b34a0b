import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_log
from oracles import slot_and_price
from regret_econ.auction import Mechanism
from regret_econ.best_response import (VARIANTS, Inverter, Variant, best_response_set,
                                       estimate_best_response, response_curves, trimmed_mean)
from regret_econ.estimators import Method
from regret_econ.regret import DEFAULT_GRID, BidSequence, Window

GRID = DEFAULT_GRID


def with_bidder(position, own_bids, opponents=(10.0, 20.0, 30.0, 40.0)):
    own_bids = np.asarray(own_bids, dtype=float)
    rows = np.tile(np.asarray(opponents, dtype=float), (len(own_bids), 1))
    rows = np.insert(rows, position, own_bids, axis=1)
    return BidSequence(rows, (1, 2, 3, 4, 5), Mechanism.GSP)


def test_curves_constant_opponents():
    seq = with_bidder(4, [25.0] * 20)
    rc = response_curves(seq, 5, window=Window.full(20))
    assert rc.Q[GRID == 25][0] == pytest.approx(0.20)
    assert rc.TE[GRID == 25][0] == pytest.approx(4.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), col=st.integers(1, 5))
def test_curves_monotone_and_bounded(seed, col):
    seq = random_log(np.random.default_rng(seed), T=40, integer=False)
    rc = response_curves(seq, col, window=Window.full(40))
    assert np.all(np.diff(rc.Q) >= 0) and np.all(np.diff(rc.TE) >= -1e-12)
    assert rc.Q.min() >= 0.02 - 1e-12 and rc.Q.max() <= 0.38 + 1e-12


def test_top_bid_gets_top_ctr():
    rng = np.random.default_rng(1)
    bids = rng.uniform(0, 59, size=(50, 5))
    seq = BidSequence(bids, (1, 2, 3, 4, 5), Mechanism.GSP)
    assert response_curves(seq, 3, window=Window.full(50)).Q[-1] == pytest.approx(0.38)


def enumerated_br(position, v):
    """BR set by scoring all 60 grid bids with the scalar reference pricer."""
    others = [10.0, 20.0, 30.0, 40.0]
    u = []
    for b in GRID:
        a, p = slot_and_price("gsp", b, position, others)
        u.append(a * v - p)
    u = np.array(u)
    return GRID[u >= u.max() - 1e-9].tolist()


@pytest.mark.parametrize("position", [0, 2, 4])
@pytest.mark.parametrize("v", [0.0, 45.0, 1e6])
def test_br_set_matches_enumeration(position, v):
    seq = with_bidder(position, [25.0] * 10)
    rc = response_curves(seq, position + 1, window=Window.full(10))
    assert best_response_set(rc, v).tolist() == enumerated_br(position, v)


def test_br_set_examples_with_bidder_in_last_column():
    rc = response_curves(with_bidder(4, [25.0] * 10), 5, window=Window.full(10))
    assert best_response_set(rc, 0.0).tolist() == list(range(1, 11))
    assert best_response_set(rc, 1e6).tolist() == list(range(41, 61))
    # losing the tie at 30 still leaves slot 3 at price 20, so 30 is a best response too
    assert best_response_set(rc, 45.0).tolist() == list(range(21, 31))


def test_br_set_at_45_with_boundary_ties_against_the_bidder():
    rc = response_curves(with_bidder(2, [25.0] * 10), 3, window=Window.full(10))
    assert best_response_set(rc, 45.0).tolist() == list(range(21, 30))


def test_grid_inversion_constant_bid():
    seq = with_bidder(4, [25.0] * 40)
    rec = estimate_best_response(seq, 5, window=Window.full(40))
    hits = [int(v) for v in GRID if 25.0 in enumerated_br(4, v)]
    assert hits == list(range(min(hits), max(hits) + 1))
    assert rec.estimate == (min(hits) + max(hits)) / 2


def test_grid_inversion_recovers_value_of_an_optimal_bid():
    rng = np.random.default_rng(7)
    opp = rng.uniform(5, 55, size=(300, 4))
    own = np.zeros(300)
    seq = BidSequence(np.column_stack([opp, own]), (1, 2, 3, 4, 5), Mechanism.GSP)
    rc = response_curves(seq, 5, window=Window.full(300))
    b_opt = best_response_set(rc, 33.0)
    seq = BidSequence(np.column_stack([opp, np.full(300, b_opt[0])]), (1, 2, 3, 4, 5), Mechanism.GSP)
    rec = estimate_best_response(seq, 5, window=Window.full(300))
    assert abs(rec.estimate - 33) <= 0.5


def test_outlier_variant_drops_the_lone_60():
    bids = np.array([30.0] * 749 + [60.0])
    assert bids.std() == pytest.approx(1.095, abs=1e-3)
    assert trimmed_mean(bids) == 30.0
    seq = with_bidder(4, bids)
    clean = with_bidder(4, [30.0] * 750)
    w = Window.full(750)
    v = VARIANTS[Method.BR_FOC_OUTLIERS]
    assert estimate_best_response(seq, 5, v, w).estimate == estimate_best_response(clean, 5, v, w).estimate
    plain = estimate_best_response(seq, 5, VARIANTS[Method.BR_FOC], w)
    assert plain.diagnostics["b_star"] == pytest.approx(30.04)


def test_above_and_below_grid():
    rc = response_curves(with_bidder(4, [25.0] * 10), 5, window=Window.full(10))
    inv = Inverter(rc, np.arange(1, 61, dtype=float))
    assert inv.grid(1000.0) == (60.0, ("above_grid",))


def test_foc_on_smooth_curves():
    # many random opponents make Q and TE strictly increasing on the interior
    rng = np.random.default_rng(3)
    seq = BidSequence(np.column_stack([rng.uniform(0, 60, (2000, 4)), np.full(2000, 30.0)]),
                      (1, 2, 3, 4, 5), Mechanism.GSP)
    rc = response_curves(seq, 5, window=Window.full(2000))
    est, flags = Inverter(rc).foc(30.0)
    k = 29
    assert flags == ()
    assert est == pytest.approx((rc.TE[k + 1] - rc.TE[k - 1]) / (rc.Q[k + 1] - rc.Q[k - 1]))


def test_foc_degenerate_falls_back_to_grid():
    rc = response_curves(with_bidder(4, [25.0] * 10), 5, window=Window.full(10))
    est, flags = Inverter(rc).foc(25.0)
    assert "foc_degenerate" in flags


def test_variants_and_spans():
    rng = np.random.default_rng(4)
    seq = random_log(rng, T=100, integer=False)
    full = estimate_best_response(seq, 2, VARIANTS[Method.BR_FULL_GAME])
    assert full.window == Window(1, 100)
    assert full.method == "br-full-game"
    avg = estimate_best_response(seq, 2, VARIANTS[Method.BR_AVG_VALUE])
    assert avg.window == Window(51, 100) and avg.method == "br-avg-value"
    with pytest.raises(ValueError):
        Variant(solver="newton")
