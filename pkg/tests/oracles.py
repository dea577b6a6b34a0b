"""Slow, independent reference implementations used only by the tests."""
import numpy as np

ALPHA = (0.38, 0.29, 0.20, 0.11, 0.02)


def slot_and_price(mech, own_bid, own_idx, others, alpha=ALPHA):
    """Place one bid among opponents (identity ties) and price it, one scalar at a time."""
    entries = [(b, j if j < own_idx else j + 1) for j, b in enumerate(others)] + [(own_bid, own_idx)]
    entries.sort(key=lambda e: (-e[0], e[1]))
    k = next(p for p, e in enumerate(entries) if e[1] == own_idx)  # 0-based slot
    n = len(entries)
    if mech == "gsp":
        price = alpha[k] * entries[k + 1][0] if k + 1 < n else 0.0
    else:
        price = 0.0
        for j in range(k + 1, n):
            price = price + entries[j][0] * (alpha[j - 1] - alpha[j])
    return alpha[k], price


def double_loop_curve(mech, bids, col, values, grid, first, last, alpha=ALPHA):
    """Regret at every v by re-simulating every (v, b) pair auction by auction."""
    rows = [np.asarray(bids[t], dtype=float) for t in range(first - 1, last)]
    actual, opt = [], []
    for v in values:
        tot_actual = 0.0
        for r in rows:
            a, p = slot_and_price(mech, r[col], col, np.delete(r, col), alpha)
            tot_actual = tot_actual + (v * a - p)
        best = -np.inf
        for b in grid:
            tot = 0.0
            for r in rows:
                a, p = slot_and_price(mech, b, col, np.delete(r, col), alpha)
                tot = tot + (v * a - p)
            best = max(best, tot)
        actual.append(tot_actual)
        opt.append(best)
    return np.array(actual), np.array(opt)


def chain_terms(b, alpha=ALPHA):
    """v_k(d_k) = p_k - q_k d_k for slots k = 2..n (0-based lists, entry k-2)."""
    n = len(b)
    p, q = [], []
    for k in range(2, n + 1):
        gap = alpha[k - 2] - alpha[k - 1]
        p.append(alpha[k - 2] * b[k - 1] / gap)
        q.append(alpha[k - 1] * b[k] / gap if k < n else 0.0)
    return np.array(p), np.array(q)


def grid_min_perturbation(b, step=1e-3, lo=0.5, hi=1.5, alpha=ALPHA):
    """Exact minimum of sum (d - 1)^2 over a d-grid, for n = 5 bids.

    The chain constraints only couple neighbouring factors, so the grid
    minimum is found by dynamic programming from the bottom slot upward:
    exhaustive over the grid, without enumerating all of its points.
    """
    D = np.round(np.arange(lo, hi + step / 2, step), 12)
    p, q = chain_terms(b, alpha)
    cost = (D - 1.0) ** 2
    eps = 1e-12
    # slot 4 against slot 5 (whose factor is fixed at 1)
    f = np.where(p[2] - q[2] * D >= p[3] - q[3] - eps, cost, np.inf)
    # slot 3 against slot 4, then slot 2 against slot 3: for each d_k the
    # feasible d_{k+1} form a suffix of the grid because the right side falls
    # monotonically in d_{k+1}
    for k in (1, 0):
        lhs = p[k] - q[k] * D
        rhs = (p[k + 1] - q[k + 1] * D) - eps
        first = np.searchsorted(-rhs, -lhs, side="left")
        suffix = np.append(np.minimum.accumulate(f[::-1])[::-1], np.inf)
        f = cost + suffix[first]
    return float(f.min())


def naive_grid_perturbation(b, step, lo=0.5, hi=1.5, alpha=ALPHA):
    """Plain triple loop over the grid, for validating the dynamic program on coarse grids."""
    D = np.round(np.arange(lo, hi + step / 2, step), 12)
    p, q = chain_terms(b, alpha)
    best = np.inf
    for d2 in D:
        for d3 in D:
            v2, v3 = p[0] - q[0] * d2, p[1] - q[1] * d3
            if v2 < v3 - 1e-12:
                continue
            for d4 in D:
                v4 = p[2] - q[2] * d4
                if v3 >= v4 - 1e-12 and v4 >= p[3] - q[3] - 1e-12:
                    best = min(best, (d2 - 1) ** 2 + (d3 - 1) ** 2 + (d4 - 1) ** 2)
    return best


def random_near_equilibrium_profiles(seed, count, noise, alpha=ALPHA):
    """Equilibrium bids for random values, each bid jittered by a factor in [1-noise, 1+noise]."""
    from regret_econ.auction import CtrProfile
    from regret_econ.vcg_ne import equilibrium_bids
    ctrs = CtrProfile(alpha)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        v = np.sort(rng.uniform(5, 60, len(alpha)))[::-1]
        b = equilibrium_bids(v, ctrs) * rng.uniform(1 - noise, 1 + noise, len(alpha))
        out.append(np.sort(b)[::-1])
    return out
