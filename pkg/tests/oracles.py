"""Brute-force reference computations, independent of the package's solver."""
from __future__ import annotations

import itertools

import numpy as np


def grid_schedule(prices, alpha, power_cap, efficiency, soc_init, soc_terminal, energy_cap,
                  steps=500, negative_price_rule=True):
    """Best profit over net-output grids for horizons of 1 to 3 intervals.

    Every interval but one takes a net output on a grid of ``steps`` per
    ``power_cap``; the remaining interval closes the energy balance exactly.
    Each interval takes a turn as the closing one. Returns (profit, q).
    """
    lam = np.asarray(prices, float)
    alpha = np.asarray(alpha, float)
    T = lam.size
    eta = efficiency
    grid = np.linspace(-power_cap, power_cap, 2 * steps + 1)
    best, best_q = -np.inf, None
    for free in range(T):
        others = [t for t in range(T) if t != free]
        mesh = np.meshgrid(*([grid] * len(others)), indexing="ij") if others else []
        n = mesh[0].size if others else 1
        q = np.zeros((n, T))
        for k, t in enumerate(others):
            q[:, t] = mesh[k].ravel()
        delta = np.where(q > 0, -q / eta, -q * eta)  # stored energy change
        need = soc_terminal - soc_init - delta.sum(axis=1)
        q[:, free] = np.where(need > 0, -need / eta, -need * eta)
        delta[:, free] = need
        ok = np.abs(q[:, free]) <= power_cap * (1 + 1e-12)
        if negative_price_rule:
            ok &= np.all((q <= 0) | (lam >= 0), axis=1)
        soc = soc_init + np.cumsum(delta, axis=1)
        ok &= np.all((soc >= -1e-9) & (soc <= energy_cap + 1e-9), axis=1)
        if not np.any(ok):
            continue
        value = ((lam - alpha * q) * q).sum(axis=1)
        value[~ok] = -np.inf
        i = int(np.argmax(value))
        if value[i] > best:
            best, best_q = float(value[i]), q[i].copy()
    return best, best_q


def enumerate_lp_vertices(c, lower, upper, A_eq=None, b_eq=None, A_in=None, in_lo=None,
                          in_up=None, tol=1e-9):
    """Minimum of ``c @ x`` over a bounded polytope by visiting every vertex.

    Only for a handful of variables. Returns (value, x) or (inf, None) when
    the polytope is empty.
    """
    c = np.asarray(c, float)
    n = c.size
    rows, rhs = [], []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows += [e, e]
        rhs += [lower[i], upper[i]]
    if A_in is not None:
        for a, lo, up in zip(np.asarray(A_in, float), in_lo, in_up):
            if np.isfinite(lo):
                rows.append(a)
                rhs.append(lo)
            if np.isfinite(up):
                rows.append(a)
                rhs.append(up)
    eq_rows = [] if A_eq is None else list(np.asarray(A_eq, float))
    eq_rhs = [] if b_eq is None else list(b_eq)

    def feasible(x):
        if np.any(x < np.asarray(lower) - tol) or np.any(x > np.asarray(upper) + tol):
            return False
        for a, r in zip(eq_rows, eq_rhs):
            if abs(a @ x - r) > tol:
                return False
        if A_in is not None:
            v = np.asarray(A_in, float) @ x
            if np.any(v < np.asarray(in_lo) - tol) or np.any(v > np.asarray(in_up) + tol):
                return False
        return True

    best, best_x = np.inf, None
    k = n - len(eq_rows)
    for combo in itertools.combinations(range(len(rows)), k):
        M = np.array(eq_rows + [rows[j] for j in combo]).reshape(-1, n)
        if np.linalg.matrix_rank(M) < n:
            continue
        x = np.linalg.solve(M, np.array(eq_rhs + [rhs[j] for j in combo], float))
        if feasible(x):
            v = float(c @ x)
            if v < best - 1e-12:
                best, best_x = v, x
    return best, best_x


def grid_maker_quantity(nominal, alpha, c2, c1, q_max, steps=200_000):
    """Quantity maximizing ``(nominal - alpha*q)*q - c2*q**2 - c1*q`` on a grid."""
    q = np.linspace(0.0, q_max, steps + 1)
    value = (nominal - alpha * q) * q - c2 * q ** 2 - c1 * q
    return float(q[int(np.argmax(value))])


def bisect_clearing(curves, demand, lo=-1e4, hi=1e4, iters=200):
    """Price where the sum of clamped affine supplies meets demand."""
    def supply(lam):
        return sum(max(a * lam + b, 0.0) for a, b in curves)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if supply(mid) < demand:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
