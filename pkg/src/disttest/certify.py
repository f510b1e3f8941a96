"""Certified lower bounds on total-variation distance to structured classes.

Every bound here is the exact optimum of a linear program over a convex
relaxation of the class, so it lower-bounds the distance to any subclass:
PBDs and SIIRVs on ``[0, n(k-1)]`` are log-concave hence unimodal, and a
PBD with ``n`` summands has variance at most ``n/4``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, hstack, identity, vstack

from .dist_core import Pmf
from .errors import DomainError, NumericalError


def _base(p: np.ndarray, full_mass: bool):
    """Variables ``[q, t]``; ``t >= |p - q|``; objective ``sum t / 2`` (+ missing mass / 2)."""
    N = p.size
    I = identity(N, format="csr")
    A = vstack([hstack([-I, -I]), hstack([I, -I])]).tocsr()
    b = np.concatenate([-p, p])
    c = np.concatenate([np.zeros(N), 0.5 * np.ones(N)])
    if not full_mass:
        c[:N] -= 0.5
    return c, A, b


def _mono_rows(N: int, mode: int):
    # q[i] - q[i+1] <= 0 left of the mode, q[i+1] - q[i] <= 0 right of it
    rows, cols, vals = [], [], []
    for i in range(N - 1):
        s = 1.0 if i < mode else -1.0
        rows += [i, i]
        cols += [i, i + 1]
        vals += [s, -s]
    return coo_matrix((vals, (rows, cols)), shape=(max(N - 1, 0), 2 * N)).tocsr()


def _solve(c, A, b, Aeq, beq, N, const):
    res = linprog(c, A_ub=A, b_ub=b, A_eq=Aeq, b_eq=beq, bounds=[(0, None)] * (2 * N), method="highs")
    if res.status == 2:
        return math.inf
    if res.status != 0:
        raise NumericalError("LP solver failed", {"status": int(res.status), "message": res.message})
    return float(res.fun) + const


def tv_lower_bound(
    p: Pmf,
    lo: int,
    hi: int,
    unimodal: bool = True,
    var_max: float | None = None,
    full_mass: bool = True,
    cell: float = 0.5,
) -> float:
    """Minimum of ``d_TV(p, q)`` over pmfs ``q`` with the requested structure.

    ``q`` lives on ``[lo, hi]``.  With ``full_mass=False`` it may leak mass
    outside the window (which only costs distance, since the caller ensures
    ``p`` vanishes there).  The variance constraint is linearized by fixing
    the mean to a cell of width ``cell`` and bounding the second moment
    about the cell center by ``var_max + cell^2/4``.
    """
    if hi < lo:
        raise DomainError("empty window")
    if var_max is not None and not full_mass:
        raise DomainError("variance constraint needs full_mass")
    pw = p.on_window(lo, hi)
    outside = 1.0 - float(pw.sum())
    N = pw.size
    c, A, b = _base(pw, full_mass)
    # p mass outside the window always counts toward TV
    const = 0.5 * outside if full_mass else 0.5 * outside + 0.5
    x = np.arange(lo, hi + 1, dtype=float)
    sum_row = np.concatenate([np.ones(N), np.zeros(N)])[None, :]
    modes = range(N) if unimodal else [None]
    if var_max is None:
        cells = [None]
    else:
        cells = list(np.arange(lo, hi + cell, cell))
    best = math.inf
    for mode in modes:
        A_m = A if mode is None else vstack([A, _mono_rows(N, mode)]).tocsr()
        b_m = b if mode is None else np.concatenate([b, np.zeros(N - 1)])
        if not full_mass:
            A_m = vstack([A_m, coo_matrix(sum_row)]).tocsr()
            b_m = np.concatenate([b_m, [1.0]])
        for c0 in cells:
            Aeq, beq = (coo_matrix(sum_row), [1.0]) if full_mass else (None, None)
            Ai, bi = A_m, b_m
            if c0 is not None:
                center = c0 + cell / 2
                mean_row = np.concatenate([x, np.zeros(N)])
                sq_row = np.concatenate([(x - center) ** 2, np.zeros(N)])
                extra = np.vstack([mean_row, -mean_row, sq_row])
                Ai = vstack([A_m, coo_matrix(extra)]).tocsr()
                bi = np.concatenate([b_m, [c0 + cell, -c0, var_max + cell**2 / 4]])
            best = min(best, _solve(c, Ai, bi, Aeq, beq, N, const))
    return best


def tv_to_unimodal(p: Pmf, lo: int, hi: int, full_mass: bool = True) -> float:
    return tv_lower_bound(p, lo, hi, unimodal=True, full_mass=full_mass)


def tv_to_bounded_variance(p: Pmf, lo: int, hi: int, var_max: float, cell: float = 0.5) -> float:
    return tv_lower_bound(p, lo, hi, unimodal=False, var_max=var_max, cell=cell)


def support_gap(p: Pmf, lo: int, hi: int) -> float:
    """Mass of ``p`` outside ``[lo, hi]``: a TV lower bound to any class supported there."""
    return float(1.0 - p.on_window(lo, hi).sum())


def siirv_far_certificate(p: Pmf, n: int, k: int) -> float:
    """Lower bound on the distance from ``p`` to (n, k)-SIIRVs.

    The class is contained in unimodal pmfs on ``[0, n(k-1)]`` when ``k = 2``;
    for ``k > 2`` only the support bound applies.
    """
    hi = n * (k - 1)
    if k == 2:
        return max(tv_to_unimodal(p, 0, hi), tv_to_bounded_variance(p, 0, hi, n / 4))
    return support_gap(p, 0, hi)
