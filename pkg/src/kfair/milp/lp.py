"""Dense bounded-variable simplex with warm starts.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``
and finite bounds ``lower <= x <= upper``.

Every row gets a slack (inequalities only) and an artificial column, so the
column set is the same for every bound vector of a given problem.  A cold
start runs the two-phase primal method; artificials are then fixed at zero
and stay in the matrix, which keeps a final basis reusable.  A warm start
refactorizes a previous basis under new bounds, restores primal
feasibility with the dual simplex and polishes with the primal method.

Pricing is steepest edge, read exactly off the dense tableau.  After a run of
degenerate steps the primal method switches to Bland's smallest-index rule
for the rest of the phase, which rules out cycling.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..exceptions import InputError, NumericalError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-9
COST_TOL = 1e-10
DEGENERATE_RUN = 30


@dataclass
class LPResult:
    status: str
    x: np.ndarray = None
    fun: float = None
    nit: int = 0
    # (basis, at_upper, artificial signs) for warm starts
    state: tuple = None

    @property
    def success(self):
        return self.status == OPTIMAL


class _Tableau:
    """``T[:m, :n]`` is ``B^-1 M``, ``T[:m, n]`` the basic values and the
    last row holds reduced costs."""

    def __init__(self, T, basis, lower, upper, at_upper, maxiter, deadline=None):
        # pivot writes through a flat view, which needs C order
        self.T = np.ascontiguousarray(T)
        self.basis = basis
        self.lower = lower
        self.upper = upper
        self.at_upper = at_upper
        self.nit = 0
        self.maxiter = maxiter
        self.deadline = deadline

    def exhausted(self):
        if self.nit >= self.maxiter:
            return True
        # the clock is read every 64 pivots only
        return (self.deadline is not None and self.nit % 64 == 0
                and time.monotonic() > self.deadline)

    def nonbasic_values(self):
        return np.where(self.at_upper, self.upper, self.lower)

    def values(self):
        y = self.nonbasic_values()
        y[self.basis] = self.T[:-1, -1]
        return y

    def pivot(self, r, j):
        """Swap column ``j`` into row ``r``; basic values are left to the caller."""
        T = self.T
        p = T[r, j]
        if not np.isfinite(p) or abs(p) < 1e-12:
            raise NumericalError(f"singular pivot {p!r}")
        rhs = T[:, -1].copy()
        T[r] /= p
        col = T[:, j].copy()
        col[r] = 0.0
        # tableau rows and columns are sparse; touch only their intersection
        nz = np.flatnonzero(col)
        nzc = np.flatnonzero(T[r])
        if nz.size and nzc.size:
            # flat indices gather and scatter faster than np.ix_
            flat = (nz[:, None] * T.shape[1] + nzc).ravel()
            T.reshape(-1)[flat] -= np.outer(col[nz], T[r, nzc]).ravel()
        T[:, j] = 0.0
        T[r, j] = 1.0
        T[:, -1] = rhs
        self.basis[r] = j
        self.at_upper[j] = False
        self.nit += 1

    def _step(self, j, r, theta, leave_upper):
        """Move nonbasic ``j`` by ``theta``; pivot it into row ``r`` (or flip)."""
        T = self.T
        T[:-1, -1] -= theta * T[:-1, j]
        if r < 0:
            self.at_upper[j] = not self.at_upper[j]
            self.nit += 1
            return
        entering = (self.upper[j] if self.at_upper[j] else self.lower[j]) + theta
        leaving = self.basis[r]
        self.pivot(r, j)
        T[r, -1] = entering
        self.at_upper[leaving] = leave_upper
        if not np.all(np.isfinite(T[:, -1])):
            raise NumericalError("non-finite tableau after pivot")

    def primal(self, movable):
        T = self.T
        lo, ub = self.lower, self.upper
        bland = False
        degenerate = 0
        while True:
            if self.exhausted():
                return ITERATION_LIMIT
            d = T[-1, :-1]
            viol = np.where(self.at_upper, d, -d)
            candidates = np.flatnonzero((viol > COST_TOL) & movable)
            if candidates.size == 0:
                return OPTIMAL
            if bland:
                j = int(candidates[0])
            else:
                # steepest edge: the tableau column is the exact edge direction
                cols = T[:-1, candidates]
                norms = 1.0 + np.einsum("ij,ij->j", cols, cols)
                j = int(candidates[np.argmax(viol[candidates] ** 2 / norms)])
            s = -1.0 if self.at_upper[j] else 1.0
            alpha = s * T[:-1, j]
            beta = T[:-1, -1]
            lob, ubb = lo[self.basis], ub[self.basis]
            t = ub[j] - lo[j]
            r, leave_upper = -1, False
            dec = np.flatnonzero(alpha > PIVOT_TOL)
            inc = np.flatnonzero((alpha < -PIVOT_TOL) & np.isfinite(ubb))
            if dec.size or inc.size:
                ratios = np.concatenate([np.maximum(beta[dec] - lob[dec], 0.0) / alpha[dec],
                                         np.maximum(ubb[inc] - beta[inc], 0.0) / -alpha[inc]])
                rows = np.concatenate([dec, inc])
                best = ratios.min()
                if best < t:
                    tied = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, best))
                    # lowest basic index among ties (Bland's leaving rule)
                    k = tied[np.argmin(self.basis[rows[tied]])]
                    r, t, leave_upper = int(rows[k]), float(best), bool(k >= dec.size)
            if not np.isfinite(t):
                return UNBOUNDED
            if t <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
            self._step(j, r, s * t, leave_upper)

    def dual(self, movable, feas_tol):
        """Dual simplex: keeps reduced costs optimal while fixing basic bounds."""
        T = self.T
        lo, ub = self.lower, self.upper
        while True:
            if self.exhausted():
                return ITERATION_LIMIT
            beta = T[:-1, -1]
            lob, ubb = lo[self.basis], ub[self.basis]
            below = lob - beta
            above = beta - ubb
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= feas_tol * max(1.0, abs(beta[r])):
                return OPTIMAL
            row = T[r, :-1]
            d = T[-1, :-1]
            to_lower = below[r] > above[r]
            sign = -1.0 if to_lower else 1.0
            # entering j must move the leaving value toward its violated bound
            ok = movable & np.where(self.at_upper, sign * row < -PIVOT_TOL,
                                    sign * row > PIVOT_TOL)
            ok[self.basis] = False
            cand = np.flatnonzero(ok)
            if cand.size == 0:
                return INFEASIBLE
            ratios = np.abs(d[cand]) / np.abs(row[cand])
            best = ratios.min()
            tied = cand[ratios <= best + 1e-12 * max(1.0, best)]
            j = int(tied[np.argmax(np.abs(row[tied]))])
            target = lob[r] if to_lower else ubb[r]
            theta = (beta[r] - target) / row[j]
            self._step(j, r, theta, not to_lower)


class _Standard:
    """The fixed column layout ``[structural | slacks | artificials]``."""

    def __init__(self, c, A_ub, b_ub, A_eq, b_eq):
        n = c.shape[0]
        m1, m2 = A_ub.shape[0], A_eq.shape[0]
        self.n, self.m1, self.m = n, m1, m1 + m2
        self.A = np.zeros((self.m, n + m1))
        self.A[:m1, :n] = A_ub
        self.A[:m1, n:] = np.eye(m1)
        self.A[m1:, :n] = A_eq
        self.b = np.concatenate([b_ub, b_eq])
        self.c = c

    def matrix(self, signs):
        return np.hstack([self.A, np.diag(signs)])

    def bounds(self, lower, upper, art_upper):
        m, m1 = self.m, self.m1
        lo = np.concatenate([lower, np.zeros(m1), np.zeros(m)])
        hi = np.concatenate([upper, np.full(m1, np.inf), art_upper])
        return lo, hi


def _build(std, signs, cols, basis, lo, hi, at_upper, limit):
    """Tableau over the global columns ``cols`` for the global ``basis``.

    Columns outside ``cols`` are nonbasic and fixed; their values move to
    the right-hand side.
    """
    M = std.matrix(signs)
    xn = np.where(at_upper, hi, lo)
    xn[basis] = 0.0
    try:
        sol = np.linalg.solve(M[:, basis], np.column_stack([M[:, cols], std.b - M @ xn]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular warm-start basis: {exc}") from None
    if not np.all(np.isfinite(sol)):
        raise NumericalError("non-finite warm-start factorization")
    T = np.zeros((M.shape[0] + 1, cols.size + 1))
    T[:-1] = sol
    local = np.searchsorted(cols, basis)
    tab = _Tableau(T, local, lo[cols], hi[cols], at_upper[cols].copy(), *limit)
    tab.cols = cols
    return tab


def _set_costs(tab, cost):
    T = tab.T
    T[-1, :] = 0.0
    T[-1, :-1] = cost - cost[tab.basis] @ T[:-1, :-1]
    T[-1, tab.basis] = 0.0


def _drop_columns(tab, keep):
    """Remove nonbasic local columns outside the boolean mask ``keep``."""
    keep = keep.copy()
    keep[tab.basis] = True
    new_index = np.cumsum(keep) - 1
    tab.T = np.ascontiguousarray(
        np.column_stack([tab.T[:, :-1][:, keep], tab.T[:, -1]]))
    tab.basis = new_index[tab.basis]
    tab.lower, tab.upper = tab.lower[keep], tab.upper[keep]
    tab.at_upper = tab.at_upper[keep]
    tab.cols = tab.cols[keep]


def _finish(tab, std, glo, ghi, signs, status):
    if status != OPTIMAL:
        return LPResult(status, nit=tab.nit)
    y = np.array(glo, dtype=float)
    y[tab.cols] = tab.values()
    x = y[:std.n].copy()
    at_upper = np.zeros(glo.shape[0], dtype=bool)
    at_upper[tab.cols] = tab.at_upper
    return LPResult(OPTIMAL, x, float(std.c @ x), tab.nit,
                    (tab.cols[tab.basis].copy(), at_upper, signs))


def _cold(std, lower, upper, limit, feas_tol):
    n, m1, m = std.n, std.m1, std.m
    resid = std.b - std.A[:, :n] @ lower
    slack_ok = np.zeros(m, dtype=bool)
    slack_ok[:m1] = resid[:m1] >= 0
    signs = np.where(resid >= 0, 1.0, -1.0)
    glo, ghi = std.bounds(lower, upper, np.where(slack_ok, 0.0, np.inf))
    free = np.flatnonzero(upper - lower > 1e-12)
    arts = n + m1 + np.flatnonzero(~slack_ok)
    cols = np.concatenate([free, n + np.arange(m1), arts]).astype(int)
    basis = np.where(slack_ok, n + np.arange(m), n + m1 + np.arange(m))
    tab = _build(std, signs, cols, basis, glo, ghi, np.zeros(glo.shape[0], dtype=bool),
                 limit)
    is_art = tab.cols >= n + m1
    if arts.size:
        cost = np.where(is_art, 1.0, 0.0)
        _set_costs(tab, cost)
        status = tab.primal(tab.upper - tab.lower > 1e-12)
        if status == ITERATION_LIMIT:
            return tab, glo, ghi, signs, status
        scale = max(1.0, float(np.max(np.abs(std.b), initial=0.0)))
        if float(np.sum(tab.values()[is_art])) > feas_tol * scale:
            return tab, glo, ghi, signs, INFEASIBLE
        ghi = ghi.copy()
        ghi[n + m1:] = 0.0
        tab.upper = tab.upper.copy()
        tab.upper[is_art] = 0.0
        _drop_columns(tab, ~is_art)
    cost = np.zeros(tab.cols.size)
    structural = tab.cols < n
    cost[structural] = std.c[tab.cols[structural]]
    _set_costs(tab, cost)
    return tab, glo, ghi, signs, tab.primal(tab.upper - tab.lower > 1e-12)


def _warm(std, lower, upper, state, limit, feas_tol):
    basis, at_upper, signs = state
    n, m1, m = std.n, std.m1, std.m
    glo, ghi = std.bounds(lower, upper, np.zeros(m))
    free = np.flatnonzero(upper - lower > 1e-12)
    cols = np.union1d(np.concatenate([free, n + np.arange(m1)]), basis).astype(int)
    tab = _build(std, signs, cols, np.asarray(basis), glo, ghi, at_upper, limit)
    cost = np.zeros(cols.size)
    structural = cols < n
    cost[structural] = std.c[cols[structural]]
    _set_costs(tab, cost)
    lo, hi = tab.lower, tab.upper
    movable = hi - lo > 1e-12
    # nonbasic variables on the wrong side of their reduced cost are moved to
    # the bound that restores dual feasibility before the dual method starts
    d = tab.T[-1, :-1]
    nb = np.ones(d.shape[0], dtype=bool)
    nb[tab.basis] = False
    flip = nb & movable & (((d < -COST_TOL) & ~tab.at_upper & np.isfinite(hi))
                           | ((d > COST_TOL) & tab.at_upper))
    for j in np.flatnonzero(flip):
        delta = (lo[j] - hi[j]) if tab.at_upper[j] else (hi[j] - lo[j])
        tab.T[:-1, -1] -= delta * tab.T[:-1, j]
        tab.at_upper[j] = not tab.at_upper[j]
    status = tab.dual(movable, feas_tol)
    if status == OPTIMAL:
        status = tab.primal(movable)
    return tab, glo, ghi, signs, status


def _check(c, A_ub, b_ub, A_eq, b_eq, lower, upper):
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.shape[0]
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float).reshape(-1)
    if upper is None:
        raise InputError("every variable needs a finite upper bound")
    upper = np.asarray(upper, dtype=float).reshape(-1)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise InputError("variable bounds must be finite")
    return c, A_ub, b_ub, A_eq, b_eq, lower, upper


class LinearProgram:
    """A fixed constraint system solved repeatedly under changing bounds."""

    def __init__(self, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, maxiter=20_000,
                 feas_tol=FEAS_TOL):
        n = np.asarray(c).reshape(-1).shape[0]
        c, A_ub, b_ub, A_eq, b_eq, _, _ = _check(c, A_ub, b_ub, A_eq, b_eq, None, np.zeros(n))
        self.std = _Standard(c, A_ub, b_ub, A_eq, b_eq)
        self.maxiter = maxiter
        self.feas_tol = feas_tol

    def solve(self, lower, upper, warm=None, deadline=None):
        """Optimize under new bounds; past ``deadline`` (a ``time.monotonic``
        value) the result is ITERATION_LIMIT."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InputError("variable bounds must be finite")
        if np.any(lower > upper + self.feas_tol):
            return LPResult(INFEASIBLE)
        upper = np.maximum(upper, lower)
        limit = (self.maxiter, deadline)
        if warm is not None:
            try:
                out = _warm(self.std, lower, upper, warm, limit, self.feas_tol)
                if out[-1] in (OPTIMAL, INFEASIBLE):
                    return _finish(out[0], self.std, *out[1:])
            except NumericalError:
                pass
        out = _cold(self.std, lower, upper, limit, self.feas_tol)
        return _finish(out[0], self.std, *out[1:])


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lower=None, upper=None,
             maxiter=20_000, feas_tol=FEAS_TOL, warm=None):
    """Minimize ``c @ x`` over a bounded polyhedron.

    Every variable needs finite bounds; ``lower`` defaults to 0 and
    ``upper`` is required.  ``warm`` takes the ``state`` of an earlier result
    on the same constraint system.  Raises :class:`NumericalError` when a
    cold-start pivot becomes singular.
    """
    c, A_ub, b_ub, A_eq, b_eq, lower, upper = _check(c, A_ub, b_ub, A_eq, b_eq, lower, upper)
    lp = LinearProgram(c, A_ub, b_ub, A_eq, b_eq, maxiter, feas_tol)
    return lp.solve(lower, upper, warm)
