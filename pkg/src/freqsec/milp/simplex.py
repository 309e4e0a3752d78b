"""Bounded-variable primal simplex with warm starts.

Rows become equalities with one slack each (slack bounds encode the sense);
variable bounds are handled implicitly, so branching in the MILP layer only
tightens bounds and never grows the tableau.  The basis inverse is kept
explicitly (product-form updates, periodic refactorisation); pricing runs
over a cached sparse copy of the columns.  Dantzig pricing falls back to
Bland's rule whenever the objective stalls.

Two ways in:

* cold start: all-slack basis; rows it cannot satisfy get virtual
  artificial columns (+-unit vectors) and a phase-1 cost drives them out;
* warm start: an optimal basis inherited from a parent node; a composite
  infeasibility-minimising pass repairs the handful of basic variables the
  tightened bounds pushed outside their range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

__all__ = ["LpResult", "SimplexNumericalError", "solve_lp", "FEAS_TOL", "DUAL_TOL"]

FEAS_TOL = 1e-7      # bound/row violation treated as feasible
DUAL_TOL = 1e-9      # reduced-cost threshold for entering candidates
PIVOT_TOL = 1e-9     # smallest |w_i| that can cap the ratio test
REFACTOR_EVERY = 64
STALL_LIMIT = 60      # non-improving pivots before Bland's rule kicks in

NB_LOWER, NB_UPPER, BASIC, NB_FREE = 0, 1, 2, 3


class SimplexNumericalError(RuntimeError):
    """The solve did not finish within the refactorisation/iteration budget."""


@dataclass
class LpResult:
    status: str                 # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None        # structural assignment when optimal
    objective: float | None
    iterations: int
    basis: np.ndarray | None = None     # warm-start handle for children
    statuses: np.ndarray | None = None


class _StandardForm:
    """Equality-form snapshot of a model: structural columns then slacks."""

    def __init__(self, model):
        a, senses, rhs = model.constraint_matrix()
        m, ns = a.shape
        self.m, self.ns = m, ns
        self.n = ns + m
        self.b = rhs
        self.c = np.concatenate([model.objective_array(), np.zeros(m)])
        slack_lo, slack_hi = np.zeros(m), np.zeros(m)
        for i, s in enumerate(senses):
            if s == "<=":
                slack_hi[i] = math.inf
            elif s == ">=":
                slack_lo[i] = -math.inf
        self.slack_lo, self.slack_hi = slack_lo, slack_hi
        self.dense = np.hstack([a, np.eye(m)]) if m else np.zeros((0, ns))
        self.csc = sparse.csc_matrix(self.dense)
        self.csr_t = sparse.csr_matrix(self.dense.T)

    def bounds(self, model, bound_overrides):
        lo, hi = model.bounds_arrays()
        if bound_overrides:
            for idx, (l, h) in bound_overrides.items():
                lo[idx], hi[idx] = l, h
        return (np.concatenate([lo, self.slack_lo]),
                np.concatenate([hi, self.slack_hi]))


def _standard_form(model) -> _StandardForm:
    cached = getattr(model, "_sf_cache", None)
    key = (model.n_vars, model.n_constraints)
    if cached is None or cached[0] != key:
        cached = (key, _StandardForm(model))
        model._sf_cache = cached
    return cached[1]


def solve_lp(model, bound_overrides: dict | None = None,
             max_iter: int | None = None, warm=None) -> LpResult:
    """Solve the LP relaxation of ``model`` (integrality dropped).

    ``bound_overrides`` maps a variable index to a (lower, upper) pair and
    is how branch and bound fixes binaries without copying the model.
    ``warm`` is an optional (basis, statuses) pair from a previous solve of
    the same model under nearby bounds.
    """
    sf = _standard_form(model)
    lo, hi = sf.bounds(model, bound_overrides)
    if np.any(lo > hi + 1e-12):
        return LpResult("infeasible", None, None, 0)

    if warm is not None:
        core = _Simplex(sf, lo.copy(), hi.copy(), max_iter=max_iter)
        try:
            result = core.solve(warm=warm)
            if result is not None:
                return result
        except SimplexNumericalError:
            pass   # fall through to a cold start

    core = _Simplex(sf, lo.copy(), hi.copy(), max_iter=max_iter)
    try:
        result = core.solve()
        if result is not None:
            return result
    except SimplexNumericalError:
        pass
    # conservative retry: frequent refactorisation keeps the basis inverse
    # clean on numerically nasty instances
    careful = _Simplex(sf, lo.copy(), hi.copy(), max_iter=max_iter,
                       refactor_every=8)
    result = careful.solve()
    if result is None:
        raise SimplexNumericalError("could not verify an optimal basis")
    return result


class _Simplex:
    def __init__(self, sf: _StandardForm, lo, hi, max_iter=None,
                 refactor_every=REFACTOR_EVERY):
        self.sf = sf
        self.lo = lo
        self.hi = hi
        self.m, self.n = sf.m, sf.n
        self.n_struct = sf.ns
        self.b = sf.b
        self.max_iter = max_iter or (80 * (self.m + self.n) + 2000)
        self.refactor_every = refactor_every
        self.iterations = 0
        # virtual artificial columns: +-unit vectors, one per patched row
        self.art_row = np.zeros(0, dtype=np.int64)
        self.art_sign = np.zeros(0)
        self.art_locked = np.zeros(0, dtype=bool)

    # -- column access -----------------------------------------------------

    @property
    def n_total(self):
        return self.n + len(self.art_row)

    def _col(self, j):
        """Dense column j (artificials materialised on demand)."""
        if j < self.n:
            return self.sf.dense[:, j]
        col = np.zeros(self.m)
        k = j - self.n
        col[self.art_row[k]] = self.art_sign[k]
        return col

    def _w_for(self, j):
        if j < self.n:
            sp = self.sf.csc
            w = np.zeros(self.m)
            start, end = sp.indptr[j], sp.indptr[j + 1]
            rows = sp.indices[start:end]
            if len(rows):
                w = self.Binv[:, rows] @ sp.data[start:end]
            return w
        k = j - self.n
        return self.art_sign[k] * self.Binv[:, self.art_row[k]].copy()

    def _price(self, y):
        """Reduced-cost adjustments y^T A for every column."""
        d = np.empty(self.n_total)
        d[:self.n] = self.sf.csr_t @ y
        if len(self.art_row):
            d[self.n:] = self.art_sign * y[self.art_row]
        return d

    # -- start points --------------------------------------------------------

    def _cold_start(self):
        """Nonbasic structurals at their finite bound (lower preferred),
        slacks basic; rows whose slack value violates its bounds get an
        artificial column so the starting basis is feasible."""
        n, m = self.n, self.m
        finite_lo = np.isfinite(self.lo[:n])
        finite_hi = np.isfinite(self.hi[:n])
        self.status = np.where(finite_lo, NB_LOWER,
                               np.where(finite_hi, NB_UPPER, NB_FREE)).astype(np.int8)
        self.vals = np.where(finite_lo, self.lo[:n],
                             np.where(finite_hi, self.hi[:n], 0.0))

        xstruct = self.vals[:self.n_struct].copy()
        resid = self.b - self.sf.csc[:, :self.n_struct] @ xstruct
        self.basis = np.arange(self.n_struct, n, dtype=np.int64)
        self.status[self.basis] = BASIC
        self.xB = resid.copy()
        self.Binv = np.eye(m)

        art_rows, art_signs, art_vals = [], [], []
        for i in range(m):
            s_lo, s_hi = self.lo[self.basis[i]], self.hi[self.basis[i]]
            if s_lo - FEAS_TOL <= resid[i] <= s_hi + FEAS_TOL:
                continue
            slack_idx = self.basis[i]
            park = s_lo if resid[i] < s_lo else s_hi
            self.status[slack_idx] = NB_LOWER if park == s_lo else NB_UPPER
            self.vals[slack_idx] = park
            gap = resid[i] - park
            art_rows.append(i)
            art_signs.append(1.0 if gap >= 0 else -1.0)
            art_vals.append(abs(gap))
        self.art_row = np.array(art_rows, dtype=np.int64)
        self.art_sign = np.array(art_signs)
        self.art_locked = np.zeros(len(art_rows), dtype=bool)
        if len(art_rows):
            n_art = len(art_rows)
            self.lo = np.concatenate([self.lo, np.zeros(n_art)])
            self.hi = np.concatenate([self.hi, np.full(n_art, math.inf)])
            self.vals = np.concatenate([self.vals, np.zeros(n_art)])
            self.status = np.concatenate(
                [self.status, np.full(n_art, NB_LOWER, dtype=np.int8)])
            for k, (i, val) in enumerate(zip(art_rows, art_vals)):
                j = self.n + k
                self.basis[i] = j
                self.status[j] = BASIC
                self.xB[i] = val
                self.Binv[i, i] = self.art_sign[k]

    def _warm_start(self, warm) -> bool:
        """Adopt a previous basis; returns False if it cannot be used."""
        basis, statuses = warm
        if (len(basis) != self.m or np.any(basis >= self.n)
                or len(np.unique(basis)) != self.m or len(statuses) != self.n):
            return False
        self.basis = basis.astype(np.int64).copy()
        self.status = statuses.astype(np.int8).copy()
        self.status[self.basis] = BASIC
        self.vals = np.zeros(self.n)
        nb = self.status != BASIC
        at_upper = nb & (self.status == NB_UPPER) & np.isfinite(self.hi)
        at_lower = nb & ~at_upper & np.isfinite(self.lo)
        free = nb & ~at_upper & ~at_lower
        self.vals[at_upper] = self.hi[at_upper]
        self.vals[at_lower] = self.lo[at_lower]
        self.status[at_lower] = NB_LOWER
        self.status[at_upper] = NB_UPPER
        self.status[free] = NB_FREE
        try:
            self._refactor()
        except SimplexNumericalError:
            return False
        return True

    # -- linear algebra ----------------------------------------------------

    def _basis_matrix(self):
        B = np.empty((self.m, self.m))
        for r, j in enumerate(self.basis):
            B[:, r] = self._col(j)
        return B

    def _refactor(self):
        try:
            self.Binv = np.linalg.inv(self._basis_matrix())
        except np.linalg.LinAlgError as exc:
            raise SimplexNumericalError("basis matrix became singular") from exc
        xall = self.vals.copy()
        xall[self.basis] = 0.0
        rhs = self.b - self.sf.csc @ xall[:self.n]
        for k in range(len(self.art_row)):
            j = self.n + k
            if self.status[j] != BASIC:
                rhs[self.art_row[k]] -= self.art_sign[k] * xall[j]
        self.xB = self.Binv @ rhs

    def _pivot(self, r, j, w):
        piv = w[r]
        if abs(piv) < 1e-11:
            raise SimplexNumericalError("pivot element vanished")
        self.Binv[r] /= piv
        wcol = w.copy()
        wcol[r] = 0.0
        self.Binv -= np.outer(wcol, self.Binv[r])
        self.basis[r] = j

    # -- pricing loop --------------------------------------------------------

    def _infeasibility(self):
        lb = self.lo[self.basis]
        ub = self.hi[self.basis]
        return (np.maximum(lb - self.xB, 0.0).sum()
                + np.maximum(self.xB - ub, 0.0).sum())

    def _run_phase(self, cost, allow_unbounded, composite=False):
        """Price/ratio-test loop; returns "optimal" or "unbounded".

        In composite mode the cost is recomputed every iteration from the
        basic bound violations (feasibility restoration after a warm start);
        the loop ends once every basic variable is back inside its range.
        """
        m = self.m
        bland = False
        stall = 0
        since_refactor = 0
        while True:
            if self.iterations >= self.max_iter:
                raise SimplexNumericalError(
                    f"simplex iteration limit {self.max_iter} exceeded")
            if since_refactor >= self.refactor_every:
                self._refactor()
                since_refactor = 0

            lb_b = self.lo[self.basis]
            ub_b = self.hi[self.basis]
            below = self.xB < lb_b - FEAS_TOL
            above = self.xB > ub_b + FEAS_TOL
            if composite:
                if not (below.any() or above.any()):
                    return "optimal"
                cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            else:
                cB = cost[self.basis]

            y = cB @ self.Binv
            d = (0.0 if composite else cost[:self.n_total]) - self._price(y)
            fixed = self.lo >= self.hi
            viol = np.zeros(self.n_total)
            lower_mask = (self.status == NB_LOWER) & ~fixed
            upper_mask = (self.status == NB_UPPER) & ~fixed
            free_mask = self.status == NB_FREE
            viol[lower_mask] = -d[lower_mask]
            viol[upper_mask] = d[upper_mask]
            viol[free_mask] = np.abs(d[free_mask])

            candidates = np.nonzero(viol > DUAL_TOL)[0]
            if len(candidates) == 0:
                if composite:
                    # no direction improves the remaining infeasibility
                    return "stuck" if self._infeasibility() > 1e-6 else "optimal"
                return "optimal"
            if bland:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmax(viol[candidates])])
            sigma = 1.0 if (self.status[j] == NB_LOWER
                            or (self.status[j] == NB_FREE and d[j] < 0)) else -1.0

            w = self._w_for(j)
            coef = -sigma * w
            ratios = np.full(m, math.inf)
            if composite:
                # feasible basics block at their bounds; infeasible ones
                # block where they regain feasibility
                up = coef > PIVOT_TOL
                dn = coef < -PIVOT_TOL
                tgt_up = np.where(below, lb_b, ub_b)
                tgt_dn = np.where(above, ub_b, lb_b)
                sel = up & np.isfinite(tgt_up)
                ratios[sel] = (tgt_up[sel] - self.xB[sel]) / coef[sel]
                sel = dn & np.isfinite(tgt_dn)
                ratios[sel] = (tgt_dn[sel] - self.xB[sel]) / coef[sel]
            else:
                up = coef > PIVOT_TOL
                if up.any():
                    ratios[up] = (ub_b[up] - self.xB[up]) / coef[up]
                dn = coef < -PIVOT_TOL
                if dn.any():
                    ratios[dn] = (lb_b[dn] - self.xB[dn]) / coef[dn]
            np.maximum(ratios, 0.0, out=ratios)

            t_bound = self.hi[j] - self.lo[j]
            t_basic = ratios.min() if m else math.inf
            t = min(t_bound, t_basic)
            if not math.isfinite(t):
                if composite:
                    return "stuck"
                if allow_unbounded:
                    return "unbounded"
                raise SimplexNumericalError("phase-1 ray; should be impossible")

            if t_bound <= t_basic:
                # entering variable flips to its opposite bound
                self.xB -= sigma * t_bound * w
                if self.status[j] == NB_LOWER:
                    self.status[j], self.vals[j] = NB_UPPER, self.hi[j]
                else:
                    self.status[j], self.vals[j] = NB_LOWER, self.lo[j]
            else:
                blocking = np.nonzero(ratios <= t + 1e-12)[0]
                if bland:
                    r = int(blocking[np.argmin(self.basis[blocking])])
                else:
                    r = int(blocking[np.argmax(np.abs(w[blocking]))])
                leaving = self.basis[r]
                enter_val = self.vals[j] + sigma * t
                self.xB -= sigma * t * w
                if composite and (below[r] or above[r]):
                    land = lb_b[r] if below[r] else ub_b[r]
                else:
                    land = ub_b[r] if coef[r] > 0 else lb_b[r]
                if land == self.lo[leaving]:
                    self.status[leaving], self.vals[leaving] = NB_LOWER, land
                else:
                    self.status[leaving], self.vals[leaving] = NB_UPPER, land
                # artificials never come back once they leave the basis
                if leaving >= self.n:
                    self.lo[leaving] = self.hi[leaving] = 0.0
                    self.vals[leaving] = 0.0
                self._pivot(r, j, w)
                self.status[j] = BASIC
                self.xB[r] = enter_val

            self.iterations += 1
            since_refactor += 1
            if viol[j] * t < 1e-12:
                stall += 1
                if stall >= STALL_LIMIT:
                    bland = True
            else:
                stall = 0
                bland = False

    def _evict_basic_artificials(self):
        """Degenerate pivots to push zero-valued artificials out of the basis;
        rows with no eligible pivot column are redundant and keep a locked
        artificial."""
        for r in range(self.m):
            if self.basis[r] < self.n:
                continue
            row = self.sf.csr_t @ self.Binv[r]
            choices = np.nonzero((np.abs(row) > 1e-7)
                                 & (self.status[:self.n] != BASIC))[0]
            if len(choices) == 0:
                continue
            j = int(choices[0])
            leaving = self.basis[r]
            w = self._w_for(j)
            self._pivot(r, j, w)
            self.status[leaving] = NB_LOWER
            self.xB[r] = self.vals[j]
            self.status[j] = BASIC
        for k in range(len(self.art_row)):
            j = self.n + k
            self.lo[j] = self.hi[j] = 0.0
            if self.status[j] != BASIC:
                self.vals[j] = 0.0

    # -- driver --------------------------------------------------------------

    def _solution(self):
        xall = self.vals.copy()
        xall[self.basis] = self.xB
        return xall

    def _finish(self):
        """Verify the claimed optimum on a freshly inverted basis."""
        self._refactor()
        outcome = self._run_phase(self._full_cost(), allow_unbounded=True)
        if outcome == "unbounded":
            return LpResult("unbounded", None, None, self.iterations)
        xall = self._solution()
        lhs = self.sf.csc @ xall[:self.n]
        if len(self.art_row):
            np.add.at(lhs, self.art_row, self.art_sign * xall[self.n:])
        resid = np.abs(lhs - self.b)
        resid_max = float(resid.max(initial=0.0))
        bound_err = max(float(np.max(self.lo - xall, initial=0.0)),
                        float(np.max(xall - self.hi, initial=0.0)))
        scale = 1.0 + float(np.max(np.abs(self.b), initial=0.0))
        if resid_max <= 1e-6 * scale and bound_err <= 1e-6 * scale:
            x = xall[:self.n_struct]
            obj = float(self.sf.c[:self.n_struct] @ x)
            return LpResult("optimal", x, obj, self.iterations,
                            basis=self.basis.copy(),
                            statuses=self.status[:self.n].copy())
        return None

    def _full_cost(self):
        cost = np.zeros(self.n_total)
        cost[:self.n] = self.sf.c
        return cost

    def solve(self, warm=None) -> LpResult | None:
        if warm is not None:
            if not self._warm_start(warm):
                return None
            outcome = self._run_phase(None, allow_unbounded=False, composite=True)
            if outcome == "stuck":
                # confirm on a freshly inverted basis before trusting the
                # infeasibility certificate
                self._refactor()
                outcome = self._run_phase(None, allow_unbounded=False,
                                          composite=True)
                if outcome == "stuck":
                    if self._infeasibility() > 1e-6:
                        return LpResult("infeasible", None, None,
                                        self.iterations)
                    return None
        else:
            self._cold_start()
            if len(self.art_row):
                phase1 = np.zeros(self.n_total)
                phase1[self.n:] = 1.0
                self._run_phase(phase1, allow_unbounded=False)
                art_sum = float(sum(self.xB[r] for r in range(self.m)
                                    if self.basis[r] >= self.n))
                if art_sum > 1e-6:
                    return LpResult("infeasible", None, None, self.iterations)
                self._evict_basic_artificials()

        outcome = self._run_phase(self._full_cost(), allow_unbounded=True)
        if outcome == "unbounded":
            return LpResult("unbounded", None, None, self.iterations)
        result = self._finish()
        if result is None and warm is not None:
            return None   # hand over to the cold path
        return result
