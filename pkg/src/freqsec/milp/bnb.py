"""LP-relaxation branch and bound over binary variables.

Nodes tighten variable bounds only (the simplex handles bounds natively,
so the tableau never grows).  The incumbent is the best integral solution
found; the global lower bound is the smallest bound carried by any open or
abandoned node.  No cutting planes.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from .simplex import SimplexNumericalError, solve_lp

__all__ = ["SolveConfig", "MilpResult", "solve_milp", "INTEGRALITY_TOL"]

INTEGRALITY_TOL = 1e-6


@dataclass(frozen=True)
class SolveConfig:
    time_limit: float = 1000.0
    node_limit: int = 1_000_000
    mip_gap_target: float = 0.0
    branching: str = "most-fractional"   # | "pseudo-cost"
    node_order: str = "best-bound"       # | "depth-first"
    log_interval: int = 0                # nodes between log lines (0: updates only)

    def __post_init__(self):
        if self.time_limit <= 0 or self.node_limit <= 0:
            raise ValueError("limits must be positive")
        if not 0.0 <= self.mip_gap_target < 1.0:
            raise ValueError("mip_gap_target must lie in [0, 1)")
        if self.branching not in ("most-fractional", "pseudo-cost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_order not in ("best-bound", "depth-first"):
            raise ValueError(f"unknown node order {self.node_order!r}")


@dataclass
class MilpResult:
    status: str                  # optimal | feasible-limit-hit | infeasible | unbounded
    x: np.ndarray | None
    objective: float | None
    best_bound: float
    mip_gap: float
    nodes: int
    wall_time: float
    abandoned_nodes: int = 0


class _Node:
    __slots__ = ("bound", "seq", "depth", "overrides", "branch_var", "branch_dir",
                 "branch_frac", "warm")

    def __init__(self, bound, seq, depth, overrides, branch_var=-1,
                 branch_dir=0, branch_frac=0.0, warm=None):
        self.bound = bound
        self.seq = seq
        self.depth = depth
        self.overrides = overrides
        self.branch_var = branch_var      # var fixed to create this node
        self.branch_dir = branch_dir      # 0 down, 1 up
        self.branch_frac = branch_frac    # parent LP fraction of that var
        self.warm = warm                  # parent basis for a warm start

    def key(self):
        return (self.bound, self.seq)


class _PseudoCosts:
    def __init__(self):
        self.sums = [dict(), dict()]    # per direction: var -> degradation sum
        self.counts = [dict(), dict()]

    def update(self, var, direction, frac, degradation):
        denom = frac if direction == 0 else 1.0 - frac
        if denom < 1e-9:
            return
        unit = max(degradation, 0.0) / denom
        self.sums[direction][var] = self.sums[direction].get(var, 0.0) + unit
        self.counts[direction][var] = self.counts[direction].get(var, 0) + 1

    def _avg(self, var, direction, fallback):
        cnt = self.counts[direction].get(var, 0)
        if cnt == 0:
            return fallback
        return self.sums[direction][var] / cnt

    def score(self, var, frac):
        total = sum(self.sums[0].values()) + sum(self.sums[1].values())
        count = sum(self.counts[0].values()) + sum(self.counts[1].values())
        fallback = total / count if count else 1.0
        down = self._avg(var, 0, fallback) * frac
        up = self._avg(var, 1, fallback) * (1.0 - frac)
        return max(down, 1e-8) * max(up, 1e-8)


def _select_branch_var(cfg, pseudo, bin_idx, frac_mask, x):
    frac_vars = bin_idx[frac_mask]
    fracs = x[frac_vars] - np.floor(x[frac_vars])
    if cfg.branching == "most-fractional":
        score = np.minimum(fracs, 1.0 - fracs)
    else:
        score = np.array([pseudo.score(int(v), float(f))
                          for v, f in zip(frac_vars, fracs)])
    best = int(np.argmax(score))      # ties: lowest index (argmax picks first)
    return int(frac_vars[best]), float(fracs[best])


def solve_milp(model, cfg: SolveConfig = SolveConfig(), log=None) -> MilpResult:
    """Branch and bound to the configured gap/node/time budget.

    Single-threaded and fully deterministic: identical model and config
    reproduce the identical node sequence.
    """
    t0 = time.perf_counter()
    bin_idx = model.binary_indices()
    obj_vec = model.objective_array()

    incumbent_x = None
    incumbent_obj = math.inf
    stuck_bound = math.inf   # min carried bound over abandoned nodes
    abandoned = 0
    nodes_solved = 0
    seq = 0
    pseudo = _PseudoCosts()

    heap = []   # best-bound priority queue
    stack = []  # depth-first
    use_heap = cfg.node_order == "best-bound"

    def push(node):
        if use_heap:
            heapq.heappush(heap, (node.key(), node))
        else:
            stack.append(node)

    def pop():
        if use_heap:
            return heapq.heappop(heap)[1]
        return stack.pop()

    def open_nodes():
        return [n for _, n in heap] if use_heap else stack

    def current_best_bound():
        opens = open_nodes()
        lo = min((n.bound for n in opens), default=math.inf)
        lo = min(lo, stuck_bound)
        if not math.isfinite(lo) and lo > 0:
            return incumbent_obj if incumbent_x is not None else math.inf
        return lo

    def gap_of(inc, bound):
        if inc is None or not math.isfinite(bound):
            return math.inf
        return max(0.0, (incumbent_obj - bound) / max(abs(incumbent_obj), 1e-9))

    def emit_log(force=False):
        if log is None:
            return
        if not force and (cfg.log_interval <= 0
                          or nodes_solved % cfg.log_interval != 0):
            return
        bound = current_best_bound()
        inc = "inf" if incumbent_x is None else f"{incumbent_obj:.9g}"
        g = gap_of(incumbent_x, bound)
        gtxt = "inf" if not math.isfinite(g) else f"{g:.6g}"
        btxt = "-inf" if bound == -math.inf else f"{bound:.9g}"
        log.write(f"node,{nodes_solved},bound,{btxt},incumbent,{inc},"
                  f"gap,{gtxt},time_s,{time.perf_counter() - t0:.3f}\n")

    def finish(status):
        bound = current_best_bound()
        if incumbent_x is not None:
            bound = min(bound, incumbent_obj)
        gap = gap_of(incumbent_x, bound)
        emit_log(force=True)
        return MilpResult(
            status=status,
            x=incumbent_x,
            objective=None if incumbent_x is None else incumbent_obj,
            best_bound=bound,
            mip_gap=gap,
            nodes=nodes_solved,
            wall_time=time.perf_counter() - t0,
            abandoned_nodes=abandoned,
        )

    def try_incumbent(x_full, source_bound=None):
        nonlocal incumbent_x, incumbent_obj
        obj = float(obj_vec @ x_full)
        if incumbent_x is None or obj < incumbent_obj - 1e-9 * max(1.0, abs(obj)):
            x_round = x_full.copy()
            if len(bin_idx):
                x_round[bin_idx] = np.round(x_round[bin_idx])
            incumbent_x = x_round
            incumbent_obj = float(obj_vec @ x_round)
            emit_log(force=True)

    push(_Node(bound=-math.inf, seq=seq, depth=0, overrides={}))
    seq += 1

    while heap if use_heap else stack:
        if time.perf_counter() - t0 > cfg.time_limit:
            return finish("feasible-limit-hit")
        if nodes_solved >= cfg.node_limit:
            return finish("feasible-limit-hit")

        node = pop()
        tol_prune = 1e-9 * max(1.0, abs(incumbent_obj))
        if incumbent_x is not None and node.bound >= incumbent_obj - tol_prune:
            continue

        try:
            lp = solve_lp(model, bound_overrides=node.overrides, warm=node.warm)
        except SimplexNumericalError:
            abandoned += 1
            stuck_bound = min(stuck_bound, node.bound)
            continue
        nodes_solved += 1

        if lp.status == "infeasible":
            emit_log()
            continue
        if lp.status == "unbounded":
            if node.depth == 0:
                return finish("unbounded")
            abandoned += 1
            stuck_bound = min(stuck_bound, node.bound)
            continue

        node_bound = max(lp.objective, node.bound)
        if node.branch_var >= 0 and math.isfinite(node.bound):
            pseudo.update(node.branch_var, node.branch_dir, node.branch_frac,
                          lp.objective - node.bound)
        if incumbent_x is not None and node_bound >= incumbent_obj - tol_prune:
            emit_log()
            continue

        x = lp.x
        frac_mask = (np.abs(x[bin_idx] - np.round(x[bin_idx])) > INTEGRALITY_TOL
                     if len(bin_idx) else np.zeros(0, dtype=bool))
        if not frac_mask.any():
            try_incumbent(x)
            emit_log()
            continue

        if model.incumbent_completer is not None:
            cand = model.incumbent_completer(x)
            if cand is not None and model.is_feasible(cand, tol=1e-6):
                try_incumbent(cand)
                if node_bound >= incumbent_obj - 1e-9 * max(1.0, abs(incumbent_obj)):
                    emit_log()
                    continue

        var, frac = _select_branch_var(cfg, pseudo, bin_idx, frac_mask, x)
        warm = (lp.basis, lp.statuses) if lp.basis is not None else None
        children = []
        for direction, fix in ((0, 0.0), (1, 1.0)):
            ov = dict(node.overrides)
            ov[var] = (fix, fix)
            children.append(_Node(bound=node_bound, seq=seq, depth=node.depth + 1,
                                  overrides=ov, branch_var=var,
                                  branch_dir=direction, branch_frac=frac,
                                  warm=warm))
            seq += 1
        if use_heap:
            for ch in children:
                push(ch)
        else:
            # stack: push the less promising side first so the LP-rounded
            # direction is explored next
            first = 1 if frac >= 0.5 else 0
            push(children[1 - first])
            push(children[first])
        emit_log()

        if incumbent_x is not None and cfg.mip_gap_target > 0:
            if gap_of(incumbent_x, current_best_bound()) <= cfg.mip_gap_target:
                return finish("optimal")

    if incumbent_x is None:
        return finish("infeasible")
    return finish("optimal")
