"""Unit-commitment MILP: cost objective, standard operating constraints and
optional frequency-security blocks from an encoded nadir predictor.

Commitment, startup and dispatch variables are indexed [generator][step].
Startup costs accrue from the second step; everything is offline before the
horizon starts.  A primal-completion heuristic is attached to the model so
branch and bound can turn any sensible LP point into a full incumbent: round
the commitment, redispatch with a small LP, then run the network forward to
fill the encoded variables exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .encode import (ActivationBounds, ConstraintBlock, attach_nadir_limit,
                     compute_activation_bounds, encode_feature_link,
                     encode_network, folded_first_layer)
from .milp.model import MilpModel
from .milp.simplex import solve_lp
from .mlp import MlpParams
from .system import SystemSpec, big_m_gamma

__all__ = [
    "UcSolution",
    "IntegralityError",
    "build_uc",
    "attach_frequency_constraints",
    "extract_solution",
    "write_schedule_csv",
    "render_schedule_grid",
]


class IntegralityError(ValueError):
    """A reported assignment has a binary away from 0/1."""


@dataclass
class _NnAttachment:
    params: MlpParams
    gamma: float
    floor: float
    feature_blocks: list[ConstraintBlock]
    net_blocks: list[ConstraintBlock]


@dataclass
class _UcInfo:
    spec: SystemSpec
    u_idx: np.ndarray           # (Ng, T)
    v_idx: np.ndarray           # (Ng, T); -1 where undefined (first step)
    p_idx: np.ndarray           # (Ng, T)
    nn: _NnAttachment | None = None


@dataclass
class UcSolution:
    u: np.ndarray               # (Ng, T) ints
    v: np.ndarray               # (Ng, T) ints, column 0 all zero
    p: np.ndarray               # (Ng, T) MW
    total_cost: float
    predicted_nadir: np.ndarray | None   # (T,) Hz when frequency blocks attached

    def committed_unit_hours(self) -> int:
        return int(self.u.sum())


def build_uc(spec: SystemSpec) -> MilpModel:
    """Cost-minimising commitment/dispatch MILP over the spec's horizon."""
    spec.validate()
    n, T = spec.n_gen, spec.n_steps
    model = MilpModel()
    u_idx = np.full((n, T), -1, dtype=np.int64)
    v_idx = np.full((n, T), -1, dtype=np.int64)
    p_idx = np.full((n, T), -1, dtype=np.int64)

    for g, gen in enumerate(spec.generators):
        for t in range(T):
            u_idx[g, t] = model.add_binary(f"u[{gen.id}][t{t + 1}]",
                                           obj=gen.cost_fixed)
            p_idx[g, t] = model.add_var(f"P[{gen.id}][t{t + 1}]", 0.0, gen.p_max,
                                        obj=gen.cost_marginal)
            if t >= 1:
                v_idx[g, t] = model.add_binary(f"v[{gen.id}][t{t + 1}]",
                                               obj=gen.cost_startup)

    for t in range(T):
        model.add_constraint({int(p_idx[g, t]): 1.0 for g in range(n)}, "=",
                             spec.load_profile_mw[t], name=f"balance[t{t + 1}]")

    for g, gen in enumerate(spec.generators):
        for t in range(T):
            model.add_constraint(
                {int(p_idx[g, t]): 1.0, int(u_idx[g, t]): -gen.p_min}, ">=", 0.0,
                name=f"cap_lo[{gen.id}][t{t + 1}]")
            model.add_constraint(
                {int(p_idx[g, t]): 1.0, int(u_idx[g, t]): -gen.p_max}, "<=", 0.0,
                name=f"cap_hi[{gen.id}][t{t + 1}]")
        for t in range(1, T):
            model.add_constraint(
                {int(p_idx[g, t]): 1.0, int(p_idx[g, t - 1]): -1.0,
                 int(u_idx[g, t - 1]): gen.p_max - gen.ramp_up}, "<=", gen.p_max,
                name=f"ramp_up[{gen.id}][t{t + 1}]")
            model.add_constraint(
                {int(p_idx[g, t - 1]): 1.0, int(p_idx[g, t]): -1.0,
                 int(u_idx[g, t]): gen.p_max - gen.ramp_down}, "<=", gen.p_max,
                name=f"ramp_dn[{gen.id}][t{t + 1}]")
            model.add_constraint(
                {int(u_idx[g, t]): 1.0, int(u_idx[g, t - 1]): -1.0,
                 int(v_idx[g, t]): -1.0}, "<=", 0.0,
                name=f"startup[{gen.id}][t{t + 1}]")
        for t in range(1, T):
            window = range(max(1, t - gen.min_up + 1), t + 1)
            terms = {int(v_idx[g, tau]): 1.0 for tau in window}
            terms[int(u_idx[g, t])] = terms.get(int(u_idx[g, t]), 0.0) - 1.0
            model.add_constraint(terms, "<=", 0.0,
                                 name=f"min_up[{gen.id}][t{t + 1}]")
        for t in range(gen.min_down, T):
            window = range(max(1, t - gen.min_down + 1), t + 1)
            terms = {int(v_idx[g, tau]): 1.0 for tau in window}
            terms[int(u_idx[g, t - gen.min_down])] = (
                terms.get(int(u_idx[g, t - gen.min_down]), 0.0) + 1.0)
            model.add_constraint(terms, "<=", 1.0,
                                 name=f"min_dn[{gen.id}][t{t + 1}]")

    model.uc = _UcInfo(spec=spec, u_idx=u_idx, v_idx=v_idx, p_idx=p_idx)
    model.incumbent_completer = _make_completer(model)
    return model


def attach_frequency_constraints(model: MilpModel, spec: SystemSpec,
                                 params: MlpParams,
                                 bounds: ActivationBounds | None = None,
                                 nadir_floor: float | None = None) -> MilpModel:
    """Wire the encoded predictor to every step's commitment and dispatch."""
    if params.topology.input_dim != 2 * spec.n_gen:
        raise ValueError(f"predictor expects {params.topology.input_dim} inputs "
                         f"but the system has {spec.n_gen} generators")
    if bounds is None:
        bounds = compute_activation_bounds(params)
    floor = spec.nadir_limit_hz if nadir_floor is None else float(nadir_floor)
    gamma = big_m_gamma(spec)
    info = model.uc

    feature_blocks, net_blocks = [], []
    for t in range(spec.n_steps):
        fl = encode_feature_link(model, spec, t + 1,
                                 [int(i) for i in info.u_idx[:, t]],
                                 [int(i) for i in info.p_idx[:, t]], gamma)
        net = encode_network(model, params, bounds, t + 1, fl.x_vars)
        attach_nadir_limit(model, net, floor)
        feature_blocks.append(fl)
        net_blocks.append(net)

    info.nn = _NnAttachment(params=params, gamma=gamma, floor=floor,
                            feature_blocks=feature_blocks, net_blocks=net_blocks)
    return model


def _forward_folded(params: MlpParams, features_mw: np.ndarray):
    """Layer values using the fold the encoder applies (MW-domain inputs).

    Returns (pre_list, post_list, output) for the hidden layers.
    """
    pre_list, post_list = [], []
    h = features_mw
    for l in range(len(params.weights) - 1):
        w = folded_first_layer(params) if l == 0 else params.weights[l]
        pre = w @ h + params.biases[l]
        post = np.maximum(pre, 0.0)
        pre_list.append(pre)
        post_list.append(post)
        h = post
    out = float(params.weights[-1] @ h + params.biases[-1])
    return pre_list, post_list, out


def _fill_network_assignment(x: np.ndarray, params: MlpParams,
                             blk: ConstraintBlock, features_mw: np.ndarray) -> float:
    pre_list, post_list, out = _forward_folded(params, features_mw)
    k = 0
    for pre, post in zip(pre_list, post_list):
        for nrn in range(len(pre)):
            zpre, zpost, act = blk.var_indices[k:k + 3]
            x[zpre] = pre[nrn]
            x[zpost] = post[nrn]
            x[act] = 1.0 if pre[nrn] > 0 else 0.0
            k += 3
    x[blk.var_indices[k]] = out
    return out


def _make_completer(model: MilpModel):
    """Deterministic LP-point -> incumbent heuristic for branch and bound."""

    def completer(x_lp: np.ndarray):
        info = model.uc
        spec = info.spec
        n, T = spec.n_gen, spec.n_steps
        u = np.round(x_lp[info.u_idx]).astype(int)
        p_min, p_max = spec.p_min(), spec.p_max()
        for t in range(T):
            load = spec.load_profile_mw[t]
            on = u[:, t] == 1
            if p_max[on].sum() < load - 1e-9 or p_min[on].sum() > load + 1e-9:
                return None

        def dispatch_for(objective_mode, u):
            dispatch = MilpModel()
            d_idx = np.zeros((n, T), dtype=np.int64)
            for g, gen in enumerate(spec.generators):
                for t in range(T):
                    lo = gen.p_min * u[g, t]
                    hi = gen.p_max * u[g, t]
                    # flat mode spreads output evenly to shrink the largest
                    # infeed, which is what the nadir limit cares about
                    obj = (gen.cost_marginal if objective_mode == "cost"
                           else gen.cost_marginal / gen.p_max)
                    d_idx[g, t] = dispatch.add_var(f"P[{g}][{t}]", lo, hi, obj=obj)
            for t in range(T):
                dispatch.add_constraint({int(d_idx[g, t]): 1.0 for g in range(n)},
                                        "=", spec.load_profile_mw[t])
            for g, gen in enumerate(spec.generators):
                for t in range(1, T):
                    allow_up = gen.ramp_up * u[g, t - 1] + gen.p_max * (1 - u[g, t - 1])
                    allow_dn = gen.ramp_down * u[g, t] + gen.p_max * (1 - u[g, t])
                    dispatch.add_constraint({int(d_idx[g, t]): 1.0,
                                             int(d_idx[g, t - 1]): -1.0},
                                            "<=", allow_up)
                    dispatch.add_constraint({int(d_idx[g, t - 1]): 1.0,
                                             int(d_idx[g, t]): -1.0},
                                            "<=", allow_dn)
            if objective_mode == "flat":
                # pull every committed unit to the same utilisation
                util = dispatch.add_var("util", 0.0, 1.0)
                for g, gen in enumerate(spec.generators):
                    for t in range(T):
                        if u[g, t]:
                            dispatch.add_constraint(
                                {int(d_idx[g, t]): 1.0, util: -gen.p_max},
                                "<=", 0.0)
                dispatch.set_objective_coeff(util, 1000.0)
            lp = solve_lp(dispatch)
            if lp.status != "optimal":
                return None
            return lp.x[d_idx]

        def assemble(u, p):
            x = np.zeros(model.n_vars)
            x[info.u_idx] = u
            x[info.p_idx] = p
            for g in range(n):
                for t in range(1, T):
                    x[info.v_idx[g, t]] = max(0, u[g, t] - u[g, t - 1])
            if info.nn is not None:
                for t in range(T):
                    fl = info.nn.feature_blocks[t]
                    g_sel = int(np.argmax(p[:, t]))
                    features_mw = np.concatenate([u[:, t].astype(float),
                                                  np.zeros(n)])
                    features_mw[n + g_sel] = p[g_sel, t]
                    for g in range(n):
                        x[fl.mu_vars[g]] = 1.0 if g == g_sel else 0.0
                    for m in range(2 * n):
                        x[fl.x_vars[m]] = features_mw[m]
                    x[fl.pmax_var] = p[g_sel, t]
                    yhat = _fill_network_assignment(x, info.nn.params,
                                                    info.nn.net_blocks[t],
                                                    features_mw)
                    if yhat < info.nn.floor - 1e-9:
                        return None
            return x

        p = dispatch_for("cost", u)
        if p is not None:
            x = assemble(u, p)
            if x is not None:
                return x
        if info.nn is None:
            return None

        # the cheap dispatch missed the nadir floor: spread the output, then
        # greedily commit the strongest idle unit until the floor holds
        gains = spec.governor_gains()
        order = list(np.argsort(-gains, kind="stable"))
        u_try = u.copy()
        for _ in range(n + 1):
            p = dispatch_for("flat", u_try)
            if p is not None:
                x = assemble(u_try, p)
                if x is not None:
                    return x
            idle = [g for g in order if not u_try[g].all()]
            if not idle:
                return None
            u_try = u_try.copy()
            u_try[idle[0], :] = 1

    return completer


def extract_solution(model: MilpModel, assignment: np.ndarray) -> UcSolution:
    """Typed schedules from a solver assignment; validates integrality and
    feasibility within 1e-6."""
    info = model.uc
    bins = model.binary_indices()
    if len(bins):
        drift = np.max(np.abs(assignment[bins] - np.round(assignment[bins])))
        if drift > 1e-6:
            raise IntegralityError(f"binary variable off-integer by {drift:.3e}")
    worst = model.constraint_violation(assignment)
    if worst > 1e-5:
        raise ValueError(f"assignment violates constraints by {worst:.3e}")

    u = np.round(assignment[info.u_idx]).astype(int)
    v = np.zeros_like(u)
    v[:, 1:] = np.round(assignment[info.v_idx[:, 1:]]).astype(int)
    p = assignment[info.p_idx]
    nadir_pred = None
    if info.nn is not None:
        nadir_pred = np.array([assignment[blk.output_var]
                               for blk in info.nn.net_blocks])
    return UcSolution(u=u, v=v, p=p,
                      total_cost=model.objective_value(assignment),
                      predicted_nadir=nadir_pred)


def write_schedule_csv(sol: UcSolution, spec: SystemSpec, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("t,g,u,v,p_mw,nadir_pred_hz\n")
        for t in range(spec.n_steps):
            nad = ("n/a" if sol.predicted_nadir is None
                   else repr(float(sol.predicted_nadir[t])))
            for g, gen in enumerate(spec.generators):
                fh.write(f"{t + 1},{gen.id},{sol.u[g, t]},{sol.v[g, t]},"
                         f"{float(sol.p[g, t])!r},{nad}\n")


_SHADES = "░▒▓█"


def render_schedule_grid(sol: UcSolution, spec: SystemSpec) -> str:
    """Text grid: rows are steps, columns generators; '·' marks an
    uncommitted unit, the shade scales with p/p_max."""
    width = max(len(g.id) for g in spec.generators)
    header = "t\\g " + " ".join(g.id.rjust(width) for g in spec.generators)
    rows = [header]
    for t in range(spec.n_steps):
        cells = []
        for g, gen in enumerate(spec.generators):
            if sol.u[g, t] == 0:
                cells.append("·".rjust(width))
            else:
                ratio = sol.p[g, t] / gen.p_max if gen.p_max > 0 else 1.0
                shade = _SHADES[min(3, int(ratio * 4))]
                cells.append(shade.rjust(width))
        rows.append(f"{t + 1:>3} " + " ".join(cells))
    return "\n".join(rows) + "\n"
