"""Big-M MILP encoding of a trained ReLU network and its feature link.

Three pieces per time step:

* feature link: binaries ``mu`` pick the largest-dispatch generator via a
  two-sided max linearisation, and feature variables mirror the commitment
  bits and the selected unit's dispatch;
* network: each hidden neuron gets a pre-activation variable, a
  post-activation variable and an activation binary tied together by four
  big-M rows whose constants come from interval bound propagation;
* nadir limit: one lower bound on the output variable.

Dispatch features stay in MW inside the MILP; the recorded input scaling
(1/Gamma) is folded into the first-layer weights instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .milp.model import MilpModel
from .mlp import MlpParams
from .system import SystemSpec

__all__ = [
    "ActivationBounds",
    "ConstraintBlock",
    "BOUND_WIDENING",
    "compute_activation_bounds",
    "encode_feature_link",
    "encode_network",
    "attach_nadir_limit",
]

# strict containment margin: big-M constants must straddle zero and never
# be attained with equality
BOUND_WIDENING = 1e-6


@dataclass(frozen=True)
class ActivationBounds:
    """Per-neuron pre-activation intervals, one array per hidden layer,
    already widened and forced to straddle zero; plus output-layer bounds."""

    lower: tuple[np.ndarray, ...]
    upper: tuple[np.ndarray, ...]
    output_lower: float
    output_upper: float

    def check(self) -> None:
        for lo, hi in zip(self.lower, self.upper):
            assert np.all(lo <= -BOUND_WIDENING / 2)
            assert np.all(hi >= BOUND_WIDENING / 2)
            assert np.all(lo < hi)


@dataclass
class ConstraintBlock:
    """Bookkeeping for one encoded block: indices of everything it added."""

    var_indices: list[int] = field(default_factory=list)
    constr_indices: list[int] = field(default_factory=list)
    mu_vars: list[int] = field(default_factory=list)
    x_vars: list[int] = field(default_factory=list)
    pmax_var: int | None = None
    act_binaries: list[int] = field(default_factory=list)
    output_var: int | None = None


def compute_activation_bounds(params: MlpParams,
                              feature_box=None) -> ActivationBounds:
    """Interval propagation of the feature box through every layer.

    ``feature_box`` is a pair of arrays (lows, highs); the default is the
    unit box matching binary commitment features and Gamma-scaled dispatch.
    """
    dim = params.topology.input_dim
    if feature_box is None:
        lo, hi = np.zeros(dim), np.ones(dim)
    else:
        lo = np.asarray(feature_box[0], dtype=float)
        hi = np.asarray(feature_box[1], dtype=float)
    if lo.shape != (dim,) or hi.shape != (dim,) or np.any(lo > hi):
        raise ValueError("feature box must give per-input [lo, hi] arrays")

    lowers, uppers = [], []
    n_layers = len(params.weights)
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError(f"layer {l} has non-finite parameters")
        wp, wn = np.maximum(w, 0.0), np.minimum(w, 0.0)
        pre_lo = wp @ lo + wn @ hi + b
        pre_hi = wp @ hi + wn @ lo + b
        if l < n_layers - 1:
            lowers.append(np.minimum(pre_lo - BOUND_WIDENING, -BOUND_WIDENING))
            uppers.append(np.maximum(pre_hi + BOUND_WIDENING, BOUND_WIDENING))
            lo, hi = np.maximum(pre_lo, 0.0), np.maximum(pre_hi, 0.0)
        else:
            out_lo = float(pre_lo[0] - BOUND_WIDENING)
            out_hi = float(pre_hi[0] + BOUND_WIDENING)
    bounds = ActivationBounds(lower=tuple(lowers), upper=tuple(uppers),
                              output_lower=out_lo, output_upper=out_hi)
    bounds.check()
    return bounds


def encode_feature_link(model: MilpModel, spec: SystemSpec, t: int,
                        u_vars: list[int], p_vars: list[int],
                        gamma: float) -> ConstraintBlock:
    """Feature variables for step ``t`` wired to the host u/P variables.

    The selection binaries carry a corrected two-sided max encoding: an
    auxiliary P_max dominates every dispatch and is pinned to the selected
    unit's dispatch, so only true argmax units are selectable.
    """
    n = spec.n_gen
    blk = ConstraintBlock()
    mu = [model.add_binary(f"mu[{spec.generators[g].id}][t{t}]") for g in range(n)]
    xu = [model.add_var(f"x[{m + 1}][t{t}]", 0.0, 1.0) for m in range(n)]
    xd = [model.add_var(f"x[{n + m + 1}][t{t}]", 0.0, gamma) for m in range(n)]
    p_cap = max(g.p_max for g in spec.generators)
    pmax = model.add_var(f"Pmax[t{t}]", 0.0, p_cap)

    cons = []
    for g in range(n):
        cons.append(model.add_constraint({xu[g]: 1.0, u_vars[g]: -1.0}, "=", 0.0,
                                         name=f"feat_u[{g + 1}][t{t}]"))
    cons.append(model.add_constraint({m: 1.0 for m in mu}, "=", 1.0,
                                     name=f"mu_pick[t{t}]"))
    for g in range(n):
        cons.append(model.add_constraint({pmax: 1.0, p_vars[g]: -1.0}, ">=", 0.0,
                                         name=f"pmax_ge[{g + 1}][t{t}]"))
        cons.append(model.add_constraint(
            {pmax: 1.0, p_vars[g]: -1.0, mu[g]: gamma}, "<=", gamma,
            name=f"pmax_sel[{g + 1}][t{t}]"))
        cons.append(model.add_constraint(
            {xd[g]: 1.0, p_vars[g]: -1.0, mu[g]: -gamma}, ">=", -gamma,
            name=f"feat_p_lo[{g + 1}][t{t}]"))
        cons.append(model.add_constraint(
            {xd[g]: 1.0, p_vars[g]: -1.0, mu[g]: gamma}, "<=", gamma,
            name=f"feat_p_hi[{g + 1}][t{t}]"))
        cons.append(model.add_constraint(
            {xd[g]: 1.0, mu[g]: -gamma}, "<=", 0.0,
            name=f"feat_p_cap[{g + 1}][t{t}]"))

    blk.mu_vars = mu
    blk.x_vars = xu + xd
    blk.pmax_var = pmax
    blk.var_indices = mu + xu + xd + [pmax]
    blk.constr_indices = cons
    return blk


def folded_first_layer(params: MlpParams) -> np.ndarray:
    """First-layer weights with the recorded input scaling folded in, so the
    encoded network consumes raw (MW-domain) feature variables."""
    return params.weights[0] * params.input_scale[None, :]


def encode_network(model: MilpModel, params: MlpParams, bounds: ActivationBounds,
                   t: int, input_vars: list[int]) -> ConstraintBlock:
    """Big-M rows expressing the trained network at step ``t``.

    Each hidden neuron contributes one affine equality plus four rows tying
    its output and activation binary; the output neuron is affine only.
    """
    dims = params.topology.layer_dims
    if len(input_vars) != dims[0]:
        raise ValueError(f"{len(input_vars)} input variables for input_dim {dims[0]}")
    blk = ConstraintBlock()
    prev_vars = list(input_vars)
    n_hidden_layers = len(params.weights) - 1

    for l in range(n_hidden_layers):
        w = folded_first_layer(params) if l == 0 else params.weights[l]
        b = params.biases[l]
        lo_l, hi_l = bounds.lower[l], bounds.upper[l]
        z_vars = []
        for nrn in range(w.shape[0]):
            h_lo, h_hi = float(lo_l[nrn]), float(hi_l[nrn])
            zpre = model.add_var(f"Z[{l + 1}][{nrn + 1}][t{t}]", h_lo, h_hi)
            zpost = model.add_var(f"z[{l + 1}][{nrn + 1}][t{t}]", 0.0, h_hi)
            act = model.add_binary(f"a[{l + 1}][{nrn + 1}][t{t}]")
            terms = {zpre: 1.0}
            for j, v in enumerate(prev_vars):
                if w[nrn, j] != 0.0:
                    terms[v] = terms.get(v, 0.0) - w[nrn, j]
            cons = [
                model.add_constraint(terms, "=", float(b[nrn]),
                                     name=f"nn_aff[{l + 1}][{nrn + 1}][t{t}]"),
                model.add_constraint({zpost: 1.0, zpre: -1.0, act: -h_lo}, "<=",
                                     -h_lo,
                                     name=f"nn_off[{l + 1}][{nrn + 1}][t{t}]"),
                model.add_constraint({zpost: 1.0, zpre: -1.0}, ">=", 0.0,
                                     name=f"nn_ge[{l + 1}][{nrn + 1}][t{t}]"),
                model.add_constraint({zpost: 1.0, act: -h_hi}, "<=", 0.0,
                                     name=f"nn_cap[{l + 1}][{nrn + 1}][t{t}]"),
                model.add_constraint({zpost: 1.0}, ">=", 0.0,
                                     name=f"nn_pos[{l + 1}][{nrn + 1}][t{t}]"),
            ]
            blk.var_indices += [zpre, zpost, act]
            blk.act_binaries.append(act)
            blk.constr_indices += cons
            z_vars.append(zpost)
        prev_vars = z_vars

    w_out, b_out = params.weights[-1], params.biases[-1]
    out = model.add_var(f"Znn[t{t}]", bounds.output_lower, bounds.output_upper)
    terms = {out: 1.0}
    for j, v in enumerate(prev_vars):
        if w_out[0, j] != 0.0:
            terms[v] = terms.get(v, 0.0) - w_out[0, j]
    blk.constr_indices.append(
        model.add_constraint(terms, "=", float(b_out[0]), name=f"nn_out[t{t}]"))
    blk.var_indices.append(out)
    blk.output_var = out
    return blk


def attach_nadir_limit(model: MilpModel, block: ConstraintBlock,
                       y_floor: float) -> ConstraintBlock:
    """Lower-bound the encoded prediction; -inf disables the limit."""
    if block.output_var is None:
        raise ValueError("block has no output variable")
    if y_floor == -math.inf:
        return block
    block.constr_indices.append(
        model.add_constraint({block.output_var: 1.0}, ">=", float(y_floor),
                             name=f"nadir_floor[{block.output_var}]"))
    return block
