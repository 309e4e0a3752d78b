"""In-memory MILP container shared by the model builders and the solver.

Variables are continuous or binary with explicit bounds; constraints are
sparse coefficient lists with a <=, >= or = sense; the objective is always
minimised.  Names like ``u[g2][t5]`` are kept in a map for reporting and
LP-file export.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["CONTINUOUS", "BINARY", "Variable", "LinConstraint", "MilpModel"]

CONTINUOUS = "continuous"
BINARY = "binary"

_SENSES = ("<=", ">=", "=")


@dataclass
class Variable:
    name: str
    kind: str
    lower: float
    upper: float


@dataclass
class LinConstraint:
    indices: np.ndarray
    coeffs: np.ndarray
    sense: str
    rhs: float
    name: str


class MilpModel:
    """Mutable MILP under construction; minimisation only."""

    def __init__(self):
        self.variables: list[Variable] = []
        self.constraints: list[LinConstraint] = []
        self.objective: list[float] = []
        self._name_to_index: dict[str, int] = {}
        # optional hook: maps a relaxed LP point to a full feasible
        # assignment (or None); used by branch and bound as a primal
        # heuristic.  Must be deterministic.
        self.incumbent_completer = None

    # -- construction ----------------------------------------------------

    def add_var(self, name: str, lower: float = 0.0, upper: float = math.inf,
                kind: str = CONTINUOUS, obj: float = 0.0) -> int:
        if name in self._name_to_index:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY and not (0.0 <= lower and upper <= 1.0):
            raise ValueError(f"binary {name!r} must have bounds within [0, 1]")
        if lower > upper:
            raise ValueError(f"variable {name!r} has lower {lower} > upper {upper}")
        idx = len(self.variables)
        self.variables.append(Variable(name=name, kind=kind, lower=float(lower),
                                       upper=float(upper)))
        self.objective.append(float(obj))
        self._name_to_index[name] = idx
        return idx

    def add_binary(self, name: str, obj: float = 0.0) -> int:
        return self.add_var(name, lower=0.0, upper=1.0, kind=BINARY, obj=obj)

    def add_constraint(self, terms, sense: str, rhs: float, name: str = "") -> int:
        """``terms`` is a dict {var_index: coeff} or iterable of pairs."""
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        if isinstance(terms, dict):
            items = sorted(terms.items())
        else:
            items = sorted(terms)
        agg: dict[int, float] = {}
        for idx, coef in items:
            if not 0 <= idx < len(self.variables):
                raise ValueError(f"constraint references undeclared variable {idx}")
            agg[idx] = agg.get(idx, 0.0) + float(coef)
        idx_arr = np.array(sorted(agg), dtype=np.int64)
        coef_arr = np.array([agg[i] for i in idx_arr], dtype=float)
        cidx = len(self.constraints)
        self.constraints.append(LinConstraint(
            indices=idx_arr, coeffs=coef_arr, sense=sense, rhs=float(rhs),
            name=name or f"c{cidx}"))
        return cidx

    def set_objective_coeff(self, idx: int, coef: float) -> None:
        self.objective[idx] = float(coef)

    # -- queries ----------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def var_index(self, name: str) -> int:
        return self._name_to_index[name]

    def binary_indices(self) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.variables) if v.kind == BINARY],
                        dtype=np.int64)

    def bounds_arrays(self):
        lo = np.array([v.lower for v in self.variables])
        hi = np.array([v.upper for v in self.variables])
        return lo, hi

    def objective_array(self) -> np.ndarray:
        return np.array(self.objective)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective_array() @ x)

    def constraint_matrix(self):
        """Dense (A, senses, rhs) view of the constraint list."""
        a = np.zeros((self.n_constraints, self.n_vars))
        senses, rhs = [], np.zeros(self.n_constraints)
        for i, con in enumerate(self.constraints):
            a[i, con.indices] = con.coeffs
            senses.append(con.sense)
            rhs[i] = con.rhs
        return a, senses, rhs

    def constraint_violation(self, x: np.ndarray) -> float:
        """Largest absolute constraint/bound violation at ``x``."""
        worst = 0.0
        for con in self.constraints:
            lhs = float(con.coeffs @ x[con.indices])
            if con.sense == "<=":
                worst = max(worst, lhs - con.rhs)
            elif con.sense == ">=":
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        lo, hi = self.bounds_arrays()
        worst = max(worst, float(np.max(lo - x, initial=0.0)),
                    float(np.max(x - hi, initial=0.0)))
        return worst

    def is_feasible(self, x: np.ndarray, tol: float = 1e-6,
                    integrality_tol: float = 1e-6) -> bool:
        if self.constraint_violation(x) > tol:
            return False
        bins = self.binary_indices()
        if len(bins) and np.max(np.abs(x[bins] - np.round(x[bins]))) > integrality_tol:
            return False
        return True
