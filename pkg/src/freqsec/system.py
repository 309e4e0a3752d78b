"""Power-system data model: generators, load profile, operating points.

Single-bus (copper-plate) representation: no network topology, line limits
or voltages.  Everything downstream (simulation, dataset generation, the
unit-commitment model) consumes the immutable :class:`SystemSpec` defined
here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

import numpy as np

__all__ = [
    "GeneratorSpec",
    "SystemSpec",
    "OperatingPoint",
    "SpecParseError",
    "SpecValidationError",
    "load_system_spec",
    "emit_system_spec",
    "big_m_gamma",
]


class SpecParseError(ValueError):
    """Malformed system-spec text (bad JSON, missing or unknown fields)."""


class SpecValidationError(ValueError):
    """A structurally well-formed spec violated one or more invariants."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        msg = "invalid system spec:\n" + "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(msg)


@dataclass(frozen=True)
class GeneratorSpec:
    """One synchronous generator: costs, operating limits and dynamic data.

    ``inertia_h`` and ``droop_r`` are per-unit on the machine's own
    ``mva_base``; they are rebased to the system base where needed.
    """

    id: str
    p_min: float            # MW
    p_max: float            # MW
    ramp_up: float          # MW per step
    ramp_down: float        # MW per step
    min_up: int             # steps
    min_down: int           # steps
    cost_fixed: float       # currency per committed step
    cost_marginal: float    # currency per MWh
    cost_startup: float     # currency per startup
    inertia_h: float        # s, machine base
    droop_r: float          # pu, machine base
    governor_t: float       # s
    mva_base: float         # MVA

    def problems(self) -> list[str]:
        out = []
        gid = self.id
        if not (0 <= self.p_min <= self.p_max):
            out.append(f"generator {gid}: requires 0 <= p_min <= p_max, got "
                       f"p_min={self.p_min}, p_max={self.p_max}")
        if self.ramp_up < 0 or self.ramp_down < 0:
            out.append(f"generator {gid}: ramp limits must be >= 0")
        if self.min_up < 1 or self.min_down < 1:
            out.append(f"generator {gid}: min_up and min_down must be >= 1")
        if self.inertia_h <= 0:
            out.append(f"generator {gid}: inertia_h must be > 0")
        if self.droop_r <= 0:
            out.append(f"generator {gid}: droop_r must be > 0")
        if self.governor_t <= 0:
            out.append(f"generator {gid}: governor_t must be > 0")
        if self.mva_base <= 0:
            out.append(f"generator {gid}: mva_base must be > 0")
        if min(self.cost_fixed, self.cost_marginal, self.cost_startup) < 0:
            out.append(f"generator {gid}: costs must be >= 0")
        return out


@dataclass(frozen=True)
class SystemSpec:
    """Generators plus a load profile and the frequency-security threshold."""

    generators: tuple[GeneratorSpec, ...]
    load_profile_mw: tuple[float, ...]
    f_nominal_hz: float = 50.0
    nadir_limit_hz: float = 49.2
    load_damping_d: float = 1.0     # pu on system base
    system_mva_base: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "load_profile_mw", tuple(float(v) for v in self.load_profile_mw))

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def n_steps(self) -> int:
        return len(self.load_profile_mw)

    def p_min(self) -> np.ndarray:
        return np.array([g.p_min for g in self.generators])

    def p_max(self) -> np.ndarray:
        return np.array([g.p_max for g in self.generators])

    def rebased_inertia(self) -> np.ndarray:
        """Per-generator inertia constant on the system MVA base."""
        return np.array([g.inertia_h * g.mva_base / self.system_mva_base
                         for g in self.generators])

    def governor_gains(self) -> np.ndarray:
        """Per-generator steady-state gain 1/R on the system MVA base."""
        return np.array([(1.0 / g.droop_r) * (g.mva_base / self.system_mva_base)
                         for g in self.generators])

    def problems(self) -> list[str]:
        out = []
        for g in self.generators:
            out.extend(g.problems())
        if self.n_gen == 0:
            out.append("spec must declare at least one generator")
        if self.n_steps < 1:
            out.append("load_profile_mw must cover at least one step (T >= 1)")
        ids = [g.id for g in self.generators]
        if len(set(ids)) != len(ids):
            out.append("generator ids must be unique")
        total = sum(g.p_max for g in self.generators)
        for t, load in enumerate(self.load_profile_mw):
            if load > total:
                out.append(f"infeasible load: load_profile_mw[{t}]={load} exceeds "
                           f"total capacity {total}")
            if load < 0:
                out.append(f"load_profile_mw[{t}] must be >= 0")
        if self.nadir_limit_hz >= self.f_nominal_hz:
            out.append(f"nadir_limit_hz={self.nadir_limit_hz} must lie below "
                       f"f_nominal_hz={self.f_nominal_hz}")
        if self.f_nominal_hz <= 0:
            out.append("f_nominal_hz must be > 0")
        if self.load_damping_d < 0:
            out.append("load_damping_d must be >= 0")
        if self.system_mva_base <= 0:
            out.append("system_mva_base must be > 0")
        return out

    def validate(self) -> "SystemSpec":
        problems = self.problems()
        if problems:
            raise SpecValidationError(problems)
        return self


@dataclass(frozen=True)
class OperatingPoint:
    """Commitment vector ``u`` and dispatch vector ``p`` for one snapshot."""

    u: tuple[int, ...]
    p: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(int(v) for v in self.u))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))

    def problems(self, spec: SystemSpec, tol: float = 1e-9) -> list[str]:
        out = []
        if len(self.u) != spec.n_gen or len(self.p) != spec.n_gen:
            return [f"operating point has {len(self.u)} commitments / {len(self.p)} "
                    f"dispatches for {spec.n_gen} generators"]
        if not any(self.u):
            out.append("at least one generator must be committed")
        for g, gen in enumerate(spec.generators):
            if self.u[g] not in (0, 1):
                out.append(f"u[{g}] must be binary")
            elif self.u[g] == 0 and abs(self.p[g]) > tol:
                out.append(f"generator {gen.id} is offline but dispatched at {self.p[g]} MW")
            elif self.u[g] == 1 and not (gen.p_min - tol <= self.p[g] <= gen.p_max + tol):
                out.append(f"generator {gen.id} dispatch {self.p[g]} MW outside "
                           f"[{gen.p_min}, {gen.p_max}]")
        return out

    def validate(self, spec: SystemSpec) -> "OperatingPoint":
        problems = self.problems(spec)
        if problems:
            raise SpecValidationError(problems)
        return self


_GEN_FIELDS = [f.name for f in fields(GeneratorSpec)]
_TOP_FIELDS = {
    "f_nominal_hz", "nadir_limit_hz", "load_damping_d",
    "system_mva_base", "load_profile_mw", "generators",
}
_INT_GEN_FIELDS = {"min_up", "min_down"}


def load_system_spec(text: str) -> SystemSpec:
    """Parse and validate a JSON system spec.

    Raises :class:`SpecParseError` for malformed text or unknown keys and
    :class:`SpecValidationError` (listing every violation) for a spec that
    parses but breaks an invariant.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"not valid JSON (line {exc.lineno}, col {exc.colno}): "
                             f"{exc.msg}") from exc
    if not isinstance(raw, dict):
        raise SpecParseError("top level must be a JSON object")

    unknown = set(raw) - _TOP_FIELDS
    if unknown:
        raise SpecParseError(f"unknown top-level keys: {sorted(unknown)}")
    missing = _TOP_FIELDS - set(raw)
    if missing:
        raise SpecParseError(f"missing top-level keys: {sorted(missing)}")

    gens = []
    for i, g in enumerate(raw["generators"]):
        if not isinstance(g, dict):
            raise SpecParseError(f"generators[{i}] must be an object")
        unknown = set(g) - set(_GEN_FIELDS)
        if unknown:
            raise SpecParseError(f"generators[{i}]: unknown keys {sorted(unknown)}")
        missing = set(_GEN_FIELDS) - set(g)
        if missing:
            raise SpecParseError(f"generators[{i}]: missing keys {sorted(missing)}")
        kwargs = {}
        for name in _GEN_FIELDS:
            v = g[name]
            if name == "id":
                if not isinstance(v, str):
                    raise SpecParseError(f"generators[{i}].id must be a string")
                kwargs[name] = v
            elif name in _INT_GEN_FIELDS:
                if not isinstance(v, int) or isinstance(v, bool):
                    raise SpecParseError(f"generators[{i}].{name} must be an integer")
                kwargs[name] = v
            else:
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise SpecParseError(f"generators[{i}].{name} must be a number")
                kwargs[name] = float(v)
        gens.append(GeneratorSpec(**kwargs))

    for key in ("f_nominal_hz", "nadir_limit_hz", "load_damping_d", "system_mva_base"):
        if not isinstance(raw[key], (int, float)) or isinstance(raw[key], bool):
            raise SpecParseError(f"{key} must be a number")
    if not isinstance(raw["load_profile_mw"], list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            for v in raw["load_profile_mw"]):
        raise SpecParseError("load_profile_mw must be an array of numbers")

    spec = SystemSpec(
        generators=tuple(gens),
        load_profile_mw=tuple(float(v) for v in raw["load_profile_mw"]),
        f_nominal_hz=float(raw["f_nominal_hz"]),
        nadir_limit_hz=float(raw["nadir_limit_hz"]),
        load_damping_d=float(raw["load_damping_d"]),
        system_mva_base=float(raw["system_mva_base"]),
    )
    return spec.validate()


def emit_system_spec(spec: SystemSpec) -> str:
    """Serialize a spec to the JSON layout accepted by :func:`load_system_spec`."""
    doc = {
        "f_nominal_hz": spec.f_nominal_hz,
        "nadir_limit_hz": spec.nadir_limit_hz,
        "load_damping_d": spec.load_damping_d,
        "system_mva_base": spec.system_mva_base,
        "load_profile_mw": list(spec.load_profile_mw),
        "generators": [
            {name: getattr(g, name) for name in _GEN_FIELDS} for g in spec.generators
        ],
    }
    return json.dumps(doc, indent=2)


def big_m_gamma(spec: SystemSpec) -> float:
    """Big-M constant strictly dominating every feasible dispatch, in MW.

    1.01 x the largest p_max: strictly greater than any single unit's output
    while staying tight enough not to hurt LP relaxations.
    """
    return 1.01 * max(g.p_max for g in spec.generators)
