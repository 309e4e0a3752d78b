"""Reduced-order post-contingency frequency simulator.

Models the loss of the largest in-service generator with a single
center-of-inertia frequency state plus one first-order governor state per
surviving unit:

    2 H_sys dDf/dt = -dP_loss - D Df + sum_g dP_g
    T_g   ddP_g/dt = -dP_g - k_g Df,      dP_g clamped to [0, headroom_g]

with Df the frequency deviation, all quantities per-unit on the system MVA
base, k_g the governor gain 1/R_g rebased to the system base and
headroom_g = (p_max_g - p_g) / S_base.  Integration is fixed-step RK4 with
the clamp applied after every stage evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import OperatingPoint, SystemSpec

__all__ = [
    "SimConfig",
    "FrequencyTrace",
    "DegenerateContingencyError",
    "UnconvergedTraceError",
    "DIVERGENCE_LIMIT_HZ",
    "largest_unit_index",
    "simulate_contingency",
    "nadir",
    "steady_state_frequency",
    "dump_trace_csv",
]

# Deviations beyond this are treated as a diverged (unusable) trajectory.
DIVERGENCE_LIMIT_HZ = 5.0


class DegenerateContingencyError(ValueError):
    """Fewer than two committed units: no survivor set after the outage."""


class UnconvergedTraceError(ValueError):
    """The trajectory diverged or contains non-finite samples."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01          # s
    horizon: float = 30.0     # s; must cover >= 10 x the slowest governor
    integrator: str = "rk4"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.integrator != "rk4":
            raise ValueError(f"unknown integrator {self.integrator!r}")


@dataclass(frozen=True)
class FrequencyTrace:
    times: np.ndarray   # s
    freq: np.ndarray    # Hz
    converged: bool


def largest_unit_index(op: OperatingPoint) -> int:
    """Index of the unit with maximum dispatch; ties break to the lowest index."""
    return int(np.argmax(np.asarray(op.p)))


def _contingency_setup(spec: SystemSpec, op: OperatingPoint):
    """Survivor parameters after dropping the largest unit.

    Returns (dp_loss, h_sys, gains, t_gov, headroom) with power quantities
    per-unit on the system base.
    """
    op.validate(spec)
    committed = [g for g in range(spec.n_gen) if op.u[g] == 1]
    if len(committed) < 2:
        raise DegenerateContingencyError(
            "contingency needs at least two committed units; only "
            f"{len(committed)} committed")
    g_lost = largest_unit_index(op)
    survivors = [g for g in committed if g != g_lost]

    s_base = spec.system_mva_base
    dp_loss = op.p[g_lost] / s_base
    h_all = spec.rebased_inertia()
    k_all = spec.governor_gains()
    h_sys = float(sum(h_all[g] for g in survivors))
    gains = np.array([k_all[g] for g in survivors])
    t_gov = np.array([spec.generators[g].governor_t for g in survivors])
    headroom = np.array([(spec.generators[g].p_max - op.p[g]) / s_base
                         for g in survivors])
    return dp_loss, h_sys, gains, t_gov, headroom


def simulate_contingency(spec: SystemSpec, op: OperatingPoint,
                         cfg: SimConfig = SimConfig()) -> FrequencyTrace:
    """Integrate the post-outage frequency response of an operating point.

    The outage drops the unit with the largest dispatch (lowest index on
    ties) as a power step at t=0.  Integration stops early once the
    deviation exceeds :data:`DIVERGENCE_LIMIT_HZ`; the trace is then marked
    unconverged.
    """
    t_slowest = max(g.governor_t for g in spec.generators)
    if cfg.horizon < 10.0 * t_slowest:
        raise ValueError(f"horizon {cfg.horizon}s too short: need >= 10 x the "
                         f"slowest governor constant ({t_slowest}s)")

    dp_loss, h_sys, gains, t_gov, headroom = _contingency_setup(spec, op)
    d = spec.load_damping_d
    f0 = spec.f_nominal_hz
    dt = cfg.dt
    n_steps = int(round(cfg.horizon / dt))
    div_limit_pu = DIVERGENCE_LIMIT_HZ / f0

    two_h = 2.0 * h_sys
    inv_t = 1.0 / t_gov

    def deriv(df, dp_gov):
        ddf = (-dp_loss - d * df + dp_gov.sum()) / two_h
        ddp = (-dp_gov - gains * df) * inv_t
        return ddf, ddp

    def clamp(dp_gov):
        return np.clip(dp_gov, 0.0, headroom)

    df = 0.0
    dp_gov = np.zeros(len(gains))
    dev_pu = np.empty(n_steps + 1)
    dev_pu[0] = 0.0
    n_kept = n_steps
    converged = True
    half = 0.5 * dt

    for i in range(n_steps):
        k1f, k1p = deriv(df, dp_gov)
        k2f, k2p = deriv(df + half * k1f, clamp(dp_gov + half * k1p))
        k3f, k3p = deriv(df + half * k2f, clamp(dp_gov + half * k2p))
        k4f, k4p = deriv(df + dt * k3f, clamp(dp_gov + dt * k3p))
        df = df + dt / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        dp_gov = clamp(dp_gov + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p))
        dev_pu[i + 1] = df
        if not np.isfinite(df) or abs(df) > div_limit_pu:
            converged = False
            n_kept = i + 1
            break

    dev_pu = dev_pu[:n_kept + 1]
    times = np.arange(n_kept + 1) * dt
    freq = f0 * (1.0 + dev_pu)
    freq[0] = f0
    if not np.all(np.isfinite(freq)):
        converged = False
    return FrequencyTrace(times=times, freq=freq, converged=converged)


def nadir(trace: FrequencyTrace) -> float:
    """Minimum frequency of a converged trace, in Hz."""
    if not trace.converged:
        raise UnconvergedTraceError("cannot take the nadir of an unconverged trace")
    return float(np.min(trace.freq))


def steady_state_frequency(spec: SystemSpec, op: OperatingPoint) -> float:
    """Closed-form quasi-steady-state frequency after the outage, in Hz.

    f_ss = f0 * (1 + dF) with dF = -dP_loss / (D + sum of survivor gains),
    assuming no governor hits its headroom clamp.  Serves as an analytic
    cross-check for the simulator.
    """
    dp_loss, _, gains, _, _ = _contingency_setup(spec, op)
    denom = spec.load_damping_d + float(gains.sum())
    if denom == 0.0:
        raise ZeroDivisionError("D plus the survivor governor gains is zero; "
                                "no steady state exists")
    return spec.f_nominal_hz * (1.0 - dp_loss / denom)


def dump_trace_csv(trace: FrequencyTrace, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("time_s,freq_hz\n")
        for t, f in zip(trace.times, trace.freq):
            fh.write(f"{float(t)!r},{float(f)!r}\n")
