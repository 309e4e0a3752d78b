"""Ready-made desk-scale systems for demos and tests.

The six-unit system keeps every unit at or below ~20% of system capacity
and lets load damping carry a solid share of the post-outage imbalance, so
most sampled operating points survive the worst single outage with a nadir
that is (almost) determined by the commitment pattern and the size of the
lost infeed - the regime a frequency-security predictor can actually learn.
Thin commitments and heavily loaded patterns still dip well below the
49.2 Hz threshold, which is what makes the encoded constraint bind.
"""
from __future__ import annotations

from .system import GeneratorSpec, SystemSpec

__all__ = ["demo_system", "tiny_system"]

_CAPS = (240.0, 220.0, 200.0, 180.0, 160.0, 140.0)
_PMIN_FRAC = 0.10
_INERTIA = (6.5, 5.8, 5.1, 4.4, 3.9, 3.4)
_GOV_T = (1.4, 1.2, 1.0, 0.85, 0.7, 0.55)
_DROOP = (0.04, 0.045, 0.05, 0.05, 0.055, 0.06)
_MARGINAL = (7.0, 10.0, 14.0, 19.0, 25.0, 32.0)
_FIXED = (330.0, 280.0, 230.0, 180.0, 140.0, 110.0)
_STARTUP = (660.0, 520.0, 400.0, 300.0, 220.0, 160.0)
_MIN_UP = (2, 2, 1, 1, 1, 1)


def demo_system(n_steps: int = 6) -> SystemSpec:
    """Six-generator system on a 1000 MVA base; loads 44..62% of capacity,
    the band where thin commitments violate the 49.2 Hz floor but spread
    ones satisfy it."""
    loads = (540.0, 620.0, 700.0, 660.0, 580.0, 500.0, 640.0, 710.0)
    gens = tuple(
        GeneratorSpec(id=f"g{i + 1}", p_min=_PMIN_FRAC * _CAPS[i], p_max=_CAPS[i],
                      ramp_up=0.7 * _CAPS[i], ramp_down=0.7 * _CAPS[i],
                      min_up=_MIN_UP[i], min_down=_MIN_UP[i],
                      cost_fixed=_FIXED[i], cost_marginal=_MARGINAL[i],
                      cost_startup=_STARTUP[i], inertia_h=_INERTIA[i],
                      droop_r=_DROOP[i], governor_t=_GOV_T[i],
                      mva_base=1.15 * _CAPS[i])
        for i in range(6))
    return SystemSpec(
        generators=gens,
        load_profile_mw=loads[:n_steps],
        f_nominal_hz=50.0,
        nadir_limit_hz=49.2,
        load_damping_d=1.5,
        system_mva_base=1000.0,
    ).validate()


def tiny_system() -> SystemSpec:
    """Two identical units on the system base; handy for closed-form checks."""
    g = dict(p_min=0.0, p_max=200.0, ramp_up=200.0, ramp_down=200.0,
             min_up=1, min_down=1, cost_fixed=10.0, cost_marginal=2.0,
             cost_startup=5.0, inertia_h=2.5, droop_r=0.05, governor_t=0.8,
             mva_base=1000.0)
    return SystemSpec(
        generators=(GeneratorSpec(id="a", **g), GeneratorSpec(id="b", **g)),
        load_profile_mw=(150.0,),
        f_nominal_hz=50.0, nadir_limit_hz=49.2, load_damping_d=1.0,
        system_mva_base=1000.0,
    ).validate()
