"""Operating-point sampling, nadir labelling and dataset packaging.

A feature vector has 2*N_g entries: the commitment bits of every generator
followed by a block that is zero except at the slot of the largest-dispatch
unit, which carries that unit's output scaled by the global big-M constant
Gamma.  Labels are frequency nadirs from the reduced-order simulator;
trajectories that diverge are filtered out.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .sim import DIVERGENCE_LIMIT_HZ, SimConfig, nadir, simulate_contingency
from .system import OperatingPoint, SystemSpec, big_m_gamma, emit_system_spec

__all__ = [
    "Sample",
    "Dataset",
    "SamplingError",
    "DataGenerationError",
    "build_feature_vector",
    "validate_feature_vector",
    "sample_operating_points",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
]

_MAX_REJECTIONS = 1000
_MIN_CONVERGED = 10
_TRAIN_FRACTION = 0.8


class SamplingError(RuntimeError):
    """No feasible commitment subset found within the rejection budget."""


class DataGenerationError(RuntimeError):
    """Too few converged trajectories to assemble a dataset."""


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label_nadir: float
    source_op: OperatingPoint | None = None


@dataclass
class Dataset:
    samples: list[Sample]
    split_seed: int
    train_indices: np.ndarray
    test_indices: np.ndarray
    gamma: float
    spec_hash: str = ""

    def __len__(self) -> int:
        return len(self.samples)

    def _xy(self, indices: np.ndarray):
        X = np.array([self.samples[i].features for i in indices])
        y = np.array([self.samples[i].label_nadir for i in indices])
        return X, y

    def train_xy(self):
        return self._xy(self.train_indices)

    def test_xy(self):
        return self._xy(self.test_indices)


def build_feature_vector(op: OperatingPoint, gamma: float) -> np.ndarray:
    """Feature vector [u_1..u_Ng, 0..p_gmax/gamma..0] for one operating point."""
    n = len(op.u)
    x = np.zeros(2 * n)
    x[:n] = op.u
    g_max = int(np.argmax(np.asarray(op.p)))
    x[n + g_max] = op.p[g_max] / gamma
    return x


def validate_feature_vector(x: np.ndarray, n_gen: int) -> None:
    """Assert the structural invariants of a feature vector (test helper)."""
    assert x.shape == (2 * n_gen,)
    assert all(v in (0.0, 1.0) for v in x[:n_gen])
    nz = np.nonzero(x[n_gen:])[0]
    assert len(nz) == 1, "exactly one dispatch slot must be nonzero"
    assert 0.0 < x[n_gen + nz[0]] <= 1.0


def _split_load(rng: np.random.Generator, load: float, p_min: np.ndarray,
                p_max: np.ndarray) -> np.ndarray:
    """Split a load across committed units: p_min base plus a headroom-
    proportional share with uniform jitter, iteratively clipping at p_max.

    The jitter width sets how much of each label is unexplainable from the
    feature vector alone (the split itself is not observed), so it is kept
    moderate.
    """
    k = len(p_min)
    p = p_min.astype(float).copy()
    remaining = load - p.sum()
    headroom = p_max - p
    weights = headroom * rng.uniform(0.98, 1.02, size=k)
    for _ in range(k + 1):
        if remaining <= 1e-9:
            break
        open_units = headroom > 1e-12
        w = np.where(open_units, weights, 0.0)
        if w.sum() <= 0:
            w = np.where(open_units, 1.0, 0.0)
        share = remaining * w / w.sum()
        add = np.minimum(share, headroom)
        p += add
        headroom -= add
        remaining -= add.sum()
    # headroom covers the load by construction of the commitment draw
    assert remaining <= 1e-6, "dispatch split failed to place the full load"
    return np.minimum(p, p_max)


def sample_operating_points(spec: SystemSpec, n: int, seed: int) -> list[OperatingPoint]:
    """Draw ``n`` random valid operating points, deterministically per seed.

    Loads are uniform in [0.4, 1.0] x total capacity; commitments are drawn
    uniformly over subsets with at least two units that can carry the load;
    dispatch splits the load proportionally to headroom with jitter.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    p_min_all = spec.p_min()
    p_max_all = spec.p_max()
    total_pmax = p_max_all.sum()
    n_gen = spec.n_gen

    points = []
    for _ in range(n):
        load = rng.uniform(0.4, 1.0) * total_pmax
        for attempt in range(_MAX_REJECTIONS):
            mask = rng.integers(0, 2, size=n_gen).astype(bool)
            if mask.sum() < 2:
                continue
            if p_max_all[mask].sum() >= load and p_min_all[mask].sum() <= load:
                break
        else:
            raise SamplingError(f"no feasible commitment for load {load:.1f} MW "
                                f"after {_MAX_REJECTIONS} draws")
        p = np.zeros(n_gen)
        p[mask] = _split_load(rng, load, p_min_all[mask], p_max_all[mask])
        points.append(OperatingPoint(u=tuple(int(v) for v in mask), p=tuple(p)))
    return points


def spec_digest(spec: SystemSpec) -> str:
    return hashlib.sha256(emit_system_spec(spec).encode()).hexdigest()[:16]


def _batch_nadirs(spec: SystemSpec, ops: list[OperatingPoint], cfg: SimConfig):
    """Vectorised counterpart of the single-trajectory simulator.

    Integrates every operating point in lockstep and tracks each one's
    running minimum; agrees with ``simulate_contingency`` up to summation
    order.  Returns (nadirs, converged) arrays.
    """
    t_slowest = max(g.governor_t for g in spec.generators)
    if cfg.horizon < 10.0 * t_slowest:
        raise ValueError(f"horizon {cfg.horizon}s too short: need >= 10 x the "
                         f"slowest governor constant ({t_slowest}s)")
    n_b, n_g = len(ops), spec.n_gen
    f0 = spec.f_nominal_hz
    d = spec.load_damping_d
    s_base = spec.system_mva_base
    h_all = spec.rebased_inertia()
    k_all = spec.governor_gains()
    t_gov_all = np.array([g.governor_t for g in spec.generators])
    p_max = spec.p_max()

    u = np.array([op.u for op in ops], dtype=float)
    p = np.array([op.p for op in ops], dtype=float)
    if np.any(u.sum(axis=1) < 2):
        raise ValueError("every operating point needs at least two committed units")
    lost = np.argmax(p, axis=1)
    survive = u.copy()
    survive[np.arange(n_b), lost] = 0.0

    dp_loss = p[np.arange(n_b), lost] / s_base
    h_sys = survive @ h_all
    gains = survive * k_all[None, :]
    headroom = survive * (p_max[None, :] - p) / s_base
    inv_t = 1.0 / t_gov_all

    dt = cfg.dt
    n_steps = int(round(cfg.horizon / dt))
    div_limit = DIVERGENCE_LIMIT_HZ / f0
    two_h = 2.0 * h_sys
    half = 0.5 * dt

    df = np.zeros(n_b)
    dp_gov = np.zeros((n_b, n_g))
    run_min = np.zeros(n_b)
    alive = np.ones(n_b, dtype=bool)

    def deriv(df_, gov_):
        ddf = (-dp_loss - d * df_ + gov_.sum(axis=1)) / two_h
        ddp = (-gov_ - gains * df_[:, None]) * inv_t[None, :]
        return ddf, ddp

    def clamp(gov_):
        return np.clip(gov_, 0.0, headroom)

    for _ in range(n_steps):
        k1f, k1p = deriv(df, dp_gov)
        k2f, k2p = deriv(df + half * k1f, clamp(dp_gov + half * k1p))
        k3f, k3p = deriv(df + half * k2f, clamp(dp_gov + half * k2p))
        k4f, k4p = deriv(df + dt * k3f, clamp(dp_gov + dt * k3p))
        df = df + dt / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        dp_gov = clamp(dp_gov + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p))
        with np.errstate(invalid="ignore"):
            dead = ~np.isfinite(df) | (np.abs(df) > div_limit)
        alive &= ~dead
        np.minimum(run_min, np.where(alive, df, run_min), out=run_min)
        if not alive.any():
            break
    return f0 * (1.0 + run_min), alive


def generate_dataset(spec: SystemSpec, n: int, seed: int,
                     cfg: SimConfig = SimConfig()) -> Dataset:
    """Sample, simulate and label ``n`` operating points; drop diverged runs.

    Deterministic in (spec, n, seed, cfg).  The converged samples are split
    80/20 into train and test by a seeded shuffle.
    """
    ops = sample_operating_points(spec, n, seed)
    gamma = big_m_gamma(spec)

    nadirs, converged = _batch_nadirs(spec, ops, cfg)
    samples = [Sample(features=build_feature_vector(op, gamma),
                      label_nadir=float(nadirs[i]), source_op=op)
               for i, op in enumerate(ops) if converged[i]]
    if len(samples) < _MIN_CONVERGED:
        raise DataGenerationError(f"only {len(samples)} of {n} trajectories "
                                  f"converged; need at least {_MIN_CONVERGED}")

    rng_split = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    perm = rng_split.permutation(len(samples))
    n_train = int(round(_TRAIN_FRACTION * len(samples)))
    return Dataset(
        samples=samples,
        split_seed=int(seed),
        train_indices=np.sort(perm[:n_train]),
        test_indices=np.sort(perm[n_train:]),
        gamma=gamma,
        spec_hash=spec_digest(spec),
    )


def save_dataset(ds: Dataset, csv_path: str, sidecar_path: str) -> None:
    """Write the sample table as CSV plus a JSON sidecar with provenance."""
    n_gen = len(ds.samples[0].features) // 2
    header = ([f"u_{g + 1}" for g in range(n_gen)]
              + [f"xp_{g + 1}" for g in range(n_gen)] + ["nadir_hz"])
    with open(csv_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for s in ds.samples:
            u_part = [str(int(v)) for v in s.features[:n_gen]]
            xp_part = [repr(float(v)) for v in s.features[n_gen:]]
            fh.write(",".join(u_part + xp_part + [repr(float(s.label_nadir))]) + "\n")
    sidecar = {
        "spec_hash": ds.spec_hash,
        "seed": ds.split_seed,
        "gamma": ds.gamma,
        "n_samples": len(ds.samples),
        "train_indices": [int(i) for i in ds.train_indices],
        "test_indices": [int(i) for i in ds.test_indices],
    }
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2)


def load_dataset(csv_path: str, sidecar_path: str) -> Dataset:
    """Rebuild a dataset from its CSV + sidecar (source ops are not stored)."""
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    samples = []
    with open(csv_path) as fh:
        header = fh.readline().strip().split(",")
        n_gen = (len(header) - 1) // 2
        for line in fh:
            vals = [float(v) for v in line.strip().split(",")]
            samples.append(Sample(features=np.array(vals[:2 * n_gen]),
                                  label_nadir=vals[2 * n_gen]))
    return Dataset(
        samples=samples,
        split_seed=int(sidecar["seed"]),
        train_indices=np.array(sidecar["train_indices"], dtype=int),
        test_indices=np.array(sidecar["test_indices"], dtype=int),
        gamma=float(sidecar["gamma"]),
        spec_hash=sidecar["spec_hash"],
    )
