"""Frequency-security-constrained unit commitment toolkit.

Pipeline: sample operating points, label their post-contingency frequency
nadir with a reduced-order simulator, train a ReLU predictor (optionally
with asymmetric losses), encode it as big-M MILP constraints, embed the
blocks in a unit-commitment model and solve with the built-in branch and
bound solver.
"""
from .system import (GeneratorSpec, SystemSpec, OperatingPoint, SpecParseError,
                     SpecValidationError, load_system_spec, emit_system_spec,
                     big_m_gamma)
from .sim import (SimConfig, FrequencyTrace, DegenerateContingencyError,
                  UnconvergedTraceError, simulate_contingency, nadir,
                  steady_state_frequency, dump_trace_csv)
from .data import (Sample, Dataset, SamplingError, DataGenerationError,
                   build_feature_vector, sample_operating_points,
                   generate_dataset, save_dataset, load_dataset)
from .mlp import (Topology, MlpParams, LossSpec, TrainConfig, Metrics,
                  DivergenceError, forward, forward_batch, loss_value,
                  loss_gradient, train, evaluate, save_model, load_model)
from .encode import (ActivationBounds, ConstraintBlock,
                     compute_activation_bounds, encode_feature_link,
                     encode_network, attach_nadir_limit)
from .milp.model import MilpModel, BINARY, CONTINUOUS
from .milp.simplex import LpResult, SimplexNumericalError, solve_lp
from .milp.bnb import SolveConfig, MilpResult, solve_milp
from .milp.lpfile import export_lp_format, import_lp_format
from .uc import (UcSolution, IntegralityError, build_uc,
                 attach_frequency_constraints, extract_solution,
                 write_schedule_csv, render_schedule_grid)

__version__ = "0.1.0"
