"""Self-contained MILP machinery: model container, simplex, branch and
bound, LP-file export."""
from .model import MilpModel, BINARY, CONTINUOUS
from .simplex import LpResult, SimplexNumericalError, solve_lp
from .bnb import SolveConfig, MilpResult, solve_milp
from .lpfile import export_lp_format, import_lp_format
