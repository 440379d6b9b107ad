"""Generalized Volterra-Laguerre identification of multi-input dynamic systems."""

from ._version import __version__
from .errors import VLError
from .experiment import ExperimentConfig, run_experiment, sweep_orders, SweepResult, summarize
from .laguerre import (LaguerreSeriesSpec, build_basis_matrix, eval_laguerre,
                       project_continuous, project_onto_basis)
from .model import (CoefficientIndex, FittedModel, ModelStructure, coefficient_count,
                    reduced_kronecker, uniform_structure, vl_param_count_power,
                    volterra_param_count, volterra_param_count_approx)
from .regressor import Dataset, assemble, build_lag_matrix, fit, fit_dataset, predict
from .simulate import (PlantBranch, SyntheticPlant, difference_transform, evaluate,
                       generate_inputs, inverse_cumulate, simulate_plant)
from .tuner import TuneConfig, objective, tune_time_scales
