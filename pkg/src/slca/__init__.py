"""Sparse coding with analog and spiking locally competitive networks."""

from .analog import IntegratorConfig, integrate
from .core import (Dictionary, GramMatrix, SparseCodingProblem, ThresholdSpec, biases,
                   kkt_residual, normalize, objective, threshold_apply)
from .experiments import ExperimentSpec, run_experiment
from .problems import gen_random_problem, paper_problem
from .readout import (avg_current, delta_gap, fixed_point_residual, rate_exp_kernel,
                      rate_thresholded_current, rate_window)
from .solvers import coord_descent, fista
from .spiking import SpikingConfig, derive_bounds, simulate

__version__ = "0.1.0"
