"""
MCMC over graph structures in Gaussian graphical models with a
G-Wishart prior: the WWA sampler (informed proposals, delayed acceptance,
Cholesky-level updates of the precision matrix), the DCBF and CL samplers,
G-Wishart sampling with graph decomposition, data generators and
diagnostics.
"""

from importlib.metadata import PackageNotFoundError, version

from ._jit import BACKEND, USE_NUMBA
from .data import Dataset, gen_cycle_dataset, gen_model_dataset, iris_virginica, load_matrix_csv
from .diagnostics import cost_independent_sample, diagnose, iact, inclusion_probabilities
from .graph import Graph, GraphPrior, atom_decomposition, common_neighbor_count, flip_edge
from .gwishart import (
    GWishartParams,
    PosteriorParams,
    SamplerConfig,
    approx_log_ratio,
    block_gibbs_sweep,
    log_I_decomposable,
    sample_decomposed,
    sample_direct,
)
from .mcmc import ChainConfig, ConfigError, Model, Sampler, run_chain
from .trace import Trace

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "ChainConfig",
    "ConfigError",
    "Dataset",
    "GWishartParams",
    "Graph",
    "GraphPrior",
    "Model",
    "PosteriorParams",
    "Sampler",
    "SamplerConfig",
    "Trace",
    "approx_log_ratio",
    "atom_decomposition",
    "block_gibbs_sweep",
    "common_neighbor_count",
    "cost_independent_sample",
    "diagnose",
    "flip_edge",
    "gen_cycle_dataset",
    "gen_model_dataset",
    "iact",
    "inclusion_probabilities",
    "iris_virginica",
    "load_matrix_csv",
    "log_I_decomposable",
    "run_chain",
    "sample_decomposed",
    "sample_direct",
]
