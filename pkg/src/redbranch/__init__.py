"""Reduced two-type decomposable critical branching processes.

Submodules
----------
offspring_models
    The concrete heavy-tailed offspring family: parameters, pmfs,
    generating functions, exact samplers.
gf_engine
    Deterministic deficit-space iteration: survival probabilities,
    conditional reduced-process transforms, time scales, two-time joints.
limit_laws
    Every limiting object: closed-form transforms, the quasi-linear PDE
    solutions evaluated along characteristics, MRCA laws, continuous-time
    process generating functions.
tree_sim
    Conditioned discrete-tree Monte Carlo with backward reduction.
ctmc_sim
    Exact-event simulation of the limiting continuous-time processes.
experiments_cli
    Batch harness and the package's command-line interface.
"""

from .offspring_models import ModelParams, Regime, validate_params

__all__ = ["ModelParams", "Regime", "validate_params"]
__version__ = "0.1.0"
