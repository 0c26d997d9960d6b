"""Sequential Monte Carlo sampling from diffusion priors with linear measurements."""

from ._kernels import backend_name
from .discrete import (
    CategoricalGrid,
    D3smcResult,
    ToyDiscretePrior,
    UniformKernel,
    brute_force_posterior,
    run_d3smc,
)
from .engine import ParticleEnsemble, ess, multinomial_resample, normalize, run_smc, substream
from .gmm import (
    GmmPrior,
    GmmProblem,
    generate_problem,
    gmm_exact_posterior_sample,
    gmm_score_source,
    load_problem,
    save_problem,
    whitened_prior,
)
from .measurement import (
    DiagGaussian,
    MeasurementModel,
    WhitenedMeasurement,
    approx_loglik,
    exact_loglik,
    posterior_x0,
    unwhiten,
    whiten,
)
from .metrics import sliced_wasserstein, tv_distance
from .reconstruct import OdeSolve, Tweedie, ode_reconstruct, prior_transition, tweedie_reconstruct
from .sampler import DdsmcConfig, DdsmcResult, GmmDefault, PowerInterp, run_ddsmc
from .schedules import NoiseSchedule, build_power_schedule, build_vp_schedule, with_times

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "CategoricalGrid",
    "D3smcResult",
    "ToyDiscretePrior",
    "UniformKernel",
    "brute_force_posterior",
    "run_d3smc",
    "ParticleEnsemble",
    "ess",
    "multinomial_resample",
    "normalize",
    "run_smc",
    "substream",
    "GmmPrior",
    "GmmProblem",
    "generate_problem",
    "gmm_exact_posterior_sample",
    "gmm_score_source",
    "whitened_prior",
    "load_problem",
    "save_problem",
    "DiagGaussian",
    "MeasurementModel",
    "WhitenedMeasurement",
    "approx_loglik",
    "exact_loglik",
    "posterior_x0",
    "unwhiten",
    "whiten",
    "sliced_wasserstein",
    "tv_distance",
    "OdeSolve",
    "Tweedie",
    "ode_reconstruct",
    "prior_transition",
    "tweedie_reconstruct",
    "DdsmcConfig",
    "DdsmcResult",
    "GmmDefault",
    "PowerInterp",
    "run_ddsmc",
    "NoiseSchedule",
    "build_power_schedule",
    "build_vp_schedule",
    "with_times",
    "__version__",
]
