"""Bayesian computation with empirical likelihood.

Posterior samples are weighted by an empirical likelihood built from
estimating equations, so no data simulation is needed.  The package holds the
convex empirical-likelihood solver, constraint providers for normal,
g-and-k, ARCH/GARCH and population-genetics models, forward simulators, the
prior and adaptive importance samplers, and a rejection ABC baseline.
"""
from .abc import ABCConfig, abc_rejection, reference_table
from .constraints import (ArchResiduals, GarchScore, GkParams, GkPercentiles,
                          NormalMoments, arch_residuals, garch_score,
                          gk_percentile_constraints, gk_quantile, normal_moments)
from .data import IID, Microsat, Series, load_dataset, save_dataset
from .el import DomainError, ELSolution, SolverConfig, el_log_likelihood, el_solve, el_solve_batch
from .mathfn import (bessel_i_scaled, bessel_i_scaled_orders, regularize_spd, rng_stream,
                     student_t3_logpdf, student_t3_sample, weighted_mean_cov,
                     weighted_quantile)
from .popgen import (CompositeScore, composite_loglik, composite_score_matrix,
                     pair_loglik_diverged, pair_loglik_same_deme)
from .priors import Dirichlet, Exponential, PriorSpec, UniformBox
from .samplers import (SamplerError, WeightedSample, bcel_amis, bcel_basic, ess,
                       posterior_summary)
from .simulate import (ScenarioSpec, sim_arch, sim_coalescent, sim_garch, sim_gk,
                       sim_normal)
from .study import MetricsTable, StudyDescriptor, replicate_study

__version__ = "0.1.0"
