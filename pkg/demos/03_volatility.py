"""
ARCH and GARCH: BCel against ABC
================================

Dynamic models turn the data into residuals before EL is applied.  The ARCH
comparison pits residual correlations against ABC with least-squares
summaries; the GARCH run uses the Gaussian quasi-score.
"""
from bcel.abc import ABCConfig, ArchLSSummary, ArchSim, abc_rejection
from bcel.constraints import ArchResiduals, GarchScore
from bcel.experiments import Experiment, ExperimentConfig
from bcel.mathfn import rng_stream
from bcel.samplers import bcel_amis, bcel_basic, posterior_summary
from bcel.simulate import sim_arch, sim_garch


def show(label, sample):
    rows = posterior_summary(sample)
    print(label, "  ".join(f"{r['name']} {r['mean']:.3f} ({r['sd']:.3f})" for r in rows))


# ARCH(1) at (0.5, 0.3), T = 500
arch = Experiment(ExperimentConfig.from_dict({"model": "arch"}))
y = sim_arch(rng_stream(3), 500, 0.5, 0.3)
show("BCel  ", bcel_basic(rng_stream(3, 2), arch.prior, ArchResiduals("correlations"), y, 10_000))
show("ABC-LS", abc_rejection(rng_stream(3, 3), arch.prior, ArchSim(500), ArchLSSummary(),
                             ABCConfig(summary="arch-ls", quantile=0.01, M=500), y))

# GARCH(1,1) at (0.1, 0.1, 0.8), T = 1000; beta1 is weakly identified
garch = Experiment(ExperimentConfig.from_dict({"model": "garch"}))
z = sim_garch(rng_stream(4), 1000, 0.1, 0.1, 0.8)
show("BCel-AMIS", bcel_amis(rng_stream(4, 2), garch.prior, GarchScore(), z, 1000, 5))
