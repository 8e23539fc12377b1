"""
The g-and-k distribution
========================

No density, a closed-form quantile function: a natural fit for constraints
that match sample quantiles to model quantiles.
"""
import numpy as np

from bcel.constraints import GkParams, GkPercentiles
from bcel.experiments import MODELS
from bcel.mathfn import rng_stream
from bcel.priors import PriorSpec
from bcel.samplers import bcel_basic, posterior_summary
from bcel.simulate import sim_gk

truth = GkParams(3.0, 1.0, 2.0, 0.5)
y = sim_gk(rng_stream(7), 100, truth)
print("quartiles of the sample:", np.round(np.quantile(y.values, [0.25, 0.5, 0.75]), 3))

# one constraint per quartile, plus the default prior box from the model table
provider = GkPercentiles()
prior = PriorSpec.from_config({**MODELS["gk"].prior, "names": list(MODELS["gk"].names)})

s = bcel_basic(rng_stream(7, 2), prior, provider, y, 5000)
print(f"ESS {s.ess():.0f} of {len(s)}")
for row, t in zip(posterior_summary(s), (3.0, 1.0, 2.0, 0.5)):
    print(f"  {row['name']}: mean {row['mean']:.3f}  sd {row['sd']:.3f}  truth {t}")
