"""
Empirical likelihood on a normal mean
=====================================

The smallest complete example: one constraint, one parameter, and the two
BCel samplers side by side.
"""
import numpy as np

from bcel.constraints import NormalMoments
from bcel.el import el_solve
from bcel.mathfn import rng_stream
from bcel.priors import PriorSpec, UniformBox
from bcel.samplers import bcel_amis, bcel_basic, posterior_summary
from bcel.simulate import sim_normal

# 100 draws from N(0.7, 1)
y = sim_normal(rng_stream(1), 100, 0.7)
ybar = y.values.mean()

# at the sample mean every observation gets weight 1/n
sol = el_solve((y.values - ybar)[:, None])
print("log EL at the sample mean:", sol.log_el, " -n log n:", -100 * np.log(100))

# outside the data range zero is not in the convex hull
print("log EL beyond the data:", el_solve((y.values - 10.0)[:, None]).log_el)

# the profile is smooth and peaks at ybar
for t in (ybar - 0.2, ybar - 0.1, ybar, ybar + 0.1, ybar + 0.2):
    print(f"  theta = {t:6.3f}  log EL = {el_solve((y.values - t)[:, None]).log_el:9.3f}")

prior = PriorSpec([UniformBox([-10.0], [10.0])], names=["mu"])

# prior draws weighted by EL; few survive because the prior is wide
basic = bcel_basic(rng_stream(1, 2), prior, NormalMoments(1), y, 10_000)

# AMIS moves the proposal onto the posterior after the first pass
amis = bcel_amis(rng_stream(1, 3), prior, NormalMoments(1), y, 2000, 5)

for name, s in (("basic", basic), ("amis", amis)):
    row = posterior_summary(s)[0]
    print(f"{name:6s} mean {row['mean']:.3f}  sd {row['sd']:.3f}  "
          f"80% [{row['lower']:.3f}, {row['upper']:.3f}]  ESS/N {s.ess() / len(s):.3f}")
print("sample mean", round(ybar, 3), " 1/sqrt(n) = 0.1")
