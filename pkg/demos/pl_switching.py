"""Constant versus switching steps on a noisy PL problem.

Without interpolation a constant step stalls in a neighbourhood of size
proportional to the step. The switching rule keeps the constant step for
the first k* iterations and then decays like 1/k, which removes the floor.
"""

import numpy as np

from structsgd import problems as P
from structsgd.bounds import params_from, bound_curve
from structsgd.constants import constants_report
from structsgd.engine import RunConfig, run_many
from structsgd.sampling import SamplingScheme
from structsgd.stepsize import derive_schedule

p = P.random_least_squares(20, 3, seed=1, interpolated=False, noise=0.5)
scheme = SamplingScheme.minibatch(p.n, 1)
report = constants_report(p, scheme)
x0 = np.zeros(p.d)

constant = derive_schedule("pl_constant", report, p.cert)
switching = derive_schedule("pl_switching", report, p.cert)
K = 20 * switching.switch_at
print(f"sigma^2 = {report.sigma2:.3f}, k* = {switching.k_star:.1f}, K = {K}")

curves = {}
for name, sched in (("constant", constant), ("switching", switching)):
    curves[name] = run_many(RunConfig(p, scheme, sched, K, x0=x0, seeds=50)).mean_f_sub

bp = params_from(report, p.cert, x0=x0, p=p, gamma=switching.gamma, k_star=switching.k_star)
bound = bound_curve("pl_switching", bp, K).values
for k in np.linspace(switching.switch_at, K - 1, 6).astype(int):
    print(f"k={k:6d}  constant {curves['constant'][k]:.3e}  "
          f"switching {curves['switching'][k]:.3e}  bound {bound[k]:.3e}")
