"""Total work to reach a target accuracy as a function of the batch size.

With interpolation the total complexity (iterations times b) is affine in
b, so the best batch size is either 1 or n. Two least-squares instances
land on opposite sides of the threshold.
"""

import numpy as np

from structsgd import problems as P
from structsgd.bounds import BoundParams, optimal_b, total_complexity
from structsgd.constants import constants_report
from structsgd.engine import RunConfig, first_hit, run_many
from structsgd.sampling import SamplingScheme
from structsgd.stepsize import derive_schedule


def sweep(p, eps, K, seeds, batch_sizes):
    x0 = np.zeros(p.d)
    cert = p.cert
    bp = BoundParams(n=p.n, L=cert.L, L_max=cert.L_max, mu=cert.mu,
                     f0_sub=p.value(x0) - p.f_star)
    print(f"n={p.n}  L={cert.L:.3f}  L_max={cert.L_max:.3f}  mu={cert.mu:.3f}  "
          f"predicted b*={optimal_b('pl_interp', p.n, cert.L, cert.L_max, cert.mu)}")
    for b in batch_sizes:
        scheme = SamplingScheme.minibatch(p.n, b)
        sched = derive_schedule("pl_constant", constants_report(p, scheme), cert)
        agg = run_many(RunConfig(p, scheme, sched, K, x0=x0, seeds=seeds))
        hit = first_hit(agg.mean_f_sub, eps)
        emp = "censored" if hit is None else str(hit * b)
        print(f"  b={b:3d}  empirical work={emp:>9s}  "
              f"theory={total_complexity('pl_interp', bp, b, eps):10.1f}")


rng = np.random.default_rng(0)
A = rng.standard_normal((64, 2))
A /= np.linalg.norm(A, axis=1, keepdims=True)
sweep(P.make_least_squares(A, interpolated=True, x_star=np.ones(2)), 1e-8, 400, 20,
      [1, 4, 16, 64])

# one coordinate is seen by a single row: only full batches see it every step
B = np.array([[1.0, 0.0]] * 4 + [[0.0, 0.5]])
sweep(P.make_least_squares(B, interpolated=True, x_star=np.ones(2)), 1e-4, 2000, 10,
      [1, 2, 3, 5])
