"""
Solving an OCCA21 problem
=========================

Assemble a problem from labeled data, solve it with plain SCF and with the
LOCG-accelerated solver, and check both against a case with a known answer.
"""

import numpy as np

from occafs.datasets import make_planted_dataset
from occafs.model import ProblemData, assemble_problem, kkt_residual
from occafs.scf import SolverConfig, initial_point, scf_solve
from occafs.locg import locg_solve

# Data are stored features x samples: 40 features, 150 samples, 3 classes.
ds = make_planted_dataset(n_features=40, n_informative=5, n_samples=150,
                          n_classes=3, separation=2.0, seed=0)
pd = assemble_problem(ds.X, ds.labels, alpha=0.1)
print("A:", pd.A.shape, " D:", pd.D.shape, " eps0 = %.2e" % pd.eps0)

# Both solvers start from the same point.
cfg = SolverConfig(kkt_tol=1e-6, max_iter=2000)
P0 = initial_point(pd, cfg)
P1, t1 = scf_solve(pd, cfg, P0=P0)
P2, t2 = locg_solve(pd, cfg, P0=P0)
for t in (t1, t2):
    print(f"{t.method:8s} {t.termination:10s} {t.n_iter:5d} it  "
          f"f = {t.final.objective:.10f}  kkt = {t.final.kkt_residual:.1e}")

# The objective never decreases along either trace.
print("monotone:", t1.is_monotone(), t2.is_monotone())

# %%
# A closed-form check
# -------------------
# Without the penalty and with A = I the problem is max tr(P^T D)^2 / k,
# solved by the polar factor of D with value ||D||_tr^2 / k.

rng = np.random.default_rng(1)
D = rng.standard_normal((30, 4))
toy = ProblemData(np.eye(30), D, alpha=0.0)
_, tr = locg_solve(toy)
best = np.linalg.svd(D, compute_uv=False).sum() ** 2 / 4
print("toy: solver %.12f  closed form %.12f" % (tr.final.objective, best))
print("KKT residual at the solution: %.1e" % kkt_residual(toy, _))
