"""Nonlinear eigenvalue curve on the round cylinder S^1 x S^3.

On the cylinder the solution stays constant and the eigenvalue reduces to
f(lambda^tau) at the background eigenvalues, which gives the closed form
sqrt(3 (2 - tau)(1 - tau)). As tau -> 1 the curve drops to zero because the
cylinder is the boundary metric of Gamma_2^+.
"""

# %%
from math import sqrt

import numpy as np

from schoutenlab import cones as C
from schoutenlab import solver as S
from schoutenlab.geometry import CohomOneModel

model = CohomOneModel(4, kappa=1.0, m=128)
cone = C.gamma_k(4, 2)

# %% the beta-ladder for one tau
r = S.eigenvalue_extract(model, cone, 0.7)
for beta, mu in r.beta_ladder:
    print(f"beta={beta:<5} mu={mu:.10f}")
print("stabilized:", r.stabilized)

# %% the whole curve
print(f"{'tau':>6} {'mu':>14} {'closed form':>14}")
for tau in (0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99):
    mu = S.eigenvalue_extract(model, cone, tau).mu
    print(f"{tau:6.2f} {mu:14.10f} {sqrt(3 * (2 - tau) * (1 - tau)):14.10f}")

# %% a non-constant right-hand side: the solution is no longer flat
rhs = S.ProperExp(0.7, 1 + 0.3 * np.cos(model.t))
states = S.continuation(model, cone, rhs, 0.9)
for st in states[::2]:
    print(f"tau={st.tau:.3f} iters={st.newton_iters} min_u={st.min_u:+.4f} max_u={st.max_u:+.4f} margin={st.min_cone_margin:.3e}")

# %% on a flat background there is nothing to continue from
print(S.nonexistence_probe(CohomOneModel(4, kappa=0.0), cone, 0.5, S.ProperExp(1.0))["outcome"])

# %% pushing to tau = 1 stalls just short of the boundary
print({k: v for k, v in S.nonexistence_probe(model, cone, 1.0, S.ProperExp(1.0)).items() if k in ("outcome", "tau_reached")})
