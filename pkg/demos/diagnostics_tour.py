"""Pinching and the integral functionals, evaluated on model and solved metrics."""

# %%
import numpy as np

from schoutenlab import cones as C
from schoutenlab import diagnostics as D
from schoutenlab import solver as S
from schoutenlab.geometry import CohomOneModel, t_from_tau

print(D.CAVEAT)

# %% the round sphere: both pinching inequalities hold with slack 6
print(D.pinching_slack_from_eigs(np.full(4, 0.5), 1.0))

# %% the cylinder at t = 1 sits on the boundary of Gamma_2, so pinching refuses it
cyl = CohomOneModel(4)
try:
    D.pinching_check(cyl, np.zeros(cyl.m), 1.0)
except D.PreconditionError as exc:
    print("precondition:", exc)

# %% solved states carry positive slack
rhs = S.ProperExp(0.7, 1 + 0.3 * np.cos(cyl.t))
for st in S.continuation(cyl, C.gamma_k(4, 2), rhs, 0.9)[::3]:
    rep = D.pinching_check(cyl, st.u, t_from_tau(st.tau, 4))
    print(f"tau={st.tau:.2f} t={t_from_tau(st.tau, 4):+.3f} min slack={rep['min_slack']:.4f}")

# %% functionals on cylinders of each dimension
for n in (3, 4, 5):
    m = CohomOneModel(n)
    u = np.zeros(m.m)
    print(f"n={n}: Y2t={D.y2t_quotient(m, u, 1.0).value:.4f} rayleigh={D.sigma2_rayleigh(m, u).value:.4f}")
m3 = CohomOneModel(3)
print("F on the 3-cylinder:", D.f21_functional(m3, np.zeros(m3.m)).value, -m3.volume**2 / 8)
