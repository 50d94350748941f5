"""Sup-convolution, the viscosity inclusion check and the deformation harness."""

# %%
import numpy as np

from schoutenlab import cones as C
from schoutenlab import viscosity as V
from schoutenlab.geometry import CohomOneModel

model = CohomOneModel(4, m=256)
d = np.abs(model.t - model.L / 3)
wedge = -np.minimum(d, model.L - d)

# %% sup-convolution of a concave kink: the kink is rounded off into a parabola
for eps in (0.4, 0.2, 0.1):
    r = V.sup_convolution(wedge, model, eps)
    lift = (r.u_hat - wedge).max()
    semi = V.second_difference(r.u_hat, model.dt).min()
    print(f"eps={eps}: max lift {lift:.4f} (eps/4 = {eps / 4:.4f}), min second difference {semi:.2f} >= {-2 / eps:.2f}")

# %% inclusion check: the cylinder is a boundary solution at tau = 1
cyl = CohomOneModel(4)
G2 = C.gamma_k(4, 2)
rep = V.viscosity_inclusion_check(np.zeros(cyl.m), cyl, G2, 1.0, "subsolution")
print(rep.verdict, rep.margin, rep.stabilized)

# %% a concave kink fails the subsolution test, a convex kink passes vacuously
print("concave:", V.viscosity_inclusion_check(0.3 * np.interp(cyl.t, model.t, wedge), cyl, G2, 0.7).verdict)
print("convex:", V.viscosity_inclusion_check(0.05 * np.abs(np.sin((cyl.t - 1) / 2)), cyl, C.gamma_k(4, 1), 0.7).verdict)

# %% deformation harness: remainder ratio across the alpha sweep
for nu in (0.0, 1e-4, 1e-3):
    sweep = V.alpha_sweep(nu=nu, per_axis=7)
    rows = ", ".join(f"alpha={r['alpha']:g}: ratio={r['ratio_max']:.3e} delta={r['delta']:.3e}" for r in sweep["rows"])
    print(f"nu={nu:g}: spread={sweep['ratio_spread']:.3f}  {rows}")
