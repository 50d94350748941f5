"""A tour of the cone layer: sigma_k, margins, tau-transforms and the tilde-tau round trip."""

# %%
import numpy as np

from schoutenlab import cones as C

rng = np.random.default_rng(0)

# %% sigma_k and the normalized margin
lam = np.array([-0.5, 0.5, 0.5, 0.5])  # round cylinder S^1 x S^3
G2 = C.gamma_k(4, 2)
print("sigma_1..4:", C.elementary_symmetric(lam)[1:])
print("margin in Gamma_2:", C.membership_margin(G2, lam))  # 0: the cylinder sits on the boundary
print(C.membership(G2, lam))

# %% mixing with the trace pushes the cylinder inside
for tau in (0.9, 0.5):
    print(f"tau={tau}: lambda^tau={C.lambda_tau(lam, tau)}, f={float(C.f_tau(G2, lam, tau)):.6f}")

# %% f = sigma_2^{1/2} is concave and increasing on the cone
x = C.sample_interior(G2, 5, rng, scale=1.5)
print("f on samples:", C.f_eval(G2, x))
print("grad f > 0:", np.all(C.f_grad(G2, x) > 0))

# %% tau' > 1 breaks the axioms, but the tilde-tau map undoes it
tp = 1.1
raw = C.tau_transform(G2, tp, check=False)
try:
    C.tau_transform(G2, tp)
except C.ConeAxiomError as exc:
    print("axiom check:", exc)
back = C.tau_transform(raw, C.tilde_tau(4, tp), check=False)
pts = 1.0 + 2.0 * rng.normal(size=(2000, 4))
agree = (C.membership_margin(G2, pts) > 0) == (C.membership_margin(back, pts) > 0)
print(f"round trip agreement: {agree.mean():.4f}")

# %% full sampled property suite
for k in range(1, 5):
    res = C.property_suite(C.gamma_k(4, k), rng, samples=200)
    print(f"Gamma_{k}:", {name: r["failed"] for name, r in res.items()})
