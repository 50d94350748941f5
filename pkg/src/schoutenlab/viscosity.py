"""Sup-convolution regularization, discrete viscosity inclusion checks and the
local deformation harness on a flat lattice.

The inclusion check has no finite certificate behind it: a grid function is
regularized by sup- (or inf-) convolution along a decreasing ladder of ``eps``
values and the pointwise cone margins of the regularization are read off.
Once ``eps`` is below the grid's Lipschitz scale the argmax map is the
identity and the regularization coincides with ``u`` on the grid, so the ladder
is continued until that happens or the margins stop moving.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .cones import ConeSpec, lambda_tau, membership_margin
from .geometry import CohomOneModel, periodic_derivatives, schouten_eigs_from_jets

# sup-convolution ------------------------------------------------------------


@dataclass
class SupConvolutionResult:
    u_hat: np.ndarray
    argmax: np.ndarray
    eps: float

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.argmax, np.arange(self.argmax.size)))


def periodic_distance(model: CohomOneModel) -> np.ndarray:
    """``(m, m)`` matrix of distances on the circle of length ``L``."""
    t = model.t
    d = np.abs(t[:, None] - t[None, :])
    return np.minimum(d, model.L - d)


def sup_convolution(u, model: CohomOneModel, eps: float) -> SupConvolutionResult:
    """``u_hat(x) = max_y (u(y) - d(x, y)^2 / eps)`` by brute force over the grid."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    u = np.asarray(u, dtype=float)
    vals = u[None, :] - periodic_distance(model) ** 2 / eps
    idx = np.argmax(vals, axis=1)
    # ties resolve to x itself so constants give the identity map
    own = vals[np.arange(u.size), np.arange(u.size)]
    idx = np.where(own >= vals[np.arange(u.size), idx], np.arange(u.size), idx)
    return SupConvolutionResult(vals[np.arange(u.size), idx], idx, float(eps))


def inf_convolution(u, model: CohomOneModel, eps: float) -> SupConvolutionResult:
    """``-sup_convolution(-u)``; argmin map in ``argmax``."""
    r = sup_convolution(-np.asarray(u, dtype=float), model, eps)
    return SupConvolutionResult(-r.u_hat, r.argmax, r.eps)


def second_difference(u, dt: float) -> np.ndarray:
    return periodic_derivatives(u, dt)[1]


# inclusion check ---------------------------------------------------------------------


class Side(enum.Enum):
    SUBSOLUTION = "subsolution"
    SUPERSOLUTION = "supersolution"


DEFAULT_LADDER = (0.1, 0.05, 0.025, 0.0125)


def pointwise_tau_margins(model: CohomOneModel, cone: ConeSpec, tau: float, u) -> np.ndarray:
    du, d2u = periodic_derivatives(np.asarray(u, dtype=float), model.dt)
    lam = schouten_eigs_from_jets(du, d2u, model.kappa, model.n)
    return membership_margin(cone, lambda_tau(lam, tau))


@dataclass
class ViscosityReport:
    side: str
    tau: float
    tol: float
    verdict: bool
    stabilized: bool
    margin: float
    margins: list
    ladder: list
    cone: dict
    model: dict
    heuristic_verdict: bool = True
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def viscosity_inclusion_check(
    u,
    model: CohomOneModel,
    cone: ConeSpec,
    tau: float,
    side=Side.SUBSOLUTION,
    tol: float = 1e-8,
    ladder=None,
    max_rungs: int = 60,
) -> ViscosityReport:
    """Discrete test of ``lambda^tau(u) in closure(Gamma)`` (sub) or ``not in Gamma`` (super).

    Subsolution: margins of the sup-convolution, verdict ``min >= -tol``.
    Supersolution: margins of the inf-convolution, verdict ``max <= tol``.
    ``ladder`` entries are multiplied by ``L^2``; after the listed rungs
    ``eps`` keeps halving until the argmax map is the identity or the extreme
    margin moves by less than ``tol`` between rungs.
    """
    side = Side(side)
    u = np.asarray(u, dtype=float)
    base = DEFAULT_LADDER if ladder is None else tuple(ladder)
    eps_list = [e * model.L**2 for e in base]
    sup = side is Side.SUBSOLUTION
    rungs = []
    prev = None
    stabilized = False
    margins = None
    k = 0
    while k < max_rungs:
        eps = eps_list[k] if k < len(eps_list) else rungs[-1]["eps"] / 2
        reg = sup_convolution(u, model, eps) if sup else inf_convolution(u, model, eps)
        margins = pointwise_tau_margins(model, cone, tau, reg.u_hat)
        extreme = float(margins.min() if sup else margins.max())
        d2 = second_difference(reg.u_hat, model.dt)
        rungs.append(
            {
                "eps": eps,
                "extreme_margin": extreme,
                "argmax_identity": reg.is_identity,
                "min_second_difference" if sup else "max_second_difference": float(d2.min() if sup else d2.max()),
                "max_shift": float(np.abs(reg.u_hat - u).max()),
            }
        )
        k += 1
        if k >= len(eps_list):
            if reg.is_identity or (prev is not None and abs(extreme - prev) <= tol):
                stabilized = True
                break
        prev = extreme
    final = rungs[-1]["extreme_margin"]
    verdict = final >= -tol if sup else final <= tol
    notes = ["heuristic verdict: no finite certificate for viscosity inclusion exists"]
    if not stabilized:
        notes.append("ladder exhausted without stabilization")
    return ViscosityReport(
        side=side.value,
        tau=float(tau),
        tol=tol,
        verdict=bool(verdict),
        stabilized=stabilized,
        margin=final,
        margins=margins.tolist(),
        ladder=rungs,
        cone=cone.to_dict(),
        model=model.to_dict(),
        notes=notes,
    )


# deformation harness ------------------------------------------------------------------


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class DeformationParams:
    """Parameters of the localized perturbation ``u2 - mu (h - nu) xi``."""

    n: int
    alpha: float
    mu: float
    nu: float
    R: float
    R_A: float
    x_hat: tuple
    tau: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise ParameterError("alpha must exceed 1")
        if self.mu < 0 or self.nu < 0:
            raise ParameterError("mu and nu must be nonnegative")
        if not 0 < self.tau < 1:
            raise ParameterError("tau must lie in (0, 1)")
        if len(self.x_hat) != self.n:
            raise ParameterError("x_hat has the wrong dimension")
        if not 0 < self.R_A < 1 / self.alpha:
            raise ParameterError(f"need 0 < R_A < 1/alpha, got R_A={self.R_A}, alpha={self.alpha}")
        if self.mu * self.alpha * self.E_max >= 1:
            raise ParameterError(f"mu alpha E = {self.mu * self.alpha * self.E_max:.3g} >= 1 on the sub-ball")

    @property
    def E_max(self) -> float:
        r = max(np.linalg.norm(self.x_hat) - self.R_A, 0.0)
        return float(np.exp(-self.alpha * r**2))

    @property
    def c(self) -> float:
        """``c_{n,tau} = (n - 2 - (n - 3) tau) / 2``."""
        return 0.5 * (self.n - 2 - (self.n - 3) * self.tau)

    @classmethod
    def scaled(cls, n, alpha, mu, nu, tau, alpha_R2=6.0, sub_ball=0.5):
        """Ball radius with ``alpha R^2`` fixed, sub-ball ``sub_ball / alpha`` centred at ``(R, 0, ...)``."""
        R = float(np.sqrt(alpha_R2 / alpha))
        x_hat = (R,) + (0.0,) * (n - 1)
        return cls(n, float(alpha), float(mu), float(nu), R, sub_ball / alpha, x_hat, float(tau))

    def to_dict(self):
        d = asdict(self)
        d["x_hat"] = list(self.x_hat)
        d["c"] = self.c
        return d


@dataclass(frozen=True)
class SmoothField:
    """A function on R^n with its gradient and Hessian, all vectorized over points ``(P, n)``."""

    value: callable
    grad: callable
    hess: callable


def zero_field(n: int) -> SmoothField:
    return SmoothField(
        lambda x: np.zeros(len(x)),
        lambda x: np.zeros((len(x), n)),
        lambda x: np.zeros((len(x), n, n)),
    )


def ball_lattice(center, radius: float, per_axis: int = 9) -> np.ndarray:
    """Uniform Cartesian lattice points inside a closed ball."""
    center = np.asarray(center, dtype=float)
    n = center.size
    ax = np.linspace(-radius, radius, per_axis)
    pts = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
    pts = pts[np.einsum("ij,ij->i", pts, pts) <= radius**2 * (1 + 1e-12)]
    return center + pts


@dataclass
class DeformationField:
    x: np.ndarray
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    pert: np.ndarray
    pert_grad: np.ndarray
    pert_hess: np.ndarray


def _pieces(p: DeformationParams, x):
    x = np.asarray(x, dtype=float)
    r2 = np.einsum("ij,ij->i", x, x)
    E = np.exp(-p.alpha * r2)
    h = E - np.exp(-p.alpha * p.R**2)
    arg = np.sqrt(p.alpha) * (x[:, 0] - p.x_hat[0])
    return x, E, h, np.cos(arg), np.sin(arg)


def deformation_field(params: DeformationParams, u2: SmoothField, x) -> DeformationField:
    """``u_tilde = u2 - mu (h - nu) xi`` with analytic first and second partials."""
    p = params
    x, E, h, xi, s = _pieces(p, x)
    n = p.n
    a, mu, nu = p.alpha, p.mu, p.nu
    w = -mu * (h - nu) * xi
    e1 = np.zeros(n)
    e1[0] = 1.0
    dw = (2 * mu * a * E * xi)[:, None] * x + (mu * np.sqrt(a) * (h - nu) * s)[:, None] * e1
    I = np.eye(n)
    xx = x[:, :, None] * x[:, None, :]
    xe = x[:, :, None] * e1[None, None, :]
    ddw = (
        (2 * mu * a * E * xi)[:, None, None] * (I - 2 * a * xx)
        - (2 * mu * a**1.5 * E * s)[:, None, None] * (xe + xe.transpose(0, 2, 1))
        + (mu * a * (h - nu) * xi)[:, None, None] * np.outer(e1, e1)
    )
    return DeformationField(
        x=x,
        value=u2.value(x) + w,
        grad=u2.grad(x) + dw,
        hess=u2.hess(x) + ddw,
        pert=w,
        pert_grad=dw,
        pert_hess=ddw,
    )


def a_tensor_flat(grad, hess, tau: float, n: int) -> np.ndarray:
    """``A_{u,tau}`` for ``g = e^{-2u} delta`` on flat space, in coordinates.

    ``tau D^2u + (1 - tau) Lap(u) I - c |du|^2 I + tau du du``.
    """
    c = 0.5 * (n - 2 - (n - 3) * tau)
    lap = np.trace(hess, axis1=-2, axis2=-1)
    g2 = np.einsum("pi,pi->p", grad, grad)
    I = np.eye(n)
    return (
        tau * hess
        + ((1 - tau) * lap - c * g2)[:, None, None] * I
        + tau * grad[:, :, None] * grad[:, None, :]
    )


def explicit_terms(params: DeformationParams, x) -> np.ndarray:
    """The four leading negative contributions of ``A_{u_tilde,tau} - A_{u2,tau}``."""
    p = params
    x, E, h, xi, s = _pieces(p, x)
    n, a, mu, nu, tau = p.n, p.alpha, p.mu, p.nu, p.tau
    e1 = np.zeros(n)
    e1[0] = 1.0
    I = np.eye(n)
    r2 = np.einsum("ij,ij->i", x, x)
    xx = x[:, :, None] * x[:, None, :]
    return (
        -(4 * tau * mu * a**2 * E * xi)[:, None, None] * xx
        - (tau * mu * a * nu * xi)[:, None, None] * np.outer(e1, e1)
        - (4 * (1 - tau) * mu * a**2 * E * xi * r2)[:, None, None] * I
        - ((1 - tau) * mu * a * nu * xi)[:, None, None] * I
    )


def deformation_expansion_check(params: DeformationParams, u2: SmoothField, x) -> dict:
    """Remainder of the expansion and the margin ``delta`` of the matrix inequality.

    Returns per-point remainder ratios ``|rest| / (mu a^{3/2} E + mu a^{1/2} nu + mu^2 a nu^2)``
    and ``delta_i = lambda_min(e^{2 u_tilde} (A_{u2,tau} - A_{u_tilde,tau}))``.
    The reported ``delta`` is ``max(0, min_i delta_i)``.
    """
    p = params
    x = np.asarray(x, dtype=float)
    fld = deformation_field(p, u2, x)
    A_new = a_tensor_flat(fld.grad, fld.hess, p.tau, p.n)
    A_old = a_tensor_flat(u2.grad(x), u2.hess(x), p.tau, p.n)
    diff = A_new - A_old
    rest = diff - explicit_terms(p, x)
    _, E, _, _, _ = _pieces(p, x)
    a, mu, nu = p.alpha, p.mu, p.nu
    scale = mu * a**1.5 * E + mu * np.sqrt(a) * nu + mu**2 * a * nu**2
    norm = np.linalg.norm(rest, ord=2, axis=(1, 2))
    ratio = np.divide(norm, scale, out=np.zeros_like(norm), where=scale > 0)
    gap = -diff * np.exp(2 * fld.value)[:, None, None]
    delta_pts = np.linalg.eigvalsh(gap)[:, 0]
    return {
        "params": p.to_dict(),
        "points": int(len(x)),
        "ratio": ratio,
        "ratio_max": float(ratio.max()),
        "delta_points": delta_pts,
        "delta_min_point": float(delta_pts.min()),
        "delta": float(max(0.0, delta_pts.min())),
        "remainder_max": float(norm.max()),
    }


def alpha_sweep(n=4, tau=0.5, alphas=(50, 100, 200), mu_scale=1e-3, nu=0.0, per_axis=9, alpha_R2=6.0) -> dict:
    """Run :func:`deformation_expansion_check` over ``alpha`` with ``mu = mu_scale / alpha``."""
    rows = []
    for a in alphas:
        p = DeformationParams.scaled(n, a, mu_scale / a, nu, tau, alpha_R2=alpha_R2)
        x = ball_lattice(p.x_hat, p.R_A, per_axis)
        rep = deformation_expansion_check(p, zero_field(n), x)
        rows.append(
            {
                "alpha": float(a),
                "mu": p.mu,
                "nu": p.nu,
                "R": p.R,
                "R_A": p.R_A,
                "points": rep["points"],
                "ratio_max": rep["ratio_max"],
                "delta": rep["delta"],
                "delta_min_point": rep["delta_min_point"],
            }
        )
    rmax = [r["ratio_max"] for r in rows]
    return {
        "n": n,
        "tau": tau,
        "mu_scale": mu_scale,
        "nu": nu,
        "alpha_R2": alpha_R2,
        "rows": rows,
        "ratio_spread": max(rmax) / min(rmax) if min(rmax) > 0 else float("inf"),
        "all_delta_positive": all(r["delta_min_point"] > 0 for r in rows),
    }
