"""Per-metric geometric functionals and the Ricci pinching check.

Every quantity is evaluated at one given metric ``g_u = e^{-2u} g_0``; none of
the conformal-class infima or suprema are attempted, so values are candidate
(upper or lower) bounds at best and never invariants.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .cones import gamma_k, membership_margin, sigma_k
from .geometry import (
    CohomOneModel,
    EigenField,
    Normalization,
    conformal_schouten_eigs,
    ricci_eigs_from_schouten,
    scalar_curvature,
)

CAVEAT = "per-metric candidate value, not a conformal invariant"


class PreconditionError(ValueError):
    pass


@dataclass
class FunctionalReport:
    """``value == vol_N * dt * sum(integrand)``."""

    name: str
    value: float
    integrand: np.ndarray
    quadrature: dict = field(default_factory=dict)

    def to_dict(self, with_field=False) -> dict:
        d = {"name": self.name, "value": self.value, "quadrature": self.quadrature}
        if with_field:
            d["integrand"] = np.asarray(self.integrand).tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def integrate(model: CohomOneModel, values) -> float:
    """Periodic trapezoid rule times the fiber volume."""
    return float(model.vol_N * model.dt * np.sum(values))


def volume_density(model: CohomOneModel, u) -> np.ndarray:
    """``dv_{g_u} / dv_{g_0} = e^{-n u}``."""
    return np.exp(-model.n * np.asarray(u, dtype=float))


def _quad(model, **extra):
    return {"rule": "periodic trapezoid", "m": model.m, "dt": model.dt, "vol_N": model.vol_N, "caveat": CAVEAT, **extra}


def schouten_t(lam_metric, t: float, n: int) -> np.ndarray:
    """Eigenvalues of ``g^{-1} A^t`` from those of ``g^{-1} A``."""
    lam = np.asarray(lam_metric, dtype=float)
    return lam + (1 - t) / (n - 2) * lam.sum(axis=-1, keepdims=True)


# pinching ------------------------------------------------------------------------


def pinching_slack_from_eigs(lam_metric, t: float) -> np.ndarray:
    """Per-direction slack of ``(t - 2 + 4/n) R < 2 ric_i < (2 - t) R``.

    ``lam_metric`` holds eigenvalues of ``g^{-1} A`` (shape ``(..., n)``); the
    result has the same shape with the smaller of the two slacks per entry.
    """
    lam = np.asarray(lam_metric, dtype=float)
    n = lam.shape[-1]
    ric = ricci_eigs_from_schouten(EigenField(lam, Normalization.METRIC)).values
    R = 2 * (n - 1) * lam.sum(axis=-1, keepdims=True)
    lower = 2 * ric - (t - 2 + 4 / n) * R
    upper = (2 - t) * R - 2 * ric
    return np.minimum(lower, upper)


def pinching_check(model: CohomOneModel, u, t: float, tol: float = 1e-10) -> dict:
    """Check the Ricci pinching implied by ``lambda(g^{-1} A^t) in Gamma_2^+``.

    The cone condition is verified first; a failing point raises
    :class:`PreconditionError`.
    """
    if t > 1:
        raise ValueError("need t <= 1")
    u = np.asarray(u, dtype=float)
    n = model.n
    lam = conformal_schouten_eigs(model, u, Normalization.METRIC).values
    margins = membership_margin(gamma_k(n, 2), schouten_t(lam, t, n))
    bad = np.flatnonzero(margins <= tol)
    if bad.size:
        i = int(bad[0])
        raise PreconditionError(f"lambda(A^t) not in Gamma_2^+ at grid point {i} (t={model.t[i]:.6g}, margin {margins[i]:.3e})")
    ric = ricci_eigs_from_schouten(EigenField(lam, Normalization.METRIC)).values
    R = scalar_curvature(model, u)[:, None]
    slack = np.minimum(2 * ric - (t - 2 + 4 / n) * R, (2 - t) * R - 2 * ric)
    return {
        "t": t,
        "min_slack": float(slack.min()),
        "passes": bool(slack.min() > 0),
        "argmin": int(np.unravel_index(np.argmin(slack), slack.shape)[0]),
        "min_gamma2_margin": float(margins.min()),
        "slack": slack.min(axis=-1),
    }


# functionals ---------------------------------------------------------------------------


def _require_positive_scalar(model, u):
    R = scalar_curvature(model, u)
    if not np.all(R > 0):
        i = int(np.argmin(R))
        raise PreconditionError(f"scalar curvature {R[i]:.3e} <= 0 at grid point {i}")


def y2t_quotient(model: CohomOneModel, u, t: float) -> FunctionalReport:
    """``int sigma_2(lambda(g^{-1} A^t_g)) dv_g / Vol(g)^{(n-4)/n}`` at ``g = g_u``."""
    u = np.asarray(u, dtype=float)
    _require_positive_scalar(model, u)
    n = model.n
    lam = schouten_t(conformal_schouten_eigs(model, u, Normalization.METRIC).values, t, n)
    dens = volume_density(model, u)
    s2 = sigma_k(lam, 2) * dens
    vol = integrate(model, dens)
    norm = vol ** ((n - 4) / n)
    integrand = s2 / norm
    return FunctionalReport(
        "y2t_quotient", integrate(model, integrand), integrand, _quad(model, t=t, integral=integrate(model, s2), volume=vol)
    )


def f21_functional(model: CohomOneModel, u) -> FunctionalReport:
    """``(int sigma_2 dv)(int sigma_1 dv)`` for ``n = 3``."""
    if model.n != 3:
        raise ValueError(f"F[g] is defined for n = 3 only, got n = {model.n}")
    u = np.asarray(u, dtype=float)
    lam = conformal_schouten_eigs(model, u, Normalization.METRIC).values
    dens = volume_density(model, u)
    i1 = integrate(model, sigma_k(lam, 1) * dens)
    s2 = sigma_k(lam, 2) * dens
    i2 = integrate(model, s2)
    integrand = s2 * i1
    return FunctionalReport(
        "f21_functional", integrate(model, integrand), integrand, _quad(model, int_sigma1=i1, int_sigma2=i2, sign=int(np.sign(i1 * i2)))
    )


def sigma2_rayleigh(model: CohomOneModel, u) -> FunctionalReport:
    """``int sigma_2(lambda(g^{-1} A_g)) dv_g / int e^{4u} dv_g``; needs ``R > 0`` unless ``n = 4``."""
    u = np.asarray(u, dtype=float)
    if model.n != 4:
        _require_positive_scalar(model, u)
    lam = conformal_schouten_eigs(model, u, Normalization.METRIC).values
    dens = volume_density(model, u)
    s2 = sigma_k(lam, 2) * dens
    den = integrate(model, np.exp(4 * u) * dens)
    integrand = s2 / den
    return FunctionalReport(
        "sigma2_rayleigh", integrate(model, integrand), integrand, _quad(model, numerator=integrate(model, s2), denominator=den)
    )


def report_dict(obj) -> dict:
    """JSON-ready view of a report (arrays become lists)."""
    if isinstance(obj, FunctionalReport):
        return obj.to_dict()
    out = {}
    for k, v in (asdict(obj) if hasattr(obj, "__dataclass_fields__") else obj).items():
        out[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return out
