"""Schouten tensor calculus and the S^1 x N^{n-1} grid reduction.

Conventions: ``g_u = exp(-2u) g_0``. On the product ``S^1_L x N`` with
``Ric_N = (n-2) kappa g_N`` and an S^1-invariant ``u(t)`` the Schouten tensor
of ``g_u`` relative to ``g_0`` has one eigenvalue along ``dt`` and an
``(n-1)``-fold eigenvalue along ``N``::

    lam_1 = u'' + (u'^2 - kappa) / 2
    lam_N = (kappa - u'^2) / 2
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
import scipy.linalg


class Normalization(enum.Enum):
    BACKGROUND = "background_inverse"  # lambda(g_0^{-1} A)
    METRIC = "metric_inverse"  # lambda(g_u^{-1} A)


def sphere_volume(dim: int, kappa: float = 1.0) -> float:
    """Volume of the round ``dim``-sphere of sectional curvature ``kappa``."""
    v = 2.0 * pi ** ((dim + 1) / 2) / gamma((dim + 1) / 2)
    return v * kappa ** (-dim / 2)


@dataclass(frozen=True)
class CohomOneModel:
    n: int
    kappa: float = 1.0
    L: float = 2 * pi
    m: int = 128
    vol_N: float | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"need n >= 3, got {self.n}")
        if self.m < 16 or self.m % 2:
            raise ValueError(f"grid size must be even and >= 16, got {self.m}")
        if self.L <= 0:
            raise ValueError("circumference must be positive")
        if self.vol_N is None:
            vol = sphere_volume(self.n - 1, self.kappa) if self.kappa > 0 else 1.0
            object.__setattr__(self, "vol_N", vol)
        if self.vol_N <= 0:
            raise ValueError("fiber volume must be positive")

    @property
    def dt(self) -> float:
        return self.L / self.m

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.m) * self.dt

    @property
    def background_eigs(self) -> np.ndarray:
        lam = np.full(self.n, 0.5 * self.kappa)
        lam[0] = -0.5 * self.kappa + 0.0
        return lam

    @property
    def volume(self) -> float:
        return self.L * self.vol_N

    def with_grid(self, m: int) -> CohomOneModel:
        return CohomOneModel(self.n, self.kappa, self.L, m, self.vol_N)

    def to_dict(self) -> dict:
        return {"n": self.n, "kappa": self.kappa, "L": self.L, "m": self.m, "vol_N": self.vol_N}


@dataclass
class EigenField:
    """Per-grid-point Schouten eigenvalues, shape ``(m, n)``."""

    values: np.ndarray
    normalization: Normalization = Normalization.BACKGROUND
    meta: dict = field(default_factory=dict)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def tau_from_t(t: float, n: int) -> float:
    """``tau`` with ``lambda(A^t) in Gamma  <=>  lambda(A) in Gamma^tau``."""
    return 1.0 / (1.0 + (1.0 - t) / (n - 2))


def t_from_tau(tau: float, n: int) -> float:
    return 1.0 - (n - 2) * (1.0 / tau - 1.0)


# pointwise ----------------------------------------------------------------


def _cholesky(g):
    try:
        return np.linalg.cholesky(np.asarray(g, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise ValueError("metric is not symmetric positive definite") from exc


def pointwise_schouten(g, ric, t: float = 1.0) -> np.ndarray:
    """Trace-modified Schouten tensor ``(Ric - t R g / (2(n-1))) / (n-2)``."""
    if t > 1:
        raise ValueError(f"trace modification needs t <= 1, got {t}")
    g = np.asarray(g, dtype=float)
    ric = np.asarray(ric, dtype=float)
    n = g.shape[-1]
    _cholesky(g)
    R = np.trace(np.linalg.solve(g, ric))
    return (ric - t * R / (2.0 * (n - 1)) * g) / (n - 2)


def generalized_eigs(g, S) -> np.ndarray:
    """Eigenvalues of ``g^{-1} S`` (ascending), via Cholesky whitening."""
    Lc = _cholesky(g)
    Linv = scipy.linalg.solve_triangular(Lc, np.eye(Lc.shape[0]), lower=True)
    W = Linv @ np.asarray(S, dtype=float) @ Linv.T
    return np.linalg.eigvalsh(0.5 * (W + W.T))


# grid reduction -----------------------------------------------------------


def periodic_derivatives(u, dt: float):
    """Second-order central differences ``(u', u'')`` on a periodic grid."""
    u = np.asarray(u, dtype=float)
    up = np.roll(u, -1)
    um = np.roll(u, 1)
    return (up - um) / (2 * dt), (up - 2 * u + um) / dt**2


def schouten_eigs_from_jets(du, d2u, kappa: float, n: int) -> np.ndarray:
    """Background-normalized eigenvalues from the first two derivatives of u."""
    du = np.asarray(du, dtype=float)
    d2u = np.asarray(d2u, dtype=float)
    lam = np.empty(du.shape + (n,))
    lam[..., 0] = d2u + 0.5 * (du**2 - kappa)
    lam[..., 1:] = (0.5 * (kappa - du**2))[..., None]
    return lam


def conformal_schouten_eigs(model: CohomOneModel, u, normalization=Normalization.BACKGROUND) -> EigenField:
    u = np.asarray(u, dtype=float)
    du, d2u = periodic_derivatives(u, model.dt)
    lam = schouten_eigs_from_jets(du, d2u, model.kappa, model.n)
    normalization = Normalization(normalization)
    if normalization is Normalization.METRIC:
        lam = np.exp(2 * u)[:, None] * lam
    return EigenField(lam, normalization)


def lambda_tau_field(field: EigenField, tau: float) -> EigenField:
    lam = np.asarray(field.values)
    out = tau * lam + (1 - tau) * lam.sum(axis=-1, keepdims=True)
    return EigenField(out, field.normalization, {**field.meta, "tau": tau})


def scalar_curvature(model: CohomOneModel, u) -> np.ndarray:
    """``R_{g_u} = e^{2u} (R_0 + 2(n-1) u'' - (n-1)(n-2) u'^2)``."""
    u = np.asarray(u, dtype=float)
    n = model.n
    du, d2u = periodic_derivatives(u, model.dt)
    R0 = (n - 1) * (n - 2) * model.kappa
    return np.exp(2 * u) * (R0 + 2 * (n - 1) * d2u - (n - 1) * (n - 2) * du**2)


def conformal_factor_convert(u, n: int) -> np.ndarray:
    """``w`` with ``w^{4/(n-2)} g_0 = e^{-2u} g_0``."""
    return np.exp(-(n - 2) * np.asarray(u, dtype=float) / 2)


def conformal_factor_invert(w, n: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("conformal factor must be positive")
    return -2.0 * np.log(w) / (n - 2)


def ricci_eigs_from_schouten(field: EigenField, n: int | None = None) -> EigenField:
    """Eigenvalues of ``g^{-1} Ric`` from those of ``g^{-1} A`` (same metric)."""
    if field.normalization is not Normalization.METRIC:
        raise ValueError("Ricci eigenvalues need the metric-inverse normalization")
    lam = np.asarray(field.values)
    n = lam.shape[-1] if n is None else n
    return EigenField((n - 2) * lam + lam.sum(axis=-1, keepdims=True), Normalization.METRIC, {"tensor": "ricci"})


# CSV ---------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def fields_to_csv(columns: dict, meta: dict | None = None) -> str:
    """Render equally long columns as CSV text (LF endings, 17 significant digits).

    ``meta`` becomes a leading ``# key=value;...`` comment line.
    """
    buf = io.StringIO()
    if meta:
        buf.write("# " + ";".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    names = list(columns)
    cols = [np.asarray(columns[k], dtype=float).reshape(-1) for k in names]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def eigenfield_to_csv(model: CohomOneModel, field: EigenField) -> str:
    lam = np.asarray(field.values)
    cols = {"t": model.t}
    for i in range(lam.shape[-1]):
        cols[f"lambda_{i + 1}"] = lam[:, i]
    meta = {"normalization": field.normalization.value, **{k: v for k, v in model.to_dict().items()}}
    return fields_to_csv(cols, meta)


def gridfield_to_csv(model: CohomOneModel, values, name: str = "value") -> str:
    return fields_to_csv({"t": model.t, name: values}, model.to_dict())


def read_csv(text: str):
    """Inverse of :func:`fields_to_csv`: returns ``(columns, meta)``."""
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        for item in lines[0][1:].strip().split(";"):
            if "=" in item:
                k, v = item.split("=", 1)
                meta[k] = v
        lines = lines[1:]
    rows = list(csv.reader(lines))
    names = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return {k: data[:, i] for i, k in enumerate(names)}, meta
