"""Garding-type cones, the lambda -> lambda^tau maps and their defining functions.

All routines act on the last axis of their ``lam`` argument, so a single
eigenvalue vector of shape ``(n,)`` and a whole field of shape ``(m, n)`` are
handled by the same code.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from math import comb

import numpy as np

DEFAULT_TOL = 1e-10


class DomainError(ValueError):
    """Raised when a defining function is evaluated outside the closed cone."""


class SingularParameterError(ValueError):
    pass


class ConeAxiomError(ValueError):
    """A transformed cone fails Gamma_n^+ <= Gamma <= Gamma_1^+."""


class Verdict(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class Membership:
    verdict: Verdict
    margin: float


@dataclass(frozen=True)
class ConeSpec:
    """Either ``Gamma_k^+`` (``base is None``) or ``(base)^{tau_prime}``."""

    n: int
    k: int | None = None
    base: ConeSpec | None = None
    tau_prime: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got {self.n}")
        if self.base is None:
            if self.k is None or not 1 <= self.k <= self.n:
                raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        else:
            if self.tau_prime is None:
                raise ValueError("tau transform needs tau_prime")
            if self.base.n != self.n:
                raise ValueError("base cone has a different dimension")

    @property
    def is_tau_transform(self) -> bool:
        return self.base is not None

    @property
    def root(self) -> ConeSpec:
        """The underlying Gamma_k^+ after peeling every tau transform."""
        cone = self
        while cone.base is not None:
            cone = cone.base
        return cone

    def to_dict(self) -> dict:
        if self.base is None:
            return {"n": self.n, "kind": "gamma_k", "k": self.k}
        out = {"n": self.n, "kind": "tau_transform", "tau_prime": float(self.tau_prime)}
        if self.base.base is None:
            out["k"] = self.base.k
        else:
            out["base"] = self.base.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict, check: bool = True) -> ConeSpec:
        n = int(d["n"])
        kind = d.get("kind", "gamma_k")
        if kind == "gamma_k":
            return gamma_k(n, int(d["k"]))
        if kind == "tau_transform":
            if "base" in d:
                base = cls.from_dict(d["base"], check=check)
            else:
                base = gamma_k(n, int(d["k"]))
            return tau_transform(base, float(d["tau_prime"]), check=check)
        raise ValueError(f"unknown cone kind {kind!r}")

    def __str__(self):
        if self.base is None:
            return f"Gamma_{self.k}^+(n={self.n})"
        return f"({self.base})^{self.tau_prime:g}"


def gamma_k(n: int, k: int) -> ConeSpec:
    return ConeSpec(n=n, k=k)


def tau_transform(base: ConeSpec, tau_prime: float, check: bool = True) -> ConeSpec:
    """Build ``{lam : lam^{tau_prime} in base}``.

    For ``tau_prime <= 1`` the axioms are inherited from the base cone. For
    ``tau_prime > 1`` the set may lose ``Gamma_n^+ <= Gamma``; with ``check``
    on this raises :class:`ConeAxiomError` (detected through the closed-cone
    membership of ``(1, 0, ..., 0)`` together with ``e`` and a seeded
    ``sigma_1`` sampling). ``check=False`` keeps the raw set, which is still a
    well-defined open cone and is what the tilde-tau round trip needs.
    """
    cone = ConeSpec(n=base.n, base=base, tau_prime=float(tau_prime))
    if check:
        _check_axioms_b(cone)
    return cone


def _check_axioms_b(cone: ConeSpec, samples: int = 2000, seed: int = 0):
    n = cone.n
    e = np.ones(n)
    if membership(cone, e).verdict is not Verdict.INTERIOR:
        raise ConeAxiomError(f"{cone}: e is not an interior point")
    e1 = np.zeros(n)
    e1[0] = 1.0
    if membership(cone, e1).verdict is Verdict.EXTERIOR:
        raise ConeAxiomError(f"{cone}: (1,0,...,0) lies outside the closure, so Gamma_n^+ is not contained")
    rng = np.random.default_rng(seed)
    lam = rng.normal(size=(samples, n)) * 3.0
    inside = _margin(cone, lam) > DEFAULT_TOL
    if np.any(lam[inside].sum(axis=-1) <= 0):
        raise ConeAxiomError(f"{cone}: member with sigma_1 <= 0 found")


def elementary_symmetric(lam) -> np.ndarray:
    """All of ``sigma_0 .. sigma_n`` along the last axis, shape ``(..., n+1)``.

    Uses the coefficient recurrence for ``prod_i (1 + lam_i x)``; O(n^2).
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    out = np.zeros(lam.shape[:-1] + (n + 1,))
    out[..., 0] = 1.0
    for i in range(n):
        out[..., 1 : i + 2] = out[..., 1 : i + 2] + lam[..., i, None] * out[..., 0 : i + 1]
    return out


def sigma_k(lam, j: int):
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if not 0 <= j <= n:
        raise ValueError(f"sigma index {j} outside 0..{n}")
    return elementary_symmetric(lam)[..., j]


def lambda_tau(lam, tau: float) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    return tau * lam + (1.0 - tau) * lam.sum(axis=-1, keepdims=True)


def _elem_margins(lam, k):
    n = lam.shape[-1]
    s = elementary_symmetric(lam)
    norm = np.array([comb(n, j) for j in range(1, k + 1)], dtype=float)
    return s[..., 1 : k + 1] / norm


def _pull_back(cone: ConeSpec, lam):
    """Map ``lam`` through every tau transform down to the root cone."""
    chain = []
    c = cone
    while c.base is not None:
        chain.append(c.tau_prime)
        c = c.base
    for tp in chain:
        lam = lambda_tau(lam, tp)
    return lam


def _margin(cone: ConeSpec, lam):
    lam = np.asarray(lam, dtype=float)
    root = cone.root
    return _elem_margins(_pull_back(cone, lam), root.k).min(axis=-1)


def membership_margin(cone: ConeSpec, lam):
    """Normalized margin ``min_j sigma_j / C(n, j)``; vectorized."""
    return _margin(cone, lam)


def membership(cone: ConeSpec, lam, tol: float = DEFAULT_TOL) -> Membership:
    m = float(_margin(cone, np.asarray(lam, dtype=float).reshape(-1)))
    if m > tol:
        return Membership(Verdict.INTERIOR, m)
    if abs(m) <= tol:
        return Membership(Verdict.BOUNDARY, m)
    return Membership(Verdict.EXTERIOR, m)


def _raise_domain(cone, lam, tol, strict):
    lam_root = _pull_back(cone, np.asarray(lam, dtype=float))
    margins = _elem_margins(lam_root, cone.root.k)
    bad = margins <= tol if strict else margins < -tol
    if np.any(bad):
        flat = bad.reshape(-1, bad.shape[-1])
        row = int(np.argmax(flat.any(axis=-1)))
        j = int(np.argmax(flat[row])) + 1
        where = "" if bad.ndim == 1 else f" at point {row}"
        kind = "not strictly positive" if strict else "negative"
        raise DomainError(f"{cone}: sigma_{j} is {kind}{where} (normalized value {margins.reshape(-1, margins.shape[-1])[row, j - 1]:.3e})")


def f_eval(cone: ConeSpec, lam, tol: float = DEFAULT_TOL):
    """Defining function ``sigma_k^{1/k}`` composed with the tau transforms."""
    lam = np.asarray(lam, dtype=float)
    _raise_domain(cone, lam, tol, strict=False)
    k = cone.root.k
    sk = sigma_k(_pull_back(cone, lam), k)
    return np.maximum(sk, 0.0) ** (1.0 / k)


def f_grad(cone: ConeSpec, lam, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Analytic gradient of :func:`f_eval`; only at strictly interior points."""
    lam = np.asarray(lam, dtype=float)
    _raise_domain(cone, lam, tol, strict=True)
    if cone.base is not None:
        g = f_grad(cone.base, lambda_tau(lam, cone.tau_prime), tol)
        tp = cone.tau_prime
        return tp * g + (1.0 - tp) * g.sum(axis=-1, keepdims=True)
    n, k = cone.n, cone.k
    sk = sigma_k(lam, k)
    # d sigma_k / d lam_i = sigma_{k-1} of lam with entry i removed
    idx = np.array([[j for j in range(n) if j != i] for i in range(n)], dtype=int)
    reduced = lam[..., idx] if n > 1 else np.zeros(lam.shape[:-1] + (1, 0))
    dsk = elementary_symmetric(reduced)[..., k - 1]
    return (1.0 / k) * sk[..., None] ** (1.0 / k - 1.0) * dsk


def f_tau(cone: ConeSpec, lam, tau: float, tol: float = DEFAULT_TOL):
    """``f^tau(lam) = f(lam^tau)``."""
    return f_eval(cone, lambda_tau(lam, tau), tol)


def f_tau_grad(cone: ConeSpec, lam, tau: float, tol: float = DEFAULT_TOL):
    g = f_grad(cone, lambda_tau(lam, tau), tol)
    return tau * g + (1.0 - tau) * g.sum(axis=-1, keepdims=True)


def sigma1_upper_bound_gap(cone: ConeSpec, lam, tau: float, tol: float = DEFAULT_TOL):
    """``(f(e)/n) sigma_1(lam^tau) - f^tau(lam)``; nonnegative by concavity."""
    lam = np.asarray(lam, dtype=float)
    n = cone.n
    fe = float(f_eval(cone, np.ones(n)))
    lt = lambda_tau(lam, tau)
    return fe / n * lt.sum(axis=-1) - f_eval(cone, lt, tol)


def lemma506_margin(cone: ConeSpec, lam, t: float, tol: float = DEFAULT_TOL):
    """``f(lam^t) - (1 - t) sigma_1(lam) f(e)`` for ``lam`` in the closed cone.

    Nonnegativity of this quantity forces ``sigma_1 = 0`` on any nonzero point
    of ``boundary(Gamma^t) & closure(Gamma)``, which is what rules such points
    out when the cone is not ``Gamma_1^+``.
    """
    if cone.base is None and cone.k == 1:
        raise ValueError("margin is only informative for cones other than Gamma_1^+")
    if not 0.0 <= t < 1.0:
        raise ValueError(f"need 0 <= t < 1, got {t}")
    lam = np.asarray(lam, dtype=float)
    _raise_domain(cone, lam, tol, strict=False)
    fe = float(f_eval(cone, np.ones(cone.n)))
    return f_eval(cone, lambda_tau(lam, t), tol) - (1.0 - t) * lam.sum(axis=-1) * fe


def tilde_tau(n: int, tau_prime: float) -> float:
    den = (n - 1) - (n - 2) * tau_prime
    if abs(den) < 1e-14:
        raise SingularParameterError(f"(n-1) - (n-2) tau' vanishes for n={n}, tau'={tau_prime}")
    return (n - (n - 1) * tau_prime) / den


def contains_e1(cone: ConeSpec, tol: float = DEFAULT_TOL) -> Verdict:
    e1 = np.zeros(cone.n)
    e1[0] = 1.0
    return membership(cone, e1, tol).verdict


# sampling ---------------------------------------------------------------


def sample_interior(cone: ConeSpec, size: int, rng: np.random.Generator, scale: float = 1.0, min_margin: float = 0.0) -> np.ndarray:
    """Rejection sample ``e + scale * N(0, I)`` restricted to the cone."""
    n = cone.n
    out = []
    have = 0
    while have < size:
        lam = 1.0 + scale * rng.normal(size=(max(4 * (size - have), 64), n))
        keep = lam[_margin(cone, lam) > max(min_margin, DEFAULT_TOL)]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:size]


def sample_boundary(cone: ConeSpec, size: int, rng: np.random.Generator, scale: float = 2.0) -> np.ndarray:
    """Points on the cone boundary, found by bisection between e and outside points."""
    n = cone.n
    out = []
    have = 0
    while have < size:
        q = 1.0 + scale * rng.normal(size=(max(2 * (size - have), 16), n))
        q = q[_margin(cone, q) <= 0]
        lo = np.zeros(len(q))
        hi = np.ones(len(q))  # segment e + s (q - e)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            inside = _margin(cone, 1.0 + mid[:, None] * (q - 1.0)) > 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        out.append(1.0 + lo[:, None] * (q - 1.0))
        have += len(q)
    return np.concatenate(out)[:size]


def property_suite(cone: ConeSpec, rng: np.random.Generator, samples: int = 500) -> dict:
    """Sampled checks of the structural properties of ``(f, Gamma)``.

    Returns a mapping ``name -> {"checked": int, "failed": int}``.
    """
    n = cone.n
    res = {}

    def record(name, ok):
        ok = np.asarray(ok, dtype=bool).reshape(-1)
        res[name] = {"checked": int(ok.size), "failed": int((~ok).sum())}

    lam = sample_interior(cone, samples, rng)
    perm = np.array([rng.permutation(n) for _ in range(samples)])
    lp = np.take_along_axis(lam, perm, axis=-1)
    record("permutation_invariance", np.isclose(f_eval(cone, lam), f_eval(cone, lp), rtol=1e-12, atol=1e-13))

    a = rng.uniform(0.1, 10.0, size=samples)
    record("homogeneity", np.isclose(f_eval(cone, a[:, None] * lam), a * f_eval(cone, lam), rtol=1e-11))

    lam2 = sample_interior(cone, samples, rng)
    mid = f_eval(cone, 0.5 * (lam + lam2))
    record("concavity", mid >= 0.5 * (f_eval(cone, lam) + f_eval(cone, lam2)) - 1e-10)

    s1 = lam.sum(axis=-1)
    record("contained_in_gamma_1", s1 > 0)
    record("gradient_positive", (f_grad(cone, lam) > 0).all(axis=-1))

    orth = rng.uniform(0.01, 3.0, size=(samples, n))
    record("contains_gamma_n", _margin(cone, orth) > 0)

    tight = [0.25, 0.5, 0.75, 1.0]
    ok = []
    for lo, hi in zip(tight[:-1], tight[1:]):
        inner = _margin(cone, lambda_tau(lam, hi)) > DEFAULT_TOL
        outer = _margin(cone, lambda_tau(lam, lo)) > DEFAULT_TOL
        ok.append(~inner | outer)
    record("tau_monotonicity", np.concatenate(ok))

    if not (cone.base is None and cone.k == 1):
        closed = np.concatenate([lam, sample_boundary(cone, max(samples // 5, 1), rng)])
        ok = [lemma506_margin(cone, closed, t) >= -1e-10 for t in (0.0, 0.5, 0.9)]
        record("lemma506_margin", np.concatenate(ok))

    ok = []
    for tp in (1.05, 1.1):
        tt = tilde_tau(n, tp)
        back = tau_transform(tau_transform(cone, tp, check=False), tt, check=False)
        raw = 1.0 + 2.0 * rng.normal(size=(samples, n))
        m0 = _margin(cone, raw)
        keep = np.abs(m0) > 1e-9
        ok.append((m0[keep] > 0) == (_margin(back, raw[keep]) > 0))
    record("tilde_tau_round_trip", np.concatenate(ok))
    return res
