"""Newton solver with tau-homotopy for ``f^tau(lambda(g0^{-1} A_{g_u})) = h(t, u)``.

The equation lives on the periodic grid of a :class:`CohomOneModel`. The
residual at grid point ``i`` depends on ``(u_{i-1}, u_i, u_{i+1})`` through the
central-difference jets, so its Jacobian is a periodic tridiagonal matrix::

    J phi = a phi'' + b phi' - dh/dz phi
    a = G_1,   b = u' (G_1 - sum_{k >= 2} G_k),   G = grad f^tau

where the derivatives of ``phi`` use the same stencils as the residual.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .cones import DEFAULT_TOL, ConeSpec, f_tau, f_tau_grad, gamma_k, lambda_tau, membership_margin
from .geometry import CohomOneModel, periodic_derivatives, schouten_eigs_from_jets

log = logging.getLogger(__name__)


# errors -------------------------------------------------------------------


class SolverError(RuntimeError):
    pass


class DomainBreach(SolverError):
    """The iterate left the cone; carries the first offending point."""

    def __init__(self, index: int, margin: float):
        super().__init__(f"cone exit at grid point {index} (margin {margin:.3e})")
        self.index = index
        self.margin = margin


class MaxIterations(SolverError):
    def __init__(self, state: SolverState):
        super().__init__(f"no convergence in {state.newton_iters} iterations (residual {state.residual_norm:.3e})")
        self.state = state


class DomainCollapse(SolverError):
    """Step length fell below the damping floor."""

    def __init__(self, state: SolverState, reason: str):
        super().__init__(f"damping floor hit ({reason}); residual {state.residual_norm:.3e}")
        self.state = state
        self.reason = reason


class AdmissibilityError(SolverError):
    """No ``delta`` in (0, 1) puts the background eigenvalues in Gamma_n^+."""


class ContinuationStall(SolverError):
    def __init__(self, tau_reached: float, states: list, diagnostics: dict):
        super().__init__(f"continuation stalled at tau={tau_reached:.6g}")
        self.tau_reached = tau_reached
        self.states = states
        self.diagnostics = diagnostics


class NotStabilized(SolverError):
    def __init__(self, result: EigenpairResult):
        super().__init__(f"beta ladder did not stabilize: {result.beta_ladder}")
        self.result = result


# right-hand sides ----------------------------------------------------------------


@dataclass(frozen=True)
class ProperExp:
    """``h(t, z) = h_tilde(t) exp(beta z)``; proper and increasing in ``z``."""

    beta: float
    h_tilde: np.ndarray | float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if np.any(np.asarray(self.h_tilde) <= 0):
            raise ValueError("h_tilde must be positive")

    def value(self, u, tau=None):
        return self.h_tilde * np.exp(self.beta * u)

    def dz(self, u, tau=None):
        return self.beta * self.h_tilde * np.exp(self.beta * u)

    def to_dict(self):
        ht = np.asarray(self.h_tilde, dtype=float)
        return {"kind": "proper_exp", "beta": self.beta, "h_tilde": float(ht) if ht.ndim == 0 else ht.tolist()}


@dataclass(frozen=True)
class HomotopyBlend:
    """``(T-tau)/(T-delta) h0 e^{2u} + (tau-delta)/(T-delta) target(u)``."""

    delta: float
    T: float
    h0: np.ndarray | float
    target: ProperExp

    def __post_init__(self):
        if not self.delta < self.T:
            raise ValueError("homotopy needs delta < T")

    def _weights(self, tau):
        a = (self.T - tau) / (self.T - self.delta)
        return a, 1.0 - a

    def value(self, u, tau):
        a, b = self._weights(tau)
        return a * self.h0 * np.exp(2 * u) + b * self.target.value(u, tau)

    def dz(self, u, tau):
        a, b = self._weights(tau)
        return 2 * a * self.h0 * np.exp(2 * u) + b * self.target.dz(u, tau)

    def to_dict(self):
        h0 = np.asarray(self.h0, dtype=float)
        return {
            "kind": "homotopy_blend",
            "delta": self.delta,
            "T": self.T,
            "h0": float(h0) if h0.ndim == 0 else h0.tolist(),
            "target": self.target.to_dict(),
        }


# states ---------------------------------------------------------------------------


@dataclass
class SolverState:
    tau: float
    u: np.ndarray
    residual_norm: float
    newton_iters: int
    min_cone_margin: float
    rhs: dict = field(default_factory=dict)
    converged: bool = False

    @property
    def min_u(self) -> float:
        return float(np.min(self.u))

    @property
    def max_u(self) -> float:
        return float(np.max(self.u))

    def to_dict(self, with_field: bool = False) -> dict:
        d = {
            "tau": self.tau,
            "residual_norm": self.residual_norm,
            "newton_iters": self.newton_iters,
            "min_cone_margin": self.min_cone_margin,
            "min_u": self.min_u,
            "max_u": self.max_u,
            "converged": self.converged,
            "rhs": self.rhs,
        }
        if with_field:
            d["u"] = self.u.tolist()
        return d


@dataclass
class EigenpairResult:
    tau: float
    mu: float
    v: np.ndarray
    beta_ladder: list
    stabilized: bool
    states: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "mu": self.mu,
            "beta_ladder": [[b, x] for b, x in self.beta_ladder],
            "stabilized": self.stabilized,
            "v_inf_norm": float(np.abs(self.v).max()),
            "states": [s.to_dict() for s in self.states],
        }


# residual and Jacobian ----------------------------------------------------------------


def _tau_margins(model, cone, tau, u):
    du, d2u = periodic_derivatives(u, model.dt)
    lam = schouten_eigs_from_jets(du, d2u, model.kappa, model.n)
    return du, lam, membership_margin(cone, lambda_tau(lam, tau))


def _check_domain(margins):
    bad = np.flatnonzero(~(margins > DEFAULT_TOL))
    if bad.size:
        i = int(bad[np.argmin(margins[bad])]) if np.all(np.isfinite(margins[bad])) else int(bad[0])
        raise DomainBreach(i, float(margins[i]))


def cone_margins(model: CohomOneModel, cone: ConeSpec, tau: float, u) -> np.ndarray:
    """Normalized margin of ``lambda^tau`` at every grid point."""
    return _tau_margins(model, cone, tau, np.asarray(u, dtype=float))[2]


def residual(model: CohomOneModel, cone: ConeSpec, tau: float, rhs, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    _, lam, margins = _tau_margins(model, cone, tau, u)
    _check_domain(margins)
    return f_tau(cone, lam, tau) - rhs.value(u, tau)


def _periodic_tridiag(lower, diag, upper):
    """Matrix with ``A[i, i-1] = lower[i]``, ``A[i, i] = diag[i]``, ``A[i, i+1] = upper[i]`` (mod m)."""
    m = diag.size
    i = np.arange(m)
    rows = np.concatenate([i, i, i])
    cols = np.concatenate([(i - 1) % m, i, (i + 1) % m])
    return sparse.csr_matrix((np.concatenate([lower, diag, upper]), (rows, cols)), shape=(m, m))


def jacobian(model: CohomOneModel, cone: ConeSpec, tau: float, rhs, u) -> sparse.csr_matrix:
    """Exact derivative of :func:`residual` as a sparse periodic tridiagonal matrix."""
    u = np.asarray(u, dtype=float)
    du, lam, margins = _tau_margins(model, cone, tau, u)
    _check_domain(margins)
    G = f_tau_grad(cone, lam, tau)
    a = G[:, 0]
    b = du * (G[:, 0] - G[:, 1:].sum(axis=-1))
    dt = model.dt
    lower = a / dt**2 - b / (2 * dt)
    upper = a / dt**2 + b / (2 * dt)
    diag = -2 * a / dt**2 - rhs.dz(u, tau) * np.ones_like(u)
    return _periodic_tridiag(lower, diag, upper)


# Newton -------------------------------------------------------------------------------


def _state(model, cone, tau, rhs, u, res, iters, converged):
    margins = cone_margins(model, cone, tau, u)
    return SolverState(
        tau=float(tau),
        u=u.copy(),
        residual_norm=float(np.abs(res).max()),
        newton_iters=iters,
        min_cone_margin=float(margins.min()),
        rhs=rhs.to_dict(),
        converged=converged,
    )


def newton_solve(
    model: CohomOneModel,
    cone: ConeSpec,
    tau: float,
    rhs,
    u0,
    tol: float = 1e-10,
    max_iter: int = 50,
    min_step: float = 2.0**-30,
) -> SolverState:
    """Damped Newton iteration.

    Each step is halved while the trial iterate leaves the cone or fails to
    reduce the residual 2-norm (Armijo factor ``1 - 1e-4 s``). Convergence is
    declared on the sup norm.

    Raises
    ------
    DomainBreach
        ``u0`` itself is not strictly inside the cone domain.
    DomainCollapse
        The step length fell below ``min_step``.
    MaxIterations
        ``max_iter`` iterations without convergence.
    """
    u = np.array(u0, dtype=float)
    res = residual(model, cone, tau, rhs, u)
    for it in range(max_iter + 1):
        if np.abs(res).max() <= tol:
            return _state(model, cone, tau, rhs, u, res, it, True)
        if it == max_iter:
            break
        J = jacobian(model, cone, tau, rhs, u)
        step = spla.spsolve(J.tocsc(), -res)
        if not np.all(np.isfinite(step)):
            raise DomainCollapse(_state(model, cone, tau, rhs, u, res, it, False), "singular Jacobian")
        norm0 = np.linalg.norm(res)
        s = 1.0
        reason = ""
        while True:
            trial = u + s * step
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    res_t = residual(model, cone, tau, rhs, trial)
            except DomainBreach:
                reason = "cone breach"
            else:
                if np.all(np.isfinite(res_t)) and (
                    np.linalg.norm(res_t) <= (1 - 1e-4 * s) * norm0 or np.abs(res_t).max() <= tol
                ):
                    break
                reason = "no residual decrease"
            s *= 0.5
            if s < min_step:
                raise DomainCollapse(_state(model, cone, tau, rhs, u, res, it, False), reason)
        u, res = trial, res_t
        log.debug("newton it=%d step=%.3g res=%.3e", it, s, np.abs(res).max())
    raise MaxIterations(_state(model, cone, tau, rhs, u, res, max_iter, False))


# continuation ------------------------------------------------------------------------------


def admissible_delta(model: CohomOneModel, cap: float = 0.5, fraction: float = 0.9) -> float:
    """``fraction * sup{delta : lambda^delta(background) in Gamma_n^+}``, capped.

    Raises :class:`AdmissibilityError` when no such ``delta`` exists.
    """
    lam = model.background_eigs
    s = lam.sum()
    if not s > 0:
        raise AdmissibilityError(
            f"background eigenvalues {lam.tolist()} have sigma_1 = {s:g} <= 0; "
            "no delta puts lambda^delta in Gamma_n^+"
        )
    # component i of lambda^delta is s + delta (lam_i - s)
    d = lam - s
    sup = min([1.0] + [s / -x for x in d if x < 0])
    return min(fraction * sup, cap)


def continuation(
    model: CohomOneModel,
    cone: ConeSpec,
    target: ProperExp,
    T: float,
    schedule=0.05,
    tol: float = 1e-10,
    max_iter: int = 50,
    min_dtau: float = 1e-4,
) -> list[SolverState]:
    """March ``tau`` from an admissible ``delta`` to ``T`` along the blended rhs.

    ``schedule`` is either the initial step in ``tau`` or an increasing list of
    intermediate ``tau`` values to pass through. On a failed Newton solve the
    step is halved; below ``min_dtau`` a :class:`ContinuationStall` is raised.
    If ``T`` does not exceed the admissible ``delta`` the start is moved to
    ``T / 2``.
    """
    if not 0 < T <= 1:
        raise ValueError(f"target tau must lie in (0, 1], got {T}")
    delta = admissible_delta(model)
    if T <= delta:
        delta = T / 2
    lam0 = model.background_eigs
    h0 = float(f_tau(cone, lam0, delta))
    rhs = HomotopyBlend(delta, T, h0, target)

    if np.ndim(schedule) == 0:
        dtau0 = float(schedule)
        waypoints = [T]
    else:
        waypoints = sorted(x for x in map(float, schedule) if delta < x < T) + [T]
        dtau0 = max(np.diff([delta] + waypoints).max(), min_dtau)

    u = np.zeros(model.m)
    res = residual(model, cone, delta, rhs, u)
    states = [_state(model, cone, delta, rhs, u, res, 0, True)]
    tau, dtau = delta, dtau0
    wp = 0
    while True:
        if tau >= T:
            return states
        nxt = min(tau + dtau, waypoints[wp])
        try:
            st = newton_solve(model, cone, nxt, rhs, states[-1].u, tol=tol, max_iter=max_iter)
        except (DomainBreach, DomainCollapse, MaxIterations) as exc:
            dtau = 0.5 * (nxt - tau)
            log.info("continuation: failure at tau=%.6g (%s); dtau -> %.3g", nxt, exc, dtau)
            if dtau < min_dtau:
                raise ContinuationStall(tau, states, _stall_diagnostics(states, nxt, exc)) from exc
            continue
        states.append(st)
        tau = nxt
        if tau >= waypoints[wp] and wp < len(waypoints) - 1:
            wp += 1
        dtau = min(2 * dtau, dtau0)


def _stall_diagnostics(states, tau_failed, exc):
    mins = [s.min_u for s in states]
    return {
        "tau_failed": float(tau_failed),
        "error": str(exc),
        "min_u_trend": mins,
        "last_margin": states[-1].min_cone_margin,
    }


# eigenvalue ---------------------------------------------------------------------------------


DEFAULT_BETAS = (1.0, 0.5, 0.25, 0.1, 0.05)


def eigenvalue_extract(
    model: CohomOneModel,
    cone: ConeSpec,
    tau: float,
    beta_ladder=DEFAULT_BETAS,
    tol: float = 1e-10,
    schedule=0.05,
    stab_tol: float = 1e-4,
    require_stable: bool = False,
    max_iter: int = 50,
) -> EigenpairResult:
    """Limit of ``exp(beta * mean(u_beta))`` for ``h = exp(beta u)`` as beta decreases.

    The first rung is reached by continuation; each later rung is a Newton
    solve warm-started from ``v + (beta_prev / beta) * ubar_prev``, which keeps
    ``exp(beta * ubar)`` fixed across the switch.
    """
    betas = [float(b) for b in beta_ladder]
    if not betas or any(b <= 0 for b in betas) or any(np.diff(betas) >= 0):
        raise ValueError("beta ladder must be strictly decreasing positive reals")
    states = continuation(model, cone, ProperExp(betas[0], 1.0), tau, schedule, tol=tol, max_iter=max_iter)
    st = states[-1]
    ladder = []
    finals = []
    prev_beta = None
    for beta in betas:
        if prev_beta is not None:
            ubar = st.u.mean()
            u0 = st.u - ubar + (prev_beta / beta) * ubar
            st = newton_solve(model, cone, tau, ProperExp(beta, 1.0), u0, tol=tol, max_iter=max_iter)
        ladder.append((beta, float(np.exp(beta * st.u.mean()))))
        finals.append(st)
        prev_beta = beta
    vals = np.array([x for _, x in ladder[-3:]])
    spread = (vals.max() - vals.min()) / abs(vals).max()
    stabilized = bool(len(ladder) >= 3 and spread < stab_tol)
    u = finals[-1].u
    result = EigenpairResult(tau=float(tau), mu=ladder[-1][1], v=u - u.mean(), beta_ladder=ladder, stabilized=stabilized, states=finals)
    if require_stable and not stabilized:
        raise NotStabilized(result)
    return result


# nonexistence probe -------------------------------------------------------------------------


class ProbeOutcome(enum.Enum):
    SOLVED = "solved"
    OBSTRUCTED_FLAT = "obstructed_flat"
    DIVERGING = "diverging"
    STALLED = "stalled"


def _diverging(mins, threshold=-20.0, run=5):
    """``min_u`` below ``threshold`` and strictly decreasing over ``run`` consecutive steps."""
    if len(mins) < run + 1:
        return False
    tail = np.asarray(mins[-(run + 1) :])
    return bool(tail[-1] < threshold and np.all(np.diff(tail) < 0))


def nonexistence_probe(model: CohomOneModel, cone: ConeSpec, tau_target: float, rhs: ProperExp, schedule=0.05, tol=1e-10) -> dict:
    """Run the continuation and classify how it ended."""
    report = {"tau_target": tau_target, "model": model.to_dict(), "cone": cone.to_dict(), "rhs": rhs.to_dict()}
    try:
        states = continuation(model, cone, rhs, tau_target, schedule, tol=tol)
    except AdmissibilityError as exc:
        report.update(outcome=ProbeOutcome.OBSTRUCTED_FLAT.value, detail=str(exc))
        return report
    except ContinuationStall as exc:
        mins = exc.diagnostics["min_u_trend"]
        outcome = ProbeOutcome.DIVERGING if _diverging(mins) else ProbeOutcome.STALLED
        report.update(outcome=outcome.value, tau_reached=exc.tau_reached, detail=exc.diagnostics)
        return report
    # a solved end state carries a small residual and positive margins whatever the size of u
    last = states[-1]
    ok = last.converged and last.residual_norm <= tol and last.min_cone_margin > 0
    outcome = ProbeOutcome.SOLVED if ok else ProbeOutcome.STALLED
    report.update(outcome=outcome.value, tau_reached=last.tau, final=last.to_dict(), steps=len(states))
    return report


def run_manifest(model: CohomOneModel, cone: ConeSpec, rhs, schedule, states: list) -> str:
    """JSON manifest of a continuation run."""
    doc = {
        "model": model.to_dict(),
        "cone": cone.to_dict(),
        "rhs": rhs.to_dict(),
        "schedule": schedule if np.ndim(schedule) == 0 else list(schedule),
        "states": [s.to_dict() for s in states],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def default_cone(n: int) -> ConeSpec:
    return gamma_k(n, 2)
