"""Configuration-driven batch runner.

Configs are INI files (``key = value`` under ``[section]`` headers). Every run
writes its outputs plus a ``manifest.json`` listing each file with its SHA-256
hash into ``--out``. Exit codes: 0 ok, 1 property violation, 2 config or
construction error, 3 admissibility failure, 4 solver stall, 5 eigenvalue
ladder not stabilized.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
from math import pi
from pathlib import Path

import numpy as np

from . import cones as C
from . import diagnostics as D
from . import geometry as G
from . import solver as S
from . import viscosity as V

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_ADMISSIBILITY, EXIT_STALL, EXIT_NOT_STABILIZED = range(6)

DEFAULTS = {
    "model": {"n": "4", "kappa": "1.0", "L": repr(2 * pi), "m": "128"},
    "cone": {"kind": "gamma_k", "k": "2"},
    "check-cones": {"dims": "3, 4, 5", "samples": "300", "tau_primes": "0.5, 0.9"},
    "solve": {"tau": "0.5", "beta": "1.0", "h_tilde": "1.0", "h_amplitude": "0.0", "u0_amplitude": "0.0", "max_iter": "50"},
    "continuation": {"T": "0.9", "beta": "1.0", "h_tilde": "1.0", "h_amplitude": "0.0", "step": "0.05"},
    "eigenvalue": {"taus": "0.3, 0.5, 0.7, 0.9", "betas": "1, 0.5, 0.25, 0.1, 0.05", "step": "0.05", "require_stable": "true"},
    "viscosity": {"tau": "1.0", "side": "subsolution", "field": "zero", "amplitude": "0.1", "ladder": "0.1, 0.05, 0.025, 0.0125"},
    "deformation": {
        "n": "4",
        "tau": "0.5",
        "alphas": "50, 100, 200",
        "mu_scale": "1e-3",
        "nus": "0, 1e-4",
        "per_axis": "9",
        "alpha_R2": "6.0",
    },
    "diagnostics": {"field": "solve", "tau": "0.5", "t": "", "amplitude": "0.1", "beta": "1.0", "h_amplitude": "0.0"},
}

log = logging.getLogger("schoutenlab")


class ConfigError(ValueError):
    pass


class Config:
    """Thin typed accessor over :class:`configparser.ConfigParser` with defaults."""

    def __init__(self, text: str = ""):
        self.text = text
        self.cp = configparser.ConfigParser(interpolation=None)
        self.cp.optionxform = str
        self.cp.read_dict(DEFAULTS)
        try:
            self.cp.read_string(text, source="config")
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc

    def get(self, sec, key, conv=str):
        try:
            raw = self.cp.get(sec, key)
        except (configparser.NoSectionError, configparser.NoOptionError) as exc:
            raise ConfigError(f"[{sec}] {key}: missing") from exc
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {key} = {raw!r}: {exc}") from exc

    def opt(self, sec, key, conv=str):
        if self.cp.has_option(sec, key) and self.cp.get(sec, key).strip():
            return self.get(sec, key, conv)
        return None

    def floats(self, sec, key):
        return self.get(sec, key, lambda s: [float(x) for x in s.split(",") if x.strip()])

    def ints(self, sec, key):
        return self.get(sec, key, lambda s: [int(x) for x in s.split(",") if x.strip()])

    def flag(self, sec, key):
        def conv(s):
            if s.strip().lower() in ("1", "true", "yes", "on"):
                return True
            if s.strip().lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected a boolean")

        return self.get(sec, key, conv)

    def as_dict(self):
        return {s: dict(self.cp.items(s)) for s in self.cp.sections()}

    # builders ---------------------------------------------------------------

    def model(self) -> G.CohomOneModel:
        try:
            return G.CohomOneModel(
                n=self.get("model", "n", int),
                kappa=self.get("model", "kappa", float),
                L=self.get("model", "L", float),
                m=self.get("model", "m", int),
                vol_N=self.opt("model", "vol_N", float),
            )
        except ValueError as exc:
            raise ConfigError(f"[model] {exc}") from exc

    def cone(self, n: int) -> C.ConeSpec:
        d = {"n": n, "kind": self.get("cone", "kind")}
        k = self.opt("cone", "k", int)
        if k is not None:
            d["k"] = k
        tp = self.opt("cone", "tau_prime", float)
        if tp is not None:
            d["tau_prime"] = tp
        try:
            return C.ConeSpec.from_dict(d)
        except KeyError as exc:
            raise ConfigError(f"[cone] missing {exc}") from exc


def _h_tilde(model, cfg, sec):
    ht = cfg.get(sec, "h_tilde", float) if cfg.cp.has_option(sec, "h_tilde") else 1.0
    amp = cfg.get(sec, "h_amplitude", float)
    if amp == 0:
        return ht
    return ht * (1 + amp * np.cos(2 * pi * model.t / model.L))


# outputs --------------------------------------------------------------------------


class Outputs:
    def __init__(self, out: Path):
        self.out = out
        self.files = {}
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str):
        data = text.encode()
        (self.out / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def json(self, name: str, obj):
        self.write(name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def manifest(self, command, cfg, args, code, status):
        doc = {
            "command": command,
            "seed": args.seed,
            "tol": args.tol,
            "exit_code": code,
            "status": status,
            "config": cfg.as_dict() if cfg is not None else None,
            "config_text": cfg.text if cfg is not None else None,
            "outputs": dict(sorted(self.files.items())),
        }
        (self.out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"not serializable: {type(o)}")


# commands -------------------------------------------------------------------------------


def cmd_check_cones(cfg, args, out):
    rng = np.random.default_rng(args.seed)
    samples = cfg.get("check-cones", "samples", int)
    results = []
    violations = 0
    for n in cfg.ints("check-cones", "dims"):
        for k in range(1, n + 1):
            cones = [C.gamma_k(n, k)] + [C.tau_transform(C.gamma_k(n, k), tp) for tp in cfg.floats("check-cones", "tau_primes")]
            for cone in cones:
                res = C.property_suite(cone, rng, samples)
                bad = sum(v["failed"] for v in res.values())
                violations += bad
                results.append({"cone": cone.to_dict(), "label": str(cone), "contains_e1": C.contains_e1(cone).value, "properties": res})
    out.json("cones_report.json", {"samples": samples, "seed": args.seed, "violations": violations, "cones": results})
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_solve(cfg, args, out):
    model = cfg.model()
    cone = cfg.cone(model.n)
    tau = cfg.get("solve", "tau", float)
    rhs = S.ProperExp(cfg.get("solve", "beta", float), _h_tilde(model, cfg, "solve"))
    u0 = cfg.get("solve", "u0_amplitude", float) * np.sin(2 * pi * model.t / model.L)
    st = S.newton_solve(model, cone, tau, rhs, u0, tol=args.tol, max_iter=cfg.get("solve", "max_iter", int))
    out.write("solution.csv", G.gridfield_to_csv(model, st.u, "u"))
    out.json("state.json", {"model": model.to_dict(), "cone": cone.to_dict(), "state": st.to_dict()})
    return EXIT_OK


def cmd_continuation(cfg, args, out):
    model = cfg.model()
    cone = cfg.cone(model.n)
    rhs = S.ProperExp(cfg.get("continuation", "beta", float), _h_tilde(model, cfg, "continuation"))
    step = cfg.get("continuation", "step", float)
    states = S.continuation(model, cone, rhs, cfg.get("continuation", "T", float), step, tol=args.tol)
    out.write("run.json", S.run_manifest(model, cone, rhs, step, states) + "\n")
    out.write("solution.csv", G.gridfield_to_csv(model, states[-1].u, "u"))
    return EXIT_OK


def cmd_eigenvalue(cfg, args, out):
    model = cfg.model()
    cone = cfg.cone(model.n)
    betas = cfg.floats("eigenvalue", "betas")
    step = cfg.get("eigenvalue", "step", float)
    rows = {"tau": [], "mu": [], "predicted": [], "residual": [], "margin": [], "stabilized": []}
    results = []
    code = EXIT_OK
    lam0 = model.background_eigs
    for tau in cfg.floats("eigenvalue", "taus"):
        r = S.eigenvalue_extract(model, cone, tau, betas, tol=args.tol, schedule=step)
        results.append(r.to_dict())
        try:
            pred = float(C.f_tau(cone, lam0, tau))
        except C.DomainError:
            pred = float("nan")
        last = r.states[-1]
        for key, val in zip(rows, (tau, r.mu, pred, last.residual_norm, last.min_cone_margin, float(r.stabilized))):
            rows[key].append(val)
        if not r.stabilized:
            code = EXIT_NOT_STABILIZED
    meta = {"model": json.dumps(model.to_dict(), sort_keys=True), "cone": str(cone)}
    out.write("eigenvalues.csv", G.fields_to_csv(rows, meta))
    out.json("eigenpairs.json", {"model": model.to_dict(), "cone": cone.to_dict(), "results": results})
    if code and cfg.flag("eigenvalue", "require_stable"):
        return code
    return EXIT_OK


def _field(cfg, sec, model, cone, args):
    kind = cfg.get(sec, "field")
    amp = cfg.get(sec, "amplitude", float)
    t = model.t
    if kind == "zero":
        return np.zeros(model.m), None
    if kind == "sine":
        return amp * np.sin(2 * pi * t / model.L), None
    if kind == "wedge":
        d = np.abs(t - model.L / 2)
        return -amp * np.minimum(d, model.L - d), None
    if kind == "solve":
        tau = cfg.get(sec, "tau", float)
        beta = cfg.get(sec, "beta", float) if cfg.cp.has_option(sec, "beta") else 1.0
        rhs = S.ProperExp(beta, _h_tilde(model, cfg, sec) if cfg.cp.has_option(sec, "h_amplitude") else 1.0)
        st = S.continuation(model, cone, rhs, tau, tol=args.tol)[-1]
        return st.u, st
    raise ConfigError(f"[{sec}] field = {kind!r}: expected zero, sine, wedge or solve")


def cmd_viscosity(cfg, args, out):
    model = cfg.model()
    cone = cfg.cone(model.n)
    u, _ = _field(cfg, "viscosity", model, cone, args)
    side = cfg.get("viscosity", "side")
    try:
        side = V.Side(side)
    except ValueError as exc:
        raise ConfigError(f"[viscosity] side = {side!r}") from exc
    rep = V.viscosity_inclusion_check(
        u, model, cone, cfg.get("viscosity", "tau", float), side, tol=max(args.tol, 1e-12), ladder=cfg.floats("viscosity", "ladder")
    )
    out.json("viscosity.json", rep.to_dict())
    return EXIT_OK


def cmd_deformation(cfg, args, out):
    sweeps = []
    for nu in cfg.floats("deformation", "nus"):
        sweeps.append(
            V.alpha_sweep(
                n=cfg.get("deformation", "n", int),
                tau=cfg.get("deformation", "tau", float),
                alphas=cfg.floats("deformation", "alphas"),
                mu_scale=cfg.get("deformation", "mu_scale", float),
                nu=nu,
                per_axis=cfg.get("deformation", "per_axis", int),
                alpha_R2=cfg.get("deformation", "alpha_R2", float),
            )
        )
    out.json("deformation.json", {"sweeps": sweeps, "bounded": all(s["ratio_spread"] < 4 for s in sweeps)})
    return EXIT_OK


def cmd_diagnostics(cfg, args, out):
    model = cfg.model()
    cone = cfg.cone(model.n)
    u, st = _field(cfg, "diagnostics", model, cone, args)
    t = cfg.opt("diagnostics", "t", float)
    if t is None:
        t = G.t_from_tau(cfg.get("diagnostics", "tau", float), model.n)
    report = {"model": model.to_dict(), "t": t, "state": st.to_dict() if st else None}
    cols = {"t": model.t, "u": u}

    def attempt(name, fn):
        try:
            r = fn()
        except (D.PreconditionError, ValueError) as exc:
            report[name] = {"error": str(exc)}
            return
        if isinstance(r, D.FunctionalReport):
            report[name] = r.to_dict()
            cols[name] = r.integrand
        else:
            report[name] = {k: v for k, v in r.items() if k != "slack"}
            cols[name + "_slack"] = r["slack"]

    attempt("pinching", lambda: D.pinching_check(model, u, t))
    attempt("y2t_quotient", lambda: D.y2t_quotient(model, u, t))
    attempt("sigma2_rayleigh", lambda: D.sigma2_rayleigh(model, u))
    if model.n == 3:
        attempt("f21_functional", lambda: D.f21_functional(model, u))
    out.json("diagnostics.json", report)
    out.write("integrands.csv", G.fields_to_csv(cols, {"t_param": t, **model.to_dict()}))
    return EXIT_OK


COMMANDS = {
    "check-cones": cmd_check_cones,
    "solve": cmd_solve,
    "continuation": cmd_continuation,
    "eigenvalue": cmd_eigenvalue,
    "viscosity": cmd_viscosity,
    "deformation": cmd_deformation,
    "diagnostics": cmd_diagnostics,
}


def build_parser():
    p = argparse.ArgumentParser(prog="schoutenlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="INI config file")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=1e-10)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Outputs(args.out)
    cfg = None
    status = "ok"
    try:
        text = args.config.read_text() if args.config else ""
        cfg = Config(text)
        code = COMMANDS[args.command](cfg, args, out)
        status = "ok" if code == EXIT_OK else "violation" if code == EXIT_VIOLATION else "not_stabilized"
    except OSError as exc:
        code, status = EXIT_CONFIG, f"config error: {exc}"
    except S.AdmissibilityError as exc:
        code, status = EXIT_ADMISSIBILITY, f"admissibility: {exc}"
    except S.NotStabilized as exc:
        code, status = EXIT_NOT_STABILIZED, str(exc)
    except S.SolverError as exc:
        code, status = EXIT_STALL, f"{type(exc).__name__}: {exc}"
    except (ConfigError, C.ConeAxiomError, ValueError) as exc:
        code, status = EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
    if code:
        print(f"schoutenlab {args.command}: {status}", file=sys.stderr)
    out.manifest(args.command, cfg, args, code, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
