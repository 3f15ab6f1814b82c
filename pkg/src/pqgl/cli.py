"""Command-line orchestration: classify, toolkit-selftest, check-integrand, solve, estimate, scan.

Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 on usage or
configuration errors.  Configuration is an INI file with sections
``[integrand]``, ``[grid]``, ``[solver]``, ``[estimate]``, ``[scan]`` and ``[run]``;
numbers may be written as rationals such as ``7/3``.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import estimates, integrand, orlicz, solver
from .errors import (
    ConfigError,
    EllipticityViolation,
    GapViolation,
    GrowthViolation,
    HypothesisNotMet,
    MixedBoundViolation,
    NonConvergence,
    PQGLError,
    S0NotFound,
)
from .exponents import ExponentSet, GrowthCase, as_number, classify, sobolev_exponent

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "integrand": {
        "kind": "K3", "n": "2", "p": "2", "q": "5/2", "r": "4", "alpha": "1", "mu": "0.5",
        "a_profile": "sine", "a_min": "1", "a_max": "2", "c0": "0",
    },
    "grid": {"m": "33", "extent": "1"},
    "solver": {
        "tol": "1e-8", "max_iter": "200", "boundary": "bump", "k_list": "", "eps_list": "",
        "precondition": "stiffness",
    },
    "estimate": {"radii": "0.2:0.4, 0.25:0.5, 0.3:0.6", "gammas": "0, 2, 4"},
    "scan": {"points": "", "m": "33", "alpha_sweep": ""},
    "run": {"seed": "0", "out": "pqgl-out", "samples": "10000"},
}


def _num(text: str):
    """Rational when the text is an integer or a fraction, float otherwise."""
    text = text.strip()
    try:
        return as_number(text) if ("." not in text and "e" not in text.lower()) else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _float(text: str) -> float:
    try:
        return float(Fraction(text.strip())) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _float_list(text: str):
    return [_float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _radii(text: str):
    pairs = []
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            rho, R = item.split(":")
        except ValueError as exc:
            raise ConfigError(f"radius pair must read rho:R, got {item!r}") from exc
        pairs.append((_float(rho), _float(R)))
    return pairs


@dataclass
class RunConfig:
    sections: dict
    source: Optional[str] = None
    overrides: list = field(default_factory=list)

    def get(self, section: str, key: str) -> str:
        return self.sections[section][key]

    def exponents(self, section: str = "integrand") -> ExponentSet:
        s = self.sections[section]
        try:
            return ExponentSet(
                int(s.get("n", self.sections["grid"].get("dim", "2"))),
                _num(s["p"]), _num(s["q"]), _num(s["r"]), _num(s["alpha"]), mu=_float(s["mu"]),
            )
        except KeyError as exc:
            raise ConfigError(f"[{section}] is missing {exc.args[0]}") from exc

    def integrand(self, section: str = "integrand") -> integrand.Integrand:
        s = self.sections[section]
        E = self.exponents(section)
        c_h = _float(s["c_h"]) if "c_h" in s else None
        I = integrand.make_integrand(
            s["kind"], E, s["a_profile"], _float(s["a_min"]), _float(s["a_max"]), c_h, _float(s["c0"])
        )
        # declared constants may be overridden, e.g. to provoke a violation
        if "lambda" in s or "Lambda" in s:
            lam = _float(s["lambda"]) if "lambda" in s else I.E.lambda_ell
            Lam = _float(s["Lambda"]) if "Lambda" in s else I.E.Lambda_ell
            I = dataclasses.replace(I, E=dataclasses.replace(I.E, lambda_ell=lam, Lambda_ell=Lam))
        return I

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed"))

    @property
    def out(self) -> Path:
        return Path(self.get("run", "out"))


def load_config(path: Optional[str], overrides=()) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_dict(DEFAULTS)
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
    for item in overrides:
        try:
            key, value = item.split("=", 1)
            section, option = key.split(".", 1)
        except ValueError as exc:
            raise ConfigError(f"override must read section.key=value, got {item!r}") from exc
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value)
    sections = {name: dict(parser[name]) for name in parser.sections()}
    return RunConfig(sections, path, list(overrides))


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, GrowthCase):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _clean(obj):
    """Replace non-finite floats by strings so the output stays strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_clean(payload), indent=2, sort_keys=True, default=_jsonable)
    path.write_text(text + "\n", encoding="utf-8")


def write_csv(path: Path, rows, header_comment: Optional[str] = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    writer = csv.DictWriter(buf, fieldnames=estimates.CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in estimates.CSV_COLUMNS})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PQGL_THREADS", "1")))
    except ValueError:
        return 1


# ----------------------------------------------------------------------------- subcommands


def cmd_classify(cfg: RunConfig, args) -> int:
    s = cfg.sections["integrand"]
    report = {k: s[k] for k in ("n", "p", "q", "r", "alpha", "mu") if k in s}
    try:
        E = cfg.exponents()
        case = classify(E, permissive=getattr(args, "permissive", False))
    except (GapViolation, HypothesisNotMet) as exc:
        report.update(case=None, error=type(exc).__name__, message=str(exc))
        write_json(cfg.out / "classify.json", report)
        print(json.dumps(_clean(report), sort_keys=True, default=_jsonable))
        return EXIT_FAIL
    report = E.to_dict()
    report.update(case=case.value, gap_bound=E.gap, sobolev_exponent=sobolev_exponent(E))
    write_json(cfg.out / "classify.json", report)
    print(json.dumps(_clean(report), sort_keys=True, default=_jsonable))
    return EXIT_OK


def toolkit_checks(rng: np.random.Generator, samples: int = 10_000) -> list:
    """Every scalar-toolkit check, as records {check_name, n_samples, worst_margin, fitted_constants, passed}."""
    checks = []

    def add(name, n, worst, passed, constants=None):
        checks.append({
            "check_name": name, "n_samples": int(n), "worst_margin": float(worst),
            "fitted_constants": constants or {}, "passed": bool(passed),
        })

    for r, n, a in ((6, 3, 2), (4, 2, 1), (3, 3, 5)):
        W = orlicz.OrliczWeight(r, n, a)
        tau = np.logspace(-3, 8, 1000) if r > n else np.logspace(0.01, 3, 1000)
        err = np.abs(W(W.inverse(tau)) - tau) / np.maximum(1.0, tau)
        add(f"L_round_trip(r={r},n={n},alpha={a})", tau.size, -err.max(), err.max() <= 1e-12)
        lo = math.log(math.e + 1.0) ** a
        rep = orlicz.L_inverse_asymptotics_check(W, np.geomspace(lo, lo * 1e3, 200))
        add(f"L_inverse_asymptotics(r={r},n={n},alpha={a})", 200, -rep["max_violation"],
            rep["max_violation"] <= 1e-10)

    lo = 1.0 + 2e-6
    for a in (0.5, 1.0, 2.0):
        for b in (0.5, 1.0, 2.0):
            P = orlicz.PhiFunction(a, b)
            s = np.exp(rng.uniform(math.log(lo), math.log(50.0), samples))
            t = np.exp(rng.uniform(math.log(lo), math.log(50.0), samples))
            m = orlicz.phi_submultiplicative_check(P, s, t)
            add(f"phi_submultiplicative(alpha={a},beta={b})", samples, m.min(), m.min() >= 0)

    for name, Phi in orlicz.FENCHEL_CATALOG.items():
        s = rng.uniform(0.0, 10.0, samples)
        t = rng.uniform(0.0, 10.0, samples)
        m = orlicz.fenchel_inequality_check(Phi, s, t)
        add(f"fenchel_inequality({name})", samples, m.min(), m.min() >= -1e-10)

    grid = np.logspace(-2, 3, 30)
    for name, phi in (("identity", lambda x: np.asarray(x, dtype=float)), ("sqrt", np.sqrt)):
        try:
            s0, rep = orlicz.ggp_sandwich_check(phi, grid)
            add(f"ggp_sandwich({name})", grid.size, rep["worst_margin"], True, {"s0": s0})
        except S0NotFound:
            add(f"ggp_sandwich({name})", grid.size, -math.inf, False)

    H = orlicz.HatWeight(6, 3, 2, 2, Fraction(7, 3))
    sigma = np.geomspace(1.0, 5.0, 1000)
    m = (orlicz.hat_inverse_bound(H, sigma) - H.inverse_numeric(sigma)) / np.maximum(1.0, H.inverse_numeric(sigma))
    add("hat_inverse_bound", sigma.size, m.min(), m.min() >= -1e-10)

    R1, R2, A = 0.25, 1.0, 1.0
    bound = orlicz.iteration_lemma_apply(lambda r: A / (R2 - np.asarray(r)) ** 2, R1, R2, A, 0.0, 0.0, 2.0, 0.0, 0.5)
    f1 = A / (R2 - R1) ** 2
    add("iteration_lemma", 64, bound - f1, bound >= f1, {"bound": bound})

    C = orlicz.eq_elem_check(orlicz.OrliczWeight(6, 3, 2), 2.0, np.linspace(0, 10, 101))
    add("eq_elem", 101, 0.0, math.isfinite(C), {"C": C})
    return checks


def cmd_toolkit_selftest(cfg: RunConfig, args) -> int:
    rng = np.random.default_rng(cfg.seed)
    checks = toolkit_checks(rng, int(cfg.get("run", "samples")))
    write_json(cfg.out / "toolkit_selftest.json", {"seed": cfg.seed, "checks": checks})
    failed = [c["check_name"] for c in checks if not c["passed"]]
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['check_name']} worst_margin={c['worst_margin']:.3e}")
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_check_integrand(cfg: RunConfig, args) -> int:
    I = cfg.integrand(args.integrand)
    rng = np.random.default_rng(cfg.seed)
    count = int(cfg.get("run", "samples"))
    checks, margins = [], {}
    for name, fn in (
        ("ellipticity", integrand.verify_ellipticity),
        ("growth", integrand.verify_growth),
        ("mixed_bound", integrand.verify_mixed_bound),
    ):
        try:
            res = fn(I, count, rng)
            checks.append({"name": name, "passed": True})
            margins[name] = res
        except (EllipticityViolation, GrowthViolation, MixedBoundViolation) as exc:
            checks.append({"name": name, "passed": False, "message": str(exc),
                           "witness": [np.asarray(w).tolist() for w in exc.witness]})
    radius = max(R for _, R in _radii(cfg.get("estimate", "radii")))
    total, H2 = integrand.orlicz_norm_h(I.coeff, np.zeros(I.n), radius, I.E)
    report = {
        "seed": cfg.seed, "kind": I.kind, "exponents": I.E.to_dict(), "checks": checks,
        "margins": margins, "orlicz_integral": total, "H_squared": H2, "ball_radius": radius,
    }
    write_json(cfg.out / "check_integrand.json", report)
    print(json.dumps(_clean({"checks": checks, "H_squared": H2}), sort_keys=True))
    failed = [c["name"] for c in checks if not c["passed"]]
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _apply_solve_flags(cfg: RunConfig, args) -> None:
    mapping = {
        "grid": ("grid", "m"), "boundary": ("solver", "boundary"), "tol": ("solver", "tol"),
        "max_iter": ("solver", "max_iter"), "k_list": ("solver", "k_list"),
        "eps_list": ("solver", "eps_list"), "precondition": ("solver", "precondition"),
        "radii": ("estimate", "radii"), "gammas": ("estimate", "gammas"),
    }
    for attr, (section, key) in mapping.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg.sections[section][key] = str(val)
    if getattr(args, "dim", None) is not None:
        cfg.sections[args.integrand]["n"] = str(args.dim)


def _solve(cfg: RunConfig, args):
    I = cfg.integrand(args.integrand)
    grid = solver.Grid(I.n, int(cfg.get("grid", "m")), _float(cfg.get("grid", "extent")))
    bd = solver.boundary_data(cfg.get("solver", "boundary"), I.n)
    tol = _float(cfg.get("solver", "tol"))
    max_iter = int(cfg.get("solver", "max_iter"))
    pre = cfg.get("solver", "precondition")
    return I, grid, bd, tol, max_iter, pre


def cmd_solve(cfg: RunConfig, args) -> int:
    I, grid, bd, tol, max_iter, pre = _solve(cfg, args)
    k_list = _float_list(cfg.get("solver", "k_list"))
    eps_list = _float_list(cfg.get("solver", "eps_list"))
    out = cfg.out
    try:
        if k_list:
            reports, fields = solver.solve_sequence(grid, I, bd, k_list, eps_list or [0.0], tol, max_iter, pre)
            fld = fields[-1]
            payload = {"ladder": [r.to_dict() for r in reports]}
            ok = all(r.comparison_holds for r in reports)
        else:
            fld, rep = solver.minimize(grid, I, bd, tol, max_iter, pre)
            payload = rep.to_dict()
            ok = True
    except NonConvergence as exc:
        write_json(out / "solve_report.json", {"error": "NonConvergence", "message": str(exc),
                                               "report": exc.report.to_dict() if exc.report else None})
        if exc.field is not None:
            solver.write_field(out / "field.bin", exc.field)
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    payload.update(grid={"n": grid.n, "m": grid.m, "extent": grid.extent}, boundary=bd.name, kind=I.kind)
    write_json(out / "solve_report.json", payload)
    solver.write_field(out / "field.bin", fld)
    print(f"wrote {out / 'solve_report.json'} and {out / 'field.bin'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_estimate(cfg: RunConfig, args) -> int:
    I, grid, bd, tol, max_iter, pre = _solve(cfg, args)
    case = classify(I.E)
    try:
        fld, _ = solver.minimize(grid, I, bd, tol, max_iter, pre)
    except NonConvergence as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    rows = estimates.estimate_rows(
        fld, I, case, _radii(cfg.get("estimate", "radii")), _float_list(cfg.get("estimate", "gammas"))
    )
    for row in rows:
        row.update(p=str(I.E.p), q=str(I.E.q), r=str(I.E.r), alpha=str(I.E.alpha))
    write_csv(cfg.out / "estimate.csv", rows)
    write_json(cfg.out / "estimate.json", {"regime": case.value, "rows": rows})
    failed = [r for r in rows if r["verdict"] != "pass"]
    for r in failed:
        print(f"failed: rho={r['rho']} R={r['R']} gamma={r['gamma']}", file=sys.stderr)
    print(f"wrote {cfg.out / 'estimate.csv'} ({len(rows)} rows)")
    return EXIT_FAIL if failed else EXIT_OK


def _scan_points(cfg: RunConfig):
    text = cfg.get("scan", "points")
    mu = _float(cfg.get("integrand", "mu"))
    if text.strip():
        pts = []
        for item in text.split(";"):
            if not item.strip():
                continue
            vals = [v.strip() for v in item.split(",")]
            if len(vals) != 5:
                raise ConfigError(f"scan point must read n,p,q,r,alpha, got {item!r}")
            pts.append(estimates.ScanPoint(int(vals[0]), *(_num(v) for v in vals[1:]), mu=mu))
    else:
        pts = [dataclasses.replace(pt, mu=mu) for pt in estimates.default_scan_points()]
    for a in cfg.get("scan", "alpha_sweep").replace(";", ",").split(","):
        if a.strip():
            pts.append(estimates.ScanPoint(2, Fraction(2), Fraction(5, 2), Fraction(4), _num(a), mu=mu))
    return pts


def cmd_scan(cfg: RunConfig, args) -> int:
    if getattr(args, "grid", None) is not None:
        cfg.sections["scan"]["m"] = str(args.grid)
    pts = _scan_points(cfg)
    rows = estimates.regime_scan(
        pts, int(cfg.get("scan", "m")), _radii(cfg.get("estimate", "radii")),
        _float_list(cfg.get("estimate", "gammas")), workers=_threads(),
        boundary=cfg.get("solver", "boundary"), tol=_float(cfg.get("solver", "tol")),
        max_iter=int(cfg.get("solver", "max_iter")),
    )
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    write_csv(cfg.out / "scan.csv", rows, f"generated {stamp}")
    sweeps = {}
    for row in rows:
        if row["C_prime"]:
            key = (row["regime"], row["alpha"])
            sweeps[key] = max(sweeps.get(key, 0.0), float(row["C_prime"]))
    for regime in sorted({k[0] for k in sweeps}):
        lines = [f"{a} {c!r}" for (reg, a), c in sweeps.items() if reg == regime]
        (cfg.out / f"sweep_{regime}.dat").write_text("\n".join(lines) + "\n", encoding="utf-8")
    failed = [r for r in rows if r["verdict"] in ("fail", "NonConvergence")]
    for r in failed:
        print(f"failed: {r['regime']} p={r['p']} q={r['q']} r={r['r']} alpha={r['alpha']} "
              f"rho={r['rho']} R={r['R']} gamma={r['gamma']}", file=sys.stderr)
    print(f"wrote {cfg.out / 'scan.csv'} ({len(rows)} rows)")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "toolkit-selftest": cmd_toolkit_selftest,
    "check-integrand": cmd_check_integrand,
    "solve": cmd_solve,
    "estimate": cmd_estimate,
    "scan": cmd_scan,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value")
    common.add_argument("--integrand", default="integrand", help="config section holding the integrand")

    parser = argparse.ArgumentParser(prog="pqgl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("classify", parents=[common], help="regime of the configured exponents")
    p.add_argument("--permissive", action="store_true", help="accept alpha > 0 below the gap bound")
    sub.add_parser("toolkit-selftest", parents=[common], help="margin checks of the scalar toolkit")
    sub.add_parser("check-integrand", parents=[common], help="sampled assumption checks of the integrand")
    for name in ("solve", "estimate"):
        p = sub.add_parser(name, parents=[common], help=f"{name} on a grid")
        p.add_argument("--grid", type=int, help="nodes per axis")
        p.add_argument("--dim", type=int, choices=(2, 3))
        p.add_argument("--boundary", choices=("linear", "harmonic", "bump", "expsin"))
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--precondition", choices=solver.PRECONDITIONERS)
        if name == "solve":
            p.add_argument("--k-list", dest="k_list")
            p.add_argument("--eps-list", dest="eps_list")
        else:
            p.add_argument("--radii", help="comma-separated rho:R pairs")
            p.add_argument("--gammas")
    p = sub.add_parser("scan", parents=[common], help="estimate table across regimes")
    p.add_argument("--grid", type=int, help="nodes per axis")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = load_config(args.config, args.set)
        if args.out:
            cfg.sections["run"]["out"] = args.out
        if args.seed is not None:
            cfg.sections["run"]["seed"] = str(args.seed)
        if args.integrand not in cfg.sections:
            raise ConfigError(f"no section [{args.integrand}] in the configuration")
        _apply_solve_flags(cfg, args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PQGLError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
