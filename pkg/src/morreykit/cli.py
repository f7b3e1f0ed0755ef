"""Command-line front end.

    morreykit {check,conjugate,modulus,norm,verify} --config run.json [options]

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import calculus, conditions, exprlang, modular, morrey
from .errors import ConvergenceError, DivergenceError, MorreyKitError, P3Violation
from .nfunction import Domain, NFunction, make_family

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_CHECKS = ("Delta2", "Delta2-near-infinity", "P3", "P5", "P5-star", "P5-tilde",
                  "PropAa")
DEFAULTS = {"seed": 0, "tol": 1e-10, "pairs": 10_000, "samples": 10_000}


class ConfigError(MorreyKitError):
    pass


def load_schema():
    return json.loads(resources.files("morreykit").joinpath("config.schema.json").read_text())


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    d = cfg["domain"]
    if not len(d["lower"]) == len(d["upper"]) == d["n"]:
        raise ConfigError("domain: lower and upper must both have n entries")
    for key in ("x", "center"):
        pts = cfg.get(key)
        if pts is None:
            continue
        for pt in (pts if key == "x" else [pts]):
            if len(pt) != d["n"]:
                raise ConfigError(f"{key}: points must have {d['n']} coordinates")


def build_model(cfg: dict) -> NFunction:
    d = cfg["domain"]
    try:
        domain = Domain(tuple(d["lower"]), tuple(d["upper"]))
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from None
    fam = dict(cfg["family"])
    tag = fam.pop("tag")
    try:
        return make_family(domain, tag, **fam)
    except exprlang.ExprError as exc:
        raise ConfigError(f"family: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"family: {exc}") from None


def _points(cfg, m: NFunction):
    pts = cfg.get("x")
    if not pts:
        return [tuple(m.domain.center.tolist())]
    out = []
    for p in pts:
        if not bool(m.domain.contains(np.asarray(p, dtype=float))):
            raise ConfigError(f"x: point {p} lies outside the domain")
        out.append(tuple(float(v) for v in p))
    return out


def _fmt(v):
    return calculus.fmt(v)


# ---------------------------------------------------------------------------
# commands (each returns (text, exit code))

def cmd_check(cfg: dict):
    m = build_model(cfg)
    checks = cfg.get("checks") or list(DEFAULT_CHECKS)
    tol = cfg["tol"]
    reports = []
    p3_ok = True
    for name in DEFAULT_CHECKS:
        if name not in checks:
            continue
        if name == "Delta2":
            reports.append(conditions.check_delta2(m))
        elif name == "Delta2-near-infinity":
            reports.append(conditions.check_delta2(m, near_infinity=True))
        elif name == "P3":
            for x in _points(cfg, m):
                r = conditions.check_P3(m, x)
                p3_ok &= r.passed
                reports.append(r)
        elif name == "P5":
            reports.append(conditions.check_P5(m))
        elif name == "P5-star":
            if p3_ok:
                try:
                    reports.append(conditions.check_P5_star(m, tol=min(tol, 1e-12)))
                except P3Violation as exc:
                    reports.append(_skipped("P5-star", f"skipped: {exc}"))
            else:
                reports.append(_skipped("P5-star", "skipped: (P3) fails, A_* is undefined"))
        elif name == "P5-tilde":
            reports.append(conditions.check_P5_tilde(m))
        elif name == "PropAa":
            reports.append(conditions.verify_prop_Aa(m, cfg["samples"], cfg["seed"]))
    doc = {"family": m.family, "label": m.label, "reports": [r.to_dict() for r in reports]}
    ok = all(r.passed for r in reports)
    return json.dumps(doc, indent=2) + "\n", EXIT_OK if ok else EXIT_FAILED


def _skipped(cid, note):
    r = conditions.ConditionReport(cid, False)
    r.notes.append(note)
    return r


def cmd_conjugate(cfg: dict):
    m = build_model(cfg)
    grid = [float(v) for v in cfg.get("t", [])]
    conj = m.conjugate_model
    n = m.n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(n)] + ["t", "A", "a", "conj_A", "conj_a",
                                                   "sobolev_inv"])
    for x in _points(cfg, m):
        xa = np.asarray(x)
        p3 = conditions.check_P3(m, xa).passed
        for t in grid:
            row = [m.A(xa, t), m.a(xa, t), conj.A(xa, t), conj.a(xa, t)]
            if p3:
                inv = calculus.sobolev_conjugate_inverse(m, xa, abs(t), cfg["tol"], check=False)
                sob = _fmt(inv.value)
            else:
                sob = "n/a (P3 fails)"
            w.writerow([_fmt(v) for v in x] + [_fmt(t)] + [_fmt(v) for v in row] + [sob])
    return buf.getvalue(), EXIT_OK


def cmd_modulus(cfg: dict):
    m = build_model(cfg)
    s_grid = [float(v) for v in cfg.get("s", [])]
    table = calculus.modulus_table(m, _points(cfg, m), s_grid, cfg["tol"])
    return table.to_csv(), EXIT_OK


def _grid_u(cfg, m):
    if "u" not in cfg:
        raise ConfigError("this command needs a test function 'u' (config or --u)")
    try:
        return modular.sample(cfg["u"], m.domain, cfg["resolution"])
    except exprlang.ExprSyntaxError as exc:
        raise ConfigError(f"u: {exc}") from None


def cmd_norm(cfg: dict):
    cfg.setdefault("resolution", 64)
    m = build_model(cfg)
    u = _grid_u(cfg, m)
    res = modular.sobolev_norm(m, u, max(cfg["tol"], 1e-12))
    return json.dumps(res, indent=2) + "\n", EXIT_OK


def cmd_verify(cfg: dict):
    cfg.setdefault("resolution", 128)
    m = build_model(cfg)
    u = _grid_u(cfg, m)
    center = cfg.get("center") or m.domain.center.tolist()
    rep = morrey.empirical_morrey_check(m, u, center, cfg["pairs"], cfg["seed"],
                                        sigma=cfg.get("sigma"), sigma0=cfg.get("sigma0"),
                                        tol=cfg["tol"])
    return rep.to_json() + "\n", EXIT_OK if rep.passed else EXIT_FAILED


COMMANDS = {"check": cmd_check, "conjugate": cmd_conjugate, "modulus": cmd_modulus,
            "norm": cmd_norm, "verify": cmd_verify}


# ---------------------------------------------------------------------------

def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--tol", type=float, help="override the config tolerance")
    common.add_argument("--resolution", type=int, help="cells per axis for grid functions")
    p = argparse.ArgumentParser(prog="morreykit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="certify structural conditions")
    c = sub.add_parser("conjugate", parents=[common], help="table of A, a, conjugate, A_*^-1")
    c.add_argument("--t", type=_floats, help="comma-separated t values")
    mo = sub.add_parser("modulus", parents=[common], help="table of the Morrey modulus")
    mo.add_argument("--s", type=_floats, help="comma-separated s values")
    no = sub.add_parser("norm", parents=[common], help="Luxemburg norms of u and grad u")
    no.add_argument("--u", help="test function expression")
    v = sub.add_parser("verify", parents=[common], help="empirical Morrey estimate")
    v.add_argument("--u", help="test function expression")
    v.add_argument("--center", type=_floats, help="comma-separated centre coordinates")
    v.add_argument("--pairs", type=int, help="number of sampled pairs")
    return p


def _merge(cfg, args):
    for key in ("seed", "tol", "resolution"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key, attr in (("t", "t"), ("s", "s"), ("u", "u"), ("center", "center"),
                      ("pairs", "pairs")):
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = val
    for key, val in DEFAULTS.items():
        cfg.setdefault(key, val)
    validate_config(cfg)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = _merge(load_config(args.config), args)
        text, code = COMMANDS[args.command](cfg)
    except (ConfigError, exprlang.ExprError) as exc:
        print(f"morreykit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, DivergenceError) as exc:
        print(f"morreykit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MorreyKitError, ValueError) as exc:
        print(f"morreykit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
