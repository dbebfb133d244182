"""Command line front end.

Exit codes: 0 ok, 1 failed check, 2 usage or parse error, 3 invalid input,
4 solver budget exhausted on some sweep row.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import corrmat
from .errors import CorrlabError
from .factorize import (
    PsdFactorization,
    explicit_am_factorization,
    explicit_bm_factorization,
    explicit_edm_factorization,
    verify_noisy_psd_factorization,
    verify_psd_factorization,
)
from .reach import phat
from .reproduce import PRESETS
from .sweep import SweepConfig, build_family, load_correlation, run_sweep, write_certificates, write_rows

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3, 4
CERT_TOL = 1e-10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _family_params(args) -> dict:
    keys = ("m", "k", "alphas", "L", "R", "schmidt", "u", "v", "path")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _add_family_args(p):
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=float)
    p.add_argument("--alphas", help="comma separated reals")
    p.add_argument("--L", help="left diagonal scale, comma separated")
    p.add_argument("--R", help="right diagonal scale, comma separated")
    p.add_argument("--schmidt", help="squared Schmidt coefficients, descending")
    p.add_argument("--u", help="'uniform:n' or comma separated weights")
    p.add_argument("--v", help="'uniform:n' or comma separated weights")
    p.add_argument("--path", help="correlation file (CSV x,y,p or JSON)")


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _explicit_factorization(name: str, params: dict) -> PsdFactorization:
    if name == "bm":
        return explicit_bm_factorization(int(params["m"]), float(params["k"]))
    if name == "am":
        return explicit_am_factorization(int(params["m"]), float(params["k"]))
    if name == "edm":
        return explicit_edm_factorization([float(v) for v in params["alphas"].split(",")])
    raise UsageError(f"no explicit factorization for family {name!r}")


def cmd_family(args) -> int:
    try:
        P, meta = build_family(args.name, _family_params(args))
    except KeyError as exc:
        raise UsageError(f"family {args.name!r} needs --{exc.args[0]}")
    if args.factorization_out:
        f = _explicit_factorization(args.name, _family_params(args))
        Path(args.factorization_out).write_text(json.dumps(f.to_dict()) + "\n")
    fh = _open_out(args.out)
    try:
        if args.format == "json":
            fh.write(json.dumps({**P.to_dict(), "meta": meta}) + "\n")
        else:
            corrmat.write_csv(P, fh, meta)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def _load_config(args) -> SweepConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    cfg = SweepConfig.from_dict(base)
    if args.family:
        cfg.family = args.family
    params = _family_params(args)
    if params:
        cfg.params = {**cfg.params, **params}
    if args.lambdas:
        cfg.lambdas = [float(v) for v in args.lambdas.split(",")]
    for name in ("start", "stop", "count", "seed", "restarts", "max_iters", "strict_margin", "out", "cert_dir"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    return cfg


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        P, _ = build_family(cfg.family, cfg.params)
    except KeyError as exc:
        raise UsageError(f"family {cfg.family!r} needs parameter {exc.args[0]!r}")
    rows = run_sweep(cfg, P)
    fh = _open_out(cfg.out)
    try:
        write_rows(rows, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    if cfg.cert_dir:
        write_certificates(rows, cfg.cert_dir)
    return EXIT_BUDGET if any(r.status == "unresolved" for r in rows) else EXIT_OK


def cmd_verify(args) -> int:
    if not args.factorization and not args.certificate:
        raise UsageError("verify needs --factorization and/or --certificate")
    report = {}
    passed = True
    cert = json.loads(Path(args.certificate).read_text()) if args.certificate else None
    if args.correlation:
        P = load_correlation(args.correlation)
    elif cert is not None and "correlation" in cert:
        P = corrmat.from_dict(cert["correlation"])
    else:
        raise UsageError("no correlation given")
    if args.factorization:
        f = PsdFactorization.from_dict(json.loads(Path(args.factorization).read_text()))
        rep = verify_psd_factorization(P, f, args.tol)
        report["factorization"] = rep.to_dict()
        passed &= rep.passed
        if args.lam is not None:
            noisy = verify_noisy_psd_factorization(P, f, args.lam, args.tol)
            report["noisy_factorization"] = noisy.to_dict()
            passed &= noisy.passed
    if cert is not None:
        lam = float(cert["lambda"] if args.lam is None else args.lam)
        s, t = np.asarray(cert["s"], float), np.asarray(cert["t"], float)
        low = float(phat(P, lam, s, t).min())
        simplex = bool(np.all(s >= 0) and np.all(t >= 0) and abs(s.sum() - 1) <= 1e-9 and abs(t.sum() - 1) <= 1e-9)
        ok = simplex and low >= -CERT_TOL
        report["certificate"] = {"lambda": lam, "min_phat": low, "simplex": simplex, "passed": ok}
        passed &= ok
    report["passed"] = bool(passed)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_reproduce(args) -> int:
    checks = PRESETS[args.preset]()
    for c in checks:
        print(c.line())
    if args.out:
        Path(args.out).write_text(json.dumps([c.__dict__ for c in checks], indent=1) + "\n")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corrlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("family", help="emit a correlation from a named family")
    p.add_argument("name", choices=["edm", "edm-mod", "bm", "am", "thm1", "product", "file"])
    _add_family_args(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.add_argument("--factorization-out", dest="factorization_out",
                   help="also write the family's explicit PSD factorization (bm, am, edm)")
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("sweep", help="noise sweep to CSV")
    p.add_argument("--config", help="JSON config; flags override it")
    p.add_argument("--family", choices=["edm", "edm-mod", "bm", "am", "thm1", "product", "file"])
    _add_family_args(p)
    p.add_argument("--lambdas", help="explicit comma separated grid")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--strict-margin", dest="strict_margin", type=float)
    p.add_argument("--out")
    p.add_argument("--cert-dir", dest="cert_dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="re-check a factorization and/or certificate")
    p.add_argument("--correlation")
    p.add_argument("--factorization")
    p.add_argument("--certificate")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reproduce", help="run a reproduction preset")
    p.add_argument("preset", choices=sorted(PRESETS))
    p.add_argument("--out", help="write the check list as JSON")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (json.JSONDecodeError, OSError, UnicodeDecodeError) as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorrlabError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
