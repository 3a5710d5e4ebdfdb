"""Command-line front end: analyze, certify, solve, example, verify.

Every command emits line-oriented records (one JSON object per line, fixed key
order, floats at 17 significant digits) or a plain table built from the same
records.  Exit codes: 0 pass, 1 verified failure, 2 inconclusive, 3 bad input.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from .adapted_norms import SequenceWindow, growth_table, scan_context
from .certificates import (
    SOUNDNESS_TOL,
    NotCertifiable,
    StabilityCertificate,
    certify_bounded_orbit,
    certify_stability,
    default_theta,
    verify_bounded_orbit,
    verify_certificate,
    verify_step_chain,
)
from .dynamics import NORMS, ConstructionError, DomainError, OperatorFamily, build_cache
from .evolution_operators import (
    DEFAULT_SEED,
    PreconditionError,
    T_norm,
    inverse_norm_bounds,
    residual,
    solve_G,
    spectral_radius_estimate,
)
from .examples import WITNESS_HORIZON, example1_report, example2_report

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 3

DEFAULTS = {
    "family": None,
    "horizon": 512,
    "vector_norm": "sup",
    "alpha_grid": None,
    "probes": 256,
    "seed": DEFAULT_SEED,
    "delta": 0.5,
    "k_max": 12,
    "output_path": None,
    "output_format": "records",
}


class ConfigError(Exception):
    pass


# serialization


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj) -> str:
    """Compact JSON with 17-digit floats; dict order is preserved."""
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)) and not isinstance(v, bool):
        return fmt_float(float(v))
    if isinstance(v, (dict, list, tuple, np.ndarray)):
        return dumps(v)
    return str(v)


def render(records: list[dict], fmt: str) -> str:
    if fmt == "records":
        return "".join(dumps(r) + "\n" for r in records)
    cols: list[str] = []
    for r in records:
        cols += [k for k in r if k not in cols]
    rows = [[_cell(r.get(c, "")) for c in cols] for r in records]
    widths = [max([len(c)] + [len(row[i]) for row in rows]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in rows]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def emit(records: list[dict], cfg: dict):
    text = render(records, cfg["output_format"])
    path = cfg["output_path"]
    if path:
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    else:
        sys.stdout.write(text)


# configuration


def parse_real(s: str) -> float:
    try:
        return float(Fraction(s.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a real number: {s!r}") from None


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
    return doc


def resolve(args) -> dict:
    """Defaults, then config file, then flags."""
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(args.config))
    if args.family is not None:
        fam = {"kind": args.family}
        if args.dimension is not None:
            fam["dimension"] = args.dimension
        if args.data is not None:
            try:
                fam["data"] = json.loads(args.data)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"bad --data: {exc}") from None
        cfg["family"] = fam
    for key in ("horizon", "vector_norm", "probes", "seed", "delta", "k_max", "output_format"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "output", None) is not None:
        cfg["output_path"] = args.output
    if getattr(args, "alpha_grid", None) is not None:
        cfg["alpha_grid"] = [parse_real(s) for s in args.alpha_grid.split(",") if s.strip()]
    elif isinstance(cfg.get("alpha_grid"), list):
        cfg["alpha_grid"] = [parse_real(str(a)) for a in cfg["alpha_grid"]]
    if not isinstance(cfg["horizon"], int) or cfg["horizon"] < 1:
        raise ConfigError("horizon must be an integer >= 1")
    if not isinstance(cfg["probes"], int) or cfg["probes"] < 1:
        raise ConfigError("probes must be an integer >= 1")
    if not 0 < float(cfg["delta"]) < 1:
        raise ConfigError("delta must lie in (0, 1)")
    if cfg["vector_norm"] not in NORMS:
        raise ConfigError(f"vector_norm must be one of {', '.join(NORMS)}")
    if cfg["output_format"] not in ("records", "table"):
        raise ConfigError("output_format must be records or table")
    return cfg


def make_family(cfg: dict) -> OperatorFamily:
    if cfg["family"] is None:
        raise ConfigError("no family given (use --family or a config file)")
    try:
        return OperatorFamily.from_dict(cfg["family"])
    except (ConstructionError, DomainError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad family: {exc}") from None


def make_cache(cfg: dict, horizon: int | None = None):
    fam = make_family(cfg)
    try:
        return build_cache(fam, horizon or cfg["horizon"], cfg["vector_norm"])
    except ConstructionError as exc:
        raise ConfigError(str(exc)) from None


# commands


def cmd_analyze(cfg: dict) -> tuple[list[dict], int]:
    grid = cfg["alpha_grid"]
    if not grid:
        raise ConfigError("analyze needs a nonempty alpha grid")
    cache = make_cache(cfg)
    half = cache.truncate(max(1, cache.horizon // 2))
    out = []
    for a in grid:
        ctx = growth_table(cache, a)
        rec = scan_context(ctx).as_record()
        tn = T_norm(ctx, cfg["probes"], cfg["seed"])
        rho, _ = spectral_radius_estimate(ctx, cfg["k_max"])
        rec_half = scan_context(growth_table(half, a))
        out.append({
            "record": "analysis", "family": cache.family.kind, "horizon": cache.horizon,
            **{k: rec[k] for k in ("alpha", "verdict", "uniform", "admissible", "trend",
                                   "sup_M", "log_sup_M", "slope", "orbit_slope")},
            "log_sup_M_half": rec_half.log_sup_M, "verdict_half": rec_half.verdict,
            "T_norm": tn, "T_norm_bound": math.exp(a), "spectral_radius": rho,
            "tail_status": rec["tail_status"], "evidence": rec["evidence"],
        })
    return out, EXIT_PASS


def _cert_document(cache, cert: StabilityCertificate) -> dict:
    return {"record": "certificate", "family": cache.family.to_dict(), "horizon": cache.horizon,
            "vector_norm": cache.vector_norm, "certificate": cert.as_record()}


def cmd_certify(cfg: dict, alpha: float, cert_path: str | None = None,
                orbit_start: int | None = None, x0=None) -> tuple[list[dict], int]:
    cache = make_cache(cfg)
    ctx = growth_table(cache, alpha)
    bounds = inverse_norm_bounds(ctx, min(cfg["probes"], 16), cfg["seed"])
    head = {"record": "inverse_bounds", **bounds.as_record()}
    try:
        cert = certify_stability(ctx, bounds)
    except NotCertifiable:
        return [head, {"record": "verdict", "status": "not certifiable on this window"}], EXIT_INCONCLUSIVE
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from None
    doc = _cert_document(cache, cert)
    if cert_path:
        with open(cert_path, "w") as fh:
            fh.write(dumps(doc) + "\n")
    ratio, (m, n) = verify_certificate(cert, cache)
    chain = verify_step_chain(ctx, bounds, cfg["k_max"])
    sound = ratio <= 1 + SOUNDNESS_TOL and max(chain) <= 1 + SOUNDNESS_TOL
    out = [head,
           {"record": "certificate_summary", "alpha": cert.alpha, "c_alpha": cert.c_alpha, "nu": cert.nu,
            "prefactor": cert.prefactor, "provenance": cert.provenance},
           {"record": "verification", "max_violation_ratio": ratio, "worst_pair": [m, n],
            "step_chain": chain, "sound": sound}]
    if orbit_start is not None:
        theta, source = default_theta(ctx, bounds)
        x = np.ones(cache.dimension) if x0 is None else np.asarray(x0, dtype=float)
        oc = certify_bounded_orbit(ctx, orbit_start, x, theta, cfg["delta"], source)
        ver = verify_bounded_orbit(oc, cache)
        ok = (max(ver["sup_decay"], ver["growth_decay"], ver["exponential"], max(ver["factorial"]))
              <= 1 + SOUNDNESS_TOL and ver["peak_within_theta"])
        out.append({"record": "orbit_certificate", **oc.as_record(), "verification": ver, "sound": ok})
        sound = sound and ok
    out.append({"record": "verdict", "status": "certified" if sound else "certificate violated"})
    return out, EXIT_PASS if sound else EXIT_FAIL


def _read_window(path: str) -> SequenceWindow:
    try:
        with open(path) as fh:
            doc = json.load(fh)
        vals = np.asarray(doc["values"], dtype=float)
        ls = doc.get("log_scale")
        return SequenceWindow(vals, None if ls is None else np.asarray(ls, dtype=float))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError, DomainError) as exc:
        raise ConfigError(f"cannot read window {path}: {exc}") from None


def cmd_solve(cfg: dict, input_path: str) -> tuple[list[dict], int]:
    v = _read_window(input_path)
    cache = make_cache(cfg, horizon=v.horizon)
    if v.dimension != cache.dimension:
        raise ConfigError("window dimension differs from the family dimension")
    try:
        u = solve_G(cache, v)
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from None
    res = residual(cache, u, v)
    return [{"record": "window", "horizon": u.horizon, "values": u.values, "log_scale": u.log_scale},
            {"record": "residual", "max_relative_residual": res}], EXIT_PASS


def _status_code(statuses) -> int:
    if "fail" in statuses:
        return EXIT_FAIL
    if "inconclusive" in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def cmd_example(cfg: dict, name: str, horizon_given: bool) -> tuple[list[dict], int]:
    if name == "ex1":
        checks = example1_report(cfg["horizon"], seed=cfg["seed"])
    elif name == "ex2":
        checks = example2_report(cfg["horizon"] if horizon_given else WITNESS_HORIZON)
    else:
        raise ConfigError(f"unknown example {name!r} (choose ex1 or ex2)")
    recs = [{"record": "check", "example": name, **c.as_record()} for c in checks]
    code = _status_code([c.status for c in checks])
    recs.append({"record": "summary", "example": name,
                 "status": {0: "pass", 1: "fail", 2: "inconclusive"}[code]})
    return recs, code


def cmd_verify(cfg: dict, cert_path: str) -> tuple[list[dict], int]:
    try:
        with open(cert_path) as fh:
            doc = json.load(fh)
        cert = StabilityCertificate.from_record(doc["certificate"])
        fam = OperatorFamily.from_dict(doc["family"])
        cache = build_cache(fam, int(doc["horizon"]), doc.get("vector_norm", "sup"))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError,
            ConstructionError, DomainError) as exc:
        raise ConfigError(f"cannot load certificate {cert_path}: {exc}") from None
    ratio, (m, n) = verify_certificate(cert, cache)
    sound = ratio <= 1 + SOUNDNESS_TOL
    return [{"record": "verification", "max_violation_ratio": ratio, "worst_pair": [m, n], "sound": sound}], \
        EXIT_PASS if sound else EXIT_FAIL


# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--family", help="family kind, e.g. geometric, example1, matrix-list")
    common.add_argument("--data", help="family data as JSON, e.g. '{\"a\": 0.5}'")
    common.add_argument("--dimension", type=int)
    common.add_argument("--horizon", type=int)
    common.add_argument("--vector-norm", dest="vector_norm", choices=NORMS)
    common.add_argument("--probes", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--delta", type=float)
    common.add_argument("--k-max", dest="k_max", type=int)
    common.add_argument("-o", "--output", help="write records here instead of stdout")
    common.add_argument("--format", dest="output_format", choices=("records", "table"))

    p = _Parser(prog="discstab", description="Stability analysis of x_{n+1} = A_n x_n on finite windows.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", parents=[common], help="admissibility and growth scan over an alpha grid")
    a.add_argument("--alpha-grid", dest="alpha_grid", help="comma-separated, fractions allowed: -1/3,0")

    c = sub.add_parser("certify", parents=[common], help="build and check a decay certificate")
    c.add_argument("--alpha", default="0", help="exponent (default 0)")
    c.add_argument("--cert", help="write the certificate document to this file")
    c.add_argument("--orbit-start", type=int, help="also certify the orbit starting at this index")
    c.add_argument("--x0", help="comma-separated initial vector for --orbit-start (default all ones)")

    s = sub.add_parser("solve", parents=[common], help="solve G u = v for a window file")
    s.add_argument("input", help="JSON file with 'values' and optional 'log_scale'")

    e = sub.add_parser("example", parents=[common], help="run the verification report of a worked example")
    e.add_argument("name", help="ex1 or ex2")

    v = sub.add_parser("verify", parents=[common], help="re-check a certificate file")
    v.add_argument("cert", help="certificate document written by certify --cert")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "analyze":
            recs, code = cmd_analyze(cfg)
        elif args.command == "certify":
            x0 = [parse_real(s) for s in args.x0.split(",")] if args.x0 else None
            recs, code = cmd_certify(cfg, parse_real(args.alpha), args.cert, args.orbit_start, x0)
        elif args.command == "solve":
            recs, code = cmd_solve(cfg, args.input)
        elif args.command == "example":
            recs, code = cmd_example(cfg, args.name, args.horizon is not None or "horizon" in _load_config(args.config))
        else:
            recs, code = cmd_verify(cfg, args.cert)
    except ConfigError as exc:
        print(f"discstab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    emit(recs, cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
