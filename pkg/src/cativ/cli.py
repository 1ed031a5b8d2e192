"""Command-line pipeline: moments, estimate, bounds, sensitivity, simulate,
selfcheck.

Machine-readable JSON goes to stdout, prose to stderr.  Every JSON payload
embeds a run manifest (subcommand, input digest, effective configuration,
library version, seeds, orientation flag, timestamp).  Exit codes: 0 on
success, 2 on input or validation errors, 3 on a weak instrument, 4 when
selfcheck finds a property violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, Estimand, bootstrap
from .bounds import (
    bounds_bounded,
    bounds_monotonic,
    bounds_none,
    breakdown_kappa,
    kappa_sweep,
)
from .data import load_dataset, save_dataset, validate_support
from .dgp import DgpSpec, diagnostics, sample
from .effects import effects_bounds, effects_point
from .errors import DataError, WeakInstrumentError
from .identify import identify_point, omega_fit_residual, plug_back_residual
from .moments import (
    DEFAULT_WEAK_IV_TOL,
    check_relevance,
    estimate_moments,
    orient_instrument,
)
from .selfcheck import run_selfcheck

__all__ = ["main", "build_parser"]


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def _jsonify(obj):
    """Convert numpy containers to JSON-portable values; non-finite floats
    become null."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _emit(payload: dict) -> None:
    print(json.dumps(_jsonify(payload), indent=2, sort_keys=True))


def _sha256(path) -> str | None:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError:
        return None


_CONFIG_ECHO_SKIP = {"config", "no_timestamp", "func"}


def _manifest(args: argparse.Namespace, input_path=None) -> dict:
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in _CONFIG_ECHO_SKIP and not k.startswith("_")
    }
    out = {
        "subcommand": args._subcommand,
        "version": __version__,
        "input": {
            "path": str(input_path) if input_path is not None else None,
            "sha256": _sha256(input_path) if input_path is not None else None,
        },
        "config": _jsonify(config),
        "seed": getattr(args, "seed", None),
    }
    if not args.no_timestamp:
        out["timestamp"] = datetime.now(timezone.utc).isoformat()
    return out


def _render_table(rows, stream) -> None:
    """Tables-style human rendering: label, point estimate, CI columns."""
    header = f"{'':38s} {'Point Estimate':>14s} {'2.5%':>9s} {'97.5%':>9s}"
    print(header, file=stream)
    print("-" * len(header), file=stream)
    for label, point, lo, hi in rows:
        cells = [f"{label:38s}", f"{point:14.4f}"]
        cells.append(f"{lo:9.4f}" if lo is not None else f"{'':9s}")
        cells.append(f"{hi:9.4f}" if hi is not None else f"{'':9s}")
        print(" ".join(cells), file=stream)


# ---------------------------------------------------------------------------
# shared pipeline pieces
# ---------------------------------------------------------------------------


def _load(args):
    category_map = args.categories.split(",") if args.categories else None
    return load_dataset(args.data, category_map=category_map, baseline=args.baseline)


def _bootstrap_block(args, ds, estimand) -> dict | None:
    if not args.bootstrap:
        return None
    if args.seed is None:
        raise DataError("--bootstrap requires --seed")
    cfg = BootstrapConfig(
        seed=args.seed,
        replicates=args.bootstrap,
        ci_level=args.ci,
        on_degenerate=args.on_degenerate,
    )
    res = bootstrap(ds, estimand, cfg)
    return {
        "point": res.point,
        "ci_lower": res.ci_lower,
        "ci_upper": res.ci_upper,
        "ci_level": res.ci_level,
        "method": res.method,
        "replicates": res.replicates,
        "replicates_used": res.replicates_used,
        "replicates_skipped": res.replicates_skipped,
        "skip_reasons": res.skip_reasons,
        "seed": res.seed,
        "estimand": res.estimand,
    }


def _effects_block(eff) -> dict:
    out = {}
    if eff.ate is not None:
        out.update(
            {
                "ate": eff.ate,
                "rr": eff.rr,
                "log_odds": eff.log_odds,
                "rr_defined": eff.rr_defined,
                "log_odds_defined": eff.log_odds_defined,
                "used_raw": eff.used_raw,
                "testable_warning": eff.testable_warning,
            }
        )
    if eff.ate_lower is not None:
        out.update(
            {
                "ate_lower": eff.ate_lower,
                "ate_upper": eff.ate_upper,
                "note": eff.ate_note,
            }
        )
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_moments(args) -> int:
    ds = _load(args)
    m = estimate_moments(ds, stratum=args.stratum)
    if m.p[1] != m.p[0]:
        m = orient_instrument(m)
    payload = {
        "manifest": _manifest(args, args.data),
        "categories": list(ds.categories),
        "q": m.q,
        "p": m.p,
        "joint": m.joint,
        "mu": m.mu,
        "n_z": m.n_z,
        "swapped_z": m.swapped_z,
        "support_diagnostics": [
            {"code": d.code, "message": d.message, "stratum": d.stratum}
            for d in validate_support(ds)
        ],
    }
    _emit(payload)
    return 0


def cmd_estimate(args) -> int:
    ds = _load(args)
    m = estimate_moments(ds, stratum=args.stratum)
    check_relevance(m, args.tol)
    m = orient_instrument(m)
    pdist = identify_point(m, tol=args.tol)
    eff = effects_point(pdist, use_raw=True if args.raw else None)

    payload = {
        "manifest": _manifest(args, args.data),
        "categories": list(ds.categories),
        "pi1": pdist.pi1,
        "pi0": pdist.pi0,
        "pi1_raw": pdist.raw_pi1,
        "pi0_raw": pdist.raw_pi0,
        "omega": pdist.omega,
        "omega_in_range": pdist.omega_in_range,
        "testable_ok": {"0": pdist.testable_ok[0], "1": pdist.testable_ok[1]},
        "residuals": {
            "plug_back": plug_back_residual(pdist, m),
            "omega_fit": omega_fit_residual(pdist, m),
        },
        "swapped_z": pdist.swapped_z,
        "effects": _effects_block(eff),
    }
    boot = _bootstrap_block(
        args, ds, Estimand.point_effects(stratum=args.stratum, tol=args.tol)
    )
    if boot is not None:
        payload["bootstrap"] = boot

    _emit(payload)
    if args.table:
        rows = []
        for k, label in enumerate(ds.categories):
            for name, key, value in (
                (f"P(Y1={label})", f"pi1[{label}]", float(pdist.pi1[k])),
                (f"P(Y0={label})", f"pi0[{label}]", float(pdist.pi0[k])),
                (
                    f"ATE[{label}]",
                    f"ate[{label}]",
                    float(pdist.pi1[k] - pdist.pi0[k]),
                ),
            ):
                lo = boot["ci_lower"].get(key) if boot is not None else None
                hi = boot["ci_upper"].get(key) if boot is not None else None
                rows.append((name, value, lo, hi))
        _render_table(rows, sys.stderr)
    return 0


def cmd_bounds(args) -> int:
    ds = _load(args)
    m = estimate_moments(ds, stratum=args.stratum)
    if args.assumption == "monotonic":
        check_relevance(m, args.tol)
        m = orient_instrument(m)
        b = bounds_monotonic(m)
    elif args.assumption == "bounded":
        if args.kappa is None:
            raise DataError("--assumption bounded requires --kappa")
        if m.p[1] != m.p[0]:
            m = orient_instrument(m)
        b = bounds_bounded(m, args.kappa, tol=args.tol)
    else:
        b = bounds_none(m)
    eff = effects_bounds(b)
    breakdown = None
    if args.assumption == "bounded":
        breakdown = [breakdown_kappa(m, k, tol=args.tol) for k in range(m.q)]

    payload = {
        "manifest": _manifest(args, args.data),
        "categories": list(ds.categories),
        "regime": b.regime,
        "kappa": b.kappa,
        "bounds_raw": {
            "pi1": {"lower": b.raw_lower[1], "upper": b.raw_upper[1]},
            "pi0": {"lower": b.raw_lower[0], "upper": b.raw_upper[0]},
        },
        "bounds_truncated": {
            "pi1": {"lower": b.lower[1], "upper": b.upper[1]},
            "pi0": {"lower": b.lower[0], "upper": b.upper[0]},
        },
        "ate_bounds": {
            "lower": eff.ate_lower,
            "upper": eff.ate_upper,
            "note": eff.ate_note,
        },
        "breakdown_kappa": breakdown,
        "swapped_z": b.swapped_z,
        "effects": _effects_block(eff),
    }
    boot = _bootstrap_block(
        args,
        ds,
        Estimand.bounds(
            args.assumption, kappa=args.kappa, stratum=args.stratum, tol=args.tol
        ),
    )
    if boot is not None:
        payload["bootstrap"] = boot
    _emit(payload)
    if args.table:
        header = f"{'':38s} {'Lower':>9s} {'Upper':>9s}"
        print(header, file=sys.stderr)
        print("-" * len(header), file=sys.stderr)
        for arm, name in ((1, "P(Y1={})"), (0, "P(Y0={})")):
            for k, label in enumerate(ds.categories):
                print(
                    f"{name.format(label):38s} {b.lower[arm, k]:9.4f} "
                    f"{b.upper[arm, k]:9.4f}",
                    file=sys.stderr,
                )
    return 0


def cmd_sensitivity(args) -> int:
    ds = _load(args)
    m = estimate_moments(ds, stratum=args.stratum)
    check_relevance(m, args.tol)
    m = orient_instrument(m)
    try:
        grid = [float(v) for v in args.kappa_grid.split(",") if v != ""]
    except ValueError:
        raise DataError(f"bad --kappa-grid {args.kappa_grid!r}") from None
    sweep = kappa_sweep(m, grid, tol=args.tol)
    results = []
    for b in sweep:
        eff = effects_bounds(b)
        results.append(
            {
                "kappa": b.kappa,
                "bounds_raw": {
                    "pi1": {"lower": b.raw_lower[1], "upper": b.raw_upper[1]},
                    "pi0": {"lower": b.raw_lower[0], "upper": b.raw_upper[0]},
                },
                "bounds_truncated": {
                    "pi1": {"lower": b.lower[1], "upper": b.upper[1]},
                    "pi0": {"lower": b.lower[0], "upper": b.upper[0]},
                },
                "ate_bounds": {"lower": eff.ate_lower, "upper": eff.ate_upper},
            }
        )
    payload = {
        "manifest": _manifest(args, args.data),
        "categories": list(ds.categories),
        "regime": "bounded",
        "grid": grid,
        "results": results,
        "breakdown_kappa": [breakdown_kappa(m, k, tol=args.tol) for k in range(m.q)],
        "swapped_z": m.swapped_z,
    }
    _emit(payload)
    return 0


def cmd_simulate(args) -> int:
    try:
        spec_obj = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed spec JSON: {exc}") from None
    spec = DgpSpec.from_dict(spec_obj)
    if args.diagnostics:
        payload = {
            "manifest": _manifest(args, args.spec),
            "diagnostics": diagnostics(spec).to_dict(),
            "p": spec.p,
        }
        _emit(payload)
        return 0
    if args.n is None or args.out is None or args.seed is None:
        raise DataError("simulate needs --n, --seed and --out (or --diagnostics)")
    ds = sample(spec, args.n, args.pz, args.seed)
    save_dataset(ds, args.out)
    payload = {
        "manifest": _manifest(args, args.spec),
        "n": ds.n,
        "z_probability": args.pz,
        "out": str(args.out),
        "out_sha256": _sha256(args.out),
        "categories": list(ds.categories),
    }
    _emit(payload)
    return 0


def cmd_selfcheck(args) -> int:
    report = run_selfcheck(count=args.count, seed=args.seed, kappa=args.kappa)
    payload = {"manifest": _manifest(args, None), **report}
    _emit(payload)
    for check in report["checks"]:
        status = "ok" if check["failed"] == 0 else "FAILED"
        print(
            f"{check['name']}: {check['passed']}/{check['total']} {status}",
            file=sys.stderr,
        )
    return 0 if report["ok"] else 4


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="cativ",
        description=(
            "Identify categorical potential-outcome distributions from "
            "(outcome, treatment, instrument) microdata."
        ),
    )
    subparsers = parser.add_subparsers(dest="_subcommand", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", default=None, help="JSON file of flag defaults (flags override)"
    )
    common.add_argument(
        "--no-timestamp",
        action="store_true",
        help="omit the timestamp from the manifest (byte-stable output)",
    )

    csv_common = argparse.ArgumentParser(add_help=False)
    csv_common.add_argument("data", help="input CSV (y,d,z[,stratum][,weight])")
    csv_common.add_argument(
        "--categories",
        default=None,
        help="comma-separated explicit category order (last = baseline)",
    )
    csv_common.add_argument("--baseline", default=None, help="baseline category label")
    csv_common.add_argument(
        "--stratum", type=int, default=None, help="estimate within this stratum"
    )
    csv_common.add_argument(
        "--tol",
        type=float,
        default=DEFAULT_WEAK_IV_TOL,
        help="weak-instrument tolerance on |p1 - p0|",
    )

    boot_common = argparse.ArgumentParser(add_help=False)
    boot_common.add_argument(
        "--bootstrap", type=int, default=None, metavar="B",
        help="number of bootstrap replicates",
    )
    boot_common.add_argument("--seed", type=int, default=None, help="bootstrap seed")
    boot_common.add_argument(
        "--ci", type=float, default=0.95, help="confidence level (default 0.95)"
    )
    boot_common.add_argument(
        "--on-degenerate",
        choices=("skip", "fail"),
        default="skip",
        help="how to treat degenerate replicates",
    )

    p = subparsers.add_parser(
        "moments", parents=[common, csv_common], help="observed probability tables"
    )
    p.set_defaults(func=cmd_moments)
    registry["moments"] = p

    p = subparsers.add_parser(
        "estimate",
        parents=[common, csv_common, boot_common],
        help="point identification of both potential-outcome distributions",
    )
    p.add_argument("--raw", action="store_true", help="effects on raw estimates")
    p.add_argument("--table", action="store_true", help="human table on stderr")
    p.set_defaults(func=cmd_estimate)
    registry["estimate"] = p

    p = subparsers.add_parser(
        "bounds",
        parents=[common, csv_common, boot_common],
        help="interval bounds under a chosen assumption regime",
    )
    p.add_argument(
        "--assumption",
        choices=("none", "monotonic", "bounded"),
        default="none",
        help="bounding regime",
    )
    p.add_argument("--kappa", type=float, default=None, help="sensitivity cap")
    p.add_argument("--table", action="store_true", help="human table on stderr")
    p.set_defaults(func=cmd_bounds)
    registry["bounds"] = p

    p = subparsers.add_parser(
        "sensitivity",
        parents=[common, csv_common],
        help="bounded-regime sweep over a kappa grid",
    )
    p.add_argument(
        "--kappa-grid",
        required=True,
        help="comma-separated ascending kappa values",
    )
    p.set_defaults(func=cmd_sensitivity)
    registry["sensitivity"] = p

    p = subparsers.add_parser(
        "simulate",
        parents=[common],
        help="draw microdata from a latent-type population spec",
    )
    p.add_argument("--spec", required=True, help="population spec JSON file")
    p.add_argument("--n", type=int, default=None, help="number of records")
    p.add_argument("--pz", type=float, default=0.5, help="P(Z=1)")
    p.add_argument("--seed", type=int, default=None, help="sampling seed")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument(
        "--diagnostics",
        action="store_true",
        help="print the population's true parameters and assumption flags",
    )
    p.set_defaults(func=cmd_simulate)
    registry["simulate"] = p

    p = subparsers.add_parser(
        "selfcheck",
        parents=[common],
        help="run the oracle property suites",
    )
    p.add_argument("--count", type=int, default=50, help="specs per suite")
    p.add_argument("--seed", type=int, default=1, help="grid seed")
    p.add_argument("--kappa", type=float, default=0.05, help="bounded-suite kappa")
    p.set_defaults(func=cmd_selfcheck)
    registry["selfcheck"] = p

    return parser, registry


def _apply_config_defaults(argv, parser, registry) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1] if argv.index("--config") + 1 < len(argv) else None
    if path is None:
        return
    sub = next((tok for tok in argv if tok in registry), None)
    if sub is None:
        return
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"could not read config file {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise DataError("config file must hold a JSON object")
    subparser = registry[sub]
    valid = {a.dest for a in subparser._actions}
    defaults = {}
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if dest not in valid:
            raise DataError(f"unknown config key {key!r} for subcommand {sub!r}")
        defaults[dest] = value
    subparser.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, registry = build_parser()
    try:
        _apply_config_defaults(argv, parser, registry)
        args = parser.parse_args(argv)
        return args.func(args)
    except WeakInstrumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
