"""Command-line front end: ``hybrid-cqed <subcommand> ...``.

Every CSV starts with a ``#`` manifest block (subcommand, argv, resolved
parameters as a re-loadable config, version, timestamp) followed by one header
row and the data rows.  Exit status: 0 success, 1 physics/convergence failure,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from dataclasses import asdict
from importlib import metadata
from typing import Iterable, Sequence, TextIO

import numpy as np

from .coherence import g2_of_tau
from .errors import ConfigError, HybridError
from .model import (
    PRESET_NAMES,
    TWO_PI,
    DriveConfig,
    GridSpec,
    SystemParams,
    load_config,
    load_preset,
    validate_params,
)
from .probe import sweep_response
from .steady import solve_steady_state
from .timedomain import validate_suite

STEADY_COLUMNS = ("re_c0", "im_c0", "abs_c0_sq", "q0", "delta3", "residual", "branch_count")
RESPONSE_COLUMNS = (
    "delta_rad_s",
    "delta_norm",
    "mu_p",
    "nu_p",
    "re_c_minus",
    "im_c_minus",
    "re_c_plus",
    "im_c_plus",
    "method_deviation",
)
G2_COLUMNS = ("tau_s", "g2", "y14", "re_y13", "im_y13", "re_y12", "im_y12", "quad_err")
VALIDATE_COLUMNS = ("preset", "variant", "quantity", "delta_rad_s", "frequency_domain", "time_domain", "deviation", "passed")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    return "nan" if math.isnan(v) else "%.17g" % v


def emit_csv(
    rows: Iterable[Sequence],
    schema: Sequence[str],
    path: str | None,
    manifest: dict | None = None,
    *,
    flags: Sequence[str] | None = None,
) -> None:
    """Write a manifest comment block, a header and the rows.

    A ``flag`` column is appended; it is empty for good rows.  ``path`` of
    ``None`` or ``"-"`` writes to stdout.

    Raises
    ------
    OSError
        With the offending path in the message.
    """
    rows = [list(r) for r in rows]
    for r in rows:
        if len(r) != len(schema):
            raise ValueError(f"row has {len(r)} fields, schema has {len(schema)}")
    flags = list(flags) if flags is not None else [""] * len(rows)
    lines = []
    for key, value in (manifest or {}).items():
        text = value if isinstance(value, str) else json.dumps(value, sort_keys=True)
        lines.append(f"# {key}: {text}")
    lines.append(",".join([*schema, "flag"]))
    for r, f in zip(rows, flags):
        lines.append(",".join([*(_fmt(v) for v in r), f.replace(",", ";").replace("\n", " ")]))
    body = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(body)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(body)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from None


def config_echo(params: SystemParams, drive: DriveConfig) -> dict:
    """Resolved parameters in the config-file format (angular units, literal chi)."""
    d = asdict(drive)
    return {
        "angular": True,
        "chi_reading": "literal",
        "system": {k: float(v) for k, v in asdict(params).items()},
        "drive": {k: float(v) for k, v in d.items()},
    }


def _manifest(args, argv, params, drive, source: str) -> dict:
    return {
        "tool": f"hybrid-cqed {_version()}",
        "subcommand": args.command,
        "argv": list(argv),
        "source": source,
        "config": config_echo(params, drive),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "output": getattr(args, "out", None) or "-",
    }


def _chi_reading(args) -> str:
    return "two_pi" if args.chi_two_pi else "literal"


def _resolve(args):
    """(params, drive, preset-or-None, source label) from --config or --preset."""
    reading = _chi_reading(args)
    if args.config:
        cfg = load_config(args.config, reading if args.chi_two_pi or args.chi_literal else None)
        p, d = cfg.resolve(args.variant)
        return p, d, None, f"config:{args.config}" + (f"[{args.variant}]" if args.variant else "")
    if not args.preset:
        raise ConfigError("either --preset or --config is required")
    preset = load_preset(args.preset, reading)
    variant = args.variant or preset.default_variant
    p, d = preset.resolve(variant)
    return p, d, preset, f"preset:{preset.name}[{variant}] chi_reading={reading}"


def _parse_grid(text: str) -> GridSpec:
    try:
        center, span, n = text.split(",")
        return GridSpec(TWO_PI * float(center), TWO_PI * float(span), int(n))
    except ValueError:
        raise ConfigError(f"--grid expects center_hz,span_hz,npoints; got {text!r}") from None


def _parse_tau(text: str) -> np.ndarray:
    parts = text.split(",")
    try:
        tmax, n = float(parts[0]), int(parts[1])
    except (ValueError, IndexError):
        raise ConfigError(f"--tau expects max_s,npoints[,log]; got {text!r}") from None
    if tmax <= 0 or n < 1 or len(parts) > 3 or (len(parts) == 3 and parts[2] != "log"):
        raise ConfigError(f"--tau expects max_s > 0, npoints >= 1 and optional 'log'; got {text!r}")
    if len(parts) == 3:
        return np.concatenate([[0.0], np.geomspace(tmax * 1e-4, tmax, n - 1)]) if n > 1 else np.array([tmax])
    return np.linspace(0.0, tmax, n)


def _warn(params, drive, stream, **kw):
    for diag in validate_params(params, drive, **kw):
        print(f"{diag.level}: {diag}", file=stream)


def cmd_presets(args, argv) -> int:
    for name in PRESET_NAMES:
        pr = load_preset(name)
        print(f"{name}\t[{', '.join(pr.variant_labels)}; default {pr.default_variant}]\t{pr.description}")
    return 0


def cmd_steady(args, argv) -> int:
    params, drive, _, source = _resolve(args)
    _warn(params, drive, sys.stderr)
    ss = solve_steady_state(params, drive)
    for msg in ss.diagnostics:
        print(f"warning: {msg}", file=sys.stderr)
    row = (ss.c0.real, ss.c0.imag, ss.intensity, ss.q0, ss.delta3, ss.residual, ss.branches.count)
    emit_csv([row], STEADY_COLUMNS, args.out, _manifest(args, argv, params, drive, source))
    return 0


def cmd_response(args, argv) -> int:
    params, drive, preset, source = _resolve(args)
    _warn(params, drive, sys.stderr)
    if args.grid:
        grid = _parse_grid(args.grid)
    elif preset is not None:
        grid = preset.grid
    else:
        wm = params.omega_mech
        grid = GridSpec(wm, 0.02 * wm, 2001)
    sw = sweep_response(params, drive, grid, args.method)
    rows = zip(
        sw.detuning_grid,
        sw.delta_norm,
        sw.mu_p,
        sw.nu_p,
        sw.c_minus.real,
        sw.c_minus.imag,
        sw.c_plus.real,
        sw.c_plus.imag,
        sw.method_deviation,
    )
    man = _manifest(args, argv, params, drive, source)
    man["grid"] = {"center_rad_s": grid.center, "span_rad_s": grid.span, "npoints": grid.npoints}
    emit_csv(rows, RESPONSE_COLUMNS, args.out, man, flags=sw.flags)
    return 0


def cmd_g2(args, argv) -> int:
    params, drive, _, source = _resolve(args)
    if args.temperature is not None:
        drive = drive.replace(temperature=args.temperature)
    drive = drive.replace(epsilon=0.0)
    _warn(params, drive, sys.stderr, g2_request=True)
    tau = _parse_tau(args.tau) if args.tau else np.linspace(0.0, 100.0 / params.gamma_cavity, 201)
    s = g2_of_tau(params, drive, tau)
    rows = zip(
        s.tau_grid,
        s.g2_values,
        np.full(s.tau_grid.size, s.y14),
        s.y13_of_tau.real,
        s.y13_of_tau.imag,
        s.y12_of_tau.real,
        s.y12_of_tau.imag,
        s.quadrature_error,
    )
    emit_csv(rows, G2_COLUMNS, args.out, _manifest(args, argv, params, drive, source))
    return 0


def cmd_validate(args, argv) -> int:
    names = PRESET_NAMES if args.preset in (None, "all") else tuple(args.preset.split(","))
    rows = validate_suite(names, all_variants=args.all_variants, chi_reading=_chi_reading(args))
    out = [
        (r.preset, r.variant, r.quantity, r.detuning, abs(r.frequency_domain), abs(r.time_domain), r.deviation, r.passed)
        for r in rows
    ]
    man = {
        "tool": f"hybrid-cqed {_version()}",
        "subcommand": "validate",
        "argv": list(argv),
        "presets": list(names),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "output": args.out or "-",
    }
    emit_csv(out, VALIDATE_COLUMNS, args.out, man, flags=[r.message for r in rows])
    return 0 if all(r.passed for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybrid-cqed", description=__doc__.split("\n")[0])
    ap.add_argument("--config", help="YAML file with system/drive/variants sections")
    chi = ap.add_mutually_exclusive_group()
    chi.add_argument("--chi-literal", action="store_true", help="read quoted chi values as J/m (default)")
    chi.add_argument("--chi-two-pi", action="store_true", help="multiply quoted chi values by 2*pi")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (reserved)")
    ap.add_argument("--seed", type=int, default=0, help="random seed (reserved; the pipeline is deterministic)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--preset", help=f"one of {', '.join(PRESET_NAMES)}")
        p.add_argument("--variant", help="curve variant label, e.g. i, ii, iii")
        if out:
            p.add_argument("--out", help="output CSV path (default stdout)")

    sub.add_parser("presets", help="list the figure presets")
    common(sub.add_parser("steady", help="probe-off steady state as one CSV row"))
    p = sub.add_parser("response", help="probe transmission sweep")
    common(p)
    p.add_argument("--method", choices=("closed", "solve", "both"), default="closed")
    p.add_argument("--grid", help="center_hz,span_hz,npoints for Delta/2pi")
    p = sub.add_parser("g2", help="second-order coherence g2(tau)")
    common(p)
    p.add_argument("--tau", help="max_s,npoints[,log]")
    p.add_argument("--temperature", type=float, help="bath temperature in K")
    p = sub.add_parser("validate", help="time-domain cross-check of the presets")
    p.add_argument("--preset", default="all", help="'all' or comma-separated names")
    p.add_argument("--all-variants", action="store_true")
    p.add_argument("--out")
    return ap


_COMMANDS = {
    "presets": cmd_presets,
    "steady": cmd_steady,
    "response": cmd_response,
    "g2": cmd_g2,
    "validate": cmd_validate,
}


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args, argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sub = parser._subparsers._group_actions[0].choices.get(args.command)  # noqa: SLF001
        if sub is not None:
            sub.print_usage(sys.stderr)
        return 2
    except (HybridError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
