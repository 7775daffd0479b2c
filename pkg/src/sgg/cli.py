"""Command-line entry point ``sgg``.

Exit codes: 0 when the run ends as its scenario expects, 1 for usage or
configuration errors, 2 when the physics surprises us (unexpected breakdown,
or an expected breakdown that never happened).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

from . import analytic
from . import diagnostics as dg
from . import model as m
from . import scenarios as sc
from .errors import ConfigError, DomainError, SGGError

EXIT_OK, EXIT_USAGE, EXIT_PHYSICS = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- shared helpers ---------------------------------------------------------

def _clamp_arg(text: str) -> str:
    if text == "off":
        return text
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive number or 'off'") from None
    if not (val > 0 and math.isfinite(val)):
        raise argparse.ArgumentTypeError("clamp epsilon must be > 0")
    return repr(val)


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (val > 0 and math.isfinite(val)):
        raise argparse.ArgumentTypeError("must be a positive finite number")
    return val


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sc.PRESET_NAMES)
    src.add_argument("--config", metavar="PATH")
    p.add_argument("--t-end", type=_positive_float)
    p.add_argument("--dx", type=_positive_float)
    p.add_argument("--clamp", type=_clamp_arg, metavar="EPS|off")


def _add_out_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="DIR", help="output directory (default: $SGG_OUT_DIR or ./sgg-out)")


def _load(args) -> sc.ScenarioPreset:
    if args.preset:
        p = sc.preset(args.preset)
    else:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        p = sc.parse_config(text)
    return _override(p, t_end=args.t_end, dx=args.dx, clamp=args.clamp)


def _override(p: sc.ScenarioPreset, t_end=None, dx=None, clamp=None) -> sc.ScenarioPreset:
    if t_end is None and dx is None and clamp is None:
        return p
    sections = sc.to_sections(p)
    if t_end is not None:
        sections["run"]["t_end"] = repr(float(t_end))
    if dx is not None:
        del sections["grid"]["n_cells"]
        sections["grid"]["dx"] = repr(float(dx))
    if clamp is not None:
        sections["run"]["clamp"] = clamp
        # a clamped KS run is the rescue experiment
        if clamp != "off" and sections["scenario"]["expected"] == sc.Outcome.BREAKDOWN.value:
            sections["scenario"]["expected"] = sc.Outcome.RESCUED.value
    return sc.from_sections(sections)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("SGG_OUT_DIR") or "sgg-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _expected_text(p: sc.ScenarioPreset) -> str:
    e = p.expected
    if e is None:
        return "none"
    if isinstance(e, analytic.SpeedResult):
        return f"c={dg.fmt(e.c)} ({e.branch.value})"
    return e.value


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    p = _load(args)
    state, report = sc.run_preset(p)
    out = _out_dir(args)
    if args.split_snapshots:
        snap_dir = out / f"{p.name}_snapshots"
        snap_dir.mkdir(exist_ok=True)
        for i, s in enumerate(report.snapshots):
            dg.write_snapshots_csv(snap_dir / f"snapshot_{i:05d}.csv", [s], p.grid)
    else:
        dg.write_snapshots_csv(out / f"{p.name}_snapshots.csv", report.snapshots, p.grid)
    dg.write_trajectory_csv(out / f"{p.name}_trajectory.csv", report.front)
    doc = json.loads(report.to_json())
    doc["scenario"] = {"name": p.name, "expected": _expected_text(p),
                       "config": sc.serialize(p)}
    (out / f"{p.name}_report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    ok = sc.outcome_matches(p, report)
    b = report.breakdown
    brk = "none" if not b.occurred else f"{b.cause} at t={dg.fmt(b.t_break)} cell {b.location}"
    fit = report.speed_fit
    speed = "n/a" if fit is None else f"{dg.fmt(fit.c_fit)} (r2={dg.fmt(fit.r_squared)})"
    print(f"{p.name}: c_fit={speed} breakdown={brk} invalidated={str(report.invalidated).lower()} "
          f"expected={_expected_text(p)} status={'expected' if ok else 'unexpected'}")
    return EXIT_OK if ok else EXIT_PHYSICS


# --- speed ------------------------------------------------------------------

_SPEED_PARAMS = {
    "ks": ("k", "M", "s_init"),
    "two_signal": ("chi_s", "chi_a", "alpha", "D_A"),
    "gogrow": ("chi", "r", "d"),
    "logsens": ("chi", "r", "d", "s_init", "s0"),
}
_ALL_PARAMS = sorted({k for v in _SPEED_PARAMS.values() for k in v})


def cmd_speed(args) -> int:
    mode = next(k for k in _SPEED_PARAMS if getattr(args, k))
    need = _SPEED_PARAMS[mode]
    missing = [k for k in need if getattr(args, k) is None]
    extra = [k for k in _ALL_PARAMS if k not in need and getattr(args, k) is not None]
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing " + ", ".join(missing))
        if extra:
            parts.append("not used by this construction: " + ", ".join(extra))
        raise UsageError(f"--{mode.replace('_', '-')}: " + "; ".join(parts))
    a = args
    if mode == "ks":
        res = analytic.ks_speed(a.k, a.M, a.s_init)
    elif mode == "two_signal":
        res = analytic.two_signal_speed(a.chi_s, a.chi_a, a.alpha, a.D_A)
    elif mode == "gogrow":
        res = analytic.gogrow_speed(a.chi, a.r, a.d)
    else:
        res = analytic.logsens_speed(a.chi, a.r, a.d, a.s_init, a.s0)
    print(json.dumps(res.to_dict(), sort_keys=True))
    return EXIT_OK


# --- sweep ------------------------------------------------------------------

SWEEP_COLUMNS = ("axis", "value", "c_analytic", "branch", "c_fit", "r_squared", "breakdown",
                 "status")


def _sweep_row(config_text: str, axis: str, value: float) -> dict:
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update(axis=axis, value=dg.fmt(value))
    try:
        p = sc.with_override(sc.parse_config(config_text), axis, value)
        if isinstance(p.expected, analytic.SpeedResult):
            row.update(c_analytic=dg.fmt(p.expected.c), branch=p.expected.branch.value)
        _, report = sc.run_preset(p)
        if report.speed_fit is not None:
            row.update(c_fit=dg.fmt(report.speed_fit.c_fit), r_squared=dg.fmt(report.speed_fit.r_squared))
        row["breakdown"] = report.breakdown.cause or "none"
        if report.invalidated:
            row["status"] = "invalidated"
        else:
            row["status"] = "ok" if sc.outcome_matches(p, report) else "unexpected"
    except (SGGError, ValueError) as exc:
        row["status"] = f"error: {exc}"
    return row


def _parse_values(text: str) -> List[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError("--values is empty")
    if not all(math.isfinite(v) for v in vals):
        raise UsageError("--values must be finite")
    return vals


def cmd_sweep(args) -> int:
    values = _parse_values(args.values)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    base = _load(args)
    section, _, key = args.axis.partition(".")
    if key not in sc.to_sections(base).get(section, {}):
        raise UsageError(f"axis {args.axis!r} does not name a field of the scenario")
    text = sc.serialize(base)
    if args.jobs == 1:
        rows = [_sweep_row(text, args.axis, v) for v in values]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_row, [text] * len(values), [args.axis] * len(values), values))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    sys.stdout.write(buf.getvalue())
    if args.out or os.environ.get("SGG_OUT_DIR"):
        (_out_dir(args) / f"{base.name}_sweep.csv").write_text(buf.getvalue())
    return EXIT_OK


# --- phase plane ------------------------------------------------------------

def cmd_phase_plane(args) -> int:
    p = _load(args)
    spec = p.spec
    if not (isinstance(spec.sensitivity, m.ThresholdedLogGradient)
            and isinstance(spec.growth, m.ThresholdGrowth)
            and isinstance(spec.consumption, m.LinearConsumption)):
        raise UsageError("phase-plane needs thresholded-log-gradient sensitivity, threshold growth "
                         "and linear consumption")
    chi, r, S0 = spec.sensitivity.chi, spec.growth.r, spec.growth.S_0
    c_formula = analytic.logsens_speed(chi, r, spec.d, p.S_init, S0).c
    _, report = sc.run_preset(p)
    later = [s for s in report.snapshots if s.t >= args.time]
    if not later:
        last = report.snapshots[-1].t if report.snapshots else 0.0
        raise UsageError(f"no snapshot at or after t={args.time:g} (last snapshot t={last:g})")
    snap = later[0]
    c_fit = report.c_fit

    portrait = dg.phase_portrait(snap, p.grid, c_fit, threshold=S0, exclude=3)
    columns = {}
    speeds = [("", c_formula)]
    if spec.D > 0 and c_fit is not None:
        speeds.append(("_cfit", c_fit))
    info_out = {}
    for suffix, c in speeds:
        J = analytic.logsens_back_flux(c, r, spec.k, p.S_init, S0)
        front, back, info = analytic.logsens_phase_curves(c, spec.d, spec.k, chi, J, r)
        columns["curve_front" + suffix] = front(portrait.rho)
        columns["curve_back" + suffix] = back(portrait.rho)
        info_out["rho_star" + (suffix or "_formula")] = info["rho_star"]
        info_out["lambda" + (suffix or "_formula")] = info["lambda"]

    out = _out_dir(args)
    dg.write_portrait_csv(out / f"{p.name}_phase_plane.csv", portrait, columns)
    summary = {"name": p.name, "t": snap.t, "c_formula": c_formula, "c_fit": c_fit, **info_out}
    try:
        xf = dg.signal_crossing(snap, p.grid, S0)
        summary["interface_x"] = xf
        summary["vertex_estimate"] = dg.vertex_estimate(portrait, xf)
    except SGGError:
        summary["interface_x"] = None
        summary["vertex_estimate"] = None
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sgg", description="Self-generated-gradient traveling waves.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a scenario and write snapshots and a report")
    _add_scenario_args(p)
    _add_out_arg(p)
    p.add_argument("--split-snapshots", action="store_true",
                   help="one CSV per snapshot instead of a single long-format file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("speed", help="print an analytic wave speed as JSON")
    mode = p.add_mutually_exclusive_group(required=True)
    for name in _SPEED_PARAMS:
        mode.add_argument("--" + name.replace("_", "-"), dest=name, action="store_true")
    p.add_argument("-k", type=float)
    p.add_argument("-M", type=float)
    p.add_argument("--s-init", dest="s_init", type=float)
    p.add_argument("--chi", type=float)
    p.add_argument("--chi-s", dest="chi_s", type=float)
    p.add_argument("--chi-a", dest="chi_a", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--D-A", dest="D_A", type=float)
    p.add_argument("-r", type=float)
    p.add_argument("-d", type=float)
    p.add_argument("--s0", type=float)
    p.set_defaults(func=cmd_speed)

    p = sub.add_parser("sweep", help="simulate a scenario over one parameter axis")
    _add_scenario_args(p)
    _add_out_arg(p)
    p.add_argument("--axis", required=True, help="section.key, e.g. model.chi")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("phase-plane", help="export the (rho, rho') portrait with theoretical curves")
    _add_scenario_args(p)
    _add_out_arg(p)
    p.add_argument("--time", type=float, required=True)
    p.set_defaults(func=cmd_phase_plane)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, DomainError) as exc:
        print(f"sgg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
