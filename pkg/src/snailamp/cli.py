"""Command-line interface.

Each command writes ``<command>.csv`` (one header row, fixed column order) and
``<command>_manifest.json`` into ``--out``. Exit status is 0 when every point
succeeded, 2 when some points failed, and 1 on a fatal error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

from . import circuit, experiments, hb
from .constants import HBAR
from .design import DesignTarget, evaluate, search
from .errors import SnailampError
from .io import build_manifest, builtin_devices, device_to_dict, load_device, write_csv, write_manifest
from .snail import SCAN_POINTS, taylor_coefficients

GHZ = 2 * math.pi * 1e9
MHZ = 2 * math.pi * 1e6

COLUMNS = {
    "coeffs": ["flux", "model_tag", "phi_min", "c1", "c2", "c3", "c4", "c5", "c6",
               "EJ_GHz", "c3_MHz", "g3_MHz", "status"],
    "sweep": ["flux", "omega_a_GHz", "kappa_MHz", "g3_MHz", "g4_MHz", "K_MHz", "p",
              "model_tag", "status"],
    "calibrate": ["flux", "model_tag", "order", "G0_dB", "pump_power_dBm", "omega_p_GHz",
                  "delta_MHz", "delta_eff_MHz", "g_eff_MHz", "pQ", "status"],
    "p1db": ["flux", "model_tag", "order", "G0_dB", "p1db_dbm", "stark_estimate_dbm",
             "pumpdep_estimate_dbm", "pump_power_dBm", "status"],
    "iip3": ["flux", "model_tag", "G0_dB", "iip3_analytic_dbm", "iip3_simulated_dbm",
             "slope_main", "slope_imd", "g4_inferred_MHz", "status"],
    "stark": ["flux", "model_tag", "K_fit_MHz", "K_prime_MHz", "K_model_MHz", "rms_MHz",
              "bistable", "status"],
}
REPRODUCE_SWEEP = "0:0.5:0.01"
REPRODUCE_AMP = "0.05:0.45:0.05"


def parse_flux(text: str) -> list[float]:
    """``value``, ``a,b,c`` or inclusive ``start:stop:step`` in units of Phi0."""
    text = text.strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise argparse.ArgumentTypeError(f"bad flux grid {text!r}; use start:stop:step")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9))
        return [round(start + k * step, 12) for k in range(n + 1)]
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad flux value {text!r}") from err


def _settings(args) -> hb.HBSettings:
    return hb.HBSettings(
        tol=args.tol_newton, max_newton=args.max_newton, max_steps=args.max_steps,
        gain_tol_db=args.tol_gain_db,
    )


def _mode(spec, flux, model):
    return circuit.mode_parameters(spec, flux, model)


def _nan_row(command, flux, model, err):
    row = {c: math.nan for c in COLUMNS[command]}
    row.update(flux=flux, model_tag=model, status=type(err).__name__)
    return row


def compute_row(command: str, spec, flux: float, opts: dict) -> dict:
    """One CSV row for ``command`` at ``flux``; solver errors become a status string."""
    model = opts["model"]
    settings = hb.HBSettings(**opts["settings"])
    try:
        if command == "coeffs":
            c = taylor_coefficients(spec.snail(flux))
            E_J = spec.snail(flux).E_J
            row = {"flux": flux, "model_tag": model, "phi_min": c.phi_min,
                   "EJ_GHz": E_J / HBAR / GHZ, "c3_MHz": c[3] * E_J / HBAR / MHZ,
                   "g3_MHz": math.nan, "status": "ok"}
            row.update({f"c{n}": c[n] for n in range(1, 7)})
            try:
                row["g3_MHz"] = _mode(spec, flux, model).g3 / MHZ
            except SnailampError as err:
                row["status"] = type(err).__name__
            return row
        mode = _mode(spec, flux, model)
        if command == "sweep":
            return {"flux": flux, "omega_a_GHz": mode.omega_a / GHZ, "kappa_MHz": mode.kappa / MHZ,
                    "g3_MHz": mode.g3 / MHZ, "g4_MHz": mode.g4 / MHZ, "K_MHz": mode.K / MHZ,
                    "p": mode.p, "model_tag": model, "status": "ok"}
        if command == "stark":
            fit = experiments.stark_shift_experiment(mode)
            return {"flux": flux, "model_tag": model, "K_fit_MHz": fit.K / MHZ,
                    "K_prime_MHz": fit.K_prime / MHZ, "K_model_MHz": mode.K / MHZ,
                    "rms_MHz": fit.rms_residual / MHZ, "bistable": fit.bistable, "status": "ok"}
        G0 = 10 ** (opts["gain_db"] / 10)
        order = opts["order"]
        if command == "iip3":
            order = 1
        op = hb.calibrate_pump(mode, G0, order, settings=settings)
        if command == "calibrate":
            sol = op.pump_solution
            return {"flux": flux, "model_tag": model, "order": order, "G0_dB": op.G0_db,
                    "pump_power_dBm": op.pump_power_dbm, "omega_p_GHz": op.omega_p / GHZ,
                    "delta_MHz": op.delta / MHZ, "delta_eff_MHz": sol.delta_eff / MHZ,
                    "g_eff_MHz": abs(sol.g_eff) / MHZ,
                    "pQ": experiments.validity_check(op).pQ, "status": "ok"}
        if command == "p1db":
            stark, pumpdep = experiments.p1db_estimates(op)
            res = experiments.p1db(op, settings=settings)
            return {"flux": flux, "model_tag": model, "order": order, "G0_dB": op.G0_db,
                    "p1db_dbm": res.p_1db_dbm, "stark_estimate_dbm": stark,
                    "pumpdep_estimate_dbm": pumpdep, "pump_power_dBm": op.pump_power_dbm,
                    "status": "ok"}
        if command == "iip3":
            ana = experiments.iip3_analytic(mode, op.G0)
            sim = experiments.iip3_simulated(op, settings=settings)
            slopes = sim.asymptote_slopes or (math.nan, math.nan)
            return {"flux": flux, "model_tag": model, "G0_dB": op.G0_db,
                    "iip3_analytic_dbm": ana.iip3_dbm, "iip3_simulated_dbm": sim.iip3_dbm,
                    "slope_main": slopes[0], "slope_imd": slopes[1],
                    "g4_inferred_MHz": sim.g4_inferred / MHZ, "status": "ok"}
    except SnailampError as err:
        return _nan_row(command, flux, model, err)
    raise ValueError(f"unknown command {command!r}")


def _task(payload):
    return compute_row(*payload)


def run_points(command, spec, fluxes, opts, jobs: int) -> list[dict]:
    """Rows ordered by flux regardless of worker completion order."""
    fluxes = sorted(fluxes)
    payloads = [(command, spec, f, opts) for f in fluxes]
    if jobs <= 1 or len(payloads) <= 1:
        return [_task(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_task, payloads))


def schedule_constants() -> dict:
    """Fixed sweep and continuation schedule, recorded in every manifest."""
    return {
        "p1db_start_dbm": experiments.START_DBM,
        "p1db_step_db": experiments.STEP_DB,
        "p1db_ceiling_dbm": experiments.CEILING_DBM,
        "iip3_window_db": experiments.IIP3_WINDOW_DB,
        "iip3_min_points": experiments.IIP3_MIN_POINTS,
        "probe_dbm": hb.PROBE_DBM,
        "probe_offset_hz": hb.PROBE_OFFSET / (2 * math.pi),
        "continuation_initial_step": hb.INITIAL_STEP,
        "frequency_bisection_iterations": circuit.FREQ_BISECTION_ITERS,
        "snail_scan_points": SCAN_POINTS,
    }


def _opts(args) -> dict:
    return {"model": args.model, "order": args.order, "gain_db": args.gain_db,
            "settings": asdict(_settings(args)), "schedule": schedule_constants()}


def _status_list(rows):
    return [{"flux": r["flux"], "status": r["status"]} for r in rows]


def _write(command, out: Path, rows, argv, inputs, opts, extra_outputs=()):
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{command}.csv"
    write_csv(csv_path, COLUMNS[command], rows)
    manifest = build_manifest(command, argv, inputs, opts, [csv_path, *extra_outputs],
                              _status_list(rows))
    write_manifest(out / f"{command}_manifest.json", manifest)
    return 0 if all(r["status"] == "ok" for r in rows) else 2


def cmd_points(args, argv):
    spec, path = load_device(args.device)
    opts = _opts(args)
    rows = run_points(args.command, spec, args.flux, opts, args.jobs)
    return _write(args.command, Path(args.out), rows, argv, [path], opts)


def cmd_reproduce(args, argv):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    refs = args.device or builtin_devices()
    opts = _opts(args)
    sweep_grid = args.flux or parse_flux(REPRODUCE_SWEEP)
    amp_grid = args.amp_flux
    outputs, inputs, status = [], [], []
    for ref in refs:
        spec, path = load_device(ref)
        inputs.append(path)
        name = spec.name or Path(ref).stem
        sweep_rows = run_points("sweep", spec, sweep_grid, opts, args.jobs)
        p = out / f"{name}_flux_sweep.csv"
        write_csv(p, COLUMNS["sweep"], sweep_rows)
        outputs.append(p)
        status += [{"device": name, "table": "flux_sweep", **s} for s in _status_list(sweep_rows)]
        p1 = run_points("p1db", spec, amp_grid, opts, args.jobs)
        ip = run_points("iip3", spec, amp_grid, opts, args.jobs)
        cols = ["flux", "model_tag", "G0_dB", "p1db_dbm", "stark_estimate_dbm",
                "pumpdep_estimate_dbm", "iip3_analytic_dbm", "iip3_simulated_dbm", "status"]
        merged = []
        for a, b in zip(p1, ip):
            st = "ok" if a["status"] == b["status"] == "ok" else f"{a['status']}/{b['status']}"
            merged.append({**b, **a, "iip3_analytic_dbm": b["iip3_analytic_dbm"],
                           "iip3_simulated_dbm": b["iip3_simulated_dbm"], "status": st})
        p = out / f"{name}_compression.csv"
        write_csv(p, cols, merged)
        outputs.append(p)
        status += [{"device": name, "table": "compression", **s} for s in _status_list(merged)]
    manifest = build_manifest("reproduce", argv, inputs, opts, outputs, status)
    write_manifest(out / "reproduce_manifest.json", manifest)
    return 0 if all(s["status"] == "ok" for s in status) else 2


def _target_from_file(path):
    data = json.loads(Path(path).read_text())
    known = {"band_GHz", "min_p1db_dbm", "G0_dB", "require_kerr_free", "max_pump_power_dbm",
             "min_pQ", "bounds"}
    unknown = set(data) - known
    if unknown:
        raise SnailampError(f"unknown target fields {sorted(unknown)}")
    band = tuple(x * GHZ for x in data["band_GHz"])
    target = DesignTarget(
        band=band, min_p1db_dbm=data.get("min_p1db_dbm", -math.inf),
        G0=10 ** (data.get("G0_dB", 20.0) / 10),
        require_kerr_free=data.get("require_kerr_free", False),
        max_pump_power_dbm=data.get("max_pump_power_dbm", math.inf),
        min_pQ=data.get("min_pQ", 15.0),
    )
    b = data.get("bounds")
    bounds = None
    if b is not None:
        bounds = {
            "L_J": tuple(x * 1e-12 for x in b["L_J_pH"]),
            "alpha": tuple(b["alpha"]),
            "C_c": tuple(x * 1e-12 for x in b["C_c_pF"]),
            "omega_0": tuple(x * GHZ for x in b["omega0_GHz"]),
            "M": tuple(int(x) for x in b["M"]),
        }
    return target, bounds


def _candidate_record(c):
    pred = {k: v for k, v in c.predicted.items() if k != "band"}
    if "band" in c.predicted:
        pred["band_GHz"] = [x / GHZ for x in c.predicted["band"]]
    return {"score": c.score, "feasible": c.feasible, "flags": c.flags,
            "device": device_to_dict(c.spec), "predicted": pred}


def cmd_design(args, argv):
    spec, path = load_device(args.device)
    target, bounds = _target_from_file(args.target)
    if bounds is None:
        cands = [evaluate(spec, target, args.tier)]
    else:
        cands = search(target, bounds, args.budget, base=replace(spec, kappa_override=None),
                       seed=args.seed, tier=args.tier)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    p = out / "design_candidates.json"
    p.write_text(json.dumps([_candidate_record(c) for c in cands], indent=2, default=float) + "\n")
    status = [{"rank": i, "feasible": c.feasible, "status": "ok"} for i, c in enumerate(cands)]
    opts = {"tier": args.tier, "budget": args.budget, "seed": args.seed}
    write_manifest(out / "design_manifest.json",
                   build_manifest("design", argv, [path, args.target], opts, [p], status))
    return 0


def build_parser() -> argparse.ArgumentParser:
    jobs_default = int(os.environ.get("SNAILAMP_JOBS", "1"))
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--model", choices=[circuit.DISTRIBUTED, circuit.LUMPED],
                        default=circuit.DISTRIBUTED)
    common.add_argument("--order", type=int, choices=[1, 2], default=1)
    common.add_argument("--gain-db", type=float, default=20.0)
    common.add_argument("--jobs", type=int, default=jobs_default,
                        help="worker processes (default $SNAILAMP_JOBS or 1)")
    d = hb.DEFAULT_SETTINGS
    common.add_argument("--tol-newton", type=float, default=d.tol)
    common.add_argument("--tol-gain-db", type=float, default=d.gain_tol_db)
    common.add_argument("--max-newton", type=int, default=d.max_newton)
    common.add_argument("--max-steps", type=int, default=d.max_steps)

    parser = argparse.ArgumentParser(prog="snailamp", description="SNAIL parametric amplifier toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("coeffs", "sweep", "calibrate", "p1db", "iip3", "stark"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--device", required=True, help="device JSON path or bundled name A-E")
        sp.add_argument("--flux", type=parse_flux, default=[0.25])
    rp = sub.add_parser("reproduce", parents=[common])
    rp.add_argument("--device", action="append", help="repeatable; default: all bundled devices")
    rp.add_argument("--flux", type=parse_flux, default=None, help=f"sweep grid (default {REPRODUCE_SWEEP})")
    rp.add_argument("--amp-flux", type=parse_flux, default=parse_flux(REPRODUCE_AMP),
                    help="flux grid for compression and IIP3")
    dp = sub.add_parser("design", parents=[common])
    dp.add_argument("--device", required=True, help="base device (fixed fields, or the one evaluated)")
    dp.add_argument("--target", required=True, help="target JSON; optional 'bounds' enables search")
    dp.add_argument("--budget", type=int, default=200)
    dp.add_argument("--seed", type=int, default=0)
    dp.add_argument("--tier", choices=["estimate", "full"], default="estimate")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "reproduce":
            return cmd_reproduce(args, argv)
        if args.command == "design":
            return cmd_design(args, argv)
        return cmd_points(args, argv)
    except (SnailampError, OSError, ValueError, KeyError) as err:
        print(f"snailamp: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
