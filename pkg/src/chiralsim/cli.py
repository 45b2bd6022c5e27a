"""Command-line front end.

Each run writes into one output directory: ``manifest.json`` first, then
data files (CSV or JSON) and, with ``--plot``, SVG figures.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (SyntheticNoiseSpec, fit_s21_cancellation, read_trace_csv, synth_trace)
from .config import load_config
from .errors import (ConfigError, ConvergenceError, DomainError, GridError, IntegrationQualityError,
                     SingularSystemError)
from .freqdomain import (default_grid, isolation_metrics, optimize_pump_amplitude, s_matrix_grid,
                         write_trace_csv)
from .lindblad import state_ket, transfer_experiment, wigner
from .model import PumpSettings, WavepacketSpec, ghz, mhz, to_mhz, validate_params
from .snail import SnailParams, coefficient_table, expansion_coefficients, kerr_free_flux, write_table_csv
from .sweeps import SWEEPS, transfer_layout
from .timedomain import absorption_run, emission_metrics, emission_run, write_record_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_PARAMS = 4
EXIT_NUMERICAL = 5

COMMANDS = ("smatrix", "isolate", "emit", "absorb", "transfer", "snail", "fit", "sweep", "wigner")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chiralsim", description="Chiral coupler simulations.")
    p.add_argument("--version", action="version", version=f"chiralsim {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="TOML configuration file")
        s.add_argument("--out", type=Path, default=Path("chiralsim-out"), help="output directory")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--plot", action="store_true", help="also write SVG figures")
        s.add_argument("--optimize-g", action="store_true",
                       help="optimize the pump amplitude for isolation")
        s.add_argument("--fock-dim", type=int, default=3)
        s.add_argument("--db-offset", type=float, default=None,
                       help="constant added to dB columns (for absolute power comparisons)")
        if name == "fit":
            s.add_argument("--trace", type=Path, help="CSV with freq_mhz, re, im columns")
        if name == "sweep":
            s.add_argument("kind", nargs="?", choices=sorted(SWEEPS), help="sweep to run")
            s.add_argument("--workers", type=int, default=None)
        if name == "wigner":
            s.add_argument("--state", default=None, help="plus, minus, one, zero or i")
    return p


def _write_table(out: Path, stem: str, columns, rows, fmt: str) -> Path:
    if fmt == "json":
        path = out / f"{stem}.json"
        data = [dict(zip(columns, r)) for r in rows]
        path.write_text(json.dumps(data, indent=1, default=_json_default) + "\n")
        return path
    path = out / f"{stem}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([v if isinstance(v, str) else f"{float(v):.17g}" for v in r])
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def write_manifest(args, cfg) -> Path:
    manifest = {
        "subcommand": args.command,
        "config": cfg.sections,
        "config_hash": cfg.digest(),
        "output_directory": str(args.out),
        "seed": args.seed,
        "options": {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
                    if k not in ("command", "out")},
        "code_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    return _write_json(args.out / "manifest.json", manifest)


# ---------------------------------------------------------------- subcommands

def _grid_for(cfg, n=801, span=6.0):
    c = cfg.coupler
    return default_grid(max(c.a1.external_coupling, c.a2.external_coupling), span, n)


def cmd_smatrix(args, cfg):
    grid = _grid_for(cfg)
    s = s_matrix_grid(cfg.coupler, cfg.pumps, grid)
    write_trace_csv(args.out / "smatrix.csv", grid, s, args.db_offset)
    rep = validate_params(cfg.coupler, cfg.pumps)
    _write_json(args.out / "validation.json", asdict(rep))


def cmd_isolate(args, cfg):
    grid = _grid_for(cfg)
    pumps = cfg.pumps
    if args.optimize_g:
        g_opt, _ = optimize_pump_amplitude(cfg.coupler, pumps, grid)
        pumps = pumps.with_amplitude(g_opt)
    m = isolation_metrics(cfg.coupler, pumps, grid)
    traces = {}
    for label, setting in (("isolate", PumpSettings.isolate), ("pass", PumpSettings.pass_)):
        p = setting(pumps.g1, pumps.phi1, pumps.leakage)
        p = replace(p, g2=pumps.g2)
        s = s_matrix_grid(cfg.coupler, p, grid)
        traces[label] = s
        write_trace_csv(args.out / f"s21_{label}.csv", grid, s, args.db_offset)
    cols = ["g_mhz", "insertion_loss_db", "isolation_db", "isolation_bandwidth_mhz"]
    row = [to_mhz(pumps.g1), m.insertion_loss_db, m.isolation_db, to_mhz(m.isolation_bandwidth)]
    _write_table(args.out, "isolation_metrics", cols, [row], args.format)
    if args.plot:
        from .plotting import render_line

        off = args.db_offset or 0.0
        render_line(grid / (2 * np.pi * 1e6),
                    {k: 20 * np.log10(np.abs(v[:, 1, 0])) + off for k, v in traces.items()},
                    args.out / "s21.svg", "detuning (MHz)", "|S21| (dB)")


def _ideal_bus(cfg):
    c = cfg.coupler
    return replace(c, b=replace(c.b, external_coupling=0.0, internal_damping=0.0))


def _wavepacket(cfg, coupler):
    w = cfg.section("wavepacket")
    return WavepacketSpec(float(w.get("gamma_ph_ratio", 0.5)) * coupler.geometric_rate,
                          str(w.get("direction", "right")))


def cmd_emit(args, cfg):
    cp = _ideal_bus(cfg)
    spec = _wavepacket(cfg, cp)
    fields, flux = emission_run(cp, spec)
    m = emission_metrics(flux, direction=spec.direction)
    write_record_csv(args.out / "emission.csv", fields, flux, stride=10)
    _write_table(args.out, "emission_metrics", list(asdict(m)), [list(asdict(m).values())], args.format)
    if args.plot:
        from .plotting import render_line

        render_line(flux.times * 1e6, {"left": flux.left, "right": flux.right},
                    args.out / "emission.svg", "time (us)", "photon flux (1/s)")


def cmd_absorb(args, cfg):
    cp = _ideal_bus(cfg)
    spec = _wavepacket(cfg, cp)
    fields, flux = absorption_run(cp, spec)
    write_record_csv(args.out / "absorption.csv", fields, flux, stride=10)
    pop = float(abs(fields.b[-1]) ** 2)
    _write_table(args.out, "absorption_metrics", ["final_b_population"], [[pop]], args.format)
    if args.plot:
        from .plotting import render_line

        render_line(fields.times * 1e6, {"b population": np.abs(fields.b) ** 2},
                    args.out / "absorption.svg", "time (us)", "population")


def _wigner_rows(wm):
    for i, p in enumerate(wm.p):
        for j, x in enumerate(wm.x):
            yield [x, p, wm.W[i, j]]


def _emit_wigner(args, rho, stem):
    x = np.linspace(-3, 3, 61)
    wm = wigner(rho, x, x)
    _write_table(args.out, stem, ["x", "p", "W"], list(_wigner_rows(wm)), args.format)
    if args.plot:
        from .plotting import render_heatmap

        render_heatmap(wm.x, wm.p, wm.W, args.out / f"{stem}.svg", "x", "p", "W")


def cmd_transfer(args, cfg):
    t = cfg.section("transfer")
    gamma = mhz(float(t["gamma_mhz"]))
    gi = float(t.get("gamma_i_ratio", 0.0)) * gamma
    layout = transfer_layout(gamma, float(t.get("ratio", 1.0)), gi, float(t.get("spacing", 1.0)))
    spec = WavepacketSpec(float(t["gamma_ph_ratio"]) * gamma)
    r = transfer_experiment(t.get("state", "plus"), spec, layout, mode_dim=args.fock_dim)
    cols = ["fidelity", "purity", "residual_source_population", "trace_drift"]
    _write_table(args.out, "transfer", cols, [[getattr(r, c) for c in cols]], args.format)
    _emit_wigner(args, r.target[:, None] * r.target.conj()[None, :], "wigner_sent")
    _emit_wigner(args, r.received, "wigner_received")


def cmd_wigner(args, cfg):
    state = args.state or cfg.section("transfer").get("state", "plus")
    ket = state_ket(state, args.fock_dim)
    _emit_wigner(args, np.outer(ket, ket.conj()), "wigner")


def cmd_snail(args, cfg):
    s = cfg.section("snail")
    alpha = float(s["alpha"])
    e_j, e_c = ghz(float(s["e_j_ghz"])), ghz(float(s["e_c_ghz"]))
    grid = np.linspace(0.0, 2 * np.pi, 181)
    table = coefficient_table(e_c, e_j, alpha, grid)
    write_table_csv(args.out / "snail.csv", table)
    kf = kerr_free_flux(alpha, e_j, e_c)
    e = expansion_coefficients(SnailParams(e_c, e_j, alpha, kf))
    _write_json(args.out / "kerr_free.json", {"alpha": alpha, "phi_ext": kf, **asdict(e)})
    if args.plot:
        from .plotting import render_line

        render_line(table[:, 0], {"c2": table[:, 2], "c3": table[:, 3], "c4": table[:, 4]},
                    args.out / "snail.svg", "phi_ext (rad)", "coefficient")


def cmd_fit(args, cfg):
    f = cfg.section("fit")
    branch = str(f.get("branch", "strong"))
    ratio = float(f.get("internal_ratio", 1.0))
    if args.trace is not None:
        if not args.trace.is_file():
            raise ConfigError(f"trace file not found: {args.trace}")
        trace = read_trace_csv(args.trace, float(f.get("center_mhz", 0.0)))
    else:
        c = cfg.coupler
        ge = c.geometric_rate
        truth = {"g_c": c.cancellation_coupling, "gamma_e": ge,
                 "gamma_i1": c.a1.internal_damping, "gamma_i2": c.a2.internal_damping}
        ratio = truth["gamma_i2"] / truth["gamma_i1"] if truth["gamma_i1"] > 0 else ratio
        trace = synth_trace(truth, default_grid(ge, 6.0, 201),
                            SyntheticNoiseSpec(float(f.get("sigma", 0.01)), args.seed))
    res = fit_s21_cancellation(trace, int(f.get("n_starts", 6)), branch, ratio, seed=args.seed)
    params_mhz = {f"{k}_mhz": to_mhz(v) for k, v in res.params.items()}
    ratio_fit = abs(res.params["g_c"]) / res.params["gamma_e"]
    cols = list(params_mhz) + ["cancellation_ratio", "residual_norm"]
    _write_table(args.out, "fit", cols, [list(params_mhz.values()) + [ratio_fit, res.residual_norm]],
                 args.format)
    (args.out / "fit_report.txt").write_text(res.report() + "\n")


def cmd_sweep(args, cfg):
    s = cfg.section("sweep")
    kind = args.kind or str(s.get("kind", "damping"))
    fn = SWEEPS[kind]
    workers = args.workers or int(s.get("workers", 1))
    values = [float(v) for v in s.get("values", [])] or None
    kw = {"workers": workers}
    if kind == "damping":
        kw.update(optimize_g=args.optimize_g)
        if values:
            kw["ratios"] = values
    elif kind == "alpha":
        kw.update(optimize_g=args.optimize_g)
        if values:
            kw["alphas"] = values
    elif kind == "leakage":
        kw.update(optimize_g=args.optimize_g)
        if values:
            kw["leakages"] = values
    elif kind == "emission_map":
        if values:
            kw["gammas_mhz"] = values
        kw["alphas"] = [float(a) for a in s.get("alphas", [0.1, 0.2, 0.29])]
    elif kind == "residual":
        kw.update(lindblad=bool(s.get("lindblad", False)), fock_dim=args.fock_dim)
        if values:
            kw["ratios"] = values
    elif kind == "fidelity":
        kw["fock_dim"] = args.fock_dim
        if values:
            kw["ratios"] = values
    res = fn(**kw)
    if args.format == "json":
        _write_table(args.out, f"sweep_{kind}", res.columns, res.rows, "json")
        _write_json(args.out / f"sweep_{kind}.meta.json", res.metadata)
    else:
        res.write(args.out / f"sweep_{kind}.csv")
    if args.plot:
        from .plotting import render_plot

        x = res.columns[1]
        if kind == "emission_map":
            cur = res.metadata["current_device"]
            render_plot(res, "heatmap", args.out / "sweep_emission_map.svg", "gamma_mhz", ["alpha"],
                        ["efficiency"], marker=(cur["gamma_mhz"], cur["alpha"]))
        else:
            ys = [c for c in res.columns if c.endswith("_db") or c in
                  ("fidelity", "purity", "right_fraction")]
            render_plot(res, "line", args.out / f"sweep_{kind}.svg", x, ys)


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        write_manifest(args, cfg)
        HANDLERS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, GridError) as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except (IntegrationQualityError, SingularSystemError, ConvergenceError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
