"""Command-line entry point: ``asprx <subcommand> [--config FILE | --scenario NAME] ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 lock failure,
3 numerical divergence. ``ASPRX_OUT`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, link
from .characterize import characterize_pd, characterize_ps
from .config import ConfigError, yaml_load, OutputSpec, check_path, config_from_dict, config_hash, config_to_dict, load_config, set_path
from .core import ParameterError, StructuralError
from .export import Provenance, svg_eye, svg_lines, svg_scatter, write_csv, write_json
from .scenarios import SCENARIO_NAMES, get_scenario
from .txrx import mapping_table

EXIT_USAGE = link.EXIT_CONFIG


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which means lock failure here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, scenario_default: str | None = None) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="YAML or JSON scenario file")
    src.add_argument("--scenario", choices=SCENARIO_NAMES, default=scenario_default,
                     help="built-in scenario")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", type=Path, help="output directory (default $ASPRX_OUT or ./out)")
    p.add_argument("--emit", help="comma list of csv,json,svg (default: config outputs, else all)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asprx", description="Homodyne QPSK receiver with optical Costas loop.")
    parser.add_argument("--version", action="version", version=f"asprx {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("characterize-ps", help="phase-shifter interferometer sweep")
    _common(p, "fig4a")
    p.add_argument("--step", type=float, default=0.01, help="voltage step (V)")

    p = sub.add_parser("characterize-pd", help="phase-detector sawtooth under a frequency offset")
    _common(p, "fig4b")

    p = sub.add_parser("run-link", help="simulate a link and emit constellation, eye and metrics")
    _common(p, "fig7-closed")

    p = sub.add_parser("sweep", help="run one scenario per value of a parameter")
    _common(p, "fig7-closed")
    p.add_argument("--param", required=True, help="dotted parameter path, e.g. laser.linewidth")
    p.add_argument("--values", required=True,
                   help="comma-separated values or a JSON/YAML list; empty for none")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("dump-mapping", help="print the bit-to-symbol table")
    p.add_argument("--modulation", default="QPSK", choices=("QPSK", "16QAM"))
    p.add_argument("--out", type=Path, help="also write mapping.csv here")
    return parser


def _resolve(args) -> tuple[link.ScenarioConfig, OutputSpec]:
    if args.config is not None:
        cfg, outputs = load_config(args.config)
    else:
        cfg, outputs = get_scenario(args.scenario), OutputSpec()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.emit is not None:
        outputs = OutputSpec.parse(args.emit)
    return cfg, outputs


def _out_dir(args) -> Path:
    out = args.out if args.out is not None else Path(os.environ.get("ASPRX_OUT", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _prov(cfg: link.ScenarioConfig) -> Provenance:
    return Provenance(cfg.name, cfg.seed, config_hash(cfg))


def cmd_characterize_ps(args) -> int:
    cfg, outputs = _resolve(args)
    out = _out_dir(args)
    prov = _prov(cfg)
    res = characterize_ps(cfg.pic, step=args.step)
    if outputs.csv:
        write_csv(out / "ps_sweep.csv", prov, ["voltage_v", "normalized_power"], zip(res.voltage, res.power))
    if outputs.json:
        write_json(out / "ps_sweep.json", prov, {
            "argmin_v": res.argmin, "power_at_3v": res.power_at_3v, "config": config_to_dict(cfg),
        })
    if outputs.svg:
        svg_lines(out / "ps_sweep.svg", prov, res.voltage, [res.power], "Phase-shifter interferometer",
                  "control voltage (V)", "normalized power")
    print(f"argmin={res.argmin:.9g} V  P(3 V)={res.power_at_3v:.9g}")
    return link.EXIT_OK


def cmd_characterize_pd(args) -> int:
    cfg, outputs = _resolve(args)
    out = _out_dir(args)
    prov = _prov(cfg)
    offset = cfg.laser.center_frequency_offset or 1e6
    res = characterize_pd(cfg.eic, cfg.baud, cfg.sps, cfg.n_symbols, offset, cfg.seed)
    wrapped = (res.phi + math.pi / 4) % (math.pi / 2) - math.pi / 4
    if outputs.csv:
        write_csv(out / "pd_scatter.csv", prov, ["phi_err_rad", "phi_unwrapped_rad", "v_pd_v"],
                  zip(wrapped, res.phi, res.v_pd))
    if outputs.json:
        write_json(out / "pd_fit.json", prov, {
            "slope_v_per_rad": res.slope, "period_rad": res.period,
            "symmetry_residual_v": res.symmetry_residual, "zero_offset_rms_v": res.zero_offset_rms,
            "config": config_to_dict(cfg),
        })
    if outputs.svg:
        svg_scatter(out / "pd_scatter.svg", prov, res.phi, res.v_pd, "Phase detector output",
                    "phase error (rad)", "v_pd (V)")
    print(f"slope={res.slope:.9g} V/rad  period={res.period:.9g} rad  "
          f"symmetry={res.symmetry_residual:.3g} V  zero-offset rms={res.zero_offset_rms:.3g} V")
    return link.EXIT_OK


def summarize(result: link.RunResult) -> dict:
    return {
        "status": result.status,
        "locked": result.locked,
        "lock_symbol": result.lock_symbol,
        "polarity": result.polarity,
        "kp": result.kp,
        "ki": result.ki,
        "pd_slope_v_per_rad": result.pd_slope,
        "sample_offset": result.sample_offset,
        "equalizer_status": result.eq_status,
        "metrics": result.metrics.as_dict(),
        "residual_phase_rms_rad": link.residual_phase_rms(result),
        "io_correlation": link.io_correlation(result),
        "rotation_circular_variance": link.rotation_spread(result),
        "drive_clamp_fraction": result.clamp_fraction,
        "warnings": list(result.warnings),
    }


def emit_run(result: link.RunResult, out: Path, outputs: OutputSpec) -> None:
    cfg = result.config
    prov = _prov(cfg)
    start = cfg.settle_symbols
    rx = result.rx_symbols[start:]
    if outputs.csv:
        write_csv(out / "constellation.csv", prov, ["symbol", "i", "q"],
                  zip(range(start, start + rx.size), rx.real, rx.imag))
        if result.eq_symbols is not None:
            eq = result.eq_symbols
            write_csv(out / "constellation_equalized.csv", prov, ["symbol", "i", "q"],
                      zip(range(start, start + eq.size), eq.real, eq.imag))
        w = result.eye_waveform
        n_tr = min(200, w.size // cfg.sps)
        write_csv(out / "eye.csv", prov, ["trace", "sample", "value"],
                  ((k, j, w[k * cfg.sps + j]) for k in range(n_tr) for j in range(cfg.sps)))
        idx = np.arange(result.rx_symbols.size) * cfg.sps + result.sample_offset
        ch = result.chain
        write_csv(out / "traces.csv", prov, ["symbol", "time_s", "v_pd_v", "v_ctrl_v", "phi_d_rad", "phi_err_rad"],
                  zip(range(idx.size), idx / cfg.sample_rate, ch.v_pd[idx], ch.v_ctrl[idx],
                      ch.phi_d[idx], result.phi_err[idx]))
    if outputs.json:
        write_json(out / "metrics.json", prov, {**summarize(result), "config": config_to_dict(cfg)})
    if outputs.svg:
        shown = result.eq_symbols if result.eq_symbols is not None else rx
        svg_scatter(out / "constellation.svg", prov, shown.real, shown.imag,
                    f"Constellation ({cfg.name})", "I", "Q", symmetric=True)
        svg_eye(out / "eye.svg", prov, result.eye_waveform, cfg.sps, f"Eye ({cfg.name})")
        idx = np.arange(result.rx_symbols.size) * cfg.sps + result.sample_offset
        svg_lines(out / "traces.svg", prov, idx / cfg.sample_rate * 1e6, [result.chain.v_ctrl[idx]],
                  "Phase-shifter drive", "time (us)", "v_ctrl (V)")


def cmd_run_link(args) -> int:
    cfg, outputs = _resolve(args)
    out = _out_dir(args)
    result = link.run_scenario(cfg)
    emit_run(result, out, outputs)
    m = result.metrics
    print(f"{cfg.name}: status={result.status} locked={result.locked} lock_symbol={result.lock_symbol} "
          f"evm={m.evm_rms:.4g}% ber={m.ber:.3g} eye_v={m.eye_vertical:.3g} eye_h={m.eye_horizontal:.3g}")
    if result.status == "lock-failure":
        print(f"lock failure: no sustained lock within {cfg.lock_deadline} symbols "
              f"(residual phase rms {link.residual_phase_rms(result):.3g} rad, polarity {result.polarity})",
              file=sys.stderr)
    elif result.status == "diverged":
        print("equalizer diverged: error energy grew over consecutive quarters", file=sys.stderr)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return result.exit_code


def parse_values(text: str) -> list:
    text = text.strip()
    if not text:
        return []
    if text.startswith("["):
        values = yaml_load(text)
        if not isinstance(values, list):
            raise ConfigError("--values must be a list")
    else:
        values = [yaml_load(v.strip()) for v in text.split(",")]
    return values


def _sweep_point(cfg_dict: dict) -> dict:
    cfg, _ = config_from_dict(cfg_dict)
    result = link.run_scenario(cfg)
    return summarize(result)


SWEEP_COLUMNS = ["value", "seed", "status", "locked", "evm_rms", "ber", "eye_vertical", "eye_horizontal",
                 "residual_phase_rms", "io_correlation", "config_hash"]


def cmd_sweep(args) -> int:
    cfg, outputs = _resolve(args)
    values = parse_values(args.values)
    check_path(cfg, args.param)
    cfgs = [set_path(cfg, args.param, v) for v in values]
    out = _out_dir(args)
    dicts = [config_to_dict(c) for c in cfgs]
    if args.jobs > 1 and len(dicts) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_sweep_point, dicts))
    else:
        summaries = [_sweep_point(d) for d in dicts]
    rows = []
    for v, c, s in zip(values, cfgs, summaries):
        m = s["metrics"]
        rows.append([json.dumps(v), c.seed, s["status"], s["locked"], m["evm_rms"], m["ber"],
                     m["eye_vertical"], m["eye_horizontal"], s["residual_phase_rms_rad"],
                     s["io_correlation"], config_hash(c)])
    prov = _prov(cfg)
    if outputs.csv:
        write_csv(out / "sweep.csv", prov, SWEEP_COLUMNS, rows)
    if outputs.json:
        write_json(out / "sweep.json", prov, {
            "param": args.param, "values": values, "results": summaries, "config": config_to_dict(cfg),
        })
    print(f"sweep {args.param}: {len(rows)} point(s)")
    codes = [link.EXIT_DIVERGED if s["status"] == "diverged" else link.EXIT_LOCK if s["status"] == "lock-failure"
             else link.EXIT_OK for s in summaries]
    return max(codes, default=link.EXIT_OK)


def cmd_dump_mapping(args) -> int:
    table = mapping_table(args.modulation)
    lines = ["bits,i,q"] + [f"{b},{p.real:.9g},{p.imag:.9g}" for b, p in table]
    print("\n".join(lines))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        prov = Provenance(f"mapping-{args.modulation}", 0, "none")
        write_csv(args.out / "mapping.csv", prov, ["bits", "i", "q"], ((b, p.real, p.imag) for b, p in table))
    return link.EXIT_OK


COMMANDS = {
    "characterize-ps": cmd_characterize_ps,
    "characterize-pd": cmd_characterize_pd,
    "run-link": cmd_run_link,
    "sweep": cmd_sweep,
    "dump-mapping": cmd_dump_mapping,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError, StructuralError) as exc:
        print(f"asprx: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
