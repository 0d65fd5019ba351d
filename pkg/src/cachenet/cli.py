"""Experiment configuration, orchestration, and result emission.

Scenario defaults reproduce the reference evaluation: 400 users and 4
stations per pi*500^2 m^2, 43 dBm transmitters sharing 20 MHz, path-loss
exponent 4, 0.025 requests/s per user over a 200-packet Zipf(0.8) catalog,
10 Mbit packets in 0.5 s slots, and a quarter of the users caching the top
10 packets.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Sequence

from .analytical import (
    AveragingConvention,
    ConsistencyError,
    NetworkParams,
    average_plr,
    load_probabilities,
    make_network,
    plr_report,
)
from .simulator import SimConfig, SimReport, run_simulation
from .special_functions import ConvergenceError, QuadratureError

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "parse_config",
    "spec_to_params",
    "spec_to_sim_config",
    "cmd_analyze",
    "cmd_simulate",
    "cmd_compare",
    "emit_results",
    "main",
]


class ConfigError(ValueError):
    """Configuration file or flag violates the schema."""


_INTENSITY_UNIT = math.pi * 500.0**2  # m^2 of one 500 m-radius disc


@dataclass(frozen=True)
class ExperimentSpec:
    """One fully resolved experiment: network scenario, simulation scale,
    sweep definition and output destination."""

    # network scenario
    user_intensity: float = 400.0 / _INTENSITY_UNIT
    bs_intensity: float = 4.0 / _INTENSITY_UNIT
    cell_shape_k: float = 3.575
    path_loss: float = 4.0
    tx_power_dbm: float = 43.0
    bandwidth_hz: float = 20e6
    request_rate: float = 0.025
    alpha: float = 0.25
    slot_duration: float = 0.5
    zipf_exponent: float = 0.8
    catalog_size: int = 200
    packet_size_mbits: float = 10.0
    cache_slots: int = 10
    noise_figure_db: float | None = None  # None: interference-limited (no noise)
    # simulation scale
    deployments: int = 30
    slots: int = 800
    warmup: int = 500
    seed: int = 1
    area_side: float = 1e4
    edge: str = "torus"
    cancellation: bool = True
    # sweep
    sweep_field: str = "cache_slots"
    sweep_values: tuple = (0, 5, 10, 15, 20)
    # output
    out_dir: str = "."
    formats: tuple = ("csv",)


_SPEC_FIELDS = {f.name for f in fields(ExperimentSpec)}
_INT_FIELDS = {"catalog_size", "cache_slots", "deployments", "slots", "warmup", "seed"}
_SWEEPABLE = _SPEC_FIELDS - {"sweep_field", "sweep_values", "out_dir", "formats"}
# common unit mistakes get a pointed message instead of "unknown key"
_REJECTED_KEYS = {
    "tx_power": "use tx_power_dbm (dBm); raw watt inputs are not accepted",
    "tx_power_w": "use tx_power_dbm (dBm)",
    "tx_power_watts": "use tx_power_dbm (dBm)",
    "bandwidth_mhz": "use bandwidth_hz (Hz)",
    "packet_size_bits": "use packet_size_mbits (Mbits)",
    "noise_power": "use noise_figure_db, or omit for the interference-limited default",
}


def _coerce(key: str, value: Any) -> Any:
    if key in ("sweep_values", "formats"):
        if isinstance(value, (list, tuple)):
            return tuple(value)
        raise ConfigError(f"{key} must be a list, got {value!r}")
    if key == "cancellation":
        if isinstance(value, bool):
            return value
        raise ConfigError(f"cancellation must be true/false, got {value!r}")
    if key == "noise_figure_db" and value is None:
        return None
    if key in ("edge", "sweep_field", "out_dir"):
        return str(value)
    if key in _INT_FIELDS:
        if isinstance(value, bool) or int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be numeric, got {value!r}") from None


def _apply(settings: dict, key: str, value: Any) -> None:
    if key in _REJECTED_KEYS:
        raise ConfigError(f"config key '{key}' rejected: {_REJECTED_KEYS[key]}")
    if key not in _SPEC_FIELDS:
        raise ConfigError(f"unknown config key '{key}'")
    settings[key] = _coerce(key, value)


def parse_config(
    path: str | Path | None = None,
    overrides: Sequence[str] = (),
    **flag_values: Any,
) -> ExperimentSpec:
    """Resolve defaults, an optional JSON file, --set pairs and direct flags
    (in that order of increasing precedence) into a validated spec."""
    settings: dict[str, Any] = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        for key, value in raw.items():
            _apply(settings, key, value)
    for pair in overrides:
        key, sep, text = pair.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        _apply(settings, key.strip(), value)
    for key, value in flag_values.items():
        if value is not None:
            _apply(settings, key, value)

    spec = ExperimentSpec(**settings)
    if spec.edge not in ("torus", "guard"):
        raise ConfigError(f"edge must be 'torus' or 'guard', got {spec.edge!r}")
    if spec.sweep_field not in _SWEEPABLE:
        raise ConfigError(f"'{spec.sweep_field}' is not sweepable")
    bad = [f for f in spec.formats if f not in ("csv", "json")]
    if bad:
        raise ConfigError(f"unsupported output formats: {bad}")
    if not spec.sweep_values:
        raise ConfigError("sweep_values must be non-empty")
    # materialize the base scenario and every sweep point once so bad
    # values fail at parse time, not mid-run
    try:
        spec_to_params(spec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    for value in spec.sweep_values:
        try:
            spec_to_params(spec, **{spec.sweep_field: value})
        except (ValueError, TypeError) as exc:
            raise ConfigError(
                f"sweep value {value!r} invalid for '{spec.sweep_field}': {exc}"
            ) from exc
    try:
        spec_to_sim_config(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def spec_to_params(spec: ExperimentSpec, **over: Any) -> NetworkParams:
    """Build NetworkParams for the spec, with optional field overrides.

    The dBm-to-watt and noise-figure conversions happen here, exactly once.
    """
    if over:
        spec = replace(spec, **{k: _coerce(k, v) for k, v in over.items()})
    tx_watts = 10.0 ** ((spec.tx_power_dbm - 30.0) / 10.0)
    if spec.noise_figure_db is None:
        noise = 0.0
    else:
        # thermal floor: -174 dBm/Hz plus the receiver figure, over the band
        noise = 10.0 ** ((-174.0 + spec.noise_figure_db - 30.0) / 10.0) * spec.bandwidth_hz
    return make_network(
        user_intensity=spec.user_intensity,
        bs_intensity=spec.bs_intensity,
        path_loss=spec.path_loss,
        tx_power=tx_watts,
        noise_power=noise,
        bandwidth=spec.bandwidth_hz,
        slot_duration=spec.slot_duration,
        packet_size_mbits=spec.packet_size_mbits,
        request_rate=spec.request_rate,
        alpha=spec.alpha,
        cache_slots=spec.cache_slots,
        zipf_exponent=spec.zipf_exponent,
        catalog_size=spec.catalog_size,
        cell_shape_k=spec.cell_shape_k,
    )


def spec_to_sim_config(spec: ExperimentSpec, measure_plr: bool = True) -> SimConfig:
    return SimConfig(
        deployments=spec.deployments,
        slots=spec.slots,
        warmup=spec.warmup,
        seed=spec.seed,
        area_side=spec.area_side,
        edge_mode=spec.edge,
        cancellation=spec.cancellation,
        measure_plr=measure_plr,
    )


ANALYTIC_COLUMNS = (
    "sweep_key", "p_full", "p_free", "p_modest", "phi_a", "t_bar",
    "plr_untenable", "plr_cache", "avg_plr_air", "avg_plr_all",
)
SIM_COLUMNS = ANALYTIC_COLUMNS + (
    "se_p_full", "se_p_free", "se_p_modest", "se_plr_untenable", "se_plr_cache",
    "seed", "deployments", "slots",
)


def cmd_analyze(spec: ExperimentSpec) -> list[dict]:
    """Analytic load-state probabilities and loss rates per sweep point."""
    rows = []
    for value in spec.sweep_values:
        params = spec_to_params(spec, **{spec.sweep_field: value})
        loads = load_probabilities(params)
        report = plr_report(params, loads)
        alpha = params.cache.alpha
        delta = params.traffic.hit_ratio
        avg_all = average_plr(
            alpha, delta, report.plr_cache_enabled, report.plr_untenable,
            AveragingConvention.ALL_REQUESTS,
        )
        avg_air = average_plr(
            alpha, delta, report.plr_cache_enabled, report.plr_untenable,
            AveragingConvention.OVER_AIR_REQUESTS,
        )
        rows.append({
            "sweep_key": value,
            "p_full": loads.p_full,
            "p_free": loads.p_free,
            "p_modest": loads.p_modest,
            "phi_a": report.active_density,
            "t_bar": report.sinr_threshold,
            "plr_untenable": report.plr_untenable,
            "plr_cache": report.plr_cache_enabled,
            "avg_plr_air": avg_air,
            "avg_plr_all": avg_all,
        })
    return rows


def cmd_simulate(spec: ExperimentSpec) -> list[dict]:
    """Simulated counterparts of cmd_analyze, with standard errors."""
    rows = []
    for value in spec.sweep_values:
        params = spec_to_params(spec, **{spec.sweep_field: value})
        report: SimReport = run_simulation(params, spec_to_sim_config(spec))
        rows.append({
            "sweep_key": value,
            "p_full": report.est_p_full,
            "p_free": report.est_p_free,
            "p_modest": report.est_p_modest,
            "phi_a": report.est_active_fraction * params.bs_intensity,
            "t_bar": params.sinr_threshold,
            "plr_untenable": report.est_plr_untenable,
            "plr_cache": report.est_plr_cache_enabled,
            "avg_plr_air": report.est_avg_plr_air,
            "avg_plr_all": report.est_avg_plr_all,
            "se_p_full": report.se_p_full,
            "se_p_free": report.se_p_free,
            "se_p_modest": report.se_p_modest,
            "se_plr_untenable": report.se_plr_untenable,
            "se_plr_cache": report.se_plr_cache_enabled,
            "seed": report.seed,
            "deployments": report.deployments_run,
            "slots": report.slots_run,
        })
    return rows


_COMPARED = ("p_full", "p_free", "p_modest", "plr_untenable", "plr_cache")


def cmd_compare(spec: ExperimentSpec) -> tuple[list[dict], dict[str, float]]:
    """Join analytic and simulated results on the sweep key.

    Returns the merged rows and the maximum absolute deviation per compared
    column (NaN when a column was never present on both sides).
    """
    return cmd_compare_from(cmd_analyze(spec), cmd_simulate(spec), spec)


COMPARE_COLUMNS = ("sweep_key",) + tuple(
    f"{prefix}_{col}" for col in _COMPARED for prefix in ("analytic", "sim", "dev")
)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_results(
    rows: list[dict], fmt: str, path: str | Path, columns: Sequence[str] | None = None
) -> Path:
    """Write rows to one file; full float precision, fixed column order."""
    if columns is None:
        if not rows:
            raise ValueError("columns are required when rows are empty")
        columns = list(rows[0].keys())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(c)) for c in columns])
    elif fmt == "json":
        payload = [{c: row.get(c) for c in columns} for row in rows]
        with open(path, "w", newline="") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unsupported format {fmt!r}")
    return path


def _print_rows(rows: list[dict], columns: Sequence[str]) -> None:
    header = "  ".join(f"{c:>14}" for c in columns)
    print(header)
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c)
            if isinstance(v, float):
                cells.append(f"{v:>14.6g}")
            else:
                cells.append(f"{'' if v is None else v!s:>14}")
        print("  ".join(cells))


def _emit_all(spec: ExperimentSpec, rows: list[dict], columns: Sequence[str], stem: str) -> None:
    for fmt in spec.formats:
        out = emit_results(rows, fmt, Path(spec.out_dir) / f"{stem}.{fmt}", columns)
        print(f"wrote {out}")


def _run(args: argparse.Namespace) -> int:
    spec = parse_config(
        args.config,
        args.set or (),
        seed=args.seed,
        out_dir=args.out,
        formats=[args.format] if args.format else None,
        cancellation=False if args.no_cancellation else None,
        noise_figure_db=args.noise_figure,
        edge=args.edge,
    )
    stem_suffix = spec.sweep_field
    if args.command == "analyze":
        rows = cmd_analyze(spec)
        _print_rows(rows, ANALYTIC_COLUMNS)
        _emit_all(spec, rows, ANALYTIC_COLUMNS, f"analytic_{stem_suffix}")
    elif args.command == "simulate":
        rows = cmd_simulate(spec)
        _print_rows(rows, SIM_COLUMNS)
        _emit_all(spec, rows, SIM_COLUMNS, f"simulated_{stem_suffix}")
    elif args.command == "compare":
        rows, deviations = cmd_compare(spec)
        _print_rows(rows, COMPARE_COLUMNS)
        for col, dev in deviations.items():
            print(f"max |analytic - sim| {col}: {dev:.6g}")
        _emit_all(spec, rows, COMPARE_COLUMNS, f"compare_{stem_suffix}")
    else:  # sweep: all three artifacts in one go
        rows_a = cmd_analyze(spec)
        _emit_all(spec, rows_a, ANALYTIC_COLUMNS, f"analytic_{stem_suffix}")
        rows_s = cmd_simulate(spec)
        _emit_all(spec, rows_s, SIM_COLUMNS, f"simulated_{stem_suffix}")
        rows_c, deviations = cmd_compare_from(rows_a, rows_s, spec)
        _print_rows(rows_c, COMPARE_COLUMNS)
        for col, dev in deviations.items():
            print(f"max |analytic - sim| {col}: {dev:.6g}")
        _emit_all(spec, rows_c, COMPARE_COLUMNS, f"compare_{stem_suffix}")
    return 0


def cmd_compare_from(
    rows_a: list[dict], rows_s: list[dict], spec: ExperimentSpec
) -> tuple[list[dict], dict[str, float]]:
    """cmd_compare on already computed result sets (avoids re-running them)."""
    analytic = {row["sweep_key"]: row for row in rows_a}
    simulated = {row["sweep_key"]: row for row in rows_s}
    rows = []
    deviations: dict[str, float] = {}
    for key in spec.sweep_values:
        a, s = analytic[key], simulated[key]
        merged: dict[str, Any] = {"sweep_key": key}
        for col in _COMPARED:
            merged[f"analytic_{col}"] = a[col]
            merged[f"sim_{col}"] = s[col]
            if a[col] is not None and s[col] is not None:
                dev = abs(a[col] - s[col])
                merged[f"dev_{col}"] = dev
                deviations[col] = max(deviations.get(col, 0.0), dev)
            else:
                merged[f"dev_{col}"] = None
        rows.append(merged)
    for col in _COMPARED:
        deviations.setdefault(col, float("nan"))
    return rows, deviations


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cachenet",
        description="Load-state and loss-rate analysis of cache-enabled cellular "
        "networks, with a Monte Carlo cross-check.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("analyze", "closed-form/numeric results over the sweep"),
        ("simulate", "Monte Carlo results over the sweep"),
        ("compare", "run both and report deviations"),
        ("sweep", "emit analytic, simulated, and compare files"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
        p.add_argument("--no-cancellation", action="store_true",
                       help="disable cached-interference cancellation in the simulator")
        p.add_argument("--noise-figure", type=float, metavar="DB",
                       help="receiver noise figure; omit for interference-limited")
        p.add_argument("--edge", choices=("torus", "guard"), help="edge-effect handling")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, QuadratureError, ConsistencyError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
