"""Command-line entry point: ``uavcf <subcommand> [--config PATH] ...``.

Data goes to files (CSV tables, JSON-lines records, a run manifest and
figures); progress goes to standard error. Exit codes: 0 success, 2
configuration or output-path error, 3 no feasible instance at all.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import ConfigError, ExperimentConfig, load_config
from .channels import access_budgets, fronthaul_budgets
from .topology import generate_topology

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

COMMANDS = ("min-bandwidth", "maxmin", "powermin", "fair-power", "service-time", "topology")


def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(table: ex.Table, path: Path, cfg: ExperimentConfig) -> Path:
    """CSV with the config hash and base seed appended to every row."""
    h = cfg.config_hash()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(table.columns) + ["config_hash", "seed"])
        for row in table.rows:
            w.writerow([_fmt(v) for v in row] + [h, cfg.seed])
    return path


def write_records(records, path: Path) -> Path:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return path


def _git_describe() -> str | None:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def write_manifest(path: Path, command: str, cfg: ExperimentConfig, files, wall_time: float):
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "git_describe": _git_describe(),
        "seeds": [cfg.instance_seed(t) for t in range(cfg.trials)],
        "wall_time_s": wall_time,
        "files": sorted(Path(f).name for f in files),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _progress(command: str):
    def report(done: int, total: int):
        print(f"[{command}] instance {done}/{total}", file=sys.stderr, flush=True)
    return report


def _stem(command: str) -> str:
    return command.replace("-", "_")


def _breakdown_table(records) -> ex.Table:
    """Long-format ``{term, watts}`` means per (gamma, band, split)."""
    groups = ex._group([r for r in records if r["feasible"]], ("gamma_db", "band", "split"))
    rows = []
    for key in sorted(groups, key=lambda k: ex._sort_key(("gamma_db", "band", "split"), k)):
        for term in ex.BREAKDOWN_TERMS:
            rows.append((*key, term, float(np.mean([r["breakdown"][term]
                                                    for r in groups[key]]))))
        rows.append((*key, "total", float(np.mean([r["total_power"] for r in groups[key]]))))
    return ex.Table(("gamma_db", "band", "split", "term", "watts"), rows)


def run_command(command: str, cfg: ExperimentConfig, quiet: bool = False) -> tuple[int, list]:
    """Run one sweep, write its outputs and return ``(exit code, files)``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    stem = _stem(command)
    files = []
    if command == "topology":
        files += _write_topology(cfg, out)
        write_manifest(out / f"{stem}_manifest.json", command, cfg, files,
                       time.perf_counter() - start)
        return EXIT_OK, files

    records = ex.run_trials(command, cfg, None if quiet else _progress(command))
    files.append(write_records(records, out / f"{stem}_records.jsonl"))
    tables = {}
    if command == "powermin":
        tables[stem] = ex.summarise_powermin(records, cfg.sweep.feasibility_flag_below)
        tables[f"{stem}_breakdown"] = _breakdown_table(records)
    elif command == "service-time":
        tables[stem] = ex.summarise_service_time(records, cfg.battery())
    else:
        tables[stem] = ex.SUMMARIES[command](records)
    if command == "fair-power":
        tables[f"{stem}_instances"] = ex.fair_power_instances(records)
    for name, table in tables.items():
        files.append(write_table(table, out / f"{name}.csv", cfg))
    if cfg.figures and command in _figure_commands():
        from .plotting import PLOTTERS
        files.append(PLOTTERS[command](tables[stem], out / f"{stem}.png"))
    if command == "service-time" and not quiet:
        _print_service(tables[stem])
    write_manifest(out / f"{stem}_manifest.json", command, cfg, files,
                   time.perf_counter() - start)
    code = EXIT_INFEASIBLE if ex.infeasible_everywhere(records) else EXIT_OK
    return code, files


def _figure_commands():
    return ("min-bandwidth", "maxmin", "powermin", "fair-power")


def _print_service(table: ex.Table):
    idx = {c: i for i, c in enumerate(table.columns)}
    for r in table.rows:
        t = r[idx["service_time_min"]]
        gain = r[idx["gain_vs_option72_pct"]]
        line = f"{r[idx['band']]:>6} {r[idx['split']]:>8}: "
        line += "infeasible" if math.isnan(t) else f"{t:.1f} min"
        if math.isfinite(gain) and r[idx["split"]] != "option72":
            line += f" ({gain:+.1f}% vs option72)"
        print(line)


def _write_topology(cfg: ExperimentConfig, out: Path) -> list[Path]:
    topo = generate_topology(cfg.topology, cfg.seed)
    path = out / f"topology_seed{cfg.seed}.json"
    topo.save(path)
    chan = cfg.channel_config("sub6")
    rows = []
    for l, lb in enumerate(fronthaul_budgets(topo, chan)):
        rows.append(("fronthaul", "cpu", l, 10 * math.log10(lb.gain), lb.p_los, lb.elevation_deg))
    for k, per_ue in enumerate(access_budgets(topo, chan)):
        for l, lb in enumerate(per_ue):
            rows.append(("access", f"ue{k}", l, 10 * math.log10(lb.gain), lb.p_los,
                         lb.elevation_deg))
    table = ex.Table(("link", "endpoint", "uav", "gain_db", "p_los", "elevation_deg"), rows)
    return [path, write_table(table, out / f"topology_seed{cfg.seed}_links.csv", cfg)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavcf",
        description="UAV cell-free massive MIMO with wireless fronthaul: sweeps and reports.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "min-bandwidth": "fronthaul bandwidth needed to activate one UAV-AP vs antennas",
        "maxmin": "max-min SINR vs fronthaul antennas",
        "powermin": "minimum total power vs SINR requirement",
        "fair-power": "max-min allocation vs power-minimised allocation at the fair SINR",
        "service-time": "battery service time per split",
        "topology": "write one topology and its link budgets",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", type=Path, help="YAML experiment configuration")
        p.add_argument("--seed", type=int, help="base seed (instance i uses seed + i)")
        p.add_argument("--trials", type=int, help="number of Monte-Carlo instances")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--threads", type=int, help="worker processes")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.out is not None:
        changes["out_dir"] = str(args.out)
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.no_figures:
        changes["figures"] = False
    return cfg.replace(**changes) if changes else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code, _ = run_command(args.command, cfg)
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if code == EXIT_INFEASIBLE:
        print("no feasible instance in the whole sweep", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
