"""Monte-Carlo sweeps behind the CLI subcommands.

Every instance (trial) owns its topology and random streams; a worker
computes all records of one instance so statistics are shared across bands,
splits and sweep points. Records are plain dicts that serialise to JSON
lines; aggregation turns them into CSV rows sorted by sweep key.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .access import SinrStatistics, estimate_sinr_statistics
from .channels import sample_fronthaul
from .config import BANDS, ExperimentConfig
from .fronthaul import (SingularChannelError, SplitOption, fronthaul_powers,
                        fronthaul_rate_requirement, min_bandwidth_for_channel)
from .optimizer import SinrConeBuilder, fair_then_minimize, minimize_total_power, solve_max_min
from .powermodel import service_time
from .topology import NetworkTopology, generate_topology
from .units import db2lin, lin2db

BREAKDOWN_TERMS = ("processing", "fronthaul", "amplifier_static", "transmit")


def _num(x) -> float | None:
    """JSON-safe float (non-finite values become null)."""
    x = float(x)
    return x if math.isfinite(x) else None


def _splits(cfg: ExperimentConfig) -> list[SplitOption]:
    return [SplitOption.parse(s) for s in cfg.sweep.splits]


class Instance:
    """Lazily built topology, access statistics and fronthaul draws of one trial."""

    def __init__(self, cfg: ExperimentConfig, trial: int):
        self.cfg = cfg
        self.trial = trial
        self.seed = cfg.instance_seed(trial)
        self.topology: NetworkTopology = generate_topology(cfg.topology, self.seed)
        self._stats: SinrStatistics | None = None
        self._builder: SinrConeBuilder | None = None

    @property
    def stats(self) -> SinrStatistics:
        if self._stats is None:
            cfg = self.cfg
            self._stats = estimate_sinr_statistics(
                self.topology, cfg.channel_config("sub6"), cfg.access_config(),
                cfg.access.stat_samples, cfg.rng(self.trial, "access"))
        return self._stats

    @property
    def builder(self) -> SinrConeBuilder:
        if self._builder is None:
            self._builder = SinrConeBuilder(self.stats)
        return self._builder

    def fronthaul_channel(self, band: str, n_antennas: int | None = None):
        n = n_antennas if n_antennas is not None else self.cfg.band_value(band, "n_antennas")
        rng = self.cfg.rng(self.trial, "fronthaul", BANDS.index(band), int(n))
        return sample_fronthaul(self.topology, self.cfg.channel_config(band, n), rng).H

    def fronthaul_powers(self, band: str, split: SplitOption, n_antennas: int | None = None):
        """Per-UAV fronthaul powers; all infinite when ZF is impossible."""
        H = self.fronthaul_channel(band, n_antennas)
        try:
            return fronthaul_powers(H, split, self.cfg.fronthaul_config(band))
        except SingularChannelError:
            return np.full(self.topology.n_uavs, np.inf)


def _base(inst: Instance, band: str, split: SplitOption, **extra) -> dict:
    return {"seed": inst.seed, "trial": inst.trial, "band": band, "split": split.value,
            **extra}


def _breakdown_dict(bd) -> dict | None:
    if bd is None:
        return None
    return {name: _num(v) for name, v in bd.rows() if name != "total"}


# ----- per-instance workers -----

def min_bandwidth_records(cfg: ExperimentConfig, trial: int) -> list[dict]:
    inst = Instance(cfg, trial)
    out = []
    for n in cfg.sweep.n_antennas:
        for band in cfg.sweep.bands:
            H = inst.fronthaul_channel(band, n)
            fcfg = cfg.fronthaul_config(band)
            for split in _splits(cfg):
                bw = min_bandwidth_for_channel(H, fronthaul_rate_requirement(split, fcfg), fcfg)
                out.append(_base(inst, band, split, n_antennas=int(n),
                                 min_bandwidth_hz=_num(bw), feasible=bool(math.isfinite(bw))))
    return out


def maxmin_records(cfg: ExperimentConfig, trial: int) -> list[dict]:
    inst = Instance(cfg, trial)
    ocfg = cfg.optimizer_config()
    out = []
    for n in cfg.sweep.n_antennas:
        for band in cfg.sweep.bands:
            for split in _splits(cfg):
                pf = inst.fronthaul_powers(band, split, n)
                res = solve_max_min(inst.stats, pf, ocfg, inst.builder)
                out.append(_base(inst, band, split, n_antennas=int(n),
                                 t_star=_num(res.t_star),
                                 t_star_db=_num(res.t_star_db) if res.feasible else None,
                                 min_sinr_db=_num(lin2db(res.min_sinr)) if res.feasible
                                 else None,
                                 active_count=int(res.alloc.n_active),
                                 feasible=bool(res.feasible)))
    return out


def powermin_records(cfg: ExperimentConfig, trial: int) -> list[dict]:
    inst = Instance(cfg, trial)
    ocfg = cfg.optimizer_config()
    params = cfg.power_params()
    out = []
    for band in cfg.sweep.bands:
        fcfg = cfg.fronthaul_config(band)
        for split in _splits(cfg):
            pf = inst.fronthaul_powers(band, split)
            feasible = True
            for g_db in sorted(cfg.sweep.gamma_db):
                rec = _base(inst, band, split, gamma_db=float(g_db))
                # a larger target only shrinks the feasible set
                if feasible:
                    res = minimize_total_power(inst.stats, float(db2lin(g_db)), split, pf,
                                               params, ocfg, fcfg, inst.builder)
                    feasible = res.feasible
                if feasible:
                    rec.update(total_power=_num(res.total_power),
                               breakdown=_breakdown_dict(res.breakdown),
                               active_count=int(res.alloc.n_active), feasible=True)
                else:
                    rec.update(total_power=None, breakdown=None, active_count=0,
                               feasible=False)
                out.append(rec)
    return out


def fair_power_records(cfg: ExperimentConfig, trial: int) -> list[dict]:
    inst = Instance(cfg, trial)
    ocfg = cfg.optimizer_config()
    params = cfg.power_params()
    out = []
    for band in cfg.sweep.bands:
        fcfg = cfg.fronthaul_config(band)
        for split in _splits(cfg):
            pf = inst.fronthaul_powers(band, split)
            res = fair_then_minimize(inst.stats, pf, split, params, ocfg, fcfg, inst.builder)
            rec = _base(inst, band, split, t_star=_num(res.maxmin.t_star),
                        t_star_db=_num(res.maxmin.t_star_db) if res.maxmin.feasible else None,
                        feasible=bool(res.feasible))
            if res.feasible:
                mn = res.minimized
                rec.update(power_of_maxmin=_num(res.power_of_maxmin),
                           power_after_minimization=_num(res.power_after_minimization),
                           min_sinr_after_db=_num(lin2db(np.min(mn.gamma))),
                           active_maxmin=int(res.maxmin.alloc.n_active),
                           active_count=int(mn.alloc.n_active),
                           total_power=_num(mn.total_power),
                           breakdown=_breakdown_dict(mn.breakdown))
            out.append(rec)
    return out


def service_time_records(cfg: ExperimentConfig, trial: int) -> list[dict]:
    inst = Instance(cfg, trial)
    ocfg = cfg.optimizer_config()
    params = cfg.power_params()
    battery = cfg.battery()
    g = float(db2lin(cfg.sweep.service_gamma_db))
    out = []
    for band in cfg.sweep.bands:
        fcfg = cfg.fronthaul_config(band)
        for split in _splits(cfg):
            pf = inst.fronthaul_powers(band, split)
            res = minimize_total_power(inst.stats, g, split, pf, params, ocfg, fcfg,
                                       inst.builder)
            rec = _base(inst, band, split, gamma_db=float(cfg.sweep.service_gamma_db),
                        feasible=bool(res.feasible))
            if res.feasible:
                per_uav = res.total_power / res.alloc.n_active
                rec.update(total_power=_num(res.total_power),
                           active_count=int(res.alloc.n_active),
                           per_uav_power_w=_num(per_uav),
                           service_time_min=_num(service_time(per_uav, battery)))
            out.append(rec)
    return out


WORKERS: dict[str, Callable[[ExperimentConfig, int], list[dict]]] = {
    "min-bandwidth": min_bandwidth_records,
    "maxmin": maxmin_records,
    "powermin": powermin_records,
    "fair-power": fair_power_records,
    "service-time": service_time_records,
}


def run_trials(command: str, cfg: ExperimentConfig,
               progress: Callable[[int, int], None] | None = None) -> list[dict]:
    """All records of ``command`` in deterministic (trial, emission) order."""
    worker = WORKERS[command]
    trials = range(cfg.trials)
    records: list[dict] = []
    if cfg.threads == 1:
        results = (worker(cfg, t) for t in trials)
        for i, recs in enumerate(results):
            records.extend(recs)
            if progress:
                progress(i + 1, cfg.trials)
        return records
    with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
        for i, recs in enumerate(pool.map(worker, [cfg] * cfg.trials, trials)):
            records.extend(recs)
            if progress:
                progress(i + 1, cfg.trials)
    return records


# ----- aggregation -----

def _mean_stderr(values) -> tuple[float, float]:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(v.mean()), se


def _group(records, keys):
    groups = defaultdict(list)
    for r in records:
        groups[tuple(r[k] for k in keys)].append(r)
    return groups


def _split_order(value: str) -> int:
    return [s.value for s in SplitOption].index(value)


def _sort_key(key_names, key):
    out = []
    for name, v in zip(key_names, key):
        if name == "band":
            out.append(BANDS.index(v))
        elif name == "split":
            out.append(_split_order(v))
        else:
            out.append(v)
    return tuple(out)


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]


def _table(records, keys, summarise) -> Table:
    groups = _group(records, keys)
    rows, columns = [], None
    for key in sorted(groups, key=lambda k: _sort_key(keys, k)):
        summary = summarise(groups[key])
        columns = tuple(keys) + tuple(summary)
        rows.append(tuple(key) + tuple(summary.values()))
    return Table(columns or tuple(keys), rows)


def _feasible_fraction(group) -> float:
    return float(np.mean([r["feasible"] for r in group]))


def summarise_min_bandwidth(records) -> Table:
    def summary(group):
        m, se = _mean_stderr(r["min_bandwidth_hz"] for r in group)
        return {"mean_min_bandwidth_hz": m, "stderr_hz": se,
                "feasible_fraction": _feasible_fraction(group), "n_trials": len(group)}
    return _table(records, ("n_antennas", "band", "split"), summary)


def summarise_maxmin(records) -> Table:
    def summary(group):
        m, se = _mean_stderr(r["t_star_db"] for r in group)
        act, _ = _mean_stderr(r["active_count"] for r in group if r["feasible"])
        return {"mean_t_star_db": m, "stderr_db": se, "mean_active_uavs": act,
                "feasible_fraction": _feasible_fraction(group), "n_trials": len(group)}
    return _table(records, ("n_antennas", "band", "split"), summary)


def summarise_powermin(records, flag_below: float = 0.5) -> Table:
    def summary(group):
        feas = [r for r in group if r["feasible"]]
        m, se = _mean_stderr(r["total_power"] for r in feas)
        out = {"mean_total_power_w": m, "stderr_w": se}
        for term in BREAKDOWN_TERMS:
            out[f"mean_{term}_w"] = _mean_stderr(r["breakdown"][term] for r in feas)[0]
        ff = _feasible_fraction(group)
        out.update(mean_active_uavs=_mean_stderr(r["active_count"] for r in feas)[0],
                   feasible_fraction=ff, low_feasibility=int(ff < flag_below),
                   n_trials=len(group))
        return out
    return _table(records, ("gamma_db", "band", "split"), summary)


def summarise_fair_power(records) -> Table:
    def summary(group):
        feas = [r for r in group if r["feasible"]]
        before = _mean_stderr(r["power_of_maxmin"] for r in feas)[0]
        after = _mean_stderr(r["power_after_minimization"] for r in feas)[0]
        return {"mean_t_star_db": _mean_stderr(r["t_star_db"] for r in feas)[0],
                "mean_power_of_maxmin_w": before, "mean_power_after_minimization_w": after,
                "mean_active_maxmin": _mean_stderr(r["active_maxmin"] for r in feas)[0],
                "mean_active_after": _mean_stderr(r["active_count"] for r in feas)[0],
                "feasible_fraction": _feasible_fraction(group), "n_trials": len(group)}
    return _table(records, ("band", "split"), summary)


def fair_power_instances(records) -> Table:
    cols = ("band", "split", "seed", "t_star_db", "power_of_maxmin_w",
            "power_after_minimization_w", "min_sinr_after_db", "feasible")
    rows = []
    for r in sorted(records, key=lambda r: (BANDS.index(r["band"]), _split_order(r["split"]),
                                            r["seed"])):
        rows.append((r["band"], r["split"], r["seed"], r.get("t_star_db"),
                     r.get("power_of_maxmin"), r.get("power_after_minimization"),
                     r.get("min_sinr_after_db"), int(r["feasible"])))
    return Table(cols, rows)


def summarise_service_time(records, battery) -> Table:
    """Mean per-UAV power, minutes and the gain over Option 7.2 per (band, split)."""
    groups = _group(records, ("band", "split"))
    cols = ("band", "split", "mean_per_uav_power_w", "service_time_min",
            "gain_vs_option72_pct", "feasible_fraction", "n_trials")
    minutes = {}
    for key, group in groups.items():
        p = _mean_stderr(r["per_uav_power_w"] for r in group if r["feasible"])[0]
        minutes[key] = (p, service_time(p, battery) if math.isfinite(p) else math.nan)
    rows = []
    for key in sorted(groups, key=lambda k: _sort_key(("band", "split"), k)):
        band = key[0]
        p, t = minutes[key]
        ref = minutes.get((band, SplitOption.OPTION72.value), (math.nan, math.nan))[1]
        gain = 100.0 * (t / ref - 1.0) if math.isfinite(ref) else math.nan
        rows.append((*key, p, t, gain, _feasible_fraction(groups[key]), len(groups[key])))
    return Table(cols, rows)


SUMMARIES = {
    "min-bandwidth": summarise_min_bandwidth,
    "maxmin": summarise_maxmin,
    "fair-power": summarise_fair_power,
}


def infeasible_everywhere(records) -> bool:
    return bool(records) and not any(r["feasible"] for r in records)
