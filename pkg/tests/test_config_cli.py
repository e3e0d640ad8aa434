import csv
import json

import numpy as np
import pytest
import yaml

from uavcf import cli
from uavcf.config import BAND_DEFAULTS, ConfigError, ExperimentConfig, config_from_dict, load_config


def _write_cfg(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_defaults_and_band_values():
    cfg = ExperimentConfig()
    assert cfg.topology.n_uavs == 8 and cfg.topology.n_ues == 4
    for band, d in BAND_DEFAULTS.items():
        assert cfg.channel_config(band).fronthaul_array.n_antennas == d["n_antennas"]
        assert cfg.fronthaul_config(band).bandwidth_hz == d["bandwidth_hz"]
    assert cfg.channel_config("mmwave").fronthaul_carrier_hz == 28e9
    assert cfg.channel_config("sub6", 256).fronthaul_array.n_antennas == 256


def test_yaml_round_trip(tmp_path):
    path = _write_cfg(tmp_path, {"trials": 3, "seed": 9, "topology": {"n_ues": 2},
                                 "fronthaul": {"bandwidth_hz": 2e8},
                                 "sweep": {"gamma_db": [0, 5], "bands": ["sub6"]}})
    cfg = load_config(path)
    assert cfg.trials == 3 and cfg.topology.n_ues == 2 and cfg.topology.n_uavs == 8
    assert cfg.sweep.gamma_db == (0, 5)
    assert cfg.fronthaul_config("mmwave").bandwidth_hz == 2e8
    assert config_from_dict(cfg.to_dict()).config_hash() == cfg.config_hash()


@pytest.mark.parametrize("data", [
    {"trails": 3},
    {"access": {"n_antenas": 4}},
    {"sweep": {"bands": ["thz"]}},
    {"sweep": {"splits": ["option6"]}},
    {"trials": 0},
    {"topology": {"n_uavs": -1}},
    {"access": "four"},
])
def test_bad_configs(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_hash_ignores_output_location():
    a = ExperimentConfig()
    assert a.config_hash() == a.replace(out_dir="elsewhere", threads=3).config_hash()
    assert a.config_hash() != a.replace(seed=1).config_hash()


def test_rng_streams():
    cfg = ExperimentConfig(seed=5)
    x = cfg.rng(2, "access").random(4)
    assert np.array_equal(x, cfg.rng(2, "access").random(4))
    assert not np.array_equal(x, cfg.rng(2, "fronthaul").random(4))
    assert not np.array_equal(x, cfg.rng(3, "access").random(4))
    assert cfg.instance_seed(2) == ExperimentConfig(seed=6).instance_seed(1)


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_min_bandwidth_outputs_and_reruns(tmp_path):
    args = ["min-bandwidth", "--trials", "2", "--seed", "4"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == cli.EXIT_OK
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == cli.EXIT_OK
    rows = _read_csv(tmp_path / "a" / "min_bandwidth.csv")
    assert len(rows) == 16  # 4 antenna counts x 2 bands x 2 splits
    assert {r["seed"] for r in rows} == {"4"}
    assert len({r["config_hash"] for r in rows}) == 1
    for name in ("min_bandwidth.csv", "min_bandwidth_records.jsonl", "min_bandwidth.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "min_bandwidth_manifest.json").read_text())
    assert manifest["seeds"] == [4, 5]
    assert "min_bandwidth.csv" in manifest["files"]
    records = [json.loads(line) for line in
               (tmp_path / "a" / "min_bandwidth_records.jsonl").read_text().splitlines()]
    assert len(records) == 32


def test_threads_do_not_change_results(tmp_path):
    base = ["min-bandwidth", "--trials", "2", "--no-figures"]
    cli.main(base + ["--out", str(tmp_path / "one")])
    cli.main(base + ["--out", str(tmp_path / "two"), "--threads", "2"])
    name = "min_bandwidth.csv"
    assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_bad_config_exit_code(tmp_path, capsys):
    path = _write_cfg(tmp_path, {"sweep": {"gama_db": [0]}})
    assert cli.main(["powermin", "--config", str(path)]) == cli.EXIT_CONFIG
    assert "gama_db" in capsys.readouterr().err
    assert cli.main(["powermin", "--config", str(tmp_path / "missing.yaml")]) == cli.EXIT_CONFIG


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["topology", "--out", str(blocker / "sub")]) == cli.EXIT_CONFIG


def test_infeasible_everywhere_exit_code(tmp_path):
    path = _write_cfg(tmp_path, {
        "topology": {"n_uavs": 2, "n_ues": 1},
        "fronthaul": {"p_max_w": 1e-15},
        "access": {"stat_samples": 200},
        "sweep": {"gamma_db": [0.0], "bands": ["sub6"], "splits": ["option8"]},
    })
    code = cli.main(["powermin", "--config", str(path), "--trials", "1", "--no-figures",
                     "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_INFEASIBLE
    rows = _read_csv(tmp_path / "o" / "powermin.csv")
    assert rows[0]["feasible_fraction"] == "0.0"


def test_small_powermin_and_service_time(tmp_path, capsys):
    path = _write_cfg(tmp_path, {
        "topology": {"n_uavs": 3, "n_ues": 2},
        "access": {"stat_samples": 300},
        "sweep": {"gamma_db": [-5.0, 0.0], "bands": ["sub6"]},
    })
    out = tmp_path / "o"
    base = ["--config", str(path), "--trials", "2", "--out", str(out)]
    assert cli.main(["powermin"] + base) == cli.EXIT_OK
    rows = _read_csv(out / "powermin.csv")
    assert len(rows) == 4
    terms = {r["term"] for r in _read_csv(out / "powermin_breakdown.csv")}
    assert terms == {"processing", "fronthaul", "amplifier_static", "transmit", "total"}
    assert (out / "powermin.png").exists()
    assert cli.main(["service-time"] + base) == cli.EXIT_OK
    printed = capsys.readouterr().out
    assert "option8" in printed and "min" in printed
    st = {r["split"]: float(r["service_time_min"]) for r in _read_csv(out / "service_time.csv")}
    assert st["option8"] > st["option72"]


def test_topology_command(tmp_path):
    assert cli.main(["topology", "--seed", "3", "--out", str(tmp_path)]) == cli.EXIT_OK
    topo = json.loads((tmp_path / "topology_seed3.json").read_text())
    assert len(topo["uavs"]) == 8 and len(topo["ues"]) == 4
    rows = _read_csv(tmp_path / "topology_seed3_links.csv")
    assert len(rows) == 8 + 8 * 4


def test_parser_rejects_unknown_command():
    with pytest.raises(SystemExit):
        cli.main(["figures"])
