import csv
import json

import pytest

from dfcompress.campaign import CampaignConfig, ConfigError, parse_dataflows, resolve_seed
from dfcompress.cli import main
from dfcompress.cost import ALL_DATAFLOWS, Dataflow


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


# -- estimate -------------------------------------------------------------------

def test_estimate_all_dataflows(tmp_path, capsys):
    assert run("estimate", "--network", "lenet5", "--dataflow", "all", "--out", tmp_path) == 0
    totals = []
    for df in ALL_DATAFLOWS:
        rows = read_csv(tmp_path / f"estimate_{df.value}.csv")
        totals.append(float(rows[-1]["total"]))
        assert (tmp_path / f"breakdown_{df.value}.svg").is_file()
    assert all(t > 0 for t in totals) and len(set(totals)) > 1
    assert "cico" in capsys.readouterr().out


def test_estimate_pe_energy_scales_with_bits(tmp_path):
    assert run("estimate", "--dataflow", "xy", "--q", 8, "--out", tmp_path / "a") == 0
    assert run("estimate", "--dataflow", "xy", "--q", 4, "--out", tmp_path / "b") == 0
    a = read_csv(tmp_path / "a" / "estimate_xy.csv")
    b = read_csv(tmp_path / "b" / "estimate_xy.csv")
    for ra, rb in zip(a, b):
        assert float(ra["pe_energy"]) == 2 * float(rb["pe_energy"])


def test_estimate_per_layer_values(tmp_path):
    assert run("estimate", "--dataflow", "fxfy", "--q", "8,4,2,1", "--p", "1,0.5,0.2,0.1",
               "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "estimate_fxfy.csv")
    assert [r["q_bits"] for r in rows[:4]] == ["8", "4", "2", "1"]


@pytest.mark.parametrize("argv", [
    ["estimate", "--dataflow", "diagonal"],
    ["estimate", "--q", "8,8"],
    ["estimate", "--q", "3.5"],
    ["estimate", "--bogus"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_2(argv, tmp_path):
    assert run(*argv, *(["--out", tmp_path] if argv and argv[0] == "estimate" else [])) == 2


def test_bad_network_file_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", "input_shape": [1, 4, 4], "layers": [{"kind": "conv", '
                   '"c_out": 2, "f": [2, 2]}]}')
    assert run("estimate", "--network", bad, "--out", tmp_path) == 2
    assert run("estimate", "--network", tmp_path / "missing.json", "--out", tmp_path) == 1


def test_estimate_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run("estimate", "--dataflow", "all", "--out", tmp_path / d) == 0
    for df in ALL_DATAFLOWS:
        name = f"estimate_{df.value}.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_estimate_with_calibration(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"network": "vgg_small", "calibrate_target": 0.72}))
    assert run("estimate", "--config", cfg, "--dataflow", "xy", "--out", tmp_path) == 0
    total = read_csv(tmp_path / "estimate_xy.csv")[-1]
    moved = sum(float(total[k]) for k in ("input_move", "weight_move", "output_move"))
    assert abs(moved / float(total["total"]) - 0.72) < 1e-6


# -- oracle-validate ---------------------------------------------------------------

def test_oracle_validate_lenet(capsys, tmp_path):
    assert run("oracle-validate", "--network", "lenet5", "--dataflow", "all",
               "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "oracle.csv")
    assert len(rows) == 4 * 4 * 5 and all(r["status"] == "PASS" for r in rows)


def test_oracle_validate_perturbed(capsys):
    assert run("oracle-validate", "--network", "tiny", "--dataflow", "cico",
               "--perturb", "output_reads") == 1
    err = capsys.readouterr().err
    assert "FAIL" in err and "output_reads" in err


def test_oracle_validate_degenerate_layer(tmp_path, capsys):
    net = tmp_path / "one.json"
    net.write_text('{"name": "one", "input_shape": [1, 1, 1], '
                   '"layers": [{"kind": "conv", "c_out": 1, "f": [1, 1]}]}')
    assert run("oracle-validate", "--network", net, "--dataflow", "all", "--out", tmp_path) == 0
    for r in read_csv(tmp_path / "oracle.csv"):
        assert int(r["oracle"]) in (0, 1) and r["status"] == "PASS"


def test_oracle_validate_skips_large_layers(caplog):
    assert run("oracle-validate", "--network", "lenet5", "--dataflow", "xy",
               "--limit", 50000) == 0
    assert "skipped" in caplog.text


# -- compress / compare ---------------------------------------------------------------

def surrogate_args(out, *extra):
    return ["compress", "--network", "lenet5", "--surrogate", "--dataflow", "cico",
            "--episodes", 5, "--seed", 3, "--out", out, *extra]


def test_surrogate_compress_emits_artifacts(tmp_path, capsys):
    assert run(*surrogate_args(tmp_path)) == 0
    for name in ("history.csv", "summary.json", "campaign.svg", "campaign.state"):
        assert (tmp_path / name).is_file()
    rows = read_csv(tmp_path / "history.csv")
    assert list(rows[0]) == ["episode", "step", "layer", "Q", "P", "alpha", "beta", "reward"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["feasible"] and summary["best"]["alpha"] >= summary["accuracy_floor"]
    assert len(summary["returns"]) == 5
    assert "best:" in capsys.readouterr().out


def test_compress_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run(*surrogate_args(tmp_path / d)) == 0
    assert (tmp_path / "a" / "history.csv").read_bytes() == \
        (tmp_path / "b" / "history.csv").read_bytes()


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("EDC_SEED", "11")
    args = ["compress", "--surrogate", "--dataflow", "xy", "--episodes", 2]
    assert run(*args, "--out", tmp_path / "env") == 0
    assert run(*args, "--seed", 11, "--out", tmp_path / "flag") == 0
    assert run(*args, "--seed", 12, "--out", tmp_path / "other") == 0
    env = (tmp_path / "env" / "history.csv").read_bytes()
    assert env == (tmp_path / "flag" / "history.csv").read_bytes()
    assert env != (tmp_path / "other" / "history.csv").read_bytes()


def test_interrupted_campaign_resumes_identically(tmp_path):
    assert run(*surrogate_args(tmp_path / "full")) == 0
    assert run(*surrogate_args(tmp_path / "part"), "--stop-after", 2) == 0
    assert not (tmp_path / "part" / "summary.json").exists()
    assert run(*surrogate_args(tmp_path / "part"), "--resume") == 0
    for name in ("summary.json", "history.csv"):
        assert (tmp_path / "full" / name).read_bytes() == (tmp_path / "part" / name).read_bytes()


def test_infeasible_campaign_exit_code(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"env": {"accuracy_floor": 0.999}}))
    assert run(*surrogate_args(tmp_path / "out"), "--config", cfg) == 3
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["feasible"] is False and summary["best"] is None


def test_trainer_compress_on_synthetic(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"network": "tiny", "dataset": "synthetic", "train_size": 128,
                               "test_size": 64, "baseline_epochs": 2,
                               "train": {"lr": 0.05, "batch_size": 32},
                               "baseline_train": {"lr": 0.05, "batch_size": 32},
                               "baseline_anneal_epochs": 0,
                               "env": {"max_steps": 3}, "optimizer": "random"}))
    assert run("compress", "--config", cfg, "--episodes", 2, "--out", tmp_path / "o") == 0
    out = tmp_path / "o"
    for name in ("baseline.dfck", "best_model.dfck", "history.csv", "summary.json"):
        assert (out / name).is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mode"] == "trainer"


def test_compress_rejects_several_dataflows(tmp_path):
    assert run("compress", "--surrogate", "--dataflow", "all", "--out", tmp_path) == 2


def test_compare_with_ablation(tmp_path, capsys):
    code = run("compare", "--surrogate", "--dataflow", "all", "--episodes", 2, "--ablate",
               "quant", "--out", tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "compare.csv")
    assert [r["dataflow"] for r in rows] == [d.value for d in ALL_DATAFLOWS]
    assert {"rank_before", "rank_after", "quant_only_energy", "prune_only_energy"} <= set(rows[0])
    assert sorted(int(r["rank_before"]) for r in rows) == [1, 2, 3, 4]
    for r in rows:
        base = float(r["baseline_energy"])
        assert float(r["quant_only_energy"]) < base and float(r["prune_only_energy"]) < base


def test_compare_rankings_invariant_to_scaled_constants(tmp_path):
    ranks = []
    for i, scale in enumerate((1.0, 10.0)):
        cfg = tmp_path / f"c{i}.json"
        cfg.write_text(json.dumps({"constants": {"e_adder": scale, "e_bit": 2 * scale,
                                                 "lut_area_unit": scale,
                                                 "ram_area_per_bit": scale}}))
        out = tmp_path / f"o{i}"
        assert run("compare", "--surrogate", "--dataflow", "all", "--episodes", 2,
                   "--config", cfg, "--out", out) == 0
        rows = read_csv(out / "compare.csv")
        assert "quant_only_energy" not in rows[0]
        ranks.append([(r["rank_before"], r["rank_after"]) for r in rows])
    assert ranks[0] == ranks[1]


# -- config ------------------------------------------------------------------------------

def test_config_validation(tmp_path):
    with pytest.raises(ConfigError, match="unknown config keys"):
        CampaignConfig.from_dict({"episodes": 3, "color": "red"})
    with pytest.raises(ConfigError):
        CampaignConfig.from_dict({"dataset": "cifar"})
    with pytest.raises(ConfigError, match="exactly one"):
        CampaignConfig.from_dict({"dataset": "synthetic", "mnist": {"train_images": "x"}})
    with pytest.raises(ConfigError, match="not found"):
        CampaignConfig.from_dict({"mnist": {k: str(tmp_path / k) for k in
                                            ("train_images", "train_labels", "test_images",
                                             "test_labels")}})
    with pytest.raises(ConfigError):
        CampaignConfig.from_dict({"env": {"gamma": 2}})
    with pytest.raises(ConfigError):
        CampaignConfig.from_dict({"sac": {"widths": 3}})
    cfg = CampaignConfig.from_dict({"dataflow": "all", "episodes": 4})
    assert cfg.dataflows == ALL_DATAFLOWS


def test_bad_config_file_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert run("compress", "--surrogate", "--config", cfg, "--out", tmp_path) == 2
    assert run("compress", "--surrogate", "--config", tmp_path / "nope.json") == 2


def test_parse_dataflows_and_seed(monkeypatch):
    assert parse_dataflows("xy,cico,xy") == (Dataflow.XY, Dataflow.CICO)
    with pytest.raises(ConfigError):
        parse_dataflows("")
    monkeypatch.delenv("EDC_SEED", raising=False)
    assert resolve_seed(None, 4) == 4
    monkeypatch.setenv("EDC_SEED", "9")
    assert resolve_seed(None, 4) == 9 and resolve_seed(2, 4) == 2
    monkeypatch.setenv("EDC_SEED", "x")
    with pytest.raises(ConfigError):
        resolve_seed(None, 4)
