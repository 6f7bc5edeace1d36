import csv
import json
import time

import pytest
import requests

from cgmi.cli import build_parser, main, resolve_config
from cgmi.scenario import Scenario
from cgmi.server import OracleServer

FAST = ["--restarts", "2", "--generations", "10", "--pop", "5", "--pool", "10", "--select", "3",
        "--transforms", "7", "--classes", "0,1"]


@pytest.fixture(scope="module")
def scen_path(tmp_path_factory):
    out = tmp_path_factory.mktemp("scen")
    assert main(["scenario", "--seed", "5", "--classes", "4", "--style-samples", "1000",
                 "--out", str(out)]) == 0
    return out / "scenario.json"


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_scenario_files_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["scenario", "--seed", "1", "--classes", "2", "--dims", "4,4,6",
                     "--style-samples", "300", "--out", str(tmp_path / name)]) == 0
    for f in ("scenario.json", "prior.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    back = Scenario.load(tmp_path / "a" / "scenario.json")
    assert back.num_classes == 2 and back.training_sets.shape == (2, 50, 6)
    with OracleServer(back.target) as server:
        assert requests.get(server.url + "/v1/meta").json() == {"classes": 2, "input_dim": 6}


def test_bad_dims_is_an_error(tmp_path, capsys):
    assert main(["scenario", "--dims", "4,4", "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_attack_defaults_mirror_protocol():
    args = build_parser().parse_args(["attack", "s.json", "--out", "o"])
    cfg = resolve_config(args)
    assert (cfg.restarts, cfg.generations, cfg.pop, cfg.pool, cfg.select, cfg.transforms) == (8, 300, 25, 200, 50, 100)
    assert cfg.loss == "poincare" and cfg.mode == "mapped" and cfg.jobs == 8


def test_unknown_loss_is_usage_error(scen_path, tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["attack", str(scen_path), "--loss", "hinge", "--out", str(tmp_path)])
    assert info.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_config_precedence(scen_path, tmp_path):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"restarts": 3, "generations": 4, "loss": "max_margin"}))
    args = build_parser().parse_args(["attack", str(scen_path), "--config", str(conf), "--restarts", "1",
                                      "--out", "x"])
    cfg = resolve_config(args)
    assert (cfg.restarts, cfg.generations, cfg.loss, cfg.pop) == (1, 4, "max_margin", 25)
    conf.write_text(json.dumps({"restart": 3}))
    assert main(["attack", str(scen_path), "--config", str(conf), "--out", str(tmp_path / "o")]) == 1


def test_smoke_run_is_fast(scen_path, tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "smoke"
    assert main(["attack", str(scen_path), "--generations", "1", "--restarts", "1", "--out", str(out)]) == 0
    assert time.perf_counter() - t0 < 10
    man = _manifest(out)
    names = {p.name for p in out.iterdir()}
    assert {"manifest.json", "summary.csv", "pool-0.json", "selection-0.json", "trace-0-0.jsonl"} <= names
    assert len(man["classes"]) == 4 and all(c["reconciled"] for c in man["classes"])
    with open(out / "summary.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4


def test_manifest_reproducible_and_ledger(scen_path, tmp_path):
    docs = []
    for name in ("r1", "r2"):
        assert main(["attack", str(scen_path), *FAST, "--out", str(tmp_path / name)]) == 0
        doc = _manifest(tmp_path / name)
        doc.pop("wall_clock")
        docs.append(doc)
    assert docs[0] == docs[1]
    for c in docs[0]["classes"]:
        assert c["ledger"]["attack"] == 2 * 10 * 5
        assert c["ledger"]["selection"] == 10 * 7
        assert c["budget_used"] == 170 and c["reconciled"]
    for name in ("pool-0.json", "trace-1-1.jsonl"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_budget_exhaustion_exits_partial(scen_path, tmp_path):
    out = tmp_path / "b"
    assert main(["attack", str(scen_path), *FAST, "--budget", "60", "--out", str(out)]) == 2
    man = _manifest(out)
    assert man["partial"]
    for c in man["classes"]:
        assert c["budget_used"] <= 60 and c["reconciled"] and c["partial"]


def test_loopback_attack_matches_in_process(scen_path, tmp_path):
    assert main(["attack", str(scen_path), *FAST, "--out", str(tmp_path / "local")]) == 0
    with OracleServer(Scenario.load(scen_path).target) as server:
        assert main(["attack", str(scen_path), *FAST, "--endpoint", server.url,
                     "--out", str(tmp_path / "remote")]) == 0
    local, remote = _manifest(tmp_path / "local"), _manifest(tmp_path / "remote")
    assert remote["oracle"]["kind"] == "remote"
    for a, b in zip(local["classes"], remote["classes"]):
        for key, value in a["metrics"].items():
            if isinstance(value, float):
                assert b["metrics"][key] == pytest.approx(value, abs=1e-6)
        assert a["ledger"] == b["ledger"]


def test_endpoint_shape_mismatch(tmp_path, scen_path):
    other = Scenario.load(scen_path)
    with OracleServer(type(other.target)(other.target.centroids[:, :3])) as server:
        assert main(["attack", str(scen_path), *FAST, "--endpoint", server.url, "--out", str(tmp_path)]) == 1


def test_ablate_grid_rows(scen_path, tmp_path):
    out = tmp_path / "abl"
    assert main(["ablate", str(scen_path), *FAST, "--grid", "poincare,max_margin,cross_entropy:mapped",
                 "--out", str(out)]) == 0
    with open(out / "ablation.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["arm"] for r in rows] == ["poincare/mapped", "max_margin/mapped", "cross_entropy/mapped"]
    assert all(r["error"] == "" for r in rows)


def test_ablate_default_arms_and_no_selection(scen_path, tmp_path):
    out = tmp_path / "abl"
    assert main(["ablate", str(scen_path), *FAST, "--out", str(out)]) == 0
    with open(out / "ablation.csv") as fh:
        rows = {r["arm"]: r for r in csv.DictReader(fh)}
    assert len(rows) == 5
    assert rows["poincare/mapped/no-selection"]["selection_queries"] == "0"
    assert rows["poincare/mapped"]["selection_queries"] == str(2 * 10 * 7)
    assert rows["poincare/direct_style"]["mode"] == "direct_style"


def test_ablate_bad_grid(scen_path, tmp_path):
    assert main(["ablate", str(scen_path), "--grid", "poincare", "--out", str(tmp_path)]) == 1
    assert main(["ablate", str(scen_path), "--grid", "poincare:pixels", "--out", str(tmp_path)]) == 1


def test_server_rejects_malformed_body(scen_path):
    with OracleServer(Scenario.load(scen_path).target) as server:
        r = requests.post(server.url + "/v1/predict", data=b'{"inputs": [[true]]}')
        assert r.status_code == 400
        r = requests.post(server.url + "/v1/predict", data=b"{\"inputs\": [[" + b", ".join([b"NaN"] * 16) + b"]]}")
        assert r.status_code == 400
