import csv
import json

import pytest

from mixed_sde_lab import cli

SMALL = {
    "simulate": "N = 64\n",
    "converge": "[paths]\nN = 512\n[sde]\nmodel = \"trig1d\"\nn_list = [8, 16, 32, 64]\npaths = 20\n",
    "bound-check": "N = 256\npaths = 20\n",
    "malliavin-check": "N = 128\nn = 16\nn_list = [8, 16]\npaths = 3\nbatches = 1\n",
    "moments": "N = 64\npaths = 400\nalpha = 0.9\n",
    "tail-check": "N = 64\npaths = 400\n",
    "isometry-check": "N = 32\npaths = 4000\npairs = 3\n",
}


def write_cfg(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_listing(capsys):
    assert cli.main([]) == 0
    out = capsys.readouterr().out
    for name in cli.SCENARIOS:
        assert name in out
    text = cli.list_scenarios()
    bound = text[text.index("bound-check"):text.index("malliavin-check")]
    tail = text[text.index("tail-check"):text.index("isometry-check")]
    assert "Lemma 2" in bound and "Lemma 1" in tail
    assert cli.main(["list"]) == 0


def test_simulate_zero_model(tmp_path):
    out = tmp_path / "o"
    cfg = write_cfg(tmp_path, 'model = "zero"\nx0 = [1.25]\nN = 16\n')
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "results.csv")))
    assert rows[0] == ["t", "x1"] and len(rows) == 18
    assert {r[1] for r in rows[1:]} == {"1.25"}


def test_converge_table(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["converge", "--config", write_cfg(tmp_path, SMALL["converge"]), "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "results.csv")))[1:]
    med = [float(r[1]) for r in rows]
    assert len(rows) == 4 and all(b < a for a, b in zip(med, med[1:]))


def test_alpha_threshold(tmp_path, capsys):
    out = tmp_path / "o"
    cfg = write_cfg(tmp_path, "alpha = 1.2\nH = 0.75\n")
    code = cli.main(["moments", "--config", cfg, "--out", str(out)])
    assert code != 0
    rec = json.loads(capsys.readouterr().err)
    assert rec["parameter"] == "alpha" and rec["threshold"] == pytest.approx(1.2)
    assert "4H/(2H+1)" in rec["error"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "invalid-config" and man["files"] == ["error.json"]
    assert not (out / "results.csv").exists()


@pytest.mark.parametrize("text,param", [
    ("bogus = 1\n", "bogus"),
    ("[paths]\nbogus = 1\n", "bogus"),
    ("[nowhere]\nN = 3\n", "nowhere"),
    ("N = 4\n[paths]\nN = 8\n", "N"),
])
def test_unknown_or_duplicate_keys(tmp_path, capsys, text, param):
    assert cli.main(["simulate", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path / "o")]) == 2
    assert json.loads(capsys.readouterr().err)["parameter"] == param


@pytest.mark.parametrize("scenario,key,value", [
    ("bound-check", "theta", "0.2"),
    ("converge", "n_list", "[2048]"),
    ("tail-check", "kappa", "0.5"),
    ("simulate", "H", "0.5"),
    ("moments", "nu", "0.8"),
])
def test_range_validation(tmp_path, scenario, key, value):
    assert cli.main([scenario, "--set", f"{key}={value}", "--out", str(tmp_path / "o")]) == 2


def test_flags_override_file(tmp_path):
    cfg = cli.build_config("simulate", write_cfg(tmp_path, "seed = 3\nN = 10\n"), seed=9, overrides=["N=20"])
    assert cfg.seed == 9 and cfg.N == 20


def test_env_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
    assert cli.main(["simulate", "--set", "N=8"]) == 0
    assert (tmp_path / "envout" / "manifest.json").exists()


@pytest.mark.parametrize("scenario", list(SMALL))
def test_reproducible_and_manifest(tmp_path, scenario):
    cfg = write_cfg(tmp_path, SMALL[scenario])
    bodies = []
    for run in ("a", "b"):
        out = tmp_path / run
        code = cli.main([scenario, "--config", cfg, "--seed", "5", "--out", str(out)])
        assert code in (0, 1)
        man = json.loads((out / "manifest.json").read_text())
        assert man["status"] == "complete" and man["seed"] == 5
        assert man["passed"] == (code == 0)
        assert {"numpy", "scipy", "python"} <= set(man["versions"])
        assert man["wall_time_s"] >= 0 and man["config"]["scenario"] == scenario
        listed = set(man["files"]) | {"manifest.json"}
        assert {p.name for p in out.iterdir()} == listed
        bodies.append((out / "results.csv").read_bytes())
        rep = json.loads((out / "report.json").read_text())
        assert rep["passed"] == (code == 0)
    assert bodies[0] == bodies[1]


def test_small_scenarios_pass(tmp_path):
    for scenario in ("simulate", "converge", "bound-check", "tail-check", "isometry-check"):
        cfg = write_cfg(tmp_path, SMALL[scenario], name=f"{scenario}.toml")
        assert cli.main([scenario, "--config", cfg, "--out", str(tmp_path / scenario)]) == 0, scenario
