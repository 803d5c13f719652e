import json

import pytest

from noisy_pbc.cli import build_parser, main, resolve


def test_help_lists_builtin_maps(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for name in ("ricker", "quail", "exglob", "exnotglob", "exswitch"):
        assert name in out


def test_analyze_json(capsys):
    assert main(["analyze", "--map", "ricker r=3.0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["constants"]["alpha0"] == pytest.approx(1 / 3)


def test_simulate_writes_csv_and_sidecar(tmp_path, capsys):
    out = tmp_path / "t.csv"
    argv = ["simulate", "--alpha", "0.37", "--ell", "0.2", "--steps", "3000", "--seed", "4",
            "--out", str(out)]
    assert main(argv) == 0
    first = out.read_bytes()
    meta = json.loads((tmp_path / "t.csv.json").read_text())
    assert meta["seed"] == 4 and meta["result"]["verdict"] == "converged"
    assert main(argv) == 0
    assert out.read_bytes() == first


def test_seed_is_drawn_and_reported(capsys):
    assert main(["simulate", "--alpha", "0.45", "--steps", "100"]) == 0
    assert "seed:" in capsys.readouterr().err


def test_infeasible_exit_code(capsys):
    assert main(["simulate", "--alpha", "0.1", "--ell", "0.2", "--seed", "1"]) == 2
    assert "infeasible" in capsys.readouterr().err
    assert main(["analyze", "--map", "ricker r=1.5"]) in (1, 2)


def test_bad_map_exit_code(capsys):
    assert main(["analyze", "--map", "nosuchmap"]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["simulate", "--steps", "10"]) == 1  # no alpha


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.3, "ell": 0.1, "steps": 50}))
    args = build_parser().parse_args(["simulate", "--config", str(cfg), "--ell", "0.05"])
    r = resolve(args)
    assert r["alpha"] == 0.3 and r["ell"] == 0.05 and r["steps"] == 50
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nope": 1}))
    assert main(["simulate", "--config", str(bad)]) == 1


def test_noise_json_and_map_json(tmp_path, capsys):
    noise = json.dumps({"kind": "discrete", "atoms": [[0.5, 0.25], [1.0, 0.25]]})
    assert main(["simulate", "--alpha", "0.4", "--ell", "0.1", "--noise", noise,
                 "--steps", "200", "--seed", "1"]) == 0
    doc = {"tail": 14.0, "segments": [
        {"lo": 0, "hi": 28, "slope": 51 / 28, "intercept": 0},
        {"lo": 28, "hi": 32, "slope": -4.75, "intercept": 184},
        {"lo": 32, "hi": 50, "slope": -1, "intercept": 64}]}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    assert main(["analyze", "--map-json", str(path)]) == 0


def test_bifurcate_region_envelope(tmp_path, capsys):
    b = tmp_path / "b.csv"
    assert main(["bifurcate", "--ell", "0.2", "--alpha-range", "0.3", "0.4", "0.05",
                 "--transient", "200", "--samples", "5", "--seed", "2", "--workers", "1",
                 "--out", str(b)]) == 0
    assert b.read_text().startswith("alpha,sample\n")
    assert (tmp_path / "b.csv.rates.csv").exists()
    r = tmp_path / "r.csv"
    assert main(["region", "--alpha-range", "0.3", "0.5", "0.1", "--ell-range", "0", "0.2", "0.1",
                 "--paths", "5", "--steps", "500", "--seed", "2", "--workers", "1",
                 "--out", str(r)]) == 0
    assert json.loads((tmp_path / "r.csv.json").read_text())["result"]["disagreements"] == []
    e = tmp_path / "e.csv"
    assert main(["envelope", "--map", "quail", "--out", str(e)]) == 0
    assert len(e.read_text().splitlines()) == 1001
    assert main(["envelope", "--map", "exglob"]) == 2


def test_verify_filter(capsys):
    assert main(["verify", "--filter", "V(3,2"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "1/1 checks passed" in out
