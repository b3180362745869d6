import json
from pathlib import Path

import numpy as np
import pytest

from markovlr.cli import main
from markovlr.config import ConfigError, apply_overrides, build_config, config_hash, load_config, parse_value
from markovlr.experiments import (ScaleError, initial_state, run_experiment, run_lr, run_quasilocal, run_sweep,
                                  run_trotter, strictly_decreasing, to_csv)
from markovlr.presets import dissipative_ising

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def cfg(**over):
    raw = {"version": 1, "seed": 0, "model": {"size": [4]}, "observable": {"sites": [2]},
           "probe": {"sites": [0]}, "times": {"final": 0.4, "durations": [0.0, 0.2, 0.4]}}
    return build_config(apply_overrides(raw, list(over.items())))


def test_shipped_configs_parse():
    for path in CONFIGS.glob("*.toml"):
        assert load_config(path).version == 1


@pytest.mark.parametrize("raw, msg", [
    ({"seed": 0}, "version"),
    ({"version": 2, "seed": 0}, "version"),
    ({"version": 1}, "seed"),
    ({"version": 1, "seed": 0, "modle": {}}, "unknown"),
    ({"version": 1, "seed": 0, "model": {"sizes": [3]}}, "model.sizes"),
    ({"version": 1, "seed": 0, "solver": {"tol": "small"}}, "solver.tol"),
    ({"version": 1, "seed": 0, "trotter": {"averaged": 1}}, "trotter.averaged"),
    ({"version": 1, "seed": 0, "trotter": {"ordering": "zigzag"}}, "ordering"),
    ({"version": 1, "seed": 0, "observable": {"sites": [1, 2], "label": "Z"}}, "label"),
])
def test_config_errors(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        build_config(raw)


def test_overrides_and_hash():
    assert parse_value("0.5") == 0.5 and parse_value("[1, 2]") == [1, 2] and parse_value("abc") == "abc"
    raw = apply_overrides({"version": 1, "seed": 0}, ["model.params.gamma=0.25", "trotter.averaged=true"])
    c = build_config(raw)
    assert c.model.params == {"gamma": 0.25} and c.trotter.averaged is True
    assert config_hash(c) == config_hash(build_config(raw))
    assert config_hash(c) != config_hash(build_config(apply_overrides(raw, ["seed=1"])))
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])


def test_lr_trivial_rows():
    same = run_lr(cfg(**{"probe.sites": [2], "probe.label": "X", "times.durations": [0.0]}))
    row = same.rows[0]
    assert row["measured"] == pytest.approx(2.0) and row["bound"] >= row["measured"]
    far = run_lr(cfg(**{"times.durations": [0.0]}))
    assert far.rows[0]["measured"] == 0.0
    res = run_lr(cfg())
    assert res.ok and all(r["measured"] <= r["bound"] + 1e-7 for r in res.rows)
    for key in ("a", "Z", "ell_norm", "v", "M", "kappa"):
        assert key in res.rows[0]


def test_quasilocal_trivial_rows():
    res = run_quasilocal(cfg(**{"quasilocal.radii": [1, 4]}))
    for r in res.rows:
        if r["duration"] == 0.0:
            assert r["measured"] == 0.0
        if r["radius"] == 4:
            assert r["measured"] <= 1e-9 and r["status"] == "saturated"
    assert res.ok


def test_quasilocal_precondition_reported():
    res = run_quasilocal(cfg(**{"quasilocal.radii": [0]}))
    assert res.precondition_failures > 0 and not res.ok
    assert {r["status"] for r in res.rows} == {"precondition"}


def test_strictly_decreasing():
    assert strictly_decreasing([1e-3, 1e-5, 0.0, 0.0])
    assert not strictly_decreasing([1e-3, 1e-3])
    assert not strictly_decreasing([1e-3, 0.0, 1e-9])


def test_trotter_commuting_model_exact():
    c = cfg(**{"model.preset": "commuting_zz", "model.params": {"J": 1.0, "gamma": 0.3},
               "trotter.t_total": 0.2, "trotter.dt": [0.1, 0.05]})
    res = run_trotter(c)
    assert res.ok and all(r["observed_sup"] <= 1e-8 for r in res.rows)
    assert set(res.artifacts) == {"circuit_00.tsv", "circuit_01.tsv"}


def test_scale_guard():
    with pytest.raises(ScaleError):
        run_lr(cfg(**{"model.size": [11]}))
    with pytest.raises(ScaleError):
        run_lr(cfg(**{"model.size": [6], "limits.max_qubits": 5}))


def test_initial_states():
    spec = dissipative_ising(2)
    assert np.allclose(initial_state(spec, "excited").matrix, np.diag([1, 0, 0, 0]))
    assert np.allclose(initial_state(spec, "1+").matrix[2:, 2:], 0.5)
    with pytest.raises(ValueError):
        initial_state(spec, "0x")


def test_sweep_order_independent_of_jobs():
    c = cfg(**{"sweep.values": [0.0, 0.5, 1.0], "times.durations": [0.2]})
    raw = {"version": 1, "seed": 0, "model": {"size": [4]}, "observable": {"sites": [2]},
           "probe": {"sites": [0]}, "times": {"final": 0.4, "durations": [0.2]},
           "sweep": {"values": [0.0, 0.5, 1.0]}}
    serial = run_sweep(c, raw, jobs=1)
    parallel = run_sweep(c, raw, jobs=2)
    assert to_csv(serial) == to_csv(parallel)
    assert [r["sweep_index"] for r in serial.rows] == [0, 1, 2]


def test_cli_exit_codes(tmp_path):
    good = ["--out", str(tmp_path / "a"), "--override", "model.size=[4]", "--override", "observable.sites=[2]",
            "--override", "times.durations=[0.1]", "--seed", "3"]
    assert main(["lr"] + good) == 0
    side = json.loads((tmp_path / "a" / "lr.json").read_text())
    assert side["seed"] == 3 and set(side["constants"]) == {"a", "Z_max", "ell_norm", "v", "M", "kappa"}
    assert "solver_error_budget" in side and len(side["config_hash"]) == 64
    assert main(["lr", "--override", "bogus=1", "--out", str(tmp_path / "b")]) == 2
    assert main(["lr", "--override", "model.size=[12]", "--out", str(tmp_path / "c")]) == 1
    assert main(["quasilocal", "--out", str(tmp_path / "d"), "--override", "model.size=[4]",
                 "--override", "observable.sites=[2]", "--override", "quasilocal.radii=[0]"]) == 1
    with pytest.raises(SystemExit):
        main(["bogus"])


def test_kind_mismatch(tmp_path):
    c = load_config(CONFIGS / "lr_chain8.toml")
    with pytest.raises(ValueError):
        run_experiment(c, "trotter")


def test_csv_is_reproducible(tmp_path):
    args = ["--override", "model.size=[4]", "--override", "observable.sites=[2]",
            "--override", "trotter.t_total=0.2", "--override", "trotter.dt=[0.1, 0.05]",
            "--override", "trotter.ordering=\"seeded-random\""]
    assert main(["trotter", "--out", str(tmp_path / "x")] + args) == 0
    assert main(["trotter", "--out", str(tmp_path / "y")] + args) == 0
    for name in ("trotter.csv", "circuit_00.tsv", "circuit_01.tsv"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()
