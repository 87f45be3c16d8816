import json

import pandas as pd
import pytest

import main
from src.outputs import CSV_COLUMNS

TINY = "n_dim: 30\nn_channels_1: 4\nn_channels_2: 4\nn_realizations: 4\n"


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY, encoding="utf-8")
    return str(path)


def _run(config, output, *extra):
    return main.main(["--config", config, "--output", str(output), *extra])


def test_check_only_passes(tiny_config, tmp_path):
    out = tmp_path / "check"
    assert _run(tiny_config, out, "--check-only") == main.EXIT_PASS
    payload = json.loads((out / "transmission.json").read_text(encoding="utf-8"))
    assert payload["passed"] is True
    assert "curve" not in payload
    names = {c["check"] for c in payload["checks"]}
    assert {"s_unitarity", "schur_resummation", "transport_factor_forms", "single_resonance_peak"} <= names
    assert not (out / "transmission.csv").exists()
    assert not (out / "failures.json").exists()


def test_parse_error_exit_code(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("n_dim: 30\nbogus: 1\n", encoding="utf-8")
    assert _run(str(path), tmp_path / "out") == main.EXIT_USAGE


def test_invalid_value_exit_code(tiny_config, tmp_path):
    assert _run(tiny_config, tmp_path / "out", "--realizations", "1") == main.EXIT_USAGE


def test_bad_format_flag(tiny_config, tmp_path):
    assert _run(tiny_config, tmp_path / "out", "--format", "xml") == main.EXIT_USAGE


def test_full_run_is_deterministic_across_workers(tiny_config, tmp_path):
    grid = ("--energy-points", "3", "--seed", "5")
    status_1 = _run(tiny_config, tmp_path / "w1", *grid, "--workers", "1")
    status_2 = _run(tiny_config, tmp_path / "w2", *grid, "--workers", "2")
    assert status_1 == status_2
    assert status_1 in (main.EXIT_PASS, main.EXIT_GATE_FAILURE)
    for name in ("transmission.csv", "transmission.json"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w2" / name).read_bytes()

    frame = pd.read_csv(tmp_path / "w1" / "transmission.csv")
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == 3 * 4 * 4
    assert list(frame["pair"][:3]) == ["1-1", "1-2", "1-3"]
    assert frame["E"].nunique() == 3

    payload = json.loads((tmp_path / "w1" / "transmission.json").read_text(encoding="utf-8"))
    assert payload["config"]["master_seed"] == 5
    assert payload["curve"]["n_realizations"] == 4
    checks = {c["check"] for c in payload["checks"]}
    assert {"analytic_confrontation", "vanishing_amplitude", "factorization",
            "green_center", "channel_resonance_correlator"} <= checks
    if status_1 == main.EXIT_GATE_FAILURE:
        assert (tmp_path / "w1" / "failures.json").exists()


def test_json_only_format(tiny_config, tmp_path):
    out = tmp_path / "json"
    _run(tiny_config, out, "--energy-points", "2", "--format", "json")
    assert (out / "transmission.json").exists()
    assert not (out / "transmission.csv").exists()
