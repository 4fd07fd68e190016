import json
import os
from pathlib import Path

import pytest

from homoglab.cli import (EXIT_CONFIG, EXIT_FAIL, EXIT_OK, load_config, main, parse_config, run_command,
                          write_csv, write_report)
from homoglab.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MINIMAL = {"d": 1, "alpha": 1.5, "M": 8, "modes": [{"m": [0], "l": [0], "re": 1, "im": 0}]}


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def test_minimal_config(tmp_path):
    cfg = load_config(_write(tmp_path, MINIMAL))
    assert cfg.spec.M == 8 and len(cfg.table) == 1
    assert cfg.table.bounds() == pytest.approx((1.0, 1.0))
    assert len(cfg.fingerprint) == 16


def test_shipped_fixture_a_config():
    cfg = load_config(CONFIGS / "fixture_a.json")
    assert len(cfg.table) == 3 and cfg.fixture_id == "fixture_a"


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_all_shipped_configs_load(name):
    load_config(CONFIGS / name)


def test_alpha_two_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"alpha must lie strictly in \(1,2\)"):
        load_config(_write(tmp_path, {**MINIMAL, "alpha": 2.0}))


def test_all_violations_listed(tmp_path):
    bad = {"d": 1, "alpha": 2.5, "M": 0, "modes": [{"m": [1], "l": [0], "re": 0.25}], "bogus": 1,
           "tolerances": {"oracle_rel": -1}}
    with pytest.raises(ConfigError) as exc:
        load_config(_write(tmp_path, bad))
    msg = str(exc.value)
    for fragment in ("alpha must lie", "truncation M", "swap symmetry", "bogus", "oracle_rel"):
        assert fragment in msg


def test_parse_error_has_position(tmp_path):
    with pytest.raises(ConfigError, match="line 2, column"):
        load_config(_write(tmp_path, '{"d": 1,\n "alpha": }'))


def test_conjugates_completed(tmp_path):
    cfg = load_config(_write(tmp_path, {**MINIMAL, "modes": MINIMAL["modes"] + [{"m": [1], "l": [-1], "re": 0.25}]}))
    assert cfg.table.modes[((-1,), (1,))] == 0.25


def test_fingerprint_ignores_output_dir_but_not_numbers(tmp_path):
    a = parse_config({**MINIMAL, "output_dir": "x"})
    b = parse_config({**MINIMAL, "output_dir": "y"})
    c = parse_config({**MINIMAL, "M": 9})
    assert a.fingerprint == b.fingerprint != c.fingerprint


def test_write_csv_formatting(tmp_path):
    path = write_csv([{"a": 1, "b": 0.1}], ["a", "b"], tmp_path / "t.csv", {"fingerprint": "abc"})
    lines = path.read_text().splitlines()
    assert lines[0] == "# artifact_version=0.1.0 fingerprint=abc"
    assert lines[1] == "a,b"
    assert lines[2] == "1,0.10000000000000001"


def test_empty_csv_is_header_only(tmp_path):
    path = write_csv([], ["x", "y"], tmp_path / "e.csv", {"fingerprint": "f"})
    assert path.read_text().splitlines()[1:] == ["x,y"]


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores permission bits")
def test_unwritable_directory(tmp_path):
    d = tmp_path / "ro"
    d.mkdir()
    d.chmod(0o500)
    with pytest.raises(ConfigError, match=str(d)):
        write_csv([], ["x"], d / "f.csv")


def test_unwritable_path_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    target = blocker / "sub" / "f.csv"
    with pytest.raises(ConfigError, match="file/sub"):
        write_csv([], ["x"], target)
    with pytest.raises(ConfigError, match="file/sub"):
        write_report({}, target)


def test_report_nan_becomes_null(tmp_path):
    path = write_report({"x": float("nan"), "y": 1.5}, tmp_path / "r.json", {"fingerprint": "f"})
    doc = json.loads(path.read_text())
    assert doc["summary"] == {"x": None, "y": 1.5} and doc["fingerprint"] == "f"


def test_constants_command(tmp_path):
    code, res = run_command("constants", load_config(CONFIGS / "fixture_a.json"), tmp_path)
    assert code == EXIT_OK
    assert res.summary["c0"] == pytest.approx(3.3422, abs=1e-4)
    assert res.summary["d0"] == pytest.approx(9.30, abs=0.01)
    assert res.summary["delta0"] == pytest.approx(0.726, abs=1e-3)


def test_rate_sweep_constant_is_all_zero(tmp_path):
    code, res = run_command("rate-sweep", load_config(CONFIGS / "constant.json"), tmp_path)
    assert code == EXIT_OK
    assert max(r["E_full"] for r in res.tables["rates"][1]) <= 1e-13
    header = (tmp_path / "rates.csv").read_text().splitlines()[:2]
    assert "fingerprint=" in header[0] and header[1] == "N,eps,E_fiber,E_full,argmax_xi"


def test_failed_check_writes_marker(tmp_path):
    raw = json.loads((CONFIGS / "fixture_b.json").read_text())
    raw["M"] = 8
    raw["tolerances"] = {"proj_slope_min": 5.0}
    code, res = run_command("threshold", parse_config(raw), tmp_path)
    assert code == EXIT_FAIL and not res.passed
    assert (tmp_path / "threshold.FAILED").read_text().startswith("FAILED")
    assert (tmp_path / "threshold.csv").exists()
    raw["tolerances"] = {}
    code, _ = run_command("threshold", parse_config(raw), tmp_path)
    assert code == EXIT_OK and not (tmp_path / "threshold.FAILED").exists()


def test_oracle_check_small(tmp_path):
    raw = json.loads((CONFIGS / "fixture_a_oracle.json").read_text())
    raw.update(M=2, oracle_xi=[0.3])
    code, res = run_command("oracle-check", parse_config(raw), tmp_path)
    assert code == EXIT_OK and res.summary["max_rel"] <= 1e-3
    assert len(res.tables["oracle"][1]) == 25


def test_oracle_check_rejects_2d(tmp_path):
    with pytest.raises(ConfigError, match="d = 1"):
        run_command("oracle-check", load_config(CONFIGS / "fixture_b_2d.json"), tmp_path)


def test_main_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, MINIMAL)
    assert main(["validate", "--config", str(good), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    bad = _write(tmp_path, {**MINIMAL, "alpha": 2.0}, "bad.json")
    assert main(["constants", "--config", str(bad)]) == EXIT_CONFIG
    assert "alpha must lie" in capsys.readouterr().err


@pytest.mark.parametrize("cmd", ["effective", "rho-scan"])
def test_commands_byte_identical(tmp_path, cmd):
    raw = json.loads((CONFIGS / "fixture_a.json").read_text())
    raw["M"] = 16
    cfg = parse_config(raw)
    run_command(cmd, cfg, tmp_path / "a")
    run_command(cmd, cfg, tmp_path / "b", threads=3)
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
