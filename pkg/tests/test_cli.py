import csv
import io
import json
import math

import pytest

from spincorr import config as cf
from spincorr.cli import data_section, main, read_config_echo


def run(tmp_path, sub, cfg, *extra, name="out.csv"):
    cpath = tmp_path / "cfg.json"
    cpath.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = main([sub, "--config", str(cpath), "--out", str(out), *extra])
    return code, (out.read_text() if out.exists() else None)


def rows(text):
    return list(csv.DictReader(io.StringIO(data_section(text))))


def test_analytic_left_right_column(tmp_path):
    cfg = {
        "angles": {
            "formulas": [
                {"formula": "prob4_lr", "grid": {"theta1p": [0], "theta2p": [0, 45, 90], "theta1": [0], "theta2": [90]}}
            ]
        }
    }
    code, text = run(tmp_path, "analytic", cfg)
    assert code == 0
    values = [float(r["value"]) for r in rows(text)]
    assert values == pytest.approx([0, 1 / 32, 1 / 16], abs=1e-15)


def test_analytic_visibility_rows(tmp_path):
    cfg = {"angles": {"formulas": [{"formula": "visibility", "grid": {"dz_over_L": [0, 0.5, 1]}}]}}
    code, text = run(tmp_path, "analytic", cfg)
    values = [float(r["value"]) for r in rows(text)]
    assert values == pytest.approx([1, 0.405285, 0], abs=1e-6)


def test_empty_grid_header_only(tmp_path):
    code, text = run(tmp_path, "analytic", {"angles": {"formulas": [{"formula": "prob2_opposite", "grid": {"theta1_0": [], "theta2_0": [0]}}]}})
    assert code == 0
    assert data_section(text).strip().count("\n") == 0
    assert data_section(text).startswith("formula,")


def test_header_block(tmp_path):
    code, text = run(tmp_path, "analytic", {})
    header = [l for l in text.splitlines() if l.startswith("#")]
    keys = {l.split(":")[0] for l in header}
    assert {"# config_sha256", "# seed", "# timestamp", "# config"} <= keys
    assert header[0].startswith("# spincorr ")


def test_config_echo_round_trip(tmp_path):
    cfg = {"experiment": {"central_bs": {"ratio": 0.31}}, "phase": {"model": "transverse_fringe", "dz": 0.2}, "run": {"seed": 5}}
    code, text = run(tmp_path, "analytic", cfg)
    echoed = read_config_echo(text)
    original = cf.normalize(cfg)
    assert echoed == original
    assert cf.config_hash(echoed) == cf.config_hash(original)
    assert f"# config_sha256: {cf.config_hash(original)}" in text


def test_threads_do_not_change_hash():
    a = cf.normalize({"run": {"threads": 1}})
    b = cf.normalize({"run": {"threads": 8}})
    assert cf.config_hash(a) == cf.config_hash(b)
    assert cf.config_hash(a) != cf.config_hash(cf.normalize({"run": {"seed": 1}}))


def test_simulate_rows(tmp_path):
    cfg = {"angles": {"prime": [0, 90]}, "run": {"trials": 100000, "seed": 3}}
    code, text = run(tmp_path, "simulate", cfg)
    assert code == 0
    table = {(r["kind"], r["pattern"]): r for r in rows(text)}
    f = float(table[("pattern", "D1'&D2'")]["frequency"])
    se = float(table[("pattern", "D1'&D2'")]["standard_error"])
    assert abs(f - 0.5) < 5 * se
    assert int(table[("summary", "trials")]["count"]) == 100000
    assert float(table[("pattern", "D1'&D2'")]["estimate_P"]) == pytest.approx(f / 4)


def test_simulate_seed_override_and_threads(tmp_path):
    cfg = {"detectors": {"efficiency": 0.9}, "run": {"trials": 70000}}
    _, a = run(tmp_path, "simulate", cfg, "--seed", "9", "--threads", "1", name="a.csv")
    _, b = run(tmp_path, "simulate", cfg, "--seed", "9", "--threads", "8", name="b.csv")
    _, c = run(tmp_path, "simulate", cfg, "--seed", "10", name="c.csv")
    assert data_section(a) == data_section(b)
    assert data_section(a) != data_section(c)
    assert "# seed: 9" in a


def test_numbers_round_trip(tmp_path):
    code, text = run(tmp_path, "analytic", {"angles": {"formulas": [{"formula": "transmittance_x", "grid": {"r": [0.31]}}]}})
    assert float(rows(text)[0]["value"]) == 1 / (1 + 0.31 ** 2)


def test_bell_rows(tmp_path):
    cfg = {"angles": {"optimize": True, "grid_step": 1.0}}
    code, text = run(tmp_path, "bell", cfg)
    assert code == 0
    table = {r["method"]: r for r in rows(text)}
    assert float(table["analytic"]["S"]) == pytest.approx((math.sqrt(2) - 1) / 2, abs=1e-12)
    assert float(table["optimized"]["S"]) == pytest.approx((math.sqrt(2) - 1) / 2, abs=1e-9)


def test_scan_rows(tmp_path):
    cfg = {"experiment": {"scan": {"visibilities": [1.0, 0.87], "conventions": ["fringe"], "r_values": [0.31]}}}
    code, text = run(tmp_path, "scan", cfg)
    assert code == 0
    table = rows(text)
    assert float(table[0]["eta_min"]) == pytest.approx(0.828427, abs=1e-5)
    assert float(table[1]["eta_closed_form"]) == pytest.approx(0.896714, abs=1e-6)
    assert float(table[2]["T_x"]) == pytest.approx(0.912326, abs=1e-6)


def test_config_errors_exit_1(tmp_path, capsys):
    code, _ = run(tmp_path, "simulate", {"run": {"trials": 0}})
    assert code == 1
    assert "run.trials" in capsys.readouterr().err
    code, _ = run(tmp_path, "simulate", {"bogus": 1})
    assert code == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"run":\n  {"seed": }}')
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 1
    assert "bad.json:2:" in capsys.readouterr().err


def test_insufficient_statistics_exit_3(tmp_path):
    cfg = {"detectors": {"efficiency": 0.0}, "run": {"trials": 100}}
    code, text = run(tmp_path, "simulate", cfg)
    assert code == 3 and text is None


def test_usage_error_exit_1():
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == 1


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "PASS oracle equivalence" in out
