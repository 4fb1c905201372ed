from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from ccwtrap.cli import EXIT_CONSTRAINT, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK, build_parser, main


def _json(path):
    return json.loads(path.read_text())


def test_field_map_row_count_and_determinism(tmp_path):
    out = tmp_path / "map.csv"
    args = ["field-map", "builtin:routed_gate_zone", "--nx", "101", "--nz", "101", "--out", str(out)]
    assert main(args) == EXIT_OK
    first = out.read_bytes()
    lines = first.decode().split("\n")
    assert lines[0] == "x,y,z,Bx,By,Bz,B_abs"
    assert len([ln for ln in lines[1:] if ln]) == 10201
    assert b"\r\n" not in first
    assert main(args) == EXIT_OK
    assert out.read_bytes() == first
    meta = _json(tmp_path / "map.csv.meta.json")
    assert meta["command"] == "field-map" and meta["exit_status"] == 0


def test_field_map_json_format(tmp_path):
    out = tmp_path / "map.json"
    assert main(["field-map", "builtin:reference_pair", "--nx", "3", "--nz", "4", "--format", "json",
                 "--out", str(out)]) == EXIT_OK
    doc = _json(out)
    assert doc["shape"] == [3, 1, 4] and len(doc["B"]) == 12


def test_missing_layout_leaves_no_output(tmp_path):
    out = tmp_path / "map.csv"
    assert main(["field-map", str(tmp_path / "nope.json"), "--out", str(out)]) == EXIT_INPUT
    assert list(tmp_path.iterdir()) == []


def test_unknown_builtin(tmp_path):
    assert main(["quadrupole", "builtin:nothing", "--out", str(tmp_path / "q.json")]) == EXIT_INPUT


def test_malformed_layout(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"unit": "um", "wires": []}')
    assert main(["resistance", str(bad)]) == EXIT_INPUT


def test_bare_number_rejected(capsys):
    assert main(["operating-point", "builtin:strip_390sq", "--current", "10"]) == EXIT_INPUT
    assert "has no unit" in capsys.readouterr().err


def test_operating_point_zero_current(tmp_path):
    out = tmp_path / "op.json"
    assert main(["operating-point", "builtin:strip_390sq", "--current", "0A", "--t-base", "40K",
                 "--out", str(out)]) == EXIT_OK
    doc = _json(out)
    assert doc["power"] == 0.0 and doc["temperature"] == 40.0 and doc["converged"]


def test_operating_point_runaway_exit_status(tmp_path):
    out = tmp_path / "op.json"
    assert main(["operating-point", "builtin:strip_390sq", "--current", "30A", "--out", str(out)]) \
        == EXIT_NONCONVERGED
    assert _json(out)["converged"] is False


def test_fit_rrr_measured_samples(tmp_path, root):
    out = tmp_path / "fit.json"
    assert main(["fit-rrr", str(root / "layouts" / "rt_samples.csv"), "--squares", "390",
                 "--thickness", "15um", "--out", str(out)]) == EXIT_OK
    doc = _json(out)
    assert 115 <= doc["rrr_hat"] <= 395 and doc["interval"][0] >= 100
    assert len(doc["samples"]) == 3


def test_fit_rrr_with_heating(tmp_path, root):
    out = tmp_path / "fit.json"
    assert main(["fit-rrr", str(root / "layouts" / "rt_samples.csv"), "--heating-current", "10A",
                 "--measured-power", "1028mW", "--t-base", "38K", "--out", str(out)]) == EXIT_OK
    th = _json(out)["thermal"]
    assert th["self_heating_ratio"] == pytest.approx(1.43, abs=0.15)


def test_fit_rrr_degenerate(tmp_path):
    samples = tmp_path / "rt.csv"
    samples.write_text("T_K,R_ohm\n293,0.4\n293,0.41\n")
    assert main(["fit-rrr", str(samples)]) == EXIT_INPUT


def test_quadrupole_and_gradient(tmp_path):
    q = tmp_path / "q.json"
    assert main(["quadrupole", "builtin:routed_gate_zone", "--out", str(q)]) == EXIT_OK
    doc = _json(q)
    assert doc["position_m"][1] == pytest.approx(125e-6, abs=15e-6)
    assert doc["gradient_per_amp_T_per_m_A"][2] == pytest.approx(11.1, rel=0.2)
    g = tmp_path / "g.json"
    assert main(["gradient", "builtin:routed_gate_zone", "--y", "125um", "--out", str(g)]) == EXIT_OK
    assert _json(g)["axis_gradient_T_per_m"][2] == pytest.approx(doc["gradient_per_amp_T_per_m_A"][2], rel=1e-6)


def test_quadrupole_not_bracketed(tmp_path):
    assert main(["quadrupole", "builtin:routed_gate_zone", "--y", "300um", "--half", "20um",
                 "--out", str(tmp_path / "q.json")]) == EXIT_NONCONVERGED
    assert not (tmp_path / "q.json").exists()


def test_resistance(tmp_path):
    out = tmp_path / "r.json"
    assert main(["resistance", "builtin:strip_390sq", "-T", "293K", "-T", "40K", "--out", str(out)]) == EXIT_OK
    doc = _json(out)
    assert doc["squares"] == pytest.approx(390.0)
    assert doc["points"][0]["R_ohm"] == pytest.approx(0.438, rel=0.03)


def test_power_curve_and_runaway(tmp_path):
    pc = tmp_path / "pc.csv"
    assert main(["power-curve", "builtin:strip_390sq", "--currents", "1A,5A,10A,30A", "--out", str(pc)]) == EXIT_OK
    rows = list(csv.DictReader(pc.open()))
    assert [r["converged"] for r in rows] == ["1", "1", "1", "0"]
    rw = tmp_path / "rw.json"
    assert main(["runaway", "builtin:strip_390sq", "--i-max", "40A", "--out", str(rw)]) == EXIT_OK
    assert 5 < _json(rw)["runaway_current_A"] < 30
    assert main(["runaway", "builtin:strip_390sq", "--i-max", "40A", "--r-th", "0K_per_W",
                 "--out", str(rw)]) == EXIT_OK
    assert _json(rw)["none_below_bound"] is True


def test_evaluate_exit_codes(tmp_path):
    out = tmp_path / "e.json"
    assert main(["evaluate", "--current", "13A", "--out", str(out)]) == EXIT_CONSTRAINT
    doc = _json(out)
    assert doc["gradient_T_per_m"] == pytest.approx(144, rel=0.2) and doc["feasible"] is False
    assert main(["evaluate", "--current", "6A", "--gradient-min", "0T_per_m", "--out", str(out)]) == EXIT_OK
    assert _json(out)["feasible"] is True


def test_current_for_gradient_command(tmp_path):
    out = tmp_path / "c.json"
    assert main(["current-for-gradient", "--target", "150T_per_m", "--gradient-per-amp", "11.1T_per_m_per_A",
                 "--out", str(out)]) == EXIT_OK
    assert _json(out)["current_A"] == pytest.approx(13.4, rel=0.05)


def test_sweep_singleton(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--current", "8A", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1
    front = _json(tmp_path / "s.csv.front.json")
    assert front["n_points"] == 1


def test_reconstruct_round_trip(tmp_path, root):
    out = tmp_path / "r.json"
    assert main(["reconstruct", "--out", str(out)]) == EXIT_OK
    assert out.read_text() == (root / "src" / "ccwtrap" / "data" / "routed_gate_zone.json").read_text()


def test_every_flag_documents_units():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    for name, p in sub.choices.items():
        for action in p._actions:
            if action.dest in ("help",) or not action.option_strings:
                continue
            assert action.help, (name, action.dest)
            conv = getattr(action.type, "__name__", "")
            if conv and conv not in ("_positive_int", "_rrr", "float", "str"):
                assert "[" in action.help, (name, action.dest)


def test_help_runs_for_every_command(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    for name in sub.choices:
        assert main([name, "--help"]) == 0
        assert "usage" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ccwtrap", "current-for-gradient", "--target", "0T_per_m",
                          "--gradient-per-amp", "11.1T_per_m_per_A"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["current_A"] == 0.0
