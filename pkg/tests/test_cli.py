import csv
import io
import json
import math

import pytest

import cesqkd.coincidence as coincidence
from cesqkd.cli import fmt, main


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# config: ")
    return json.loads(lines[0][len("# config: "):]), list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


class TestFormatting:
    def test_numbers(self):
        assert fmt(0.1) == "1.00000000000e-01"
        assert len(fmt(math.pi).split("e")[0].replace(".", "")) == 12
        assert fmt(None) == "" and fmt(float("nan")) == ""
        assert fmt(True) == "true" and fmt(3) == "3"


class TestQberScan:
    ARGS = ("qber-scan", "--stations", "1", "--eta", "0.4", "--dark", "1e-5",
            "--chi-min", "0.01", "--chi-max", "0.3", "--steps", "30")

    def test_table(self, capsys):
        code, out, _ = run(capsys, *self.ARGS)
        assert code == 0
        cfg, rows = table(out)
        assert out.splitlines()[1] == "chi,qber,crossing"
        assert len(rows) == 30
        assert cfg["eta"] == 0.4 and cfg["command"] == "qber-scan"
        assert float(rows[0]["crossing"]) == pytest.approx(0.20, rel=0.15)

    def test_squash_passthrough(self, capsys):
        _, plain, _ = run(capsys, *self.ARGS)
        _, squashed, _ = run(capsys, *self.ARGS, "--squash")
        assert table(squashed)[0]["squash"] is True
        assert [r["qber"] for r in table(plain)[1]] != [r["qber"] for r in table(squashed)[1]]

    def test_distance_scan(self, capsys):
        code, out, _ = run(capsys, "qber-scan", "--vs", "ell", "--chi", "0.05", "--ell-max", "200", "--steps", "5")
        assert code == 0
        assert out.splitlines()[1] == "ell_km,qber"

    def test_byte_identical(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(capsys, *self.ARGS, "--out", str(a))[0] == 0
        assert run(capsys, *self.ARGS, "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()


class TestOptimize:
    def test_table(self, capsys):
        code, out, err = run(capsys, "optimize", "--stations", "1", "--ell-max", "400", "--step", "25", "--find-lmax")
        assert code == 0
        cfg, rows = table(out)
        assert list(rows[0]) == ["ell_km", "chi_opt", "eta_opt", "dark", "qber", "log10_rmax", "converged"]
        assert (cfg["alpha"], cfg["alpha0"], cfg["kappa"]) == (0.25, 4.0, 1.22)
        feasible = [float(r["ell_km"]) for r in rows if r["log10_rmax"]]
        # the last feasible grid row sits within one step of the cutoff
        lmax = float(err.strip().split("=")[1])
        assert lmax - 25 <= max(feasible) <= lmax
        for r in rows:
            if not r["log10_rmax"]:
                assert r["converged"] == "false"

    def test_json(self, capsys):
        code, out, _ = run(capsys, "optimize", "--ell-max", "50", "--step", "50", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and len(doc["records"]) == 2
        assert doc["records"][0]["stations"] == 1


class TestBounds:
    def test_rows(self, capsys):
        code, out, _ = run(capsys, "bounds", "--ell-min", "0", "--ell-max", "1000", "--step", "50")
        assert code == 0
        _, rows = table(out)
        assert out.splitlines()[1] == "ell_km,tgw,ideal_n1,ideal_n2,ideal_n3"
        assert all(float(r["ell_km"]) > 0 for r in rows)
        for r in rows:
            assert all(float(r[f"ideal_n{n}"]) < float(r["tgw"]) for n in (1, 2, 3))


class TestRate:
    def test_single_point(self, capsys):
        code, out, _ = run(capsys, "rate", "--chi", "0.1", "--rep-rate-hz", "1e6")
        _, rows = table(out)
        assert code == 0
        assert float(rows[0]["bits_per_second"]) == pytest.approx(float(rows[0]["r"]) * 1e6, rel=1e-10)


class TestValidate:
    def test_default(self, capsys):
        code, out, _ = run(capsys, "validate")
        assert code == 0
        assert "FAIL" not in out

    def test_small_cutoff(self, capsys):
        assert run(capsys, "validate", "--nmax", "1")[0] == 0

    def test_tampered_detector(self, capsys, monkeypatch):
        # dark counts dropped from the closed-form detector model only
        monkeypatch.setattr(coincidence, "_no_click_table", lambda counts, det: (1.0 - det.eta_eff) ** counts)
        code, _, err = run(capsys, "validate", "--nmax", "1")
        assert code == 4
        assert "worst deviation" in err


class TestConfigAndErrors:
    def test_config_file_and_override(self, capsys, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("eta: 0.3\nchi: 0.05\nsteps: 4\n")
        code, out, _ = run(capsys, "qber-scan", "--config", str(cfg), "--eta", "0.5")
        resolved, rows = table(out)
        assert code == 0
        assert resolved["eta"] == 0.5 and resolved["chi"] == 0.05 and len(rows) == 4

    def test_json_config(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"rep-rate-hz": 1e7}))
        code, out, _ = run(capsys, "rate", "--config", str(cfg))
        assert code == 0 and table(out)[0]["rep_rate_hz"] == 1e7

    def test_unknown_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"colour": "blue"}))
        assert run(capsys, "rate", "--config", str(cfg))[0] == 2

    def test_bad_parameter(self, capsys):
        assert run(capsys, "rate", "--eta", "2")[0] == 2

    def test_unknown_flag(self, capsys):
        assert run(capsys, "rate", "--bogus")[0] == 2

    def test_numerical_failure(self, capsys):
        code, _, err = run(capsys, "rate", "--chi", "0", "--dark", "0")
        assert code == 3
        assert "numerical failure" in err
