"""Command-line interface wiring: parsing, precedence, outputs."""

import json
import math

import pytest

from consobol._io import parse_csv
from consobol.cli import build_parser, config_from_args, main


def parse(argv):
    return config_from_args(build_parser().parse_args(argv))


class TestParsing:
    def test_model_spec_with_args(self):
        cfg = parse(["estimate", "--model", "gfunction(0,1)"])
        assert cfg.model == "gfunction"
        assert cfg.model_args == ((0.0, 1.0),)

    def test_kfunction_dimension(self):
        cfg = parse(["estimate", "--model", "kfunction(4)"])
        assert cfg.model_args == (4,)

    def test_constraint_param(self):
        cfg = parse(["estimate", "--constraint", "linear_alpha", "--param", "0.5"])
        assert cfg.constraint == "linear_alpha"
        assert cfg.constraint_args == (0.5,)

    def test_schedule_and_knobs(self):
        cfg = parse([
            "converge", "--schedule", "1024,4096", "--replicates", "3",
            "--bins", "32", "--nz-aux", "16", "--method", "mc", "--seed", "9",
        ])
        assert cfg.schedule == (1024, 4096)
        assert cfg.replicates == 3
        assert cfg.n_bins == 32
        assert cfg.nz_aux == 16
        assert cfg.seed == 9

    def test_config_file_with_flag_override(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({
            "model": "gfunction", "model_args": [[0.0, 1.0]],
            "constraint": "linear_alpha", "constraint_args": [0.5235987755982988],
            "method": "mc", "replicates": 7,
        }))
        cfg = parse(["estimate", "--config", str(cfg_file), "--method", "qmc"])
        assert cfg.method == "qmc"          # flag wins
        assert cfg.replicates == 7          # file value kept
        assert cfg.constraint_args == (0.5235987755982988,)

    def test_env_seed_override_echoed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CONSOBOL_SEED", "4242")
        out = tmp_path / "est.json"
        cfg = parse(["estimate", "--model", "product2d", "--constraint",
                     "upper_triangle", "--method", "mc", "--n", "512",
                     "--out", str(out), "--format", "json"])
        assert cfg.seed == 4242
        main(["estimate", "--model", "product2d", "--constraint", "upper_triangle",
              "--method", "mc", "--n", "512", "--out", str(out), "--format", "json"])
        records = json.loads(out.read_text())
        assert records[0]["seed"] == 4242


class TestCommands:
    def test_estimate_quadrature(self, tmp_path, capsys):
        out = tmp_path / "est.csv"
        code = main([
            "estimate", "--model", "product2d", "--constraint", "upper_triangle",
            "--method", "quadrature", "--grid-k", "257", "--out", str(out),
        ])
        assert code == 0
        columns, records = parse_csv(out.read_text())
        assert records[0]["S1"] == pytest.approx(7.0 / 27.0, abs=1e-3)
        assert "S=" in capsys.readouterr().out

    def test_converge_prints_slopes(self, capsys):
        code = main([
            "converge", "--model", "product2d", "--constraint", "upper_triangle",
            "--method", "qmc", "--schedule", "256,1024,4096", "--replicates", "3",
            "--reference", "product_triangle",
        ])
        assert code == 0
        assert "slope=" in capsys.readouterr().out

    def test_sweep_writes_rows(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep", "--model", "gfunction(0,1)", "--constraint", "linear_alpha",
            "--param-grid", f"0,{math.pi/6}", "--grid-k", "65", "--out", str(out),
        ])
        assert code == 0
        columns, records = parse_csv(out.read_text())
        assert len(records) == 2
        assert columns[0] == "param"

    def test_compare_reports_winner(self, capsys):
        code = main([
            "compare", "--model", "product2d", "--constraint", "upper_triangle",
            "--method", "qmc", "--schedule", "256,1024,4096", "--replicates", "3",
            "--reference", "product_triangle",
        ])
        assert code == 0
        assert "lower:" in capsys.readouterr().out
