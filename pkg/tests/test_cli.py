"""End-to-end checks of the command-line interface: artifacts, determinism,
and the exit-code contract."""

import json

import numpy as np
import pytest

from doublepack import cli
from doublepack.continuum import BoundaryFunction, boundary_function_to_csv


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


class TestPack:
    def test_grid_artifacts(self, tmp_path):
        assert run(tmp_path, "pack", "--grid", "5") == 0
        doc = json.loads((tmp_path / "packing.json").read_text())
        assert "circles" in doc and "config" in doc
        assert doc["config"]["command"] == "pack"
        svg = (tmp_path / "packing.svg").read_text()
        assert "stroke-dasharray" in svg        # dual circles dashed
        assert svg.count("<circle") > 25

    def test_tiling(self, tmp_path):
        assert run(tmp_path, "pack", "--tiling", "7,3", "--layers", "2") == 0
        doc = json.loads((tmp_path / "packing.json").read_text())
        assert doc["config"]["tiling"] == [7, 3]
        assert doc["defect"] <= 1e-8

    def test_analyze(self, tmp_path):
        assert run(tmp_path, "analyze", "--grid", "5") == 0
        doc = json.loads((tmp_path / "geometry.json").read_text())
        for key in ("max_tangency_residual", "max_orthogonality_residual",
                    "ring_ratio_max", "sausage_ok", "delta0", "config"):
            assert key in doc
        assert doc["max_tangency_residual"] < 1e-6


class TestDouglas:
    def test_table(self, tmp_path):
        assert run(tmp_path, "douglas", "--kmax", "3", "--ntheta", "512") == 0
        lines = (tmp_path / "douglas.csv").read_text().strip().splitlines()
        assert lines[0] == "k,douglas,energy,ratio"
        assert len(lines) == 4
        for row in lines[1:]:
            ratio = float(row.split(",")[3])
            assert ratio == pytest.approx(1.0, abs=1e-2)
        doc = json.loads((tmp_path / "douglas.json").read_text())
        assert len(doc["rows"]) == 3

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            d.mkdir()
            assert run(d, "douglas", "--kmax", "2", "--ntheta", "256") == 0
        assert (a / "douglas.csv").read_bytes() == (b / "douglas.csv").read_bytes()
        ja = json.loads((a / "douglas.json").read_text())
        jb = json.loads((b / "douglas.json").read_text())
        assert {k: v for k, v in ja.items() if k != "config"} == \
            {k: v for k, v in jb.items() if k != "config"}


class TestCapacity:
    def test_report(self, tmp_path):
        code = run(tmp_path, "capacity", "--grid", "5", "--grid-h", "0.015625")
        assert code == 0
        doc = json.loads((tmp_path / "capacity.json").read_text())
        assert doc["estimate"]["value"] > 0
        assert doc["comparison"]["continuum"] > 0
        assert doc["comparison"]["ratio"] == pytest.approx(
            doc["comparison"]["continuum"] / doc["estimate"]["value"])
        assert doc["config"]["grid_h"] == 0.015625


class TestRoundtrip:
    def test_sweep(self, tmp_path):
        code = run(tmp_path, "roundtrip", "--tiling", "7,3", "--radii", "3:4")
        assert code == 0
        doc = json.loads((tmp_path / "roundtrip.json").read_text())
        assert [row["radius"] for row in doc["sweep"]] == [3, 4]
        for row in doc["sweep"]:
            assert 0 <= row["roundtrip_residual"] < 1
        lines = (tmp_path / "roundtrip.csv").read_text().strip().splitlines()
        assert lines[0].startswith("radius,")
        assert len(lines) == 3


class TestHarnack:
    def test_fit_report(self, tmp_path):
        code = run(tmp_path, "harnack", "--tiling", "7,3", "--layers", "3",
                   "--seed", "1")
        assert code == 0
        doc = json.loads((tmp_path / "harnack.json").read_text())
        assert doc["fitted"] is True
        assert doc["beta_hat"] > 0
        assert doc["n_pairs"] == len(doc["pairs"])

    def test_seeded_rerun_identical(self, tmp_path):
        args = ("harnack", "--tiling", "7,3", "--layers", "3", "--seed", "7")
        assert run(tmp_path, *args) == 0
        first = (tmp_path / "harnack.json").read_bytes()
        assert run(tmp_path, *args) == 0
        assert (tmp_path / "harnack.json").read_bytes() == first


class TestEvaluate:
    def test_field_values(self, tmp_path):
        bf = BoundaryFunction(func=np.cos)
        (tmp_path / "bdry.csv").write_text(boundary_function_to_csv(bf, 64))
        (tmp_path / "pts.csv").write_text("0.3,0.0\n0.0,0.25\n-0.5,0.0\n")
        code = run(tmp_path, "evaluate", "--boundary-csv",
                   str(tmp_path / "bdry.csv"), "--kmax", "4",
                   "--points", str(tmp_path / "pts.csv"))
        assert code == 0
        rows = (tmp_path / "evaluate.csv").read_text().strip().splitlines()
        assert rows[0] == "x,y,value"
        got = [float(r.split(",")[2]) for r in rows[1:]]
        # the extension of cos(theta) is Re z
        assert got == pytest.approx([0.3, 0.0, -0.5], abs=1e-9)


class TestExitCodes:
    def test_missing_source_is_config_error(self, tmp_path):
        assert run(tmp_path, "pack") == 2

    def test_two_sources_is_config_error(self, tmp_path):
        assert run(tmp_path, "pack", "--grid", "4", "--tiling", "7,3") == 2

    def test_bad_tolerance_is_config_error(self, tmp_path):
        assert run(tmp_path, "pack", "--grid", "4", "--pack-tol", "-1") == 2

    def test_missing_map_file_is_io_error(self, tmp_path):
        assert run(tmp_path, "pack", "--map",
                   str(tmp_path / "nothing.json")) == 4

    def test_unreachable_tolerance_is_convergence_error(self, tmp_path):
        assert run(tmp_path, "pack", "--tiling", "7,3", "--layers", "2",
                   "--pack-tol", "1e-30") == 3

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DOUBLEPACK_OUT", str(tmp_path))
        assert cli.main(["douglas", "--kmax", "1", "--ntheta", "256"]) == 0
        assert (tmp_path / "douglas.csv").exists()
