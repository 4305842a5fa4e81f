import json
import math
from pathlib import Path

import pytest

from topomap.cli import main


def gen(tmp_path, template="random", nodes=40, seed=3, extra=()):
    out = tmp_path / "scenario.json"
    rc = main(
        ["generate", "--template", template, "--nodes", str(nodes),
         "--seed", str(seed), "-o", str(out), *extra]
    )
    assert rc == 0
    return out


class TestGenerate:
    def test_creates_scenario_file(self, tmp_path, capsys):
        out = gen(tmp_path)
        assert out.exists()
        assert "sha256=" in capsys.readouterr().out

    def test_byte_identical_reruns(self, tmp_path):
        a = gen(tmp_path, seed=5)
        first = a.read_bytes()
        gen(tmp_path, seed=5)
        assert a.read_bytes() == first

    def test_unknown_template_exit_code(self, tmp_path):
        rc = main(
            ["generate", "--template", "kleinbottle", "--nodes", "4",
             "-o", str(tmp_path / "x.json")]
        )
        assert rc == 2


class TestRun:
    def test_mltm_outputs(self, tmp_path):
        scen = gen(tmp_path, nodes=30, seed=7)
        out = tmp_path / "out"
        rc = main(
            ["run", "mltm", "-s", str(scen), "--seed", "1", "-o", str(out),
             "--grid-step", "1.0", "--np", "2"]
        )
        assert rc == 0
        assert (out / "map.csv").exists()
        assert (out / "trajectory.csv").exists()
        doc = json.loads((out / "metrics.json").read_text())
        assert doc["parameters"]["pipeline"] == "mltm"
        assert "distance_error" in doc

    def test_rerun_is_byte_identical(self, tmp_path):
        scen = gen(tmp_path, nodes=25, seed=9)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        argv = ["run", "mltm", "-s", str(scen), "--seed", "4", "--grid-step", "1.0",
                "--np", "2"]
        assert main(argv + ["-o", str(out1)]) == 0
        assert main(argv + ["-o", str(out2)]) == 0
        assert (out1 / "metrics.json").read_bytes() == (out2 / "metrics.json").read_bytes()
        assert (out1 / "map.csv").read_bytes() == (out2 / "map.csv").read_bytes()

    def test_mmtm_sector_table(self, tmp_path):
        scen = gen(tmp_path, template="warehouse", nodes=25, seed=2)
        out = tmp_path / "mm"
        rc = main(
            ["run", "mmtm", "-s", str(scen), "-o", str(out), "--sectors", "8",
             "--antenna", "3d", "--np", "1", "--grid-step", "1.0"]
        )
        assert rc == 0
        assert (out / "sector_table.csv").exists()
        doc = json.loads((out / "metrics.json").read_text())
        assert doc["robot_sectors"] == 8

    def test_dmmtm_ss(self, tmp_path):
        scen = gen(
            tmp_path, template="warehouse", nodes=30, seed=4,
            extra=("--anchor-ratio", "0.4"),
        )
        out = tmp_path / "dm"
        rc = main(
            ["run", "dmmtm-ss", "-s", str(scen), "-o", str(out), "--grid-step", "1.0"]
        )
        assert rc == 0
        doc = json.loads((out / "metrics.json").read_text())
        assert doc["variant"] == "ss"
        assert doc["anchors"] > 0

    def test_extremum_trace(self, tmp_path):
        scen = gen(tmp_path, template="random", nodes=300, seed=11)
        out = tmp_path / "ex"
        rc = main(["run", "extremum", "-s", str(scen), "-o", str(out)])
        assert rc == 0
        lines = (out / "trace.csv").read_text().splitlines()
        assert lines[0] == "t,x,y,theta,d,omega,d_true"
        assert len(lines) > 10


class TestMetrics:
    def test_map_against_itself(self, tmp_path, capsys):
        scen = gen(tmp_path, nodes=30, seed=7)
        out = tmp_path / "out"
        main(["run", "mltm", "-s", str(scen), "-o", str(out), "--grid-step", "1.0",
              "--np", "2"])
        capsys.readouterr()  # drop the run command's status line
        rc = main(
            ["metrics", "--physical", str(out / "map.csv"),
             "--estimated", str(out / "map.csv"), "--big-r", "10"]
        )
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["distance_error"]["mean"] == 0.0
        assert doc["one_hop_connectivity_error_percent"] == 0.0

    def test_estimated_vs_scenario_truth(self, tmp_path):
        scen = gen(tmp_path, nodes=30, seed=7)
        out = tmp_path / "out"
        main(["run", "mltm", "-s", str(scen), "-o", str(out), "--grid-step", "1.0",
              "--np", "2"])
        rc = main(
            ["metrics", "--physical", str(scen), "--estimated", str(out / "map.csv"),
             "-o", str(tmp_path / "m.json")]
        )
        assert rc == 0
        doc = json.loads((tmp_path / "m.json").read_text())
        assert "alignment" in doc

    def test_id_mismatch_exit_code(self, tmp_path):
        scen = gen(tmp_path, nodes=10, seed=7)
        bad = tmp_path / "bad.csv"
        bad.write_text("node_id,x,y,z,peak_likelihood\n999,1,2,0,0.5\n")
        rc = main(["metrics", "--physical", str(scen), "--estimated", str(bad)])
        assert rc == 3
