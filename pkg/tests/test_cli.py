# This file is part of topolearn.
#
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

import contextlib
import csv
import io
import json
import logging
import pathlib
import tempfile
import unittest

import numpy as np
import pytest
import topolearn
from topolearn import cli

logging.basicConfig(
    format="%(asctime)s:%(levelname)s:%(name)s:%(message)s", level=logging.DEBUG
)


class CliTestCase(unittest.TestCase):
    """Run the subcommands in sequence on a small dataset."""

    @classmethod
    def setUpClass(cls) -> None:
        cls.tmpdir = tempfile.TemporaryDirectory()
        cls.root = pathlib.Path(cls.tmpdir.name)
        cls.data = cls.root / "data"
        exit_code = cli.main(cls.generate_args(cls.data))
        assert exit_code == topolearn.ExitCode.OK
        exit_code = cli.main(
            [
                "tune",
                "--solver",
                "pds",
                "--dataset",
                str(cls.data),
                "--alphas",
                "0.1,1",
                "--betas",
                "0.1,1",
                "--max-iter",
                "500",
                "--out",
                str(cls.root / "tune"),
            ]
        )
        assert exit_code == topolearn.ExitCode.OK
        exit_code = cli.main(
            [
                "train",
                "--model",
                "unroll",
                "--dataset",
                str(cls.data),
                "--layers",
                "3",
                "--epochs",
                "2",
                "--batch-size",
                "3",
                "--init-config",
                str(cls.root / "tune" / "solver_config.json"),
                "--out",
                str(cls.root / "train"),
            ]
        )
        assert exit_code == topolearn.ExitCode.OK

    @classmethod
    def tearDownClass(cls) -> None:
        cls.tmpdir.cleanup()

    @staticmethod
    def generate_args(out: pathlib.Path) -> list:
        return [
            "generate",
            "--family",
            "ba",
            "--m",
            "10",
            "--train",
            "6",
            "--val",
            "3",
            "--test",
            "4",
            "--n-signals",
            "100",
            "--sigma",
            "0.1",
            "--seed",
            "1",
            "--density",
            "0.0",
            "1.0",
            "--out",
            str(out),
        ]

    def test_generate(self) -> None:
        for split, count, split_id in (("train", 6, 0), ("val", 3, 1), ("test", 4, 2)):
            dataset = topolearn.read_dataset(self.data / split)
            assert len(dataset) == count
            assert dataset.split_id == split_id
            assert dataset.num_nodes == 10
        run_config = json.loads((self.data / cli.RUN_CONFIG_NAME).read_text())
        assert run_config["command"] == "generate"
        assert run_config["arguments"]["num_nodes"] == 10
        assert run_config["arguments"]["family"] == "ba"

    def test_rerun_is_byte_identical(self) -> None:
        other = self.root / "data_again"
        assert cli.main(self.generate_args(other)) == topolearn.ExitCode.OK
        for split in cli.SPLITS:
            for name in ("manifest.json", "w.npy", "y.npy"):
                assert (other / split / name).read_bytes() == (self.data / split / name).read_bytes()

    def test_tune(self) -> None:
        config = topolearn.SolverConfig.from_dict(
            json.loads((self.root / "tune" / "solver_config.json").read_text())
        )
        assert config.alpha in (0.1, 1.0)
        assert config.beta in (0.1, 1.0)
        with open(self.root / "tune" / "grid.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["alpha", "beta", "gmse"]
        assert len(rows) == 5

    def test_solve_and_eval(self) -> None:
        estimates = self.root / "estimates"
        exit_code = cli.main(
            [
                "solve",
                "--solver",
                "admm",
                "--dataset",
                str(self.data),
                "--config",
                str(self.root / "tune" / "solver_config.json"),
                "--out",
                str(estimates),
            ]
        )
        assert exit_code == topolearn.ExitCode.OK
        manifest, arrays = topolearn.load_container(estimates, "estimates_manifest")
        assert manifest["count"] == 4
        assert len(manifest["iterations"]) == 4
        assert arrays["w"].shape == (4, 45)
        assert np.all(arrays["w"] >= 0.0)

        report_dir = self.root / "eval_estimates"
        with contextlib.redirect_stdout(io.StringIO()) as stdout:
            exit_code = cli.main(
                [
                    "eval",
                    "--dataset",
                    str(self.data),
                    "--estimates",
                    str(estimates),
                    "--n-boot",
                    "10",
                    "--out",
                    str(report_dir),
                ]
            )
        assert exit_code == topolearn.ExitCode.OK
        report = topolearn.EvalReport.from_dict(
            json.loads((report_dir / "report.json").read_text())
        )
        assert report.count == 4
        assert report.summary("gmse")[0] == pytest.approx(manifest["gmse"])
        assert "gmse.mean" in stdout.getvalue()
        assert (report_dir / "plots" / "heatmap_0.csv").exists()
        assert (report_dir / "plots" / "degrees_0.csv").exists()

    def test_train_outputs(self) -> None:
        out = self.root / "train"
        checkpoint = topolearn.Checkpoint.load(out / "checkpoint")
        assert checkpoint.model.kind == topolearn.ModelKind.UNROLL
        assert checkpoint.model.layers == 3
        lines = (out / "train_log.jsonl").read_text().splitlines()
        assert [json.loads(line)["epoch"] for line in lines] == [-1, 0, 1]
        audit = json.loads((out / "audit.json").read_text())
        assert audit["passed"]

    def test_eval_checkpoint(self) -> None:
        out = self.root / "eval_checkpoint"
        with contextlib.redirect_stdout(io.StringIO()):
            exit_code = cli.main(
                [
                    "eval",
                    "--dataset",
                    str(self.data),
                    "--checkpoint",
                    str(self.root / "train" / "checkpoint"),
                    "--n-boot",
                    "10",
                    "--out",
                    str(out),
                ]
            )
        assert exit_code == topolearn.ExitCode.OK
        with open(out / "layer_gmse.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["layer", "gmse"]
        assert len(rows) == 4

    def test_compare(self) -> None:
        out = self.root / "compare"
        with contextlib.redirect_stdout(io.StringIO()) as stdout:
            exit_code = cli.main(
                [
                    "compare",
                    "--dataset",
                    str(self.data),
                    "--models",
                    "pds,unroll",
                    "--solver-config",
                    f"pds={self.root / 'tune' / 'solver_config.json'}",
                    "--checkpoint",
                    f"unroll={self.root / 'train' / 'checkpoint'}",
                    "--n-boot",
                    "10",
                    "--out",
                    str(out),
                ]
            )
        assert exit_code == topolearn.ExitCode.OK
        rows = json.loads((out / "compare.json").read_text())
        assert set(rows) == {"groundtruth", "pds", "unroll"}
        assert rows["groundtruth"]["gmse"]["mean"] == 0.0
        assert "iterations" in rows["pds"]
        assert "iterations" not in rows["unroll"]
        for name in rows:
            assert (out / name / "report.json").exists()
        assert (out / "unroll" / "layer_gmse.csv").exists()
        with open(out / "compare.csv", newline="") as f:
            table = list(csv.reader(f))
        assert table[0][:3] == ["model", "gmse_mean", "gmse_ci95"]
        assert [row[0] for row in table[1:]] == ["groundtruth", "pds", "unroll"]
        assert stdout.getvalue().splitlines()[0].startswith("model")

    def test_compare_needs_artifacts(self) -> None:
        base = ["compare", "--dataset", str(self.data), "--out", str(self.root / "bad")]
        assert cli.main(base + ["--models", "unroll"]) == topolearn.ExitCode.USAGE
        assert cli.main(base + ["--models", "pds"]) == topolearn.ExitCode.USAGE
        assert cli.main(base + ["--models", "magic"]) == topolearn.ExitCode.USAGE
        mismatch = ["--models", "recurrent", "--checkpoint", f"recurrent={self.root / 'train' / 'checkpoint'}"]
        assert cli.main(base + mismatch) == topolearn.ExitCode.USAGE

    def test_infer(self) -> None:
        rng = np.random.default_rng(0)
        inputs = []
        for index in range(2):
            path = self.root / f"series_{index}.csv"
            values = rng.standard_normal((5, 30))
            lines = ["name," + ",".join(f"t{t}" for t in range(30))]
            lines += [f"S{i}," + ",".join(repr(float(v)) for v in row) for i, row in enumerate(values)]
            path.write_text("\n".join(lines) + "\n")
            inputs.append(str(path))
        out = self.root / "infer"
        exit_code = cli.main(
            [
                "infer",
                "--checkpoint",
                str(self.root / "train" / "checkpoint"),
                "--input",
                *inputs,
                "--out",
                str(out),
            ]
        )
        assert exit_code == topolearn.ExitCode.OK
        for index in range(2):
            with open(out / f"edges_{index}.csv", newline="") as f:
                rows = list(csv.reader(f))
            assert rows[0] == ["source", "target", "weight"]
            for row in rows[1:]:
                assert row[0].startswith("S") and row[1].startswith("S")
                assert float(row[2]) > 0.0
        stability = json.loads((out / "stability.json").read_text())
        assert len(stability["inputs"]) == 2
        assert -1.0 <= stability["spearman"] <= 1.0

    def test_infer_numeric_header(self) -> None:
        rng = np.random.default_rng(1)
        path = self.root / "stamped.csv"
        lines = [",".join(str(t) for t in range(20))]
        lines += [",".join(repr(float(v)) for v in row) for row in rng.standard_normal((4, 20))]
        path.write_text("\n".join(lines) + "\n")
        out = self.root / "infer_header"
        checkpoint = str(self.root / "train" / "checkpoint")
        args = ["infer", "--checkpoint", checkpoint, "--input", str(path), "--header", "--out", str(out)]
        assert cli.main(args) == topolearn.ExitCode.OK
        with open(out / "edges.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert {name for row in rows[1:] for name in row[:2]} <= {"0", "1", "2", "3"}
        run_config = json.loads((out / cli.RUN_CONFIG_NAME).read_text())
        assert run_config["arguments"]["header"] is True

    def test_usage_errors(self) -> None:
        out = str(self.root / "usage")
        assert cli.main(["solve", "--solver", "newton", "--dataset", str(self.data), "--out", out]) == 2
        assert cli.main(["generate", "--family", "ba", "--out", out, "--threads", "0"]) == 2
        assert cli.main(["frobnicate"]) == 2
        assert (
            cli.main(["generate", "--family", "er", "--param", "p=0.0", "--m", "10", "--out", out])
            == topolearn.ExitCode.USAGE
        )

    def test_data_errors(self) -> None:
        out = str(self.root / "data_errors")
        missing = str(self.root / "no_such_dataset")
        assert cli.main(["eval", "--dataset", missing, "--out", out]) == topolearn.ExitCode.DATA
        assert (
            cli.main(["eval", "--dataset", str(self.data), "--estimates", missing, "--out", out])
            == topolearn.ExitCode.DATA
        )

    def test_run_config(self) -> None:
        config = cli.RunConfig.from_dict(
            json.loads((self.root / "tune" / cli.RUN_CONFIG_NAME).read_text())
        )
        assert config.command == "tune"
        assert config.arguments["solver"] == "pds"
        assert config.arguments["alphas"] == [0.1, 1.0]
