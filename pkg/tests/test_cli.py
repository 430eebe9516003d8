"""Tests for the command line: argument errors, exit codes and the end-to-end verb flow."""

import argparse
from pathlib import Path

import pandas as pd
import pytest

from pckd.core.rng import StreamFactory
from pckd.main import dispatch
from pckd.modules.backbones import init_model, save_checkpoint
from pckd.modules.projectors import encode_banks, init_bank
from pckd.modules.trainer.cli import collect_overrides, method_overrides
from pckd.shared.schemas import BackboneKind


def output_values(text: str) -> dict:
    """``key=value`` lines of a verb's report."""
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


class TestArguments:
    """Test suite for argument handling."""

    def test_unknown_method(self, capsys):
        """Test that an unknown distillation method exits 2 and lists the valid ones."""
        assert dispatch(["distill", "--method", "bogus"]) == 2
        err = capsys.readouterr().err
        assert "invalid choice" in err
        assert "pckd_h" in err

    def test_unknown_verb(self, capsys):
        """Test that an unknown verb is a usage error."""
        assert dispatch(["compress"]) == 2

    def test_missing_verb(self, capsys):
        """Test that a verb is required."""
        assert dispatch([]) == 2

    def test_version(self, capsys):
        """Test that --version exits cleanly."""
        assert dispatch(["--version"]) == 0
        assert capsys.readouterr().out.startswith("pckd-")

    def test_configuration_error_exits_2(self, tmp_path: Path, capsys):
        """Test that a config conflict is reported on stderr with exit code 2."""
        code = dispatch(["distill", "--data", str(tmp_path), "--method", "pckd_h", "--T1", "50", "--T2", "5"])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: ")

    def test_missing_input_file_exits_1(self, tmp_path: Path, capsys):
        """Test that an unreadable interaction file exits 1."""
        code = dispatch(["prep", "--in", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "data")])
        assert code == 1

    def test_invalid_utf8_exits_1(self, tmp_path: Path, capsys):
        """Test that a log with undecodable bytes is a parse error with exit code 1."""
        bad = tmp_path / "bad.tsv"
        bad.write_bytes(b"\xff\xfeu1\ti1\t1\n")
        code = dispatch(["prep", "--in", str(bad), "--out", str(tmp_path / "data")])
        assert code == 1
        err = capsys.readouterr().err
        assert "Invalid UTF-8 at line 1" in err
        assert "offset=0" in err

    def test_invalid_utf8_config_exits_2(self, tmp_path: Path, capsys):
        """Test that an undecodable config file is a configuration error."""
        config = tmp_path / "run.cfg"
        config.write_bytes(b"seed=1\nlr=\xff\n")
        assert dispatch(["distill", "--data", str(tmp_path), "--config", str(config)]) == 2
        assert "offset=10" in capsys.readouterr().err


class TestMethodMapping:
    """Test suite for translating --method into config fields."""

    @pytest.mark.parametrize(
        "method, kd_method, pckd_method",
        [
            ("none", "none", "none"),
            ("fitnet", "fitnet", "none"),
            ("de", "de", "none"),
            ("pckd_p", "de", "pckd_p"),
            ("pckd_l", "de", "pckd_l"),
            ("pckd_h", "de", "pckd_h"),
        ],
    )
    def test_mapping(self, method, kd_method, pckd_method):
        """Test each method name's projector and regularizer."""
        assert method_overrides(method) == {"kd_method": kd_method, "method": pckd_method}

    def test_unset_flags_are_skipped(self):
        """Test that only flags given on the command line become overrides."""
        args = argparse.Namespace(lr=0.01, seed=None, K=3, method=None)
        assert collect_overrides(args) == {"lr": 0.01, "rank_refresh_K": 3}


class TestVerbFlow:
    """Test suite for running every verb in sequence on a tiny dataset."""

    def test_synth_to_diagnose(self, tmp_path: Path, capsys):
        """Test synth, prep, train-teacher, distill, eval and diagnose end to end."""
        log_path = tmp_path / "log.csv"
        data = tmp_path / "data"
        teacher_dir = tmp_path / "teacher"
        student_dir = tmp_path / "student"
        common = ["--data", str(data), "--seed", "3", "--max-epochs", "2", "--batch-size", "128",
                  "--lr", "0.01", "--no-wall-time"]

        assert dispatch(["synth", "--users", "40", "--items", "60", "--density", "0.12", "--latent-dim", "8",
                         "--seed", "11", "--out", str(log_path)]) == 0
        assert int(output_values(capsys.readouterr().out)["interactions"]) > 0

        assert dispatch(["prep", "--in", str(log_path), "--out", str(data), "--min-interactions", "3"]) == 0
        assert int(output_values(capsys.readouterr().out)["items"]) >= 5

        assert dispatch(["train-teacher", *common, "--dim", "16", "--out", str(teacher_dir)]) == 0
        teacher_ckpt = output_values(capsys.readouterr().out)["checkpoint"]
        assert Path(teacher_ckpt) == teacher_dir / "teacher.ckpt"

        assert dispatch(["distill", *common, "--teacher", teacher_ckpt, "--method", "pckd_l", "--d-teacher", "16",
                         "--d-student", "4", "--experts", "2", "--Q", "5", "--pairs", "10",
                         "--out", str(student_dir)]) == 0
        report = output_values(capsys.readouterr().out)
        assert 0.0 <= float(report["C"]) <= 1.0
        student_ckpt = report["checkpoint"]

        assert dispatch(["eval", "--data", str(data), "--ckpt", student_ckpt, "--N", "5,10"]) == 0
        metrics = output_values(capsys.readouterr().out)
        assert set(metrics) == {"recall@5", "ndcg@5", "recall@10", "ndcg@10", "users"}

        groupwise = tmp_path / "groupwise.csv"
        assert dispatch(["diagnose", "--data", str(data), "--student", student_ckpt, "--teacher", teacher_ckpt,
                         "--pairs", "10", "--cells-pairs", "5", "--out", str(groupwise)]) == 0
        assert "C" in output_values(capsys.readouterr().out)
        assert pd.read_csv(groupwise, index_col=0).shape == (5, 5)

    def test_eval_rejects_foreign_checkpoint(self, dataset_dir: Path, tmp_path: Path, capsys):
        """Test that a checkpoint of another size is a configuration error."""
        model = init_model(BackboneKind.MF, 3, 3, 2, StreamFactory(0).stream("init", 0))
        path = save_checkpoint(tmp_path / "other.ckpt", model)
        assert dispatch(["eval", "--data", str(dataset_dir), "--ckpt", str(path)]) == 2

    def test_diagnose_needs_projectors(self, dataset_dir: Path, teacher_outcome, capsys):
        """Test that diagnosing a checkpoint without projector blocks fails with exit 2."""
        code = dispatch(["diagnose", "--data", str(dataset_dir), "--student", str(teacher_outcome.checkpoint_path)])
        assert code == 2
        assert "projector" in capsys.readouterr().err

    def test_diagnose_rejects_foreign_student(self, dataset_dir: Path, tmp_path: Path, capsys):
        """Test that a student trained on another dataset size exits 2 before scoring."""
        streams = StreamFactory(0)
        model = init_model(BackboneKind.MF, 3, 3, 2, streams.stream("init", 1))
        banks = [init_bank(2, 4, 2, streams.stream("init", k)) for k in (2, 3)]
        path = save_checkpoint(tmp_path / "student.ckpt", model, blocks=encode_banks(*banks))
        assert dispatch(["diagnose", "--data", str(dataset_dir), "--student", str(path)]) == 2
        err = capsys.readouterr().err
        assert "does not match the dataset" in err
        assert "student.ckpt" in err

    def test_diagnose_rejects_foreign_teacher(self, dataset_dir: Path, toy_dataset, tmp_path: Path, capsys):
        """Test that a teacher of another dataset size exits 2 even when the student fits."""
        streams = StreamFactory(0)
        student = init_model(BackboneKind.MF, toy_dataset.n_users, toy_dataset.n_items, 2, streams.stream("init", 1))
        banks = [init_bank(2, 4, 2, streams.stream("init", k)) for k in (2, 3)]
        student_path = save_checkpoint(tmp_path / "student.ckpt", student, blocks=encode_banks(*banks))
        teacher_path = save_checkpoint(
            tmp_path / "teacher.ckpt", init_model(BackboneKind.MF, 3, 3, 4, streams.stream("init", 0))
        )
        code = dispatch(
            ["diagnose", "--data", str(dataset_dir), "--student", str(student_path), "--teacher", str(teacher_path)]
        )
        assert code == 2
        assert "teacher.ckpt" in capsys.readouterr().err
