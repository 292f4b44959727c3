"""End-to-end command-line behavior, run in process via main(argv)."""

import json

import numpy as np
import pytest

from friendlytrain.cli import main


def write_config(path, **overrides):
    raw = {
        "dataset": {"kind": "two_moons", "train_n": 48, "val_n": 24, "test_n": 24,
                    "noise_std": 0.1, "seed": 0},
        "architecture": "toy-moons",
        "strategy": "FT",
        "epochs": 2,
        "batch_size": 16,
        "eta": 0.1,
        "tau1": 3,
        "confidence": 0.95,
        "gamma_max_simp_fraction": 0.5,
        "seeds": [0],
        "record_seconds": False,
    }
    raw.update(overrides)
    path.write_text(json.dumps(raw))
    return path


class TestMakeMoonsAndInspect:
    def test_make_then_inspect(self, tmp_path, capsys):
        out = tmp_path / "moons.amat"
        assert main(["make-moons", "--out", str(out), "--n", "30",
                     "--noise-std", "0.2", "--seed", "3"]) == 0
        assert out.exists()
        assert main(["inspect-amat", str(out)]) == 0
        text = capsys.readouterr().out
        assert "examples:    30" in text
        assert "features:    2" in text
        assert "classes:     2" in text
        assert "row 0:" in text

    def test_inspect_limit_zero_prints_no_rows(self, tmp_path, capsys):
        out = tmp_path / "m.amat"
        main(["make-moons", "--out", str(out), "--n", "10"])
        capsys.readouterr()
        assert main(["inspect-amat", str(out), "--limit", "0"]) == 0
        assert "row 0:" not in capsys.readouterr().out

    def test_inspect_missing_file_is_io_error(self, tmp_path, capsys):
        assert main(["inspect-amat", str(tmp_path / "absent.amat")]) == 3
        assert "i/o error" in capsys.readouterr().err

    def test_make_moons_reproducible(self, tmp_path):
        a, b = tmp_path / "a.amat", tmp_path / "b.amat"
        main(["make-moons", "--out", str(a), "--n", "20", "--seed", "5"])
        main(["make-moons", "--out", str(b), "--n", "20", "--seed", "5"])
        assert a.read_bytes() == b.read_bytes()


class TestTrain:
    def test_writes_history_summary_snapshot(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.json", output_dir=str(tmp_path / "runs"))
        assert main(["train", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "best epoch" in out
        runs = tmp_path / "runs"
        history = (runs / "history_FT_seed0.csv").read_text().splitlines()
        assert history[0] == "epoch,train_err,val_err,test_err,mean_tau,seconds"
        assert len(history) == 3  # header + 2 epochs
        assert all(line.endswith(",0.0") for line in history[1:]), "seconds suppressed"
        summary = (runs / "summary.csv").read_text().splitlines()
        assert summary[0] == "strategy,seed,best_epoch,test_err"
        assert summary[1].startswith("FT,0,")
        assert (runs / "best_FT_seed0.npz").exists()

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path / "exp.json")
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["train", "--config", str(cfg), "--output-dir", str(a)]) == 0
        assert main(["train", "--config", str(cfg), "--output-dir", str(b)]) == 0
        assert (a / "history_FT_seed0.csv").read_bytes() == \
               (b / "history_FT_seed0.csv").read_bytes()
        assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()

    def test_ft_without_budget_reproduces_ct_history(self, tmp_path):
        cfg = write_config(tmp_path / "exp.json", tau1=0)
        a, b = tmp_path / "ct", tmp_path / "ft"
        assert main(["train", "--config", str(cfg), "--strategy", "CT",
                     "--output-dir", str(a)]) == 0
        assert main(["train", "--config", str(cfg), "--strategy", "FT",
                     "--output-dir", str(b)]) == 0
        assert (a / "history_CT_seed0.csv").read_bytes() == \
               (b / "history_FT_seed0.csv").read_bytes()

    def test_seed_flag_overrides_and_repeats(self, tmp_path):
        cfg = write_config(tmp_path / "exp.json", output_dir=str(tmp_path / "r"))
        assert main(["train", "--config", str(cfg), "--seed", "3", "--seed", "4"]) == 0
        assert (tmp_path / "r" / "history_FT_seed3.csv").exists()
        assert (tmp_path / "r" / "history_FT_seed4.csv").exists()
        summary = (tmp_path / "r" / "summary.csv").read_text().splitlines()
        assert len(summary) == 3

    def test_trace_flag_writes_trace(self, tmp_path):
        cfg = write_config(tmp_path / "exp.json", output_dir=str(tmp_path / "r"))
        assert main(["train", "--config", str(cfg), "--trace"]) == 0
        trace = (tmp_path / "r" / "trace_FT_seed0.csv").read_text().splitlines()
        assert trace[0] == "gamma,tau,frozen_fraction,batch_loss"
        assert len(trace) == 1 + 2 * 3  # 2 epochs x ceil(48/16) iterations
        first = trace[1].split(",")
        assert first[0] == "1" and first[1] == "3"  # tau starts at tau1

    def test_dump_epochs_exports_consistent_triple(self, tmp_path):
        cfg = write_config(tmp_path / "exp.json", output_dir=str(tmp_path / "r"),
                           dump_epochs=[1])
        assert main(["train", "--config", str(cfg)]) == 0
        r = tmp_path / "r"
        x = np.load(r / "dump_FT_seed0_epoch1_x.npy")
        delta = np.load(r / "dump_FT_seed0_epoch1_delta.npy")
        x_tilde = np.load(r / "dump_FT_seed0_epoch1_xtilde.npy")
        assert np.array_equal(x_tilde, x + delta)
        assert x.shape == (16, 2)

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_numeric_blowup_exits_2_with_partial_history(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.json", output_dir=str(tmp_path / "r"),
                           adam={"alpha": 1e308})
        assert main(["train", "--config", str(cfg)]) == 2
        assert "numeric failure" in capsys.readouterr().err
        history = (tmp_path / "r" / "history_FT_seed0.csv").read_text().splitlines()
        assert history[0] == "epoch,train_err,val_err,test_err,mean_tau,seconds"

    def test_bad_config_value_exits_1(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.json", confidence=1.05)
        assert main(["train", "--config", str(cfg)]) == 1
        assert "confidence" in capsys.readouterr().err

    def test_unknown_config_field_exits_1(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.json", momentum=0.9)
        assert main(["train", "--config", str(cfg)]) == 1
        assert "momentum" in capsys.readouterr().err

    def test_missing_config_file_exits_3(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "absent.json")]) == 3

    def test_invalid_json_exits_1(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{oops")
        assert main(["train", "--config", str(p)]) == 1


class TestGrid:
    def test_two_by_two_grid(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.json", epochs=1,
                           eta=[0.1, 0.5], tau1=[1, 2],
                           output_dir=str(tmp_path / "g"))
        assert main(["grid", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "4 ok, 0 failed" in out
        assert "best:" in out
        lines = (tmp_path / "g" / "grid.csv").read_text().splitlines()
        assert lines[0] == ("eta,tau1,confidence,gamma_max_simp_fraction,"
                            "seed,best_epoch,val_err,test_err,status")
        assert len(lines) == 5
        vals = [float(line.split(",")[6]) for line in lines[1:]]
        assert vals == sorted(vals), "rows ordered by validation error"
        assert all(line.endswith(",ok") for line in lines[1:])

    def test_scalar_config_is_a_one_point_grid(self, tmp_path):
        cfg = write_config(tmp_path / "exp.json", epochs=1,
                           output_dir=str(tmp_path / "g"))
        assert main(["grid", "--config", str(cfg)]) == 0
        lines = (tmp_path / "g" / "grid.csv").read_text().splitlines()
        assert len(lines) == 2


class TestGradcheck:
    def test_single_preset_passes(self, capsys):
        assert main(["gradcheck", "--arch", "toy-moons"]) == 0
        out = capsys.readouterr().out
        assert "toy-moons" in out
        assert "ok" in out

    def test_unknown_arch_is_treated_as_missing_file(self, capsys):
        assert main(["gradcheck", "--arch", "no-such-net"]) == 3
        assert "no-such-net" in capsys.readouterr().err

    def test_invalid_descriptor_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"layers": [{"kind": "quantum"}]}))
        assert main(["gradcheck", "--arch", str(bad)]) == 1
        assert "quantum" in capsys.readouterr().err

    def test_explicit_input_shape(self, tmp_path, capsys):
        arch = tmp_path / "tiny.json"
        arch.write_text(json.dumps({"layers": [
            {"kind": "linear", "units": 4},
            {"kind": "relu"},
            {"kind": "linear", "units": None},
        ]}))
        assert main(["gradcheck", "--arch", str(arch), "--input-shape", "6"]) == 0
        assert "ok" in capsys.readouterr().out
