import os

import numpy as np
import pytest

from dsid.cli import main
from dsid.dataio import read_embeddings
from dsid.netcore import DISGUISED_ONLY, Mode, forward, load_model

FAST_FLAGS = [
    "--d-shared", "6",
    "--d-feat", "4",
    "--max-epochs", "2",
    "--batch-size", "4",
    "--patience", "1",
    "--dropout", "0.2",
    "--sigma", "1.0",
]


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "tiny.dse"
    code = main(
        [
            "synth", "--out", str(path), "--subjects", "3",
            "--samples-per-subject", "6", "--d-emb", "8", "--seed", "1",
        ]
    )
    assert code == 0
    return str(path)


def manifest_lines(out_dir, name="manifest.txt"):
    with open(os.path.join(out_dir, name), "r", encoding="utf-8") as f:
        return f.read().splitlines()


def non_clock(lines):
    return [ln for ln in lines if not ln.startswith("clock = ")]


class TestSynth:
    def test_round_trip_and_summary(self, tmp_path, capsys):
        out = tmp_path / "a.dse"
        code = main(
            [
                "synth", "--out", str(out), "--subjects", "2",
                "--samples-per-subject", "4", "--d-emb", "5",
                "--lambda", "0.8", "--seed", "42",
            ]
        )
        assert code == 0
        assert "wrote" in capsys.readouterr().out
        ds = read_embeddings(str(out))
        assert len(ds) == 8 and ds.d_emb == 5
        assert ds.subjects() == [1, 2]

    def test_same_flags_are_byte_identical(self, tmp_path):
        argv = [
            "synth", "--subjects", "2", "--samples-per-subject", "3",
            "--d-emb", "4", "--seed", "7",
        ]
        a, b = tmp_path / "a.dse", tmp_path / "b.dse"
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_lambda_out_of_range(self, tmp_path, capsys):
        code = main(["synth", "--out", str(tmp_path / "x.dse"), "--lambda", "1.5"])
        assert code == 2
        assert "lambda out of range" in capsys.readouterr().err

    def test_missing_out(self, capsys):
        assert main(["synth", "--seed", "1"]) == 2
        assert "requires --out" in capsys.readouterr().err


class TestLoso:
    def run_loso_cmd(self, data_file, out_dir, extra=()):
        return main(
            ["loso", "--data", data_file, "--out", str(out_dir), "--seed", "3"]
            + FAST_FLAGS + list(extra)
        )

    def test_table_row_order_and_outputs(self, data_file, tmp_path, capsys):
        out = tmp_path / "run"
        assert self.run_loso_cmd(data_file, out) == 0
        printed = capsys.readouterr().out
        with open(out / "results.txt", "r", encoding="utf-8") as f:
            text = f.read()
        assert printed == text
        lines = text.splitlines()
        assert lines[0].split()[0] == "method"
        assert [ln.split()[0] for ln in lines[2:]] == ["vit-equivalent", "dsid-no-hsic", "dsid"]
        with open(out / "results.csv", "r", encoding="utf-8") as f:
            csv_lines = f.read().splitlines()
        assert csv_lines[0] == "method,ter_accuracy,ter_f1,der_accuracy,der_f1"
        assert [ln.split(",")[0] for ln in csv_lines[1:]] == list(
            ("vit-equivalent", "dsid-no-hsic", "dsid")
        )
        # every metric cell is populated for every row
        for ln in csv_lines[1:]:
            cells = ln.split(",")[1:]
            assert len(cells) == 4 and all(c != "-" for c in cells)

    def test_rerun_refused_without_force(self, data_file, tmp_path, capsys):
        out = tmp_path / "run"
        assert self.run_loso_cmd(data_file, out, ["--variants", "dsid"]) == 0
        capsys.readouterr()
        assert self.run_loso_cmd(data_file, out, ["--variants", "dsid"]) == 2
        assert "manifest already exists" in capsys.readouterr().err
        assert self.run_loso_cmd(data_file, out, ["--variants", "dsid", "--force"]) == 0

    def test_reruns_byte_identical_tables_and_checkpoints(self, data_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert self.run_loso_cmd(data_file, a) == 0
        assert self.run_loso_cmd(data_file, b) == 0
        for name in ("results.txt", "results.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        assert non_clock(manifest_lines(a)) == non_clock(manifest_lines(b))
        ckpt = os.path.join("folds", "dsid", "subject_001.dsm1")
        assert (a / ckpt).read_bytes() == (b / ckpt).read_bytes()

    def test_variant_subset(self, data_file, tmp_path):
        out = tmp_path / "run"
        assert self.run_loso_cmd(data_file, out, ["--variants", "dsid"]) == 0
        with open(out / "results.csv", "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert len(lines) == 2 and lines[1].startswith("dsid,")

    def test_unknown_variant(self, data_file, tmp_path, capsys):
        assert self.run_loso_cmd(data_file, tmp_path / "x", ["--variants", "vit"]) == 2
        assert "unknown variant" in capsys.readouterr().err

    def test_missing_data_file(self, tmp_path, capsys):
        code = main(
            ["loso", "--data", str(tmp_path / "absent.dse"), "--out", str(tmp_path / "o")]
            + FAST_FLAGS
        )
        assert code == 1

    def test_corrupt_data_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.dse"
        bad.write_bytes(b"not a dse file at all")
        code = main(["loso", "--data", str(bad), "--out", str(tmp_path / "o")] + FAST_FLAGS)
        assert code == 3
        assert "bad magic" in capsys.readouterr().err


class TestTrain:
    def test_writes_loadable_checkpoint(self, data_file, tmp_path, capsys):
        out = tmp_path / "fold"
        code = main(
            ["train", "--data", data_file, "--out", str(out), "--subject", "2", "--seed", "5"]
            + FAST_FLAGS
        )
        assert code == 0
        model = load_model(str(out / "checkpoint.dsm1"))
        assert model.dims.d_shared == 6 and model.dims.d_feat == 4
        lines = manifest_lines(out)
        assert "fold_seed = 7" in lines  # base 5 + subject 2
        assert any(ln.startswith("ter_accuracy = ") for ln in lines)
        assert any(ln.startswith("der_accuracy = ") for ln in lines)

    def test_probe_variant_checkpoint(self, data_file, tmp_path):
        out = tmp_path / "probe"
        code = main(
            [
                "train", "--data", data_file, "--out", str(out),
                "--subject", "1", "--variant", "baseline-disguised",
            ]
            + FAST_FLAGS
        )
        assert code == 0
        model = load_model(str(out / "checkpoint.dsm1"))
        assert model.dims.probe and model.dims.d_feat == 0
        ds = read_embeddings(data_file)
        res = forward(model, ds.embedding_matrix()[:4], Mode.EVAL, active=DISGUISED_ONLY)
        assert res.disg_logits.shape == (4, 6)
        lines = manifest_lines(out)
        assert not any(ln.startswith("ter_accuracy") for ln in lines)
        assert any(ln.startswith("der_accuracy") for ln in lines)

    def test_unknown_subject(self, data_file, tmp_path, capsys):
        code = main(
            ["train", "--data", data_file, "--out", str(tmp_path / "x"), "--subject", "99"]
            + FAST_FLAGS
        )
        assert code == 2
        assert "subject 99 not present" in capsys.readouterr().err

    def test_missing_subject_flag(self, data_file, tmp_path, capsys):
        code = main(["train", "--data", data_file, "--out", str(tmp_path / "x")] + FAST_FLAGS)
        assert code == 2
        assert "requires --subject" in capsys.readouterr().err


class TestSweep:
    def test_single_value_matches_loso_row(self, data_file, tmp_path):
        loso_out = tmp_path / "loso"
        code = main(
            [
                "loso", "--data", data_file, "--out", str(loso_out), "--seed", "3",
                "--variants", "dsid", "--alpha", "0.5",
            ]
            + FAST_FLAGS
        )
        assert code == 0
        sweep_out = tmp_path / "sweep"
        code = main(
            [
                "sweep", "--data", data_file, "--out", str(sweep_out), "--seed", "3",
                "--param", "alpha", "--values", "0.5",
            ]
            + FAST_FLAGS
        )
        assert code == 0
        with open(loso_out / "results.csv", "r", encoding="utf-8") as f:
            loso_cells = f.read().splitlines()[1].split(",")[1:]
        with open(sweep_out / "results.csv", "r", encoding="utf-8") as f:
            sweep_lines = f.read().splitlines()
        assert sweep_lines[0] == "alpha,ter_accuracy,ter_f1,der_accuracy,der_f1"
        assert sweep_lines[1].split(",")[0] == "0.5000"
        assert sweep_lines[1].split(",")[1:] == loso_cells

    def test_default_grid(self, data_file, tmp_path):
        out = tmp_path / "grid"
        code = main(
            ["sweep", "--data", data_file, "--out", str(out), "--param", "alpha"]
            + FAST_FLAGS
        )
        assert code == 0
        with open(out / "results.csv", "r", encoding="utf-8") as f:
            rows = f.read().splitlines()[1:]
        assert [r.split(",")[0] for r in rows] == [
            "0.1000", "0.3000", "0.5000", "0.7000", "0.9000", "1.0000",
        ]

    def test_companion_weight_recorded(self, data_file, tmp_path):
        out = tmp_path / "sw"
        code = main(
            [
                "sweep", "--data", data_file, "--out", str(out),
                "--param", "beta", "--values", "0.5", "--alpha", "0.3",
            ]
            + FAST_FLAGS
        )
        assert code == 0
        assert "companion_alpha = 0.3" in manifest_lines(out)

    def test_negative_values_rejected(self, data_file, tmp_path, capsys):
        code = main(
            [
                "sweep", "--data", data_file, "--out", str(tmp_path / "x"),
                "--param", "alpha", "--values", "0.5,-0.1",
            ]
            + FAST_FLAGS
        )
        assert code == 2
        assert "negative value" in capsys.readouterr().err


class TestAblate:
    def test_rows_and_variant_manifests(self, data_file, tmp_path):
        out = tmp_path / "ab"
        code = main(
            ["ablate", "--data", data_file, "--out", str(out), "--seed", "4", "--alpha", "0.5"]
            + FAST_FLAGS
        )
        assert code == 0
        with open(out / "results.csv", "r", encoding="utf-8") as f:
            rows = f.read().splitlines()[1:]
        assert [r.split(",")[0] for r in rows] == ["vit-equivalent", "dsid-no-hsic", "dsid"]

        base = manifest_lines(out / "variants", "vit-equivalent.txt")
        no_hsic = manifest_lines(out / "variants", "dsid-no-hsic.txt")
        full = manifest_lines(out / "variants", "dsid.txt")

        # the ablated model differs from the full one only in alpha
        diff = [(a, b) for a, b in zip(no_hsic, full) if a != b]
        assert diff == [("alpha = 0.0", "alpha = 0.5")]
        assert len(no_hsic) == len(full)

        assert "streams = split" in base
        assert "d_feat = 0" in base
        assert "streams = joint" in no_hsic

        # shared fold seeds across all three variants
        seeds = {ln for ln in base if ln.startswith("fold_seeds = ")}
        assert seeds == {ln for ln in no_hsic if ln.startswith("fold_seeds = ")}
        assert seeds == {ln for ln in full if ln.startswith("fold_seeds = ")}
        assert seeds == {"fold_seeds = 5,6,7"}


class TestConfigFile:
    def test_file_and_flag_precedence(self, data_file, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# comment line\nseed = 7\nalpha = 0.3\nd_shared = 6\nd_feat = 4\n"
            "max_epochs = 2\nbatch_size = 4\npatience = 1\ndropout = 0.2\nsigma = 1.0\n",
            encoding="utf-8",
        )
        out = tmp_path / "run"
        code = main(
            [
                "loso", "--data", data_file, "--out", str(out),
                "--config", str(cfg), "--seed", "9", "--variants", "dsid",
            ]
        )
        assert code == 0
        lines = manifest_lines(out)
        assert "seed = 9" in lines  # flag wins
        assert "alpha = 0.3" in lines  # file value kept
        assert "d_shared = 6" in lines

    def test_unknown_key(self, data_file, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense = 1\n", encoding="utf-8")
        code = main(
            ["loso", "--data", data_file, "--out", str(tmp_path / "x"), "--config", str(cfg)]
        )
        assert code == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_malformed_line(self, data_file, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("seed 7\n", encoding="utf-8")
        code = main(
            ["loso", "--data", data_file, "--out", str(tmp_path / "x"), "--config", str(cfg)]
        )
        assert code == 2
        assert "expected 'key = value'" in capsys.readouterr().err


class TestInspect:
    def test_embedding_file(self, data_file, capsys):
        assert main(["inspect", "--data", data_file]) == 0
        out = capsys.readouterr().out
        assert "n_samples = 18" in out
        assert "d_emb = 8" in out
        assert "subjects = 1,2,3" in out
        assert "apex_count = 18" in out  # default lambda 0.5 tags apex

    def test_checkpoint(self, data_file, tmp_path, capsys):
        out = tmp_path / "fold"
        main(
            ["train", "--data", data_file, "--out", str(out), "--subject", "1"] + FAST_FLAGS
        )
        capsys.readouterr()
        assert main(["inspect", "--data", str(out / "checkpoint.dsm1")]) == 0
        text = capsys.readouterr().out
        assert "checkpoint" in text
        assert "d_shared = 6" in text and "d_feat = 4" in text
        assert "dropout_p = 0.2" in text

    def test_probe_checkpoint_prints_zero_d_feat(self, data_file, tmp_path, capsys):
        out = tmp_path / "probe"
        main(
            [
                "train", "--data", data_file, "--out", str(out), "--subject", "1",
                "--variant", "baseline-true",
            ]
            + FAST_FLAGS
        )
        capsys.readouterr()
        assert main(["inspect", "--data", str(out / "checkpoint.dsm1")]) == 0
        assert "d_feat = 0" in capsys.readouterr().out

    def test_csv_data(self, tmp_path, capsys):
        p = tmp_path / "d.csv"
        p.write_text(
            "subject,true_label,disguised_label,frame_type,e0,e1\n"
            "1,0,1,apex,0.5,1.0\n"
            "2,2,3,onset,1.5,-2.0\n",
            encoding="utf-8",
        )
        assert main(["inspect", "--data", str(p)]) == 0
        out = capsys.readouterr().out
        assert "n_samples = 2" in out and "onset_count = 1" in out

    def test_garbage_file(self, tmp_path, capsys):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"\x00\x01\x02\x03zzzz")
        assert main(["inspect", "--data", str(p)]) == 3
        assert "bad magic" in capsys.readouterr().err
