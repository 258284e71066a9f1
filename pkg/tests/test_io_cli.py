import json
import struct

import numpy as np
import pytest

from conftest import planted_factorization
from hnmfk import io as hio
from hnmfk.cli import RunConfig, main
from hnmfk.evaluation import make_report


def write_synth_spec(path, **values):
    base = dict(family_count=3, samples_per_family=12, hierarchy_levels=1, seed=2)
    base.update(values)
    path.write_text("".join(f"{k} = {v}\n" for k, v in base.items()))
    return path


class TestFormats:
    def test_binary_layout(self, tmp_path):
        X = np.arange(6, dtype=float).reshape(2, 3)
        hio.write_matrix(tmp_path / "m.hnmf", X)
        raw = (tmp_path / "m.hnmf").read_bytes()
        assert raw[:4] == b"HNMF"
        assert struct.unpack_from("<HQQ", raw, 4) == (1, 2, 3)
        assert np.frombuffer(raw[22:], "<f8").tolist() == X.ravel().tolist()

    @pytest.mark.parametrize("name", ["m.hnmf", "m.csv"])
    def test_matrix_round_trip(self, tmp_path, rng, name):
        X = rng.random((7, 4))
        X[0, 0] = 1e-300
        hio.write_matrix(tmp_path / name, X)
        Y = hio.read_matrix(tmp_path / name)
        assert np.array_equal(X, Y)
        hio.write_matrix(tmp_path / ("again_" + name), Y)
        assert (tmp_path / name).read_bytes() == (tmp_path / ("again_" + name)).read_bytes()

    def test_bad_matrix_files(self, tmp_path):
        (tmp_path / "short.hnmf").write_bytes(b"HNM")
        (tmp_path / "magic.hnmf").write_bytes(struct.pack("<4sHQQ", b"XXXX", 1, 0, 0))
        (tmp_path / "trunc.hnmf").write_bytes(struct.pack("<4sHQQ", b"HNMF", 1, 2, 2) + b"\0" * 8)
        (tmp_path / "bad.csv").write_text("a,b\n1,2\n3\n")
        for name in ("short.hnmf", "magic.hnmf", "trunc.hnmf"):
            with pytest.raises(hio.DataError):
                hio.read_matrix(tmp_path / name)
        with pytest.raises(hio.DataError, match=":3:"):
            hio.read_matrix(tmp_path / "bad.csv")

    def test_labels_predictions_mask(self, tmp_path):
        y = np.array([3, -1, 2, -1])
        hio.write_labels(tmp_path / "y.csv", y)
        hio.write_predictions(tmp_path / "p.csv", y)
        hio.write_mask(tmp_path / "k.csv", y != -1)
        assert np.array_equal(hio.read_labels(tmp_path / "y.csv"), y)
        assert np.array_equal(hio.read_predictions(tmp_path / "p.csv"), y)
        assert np.array_equal(hio.read_mask(tmp_path / "k.csv"), y != -1)
        assert (tmp_path / "p.csv").read_text().splitlines()[:3] == [
            "sampleId,predictedClass,abstained", "0,3,0", "1,-1,1"]

    def test_label_errors(self, tmp_path):
        (tmp_path / "a.csv").write_text("id,cls\n0,1\n")
        (tmp_path / "b.csv").write_text("sampleId,classId\n0,1\n1,x\n")
        (tmp_path / "c.csv").write_text("sampleId,classId\n1,1\n")
        for name in "abc":
            with pytest.raises(hio.DataError):
                hio.read_labels(tmp_path / f"{name}.csv")

    def test_config(self, tmp_path):
        (tmp_path / "c.cfg").write_text("# comment\nk-max = 7  # trailing\n\nseed=3\n")
        assert hio.read_config(tmp_path / "c.cfg") == {"k_max": "7", "seed": "3"}
        (tmp_path / "bad.cfg").write_text("seed 3\n")
        with pytest.raises(hio.DataError, match=":1:"):
            hio.read_config(tmp_path / "bad.cfg")


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig.resolve({}, {})
        assert (cfg.perturbations, cfg.max_iter, cfg.k_min, cfg.k_max, cfg.t) == (20, 500, 1, 100, 1.0)

    def test_precedence(self):
        cfg = RunConfig.resolve({"seed": "4", "t": "0.5"}, {"seed": 9, "t": None})
        assert cfg.seed == 9 and cfg.t == 0.5

    def test_errors(self):
        with pytest.raises(hio.DataError):
            RunConfig.resolve({"bogus": "1"}, {})
        with pytest.raises(hio.DataError):
            RunConfig.resolve({"seed": "x"}, {})
        with pytest.raises(hio.DataError):
            RunConfig.resolve({"mode": "svm"}, {})


class TestCommands:
    def test_exit_codes(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["classify"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1
        assert main(["classify", str(tmp_path / "missing.hnmf"), str(tmp_path / "y.csv"),
                     "-o", str(tmp_path / "out")]) == 2

    def test_preprocess(self, tmp_path, rng):
        A, B = rng.random((6, 3)) * 10, rng.random((6, 2))
        hio.write_matrix(tmp_path / "a.csv", A)
        hio.write_matrix(tmp_path / "b.hnmf", B)
        out = tmp_path / "X.hnmf"
        assert main(["preprocess", str(tmp_path / "a.csv"), f"extra={tmp_path / 'b.hnmf'}",
                     "-o", str(out), "--provenance", str(tmp_path / "p.json")]) == 0
        X = hio.read_matrix(out)
        assert X.shape == (6, 5) and X.min() >= 0 and X.max() <= 1
        assert json.loads((tmp_path / "p.json").read_text()) == {"a": [0, 3], "extra": [3, 5]}

    def test_preprocess_mismatch(self, tmp_path, rng):
        hio.write_matrix(tmp_path / "a.csv", rng.random((6, 3)))
        hio.write_matrix(tmp_path / "b.csv", rng.random((5, 3)))
        assert main(["preprocess", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"),
                     "-o", str(tmp_path / "X.hnmf")]) == 2

    def test_synth(self, tmp_path):
        spec = write_synth_spec(tmp_path / "spec.txt", samples_per_family="5,6,7")
        assert main(["synth", str(spec), "-o", str(tmp_path / "d")]) == 0
        X = hio.read_matrix(tmp_path / "d.hnmf")
        truth = hio.read_labels(tmp_path / "d_truth.csv")
        seen = hio.read_labels(tmp_path / "d_labels.csv")
        known = hio.read_mask(tmp_path / "d_known.csv")
        assert X.shape[0] == 18 and np.bincount(truth).tolist() == [0, 5, 6, 7]
        assert np.array_equal(seen, np.where(known, truth, -1))

    def test_synth_infeasible(self, tmp_path):
        spec = write_synth_spec(tmp_path / "spec.txt", novel_family_count=3)
        assert main(["synth", str(spec), "-o", str(tmp_path / "d")]) == 2

    def test_classify_and_eval(self, tmp_path):
        spec = write_synth_spec(tmp_path / "spec.txt")
        main(["synth", str(spec), "-o", str(tmp_path / "d")])
        out = tmp_path / "run"
        args = ["classify", str(tmp_path / "d.hnmf"), str(tmp_path / "d_labels.csv"), "-o", str(out),
                "--truth", str(tmp_path / "d_truth.csv"), "--perturbations", "5", "--k-max", "5"]
        assert main(args) == 0
        assert {p.name for p in out.iterdir()} == {"predictions.csv", "hierarchy.jsonl",
                                                   "report.json", "config.json"}
        truth = hio.read_labels(tmp_path / "d_truth.csv")
        seen = hio.read_labels(tmp_path / "d_labels.csv")
        pred = hio.read_predictions(out / "predictions.csv")
        report = hio.read_report(out / "report.json")
        expected = make_report(truth, pred, seen).to_dict()
        for key in ("weighted_f1", "weighted_precision", "weighted_recall", "coverage",
                    "abstain_seen_pct", "abstain_novel_pct", "per_class"):
            assert report[key] == expected[key]
        assert hio.read_report(out / "config.json")["k_max"] == 5
        assert hio.read_hierarchy(out / "hierarchy.jsonl")[0]["nodeId"] == "0"

        assert main(["eval", str(tmp_path / "d_truth.csv"), str(out / "predictions.csv"),
                     str(tmp_path / "d_labels.csv"), "-o", str(tmp_path / "e.json")]) == 0
        assert hio.read_report(tmp_path / "e.json")["weighted_f1"] == report["weighted_f1"]

    def test_classify_all_known(self, tmp_path, rng):
        hio.write_matrix(tmp_path / "X.hnmf", rng.random((4, 3)))
        hio.write_labels(tmp_path / "y.csv", [1, 1, 2, 2])
        assert main(["classify", str(tmp_path / "X.hnmf"), str(tmp_path / "y.csv"),
                     "-o", str(tmp_path / "o")]) == 2

    def test_classify_misaligned(self, tmp_path, rng):
        hio.write_matrix(tmp_path / "X.hnmf", rng.random((4, 3)))
        hio.write_labels(tmp_path / "y.csv", [1, -1, 2])
        assert main(["classify", str(tmp_path / "X.hnmf"), str(tmp_path / "y.csv"),
                     "-o", str(tmp_path / "o")]) == 2

    def test_classify_config_file(self, tmp_path):
        spec = write_synth_spec(tmp_path / "spec.txt")
        main(["synth", str(spec), "-o", str(tmp_path / "d")])
        (tmp_path / "run.cfg").write_text("perturbations = 4\nk_max = 4\nmode = hnmf2\nseed = 5\n")
        out = tmp_path / "run"
        assert main(["classify", str(tmp_path / "d.hnmf"), str(tmp_path / "d_labels.csv"),
                     "-o", str(out), "--config", str(tmp_path / "run.cfg"), "--seed", "6"]) == 0
        cfg = hio.read_report(out / "config.json")
        assert (cfg["mode"], cfg["perturbations"], cfg["seed"]) == ("hnmf2", 4, 6)

    def test_nmfk_diag(self, tmp_path):
        hio.write_matrix(tmp_path / "X.hnmf", planted_factorization(3, seed=4, n=60, m=30))
        out = tmp_path / "diag.csv"
        assert main(["nmfk-diag", str(tmp_path / "X.hnmf"), "-o", str(out), "--k-min", "1",
                     "--k-max", "5", "--perturbations", "8"]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "k,min_silhouette,mean_silhouette,rel_error,p_value"
        sil = [float(line.split(",")[1]) for line in lines[1:]]
        assert sil[2] >= 0.8 and sil[3] < sil[2]

    def test_nmfk_diag_single_and_bad_range(self, tmp_path, rng):
        hio.write_matrix(tmp_path / "X.hnmf", rng.random((10, 4)))
        out = tmp_path / "diag.csv"
        assert main(["nmfk-diag", str(tmp_path / "X.hnmf"), "-o", str(out), "--k-max", "1",
                     "--perturbations", "3"]) == 0
        assert len(out.read_text().splitlines()) == 2
        assert main(["nmfk-diag", str(tmp_path / "X.hnmf"), "-o", str(out), "--k-max", "5"]) == 2
