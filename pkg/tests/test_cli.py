import csv
import subprocess
import sys

import numpy as np
import pytest

from hpmf import cli
from hpmf.errors import NonFinite
from hpmf.imaging import (
    load_image,
    psnr,
    quantize,
    rse,
    save_image,
    ssim,
    synthetic_lowrank,
    uniform_mask,
)

HEADER = ["sr", "psnr", "rse", "ssim", "iterations", "seconds"]


@pytest.fixture
def lowrank_png(tmp_path):
    path = tmp_path / "lowrank.png"
    save_image(path, synthetic_lowrank((32, 32, 3), 3, seed=11))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestComplete:
    def test_full_sampling_is_identity(self, tmp_path, lowrank_png):
        out, met = tmp_path / "out.png", tmp_path / "m.csv"
        code = cli.main(["complete", "--input", str(lowrank_png), "--output", str(out),
                         "--metrics-out", str(met), "--sr", "1.0"])
        assert code == 0
        np.testing.assert_array_equal(quantize(load_image(out)), quantize(load_image(lowrank_png)))
        rows = read_rows(met)
        assert rows[0] == HEADER
        assert rows[1][1] == "inf" and float(rows[1][2]) == 0.0

    def test_determinism(self, tmp_path, lowrank_png):
        outputs = []
        for run in ("a", "b"):
            d = tmp_path / run
            d.mkdir()
            args = ["complete", "--input", str(lowrank_png), "--output", str(d / "out.png"),
                    "--metrics-out", str(d / "m.csv"), "--sr", "0.3", "--seed", "5",
                    "--trace", "--no-timing"]
            assert cli.main(args) == 0
            outputs.append([(d / f).read_bytes() for f in ("out.png", "m.csv", "m_trace.csv")])
        assert outputs[0] == outputs[1]

    def test_recovery_beats_zero_fill(self, tmp_path, lowrank_png):
        met = tmp_path / "m.csv"
        assert cli.main(["complete", "--input", str(lowrank_png), "--output",
                         str(tmp_path / "o.png"), "--metrics-out", str(met),
                         "--sr", "0.4", "--seed", "42"]) == 0
        row = dict(zip(*read_rows(met)))
        img = load_image(lowrank_png)
        zero_fill = np.where(uniform_mask(img.shape, 0.4, 42), img, 0.0)
        assert float(row["rse"]) < rse(zero_fill, img)
        assert float(row["sr"]) == 0.4
        assert int(row["iterations"]) <= 500

    def test_trace_file(self, tmp_path, lowrank_png):
        met = tmp_path / "m.csv"
        cli.main(["complete", "--input", str(lowrank_png), "--metrics-out", str(met),
                  "--sr", "0.5", "--max-iters", "7", "--tol", "1e-300", "--trace"])
        rows = read_rows(tmp_path / "m_trace.csv")
        assert rows[0] == ["iteration", "relative_change", "objective", "seconds"]
        assert [int(r[0]) for r in rows[1:]] == list(range(1, 8))

    def test_mask_file(self, tmp_path, lowrank_png):
        mask = np.full((32, 32), 255, np.uint8)
        mask[10:14, :] = 0
        from PIL import Image

        Image.fromarray(mask).save(tmp_path / "mask.png")
        met = tmp_path / "m.csv"
        assert cli.main(["complete", "--input", str(lowrank_png), "--metrics-out", str(met),
                         "--mask", str(tmp_path / "mask.png"), "--max-iters", "30"]) == 0
        row = dict(zip(*read_rows(met)))
        assert float(row["sr"]) == pytest.approx(28 / 32)

    def test_config_precedence(self, tmp_path, lowrank_png):
        conf = tmp_path / "c.conf"
        conf.write_text("max_iters = 4\ntol = 1e-300\nlambda_u = 50, 60, 70\n")
        met = tmp_path / "m.csv"
        cli.main(["complete", "--input", str(lowrank_png), "--metrics-out", str(met),
                  "--config", str(conf)])
        assert read_rows(met)[1][4] == "4"
        cli.main(["complete", "--input", str(lowrank_png), "--metrics-out", str(met),
                  "--config", str(conf), "--max-iters", "2"])
        assert read_rows(met)[1][4] == "2"

    def test_config_values(self, tmp_path):
        conf = tmp_path / "c.conf"
        conf.write_text("# comment\nalpha = 0.5, 0.25, 0.25\nrank_override = 3,3,2\nmu = 1.01\n"
                        "aux_init = product\n")
        values = cli.read_config_file(conf)
        assert values == {"alpha": (0.5, 0.25, 0.25), "rank_override": (3, 3, 2), "mu": 1.01,
                          "aux_init": "product"}

    def test_unknown_config_key(self, tmp_path, lowrank_png):
        conf = tmp_path / "c.conf"
        conf.write_text("gamma = 3\n")
        assert cli.main(["complete", "--input", str(lowrank_png), "--config", str(conf)]) == 1

    def test_missing_input(self, tmp_path):
        assert cli.main(["complete", "--input", str(tmp_path / "nope.png")]) == 1

    def test_bad_sr(self, lowrank_png):
        assert cli.main(["complete", "--input", str(lowrank_png), "--sr", "1.5"]) == 1

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["complete"])
        assert exc.value.code == 1

    def test_numerical_abort(self, monkeypatch, lowrank_png, tmp_path):
        def boom(*a, **k):
            raise NonFinite("non-finite v in mode 1 at iteration 3")

        monkeypatch.setattr(cli, "run_hpmf", boom)
        assert cli.main(["complete", "--input", str(lowrank_png)]) == 2


class TestSweep:
    def test_rows_ascending(self, tmp_path, lowrank_png):
        met = tmp_path / "sweep.csv"
        code = cli.main(["sweep", "--input", str(lowrank_png), "--metrics-out", str(met),
                         "--sr", "0.5,0.05,0.25", "--output", str(tmp_path / "imgs")])
        assert code == 0
        rows = read_rows(met)
        assert rows[0] == HEADER and len(rows) == 4
        srs = [float(r[0]) for r in rows[1:]]
        assert srs == [0.05, 0.25, 0.5]
        assert len(list((tmp_path / "imgs").glob("*.png"))) == 3
        rse_by_sr = {float(r[0]): float(r[2]) for r in rows[1:]}
        assert rse_by_sr[0.5] <= rse_by_sr[0.05]

    def test_empty_list(self, tmp_path, lowrank_png):
        assert cli.main(["sweep", "--input", str(lowrank_png), "--sr", ","]) == 1

    def test_partial_rows_flushed_on_abort(self, monkeypatch, tmp_path, lowrank_png):
        real = cli.run_hpmf
        calls = []

        def flaky(problem, cfg):
            calls.append(1)
            if len(calls) == 2:
                raise NonFinite("boom")
            return real(problem, cfg)

        monkeypatch.setattr(cli, "run_hpmf", flaky)
        met = tmp_path / "sweep.csv"
        code = cli.main(["sweep", "--input", str(lowrank_png), "--metrics-out", str(met),
                         "--sr", "0.3,0.6", "--max-iters", "5"])
        assert code == 2
        assert len(read_rows(met)) == 2


class TestMetrics:
    def test_identical(self, lowrank_png, capsys):
        assert cli.main(["metrics", str(lowrank_png), str(lowrank_png)]) == 0
        assert capsys.readouterr().out.strip() == "inf,0.0,1.0"

    def test_black(self, tmp_path, lowrank_png, capsys):
        black = tmp_path / "black.png"
        save_image(black, np.zeros((32, 32, 3)))
        cli.main(["metrics", str(lowrank_png), str(black)])
        assert float(capsys.readouterr().out.split(",")[1]) == 1.0

    def test_matches_library(self, tmp_path, lowrank_png, rng, capsys):
        ref = load_image(lowrank_png)
        est_path = tmp_path / "est.png"
        save_image(est_path, ref + 0.05 * rng.standard_normal(ref.shape))
        est = load_image(est_path)
        cli.main(["metrics", str(lowrank_png), str(est_path)])
        values = [float(v) for v in capsys.readouterr().out.strip().split(",")]
        assert values == [psnr(est, ref), rse(est, ref), ssim(est, ref)]

    def test_size_mismatch(self, tmp_path, lowrank_png):
        other = tmp_path / "small.png"
        save_image(other, np.zeros((20, 20, 3)))
        assert cli.main(["metrics", str(lowrank_png), str(other)]) == 1


def test_module_entry_point(tmp_path, lowrank_png):
    res = subprocess.run([sys.executable, "-m", "hpmf", "metrics", str(lowrank_png),
                          str(lowrank_png)], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "inf,0.0,1.0"


def test_sweep_rejects_bad_ratio_before_solving(monkeypatch, tmp_path, lowrank_png):
    monkeypatch.setattr(cli, "run_hpmf", lambda *a, **k: pytest.fail("solver ran"))
    met = tmp_path / "sweep.csv"
    assert cli.main(["sweep", "--input", str(lowrank_png), "--metrics-out", str(met),
                     "--sr", "0.2,1.5"]) == 1
    assert not met.exists()
