import csv
import json

import numpy as np
import pytest

from spinnoise.cli import RunFileError, load_runfile, main
from spinnoise.sectors import binomial_pmf


def write_run(tmp_path, name="run.json", **overrides):
    run = {
        "n": 6,
        "kernel": {"type": "gaussian", "w": 1.0},
        "channel": {"type": "collective_depolarizing", "lambda": 0.2},
        "steps": 4,
        "trajectories": 50,
        "seed": 3,
        "output_dir": "out",
    }
    run.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(run, indent=2))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestRunFile:
    def test_defaults(self, tmp_path):
        rf = load_runfile(write_run(tmp_path))
        assert rf.config.n == 6 and rf.config.width == 1.0
        assert rf.output_dir == tmp_path / "out"

    def test_unknown_key_has_line(self, tmp_path):
        path = write_run(tmp_path, colour="blue")
        with pytest.raises(RunFileError, match=r"run.json:\d+: unknown key 'colour'"):
            load_runfile(path)

    def test_unknown_nested_key(self, tmp_path):
        path = write_run(tmp_path, kernel={"type": "gaussian", "w": 1, "sigma": 2})
        with pytest.raises(RunFileError, match="unknown key 'sigma' in kernel"):
            load_runfile(path)

    def test_syntax_error_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "n": 4,\n  "kernel": }\n')
        with pytest.raises(RunFileError, match="bad.json:3:"):
            load_runfile(path)

    def test_lambda_from_times(self, tmp_path):
        path = write_run(tmp_path, channel={"type": "collective_depolarizing", "dt": 1.0, "T": 2.0})
        assert load_runfile(path).config.channel.lam == pytest.approx(1 - np.exp(-0.5))

    def test_reference_csv(self, tmp_path):
        with open(tmp_path / "ref.csv", "w") as fh:
            fh.write("m_doubled,probability\n")
            for d, p in zip(range(-6, 7, 2), binomial_pmf(6, 0.6)):
                fh.write(f"{d},{float(p)!r}\n")
        path = write_run(tmp_path, channel={"type": "epsilon_polarizing", "lambda": 0.1,
                                            "q_ref_path": "ref.csv"},
                         initial={"type": "sector_density", "q0_path": "ref.csv"})
        cfg = load_runfile(path).config
        np.testing.assert_allclose(cfg.channel.q_ref, binomial_pmf(6, 0.6), atol=1e-15)

    @pytest.mark.parametrize("override", [
        {"n": -2}, {"n": 2.5}, {"channel": {"type": "warp"}},
        {"channel": {"type": "product", "alpha": 0.1}},
        {"channel": {"type": "collective_depolarizing", "lambda": 2}},
        {"kernel": {"type": "gaussian", "w": -1}},
    ])
    def test_invalid(self, tmp_path, override):
        with pytest.raises(RunFileError):
            load_runfile(write_run(tmp_path, **override))

    def test_cli_reports_error(self, tmp_path, capsys):
        assert main(["sample", "--config", str(write_run(tmp_path, extra=1))]) == 2
        assert "unknown key 'extra'" in capsys.readouterr().err


class TestCommands:
    def test_sample(self, tmp_path):
        path = write_run(tmp_path)
        assert main(["sample", "--config", str(path)]) == 0
        rows = read_rows(tmp_path / "out" / "trajectories.csv")
        assert len(rows) == 50 * 4
        assert set(rows[0]) == {"trajectory_id", "step", "m_doubled"}
        hist = read_rows(tmp_path / "out" / "histogram.csv")
        for step in range(1, 5):
            counts = [int(r["count"]) for r in hist if r["step"] == str(step)]
            assert sum(counts) == 50
        meta = json.loads((tmp_path / "out" / "run_meta.json").read_text())
        assert meta["seed"] == 3 and meta["joint_route"] == "closed-form"
        assert "beta-alpha" in meta["sign_convention"]["conditional_mean"]

    def test_sample_seed_override_and_postselect(self, tmp_path):
        path = write_run(tmp_path)
        out = tmp_path / "ps"
        assert main(["sample", "--config", str(path), "--seed", "9", "--postselect-m1", "2",
                     "--out", str(out)]) == 0
        rows = read_rows(out / "trajectories.csv")
        assert {r["m_doubled"] for r in rows if r["step"] == "1"} == {"2"}
        assert json.loads((out / "run_meta.json").read_text())["seed"] == 9

    def test_jobs_byte_identical(self, tmp_path):
        path = write_run(tmp_path, trajectories=300)
        main(["sample", "--config", str(path), "--out", str(tmp_path / "a"), "--jobs", "1"])
        main(["sample", "--config", str(path), "--out", str(tmp_path / "b"), "--jobs", "8"])
        for name in ("trajectories.csv", "histogram.csv", "run_meta.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_exact(self, tmp_path):
        path = write_run(tmp_path, steps=6, trajectories=400)
        assert main(["exact", "--config", str(path), "--lags", "0,1,3"]) == 0
        out = tmp_path / "out"
        dist = read_rows(out / "distribution.csv")
        assert abs(sum(float(r["probability"]) for r in dist) - 1) < 1e-12
        joint = read_rows(out / "joint_3.csv")
        assert len(joint) == 49
        assert not (out / "joint_0.csv").exists()
        cov = read_rows(out / "covariance.csv")
        assert [r["lag"] for r in cov] == ["0", "1", "3"]
        assert cov[0]["r_closed_form"] == ""
        # N=6 with w=1 is dominated by boundary truncation, so only the closed form is pinned
        assert float(cov[1]["r_closed_form"]) == pytest.approx(1.5 * 0.8, abs=1e-15)
        assert 0 < float(cov[1]["r_exact"]) < float(cov[0]["r_exact"])
        assert cov[1]["r_empirical"] and cov[1]["stderr"]

    def test_covariance_without_trajectories(self, tmp_path):
        path = write_run(tmp_path, trajectories=0, channel={"type": "product", "alpha": 0.1, "beta": 0.2})
        assert main(["covariance", "--config", str(path), "--lags", "1,2"]) == 0
        cov = read_rows(tmp_path / "out" / "covariance.csv")
        assert cov[0]["r_closed_form"] == "" and cov[0]["r_empirical"] == ""
        meta = json.loads((tmp_path / "out" / "run_meta.json").read_text())
        assert meta["joint_route"].startswith("extension")

    def test_bad_lags(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["exact", "--config", str(write_run(tmp_path)), "--lags", "a,b"])

    def test_oracle_check(self, tmp_path):
        path = write_run(tmp_path, n=4, steps=3)
        assert main(["oracle-check", "--config", str(path)]) == 0
        report = json.loads((tmp_path / "out" / "oracle_report.json").read_text())
        assert report["passed"] and report["max_tv"] < 1e-10

    def test_oracle_check_corrupted(self, tmp_path):
        path = write_run(tmp_path, n=4, steps=2)
        assert main(["oracle-check", "--config", str(path), "--corrupt-kernel"]) == 1

    def test_oracle_check_refuses_large_n(self, tmp_path, capsys):
        assert main(["oracle-check", "--config", str(write_run(tmp_path, n=9))]) == 2
        assert "refuses n=9" in capsys.readouterr().err

    def test_validate_kernel(self, tmp_path, capsys):
        path = write_run(tmp_path, n=100, kernel={"type": "gaussian", "w": 5})
        assert main(["validate-kernel", "--config", str(path), "--out", str(tmp_path / "k")]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["interior_ok"] and report["warnings"]
        assert (tmp_path / "k" / "kernel_report.json").exists()

    def test_break_even(self, capsys):
        assert main(["break-even", "--beta", "1.5707963267948966", "--epsilon", "0.01"]) == 0
        assert capsys.readouterr().out.strip() == "10000"
        main(["break-even", "--beta", "0.3", "--epsilon", "0"])
        assert capsys.readouterr().out.strip() == "unbounded"
