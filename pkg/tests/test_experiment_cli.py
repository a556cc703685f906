from pathlib import Path

import numpy as np
import pytest

from qpat2d.cli import main
from qpat2d.experiment import ConfigError, parse_config, run_experiment

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def read_bytes_sorted(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).glob("*.csv"))}


class TestParseConfig:
    def test_parses_smoke_config(self):
        cfg = parse_config(CONFIGS / "smoke_h1.cfg")
        assert cfg.scheme == "h1"
        assert cfg.grid.nx == 16
        assert cfg.quad.ns == 8
        assert len(cfg.sources) == 1
        assert cfg.seed == 1234

    def test_missing_field_names_it(self, tmp_path):
        text = (CONFIGS / "smoke_h1.cfg").read_text().replace("nx = 16\n", "")
        bad = tmp_path / "bad.cfg"
        bad.write_text(text)
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        assert "grid.nx" in str(err.value)

    def test_unknown_scheme_rejected(self, tmp_path):
        text = (CONFIGS / "smoke_h1.cfg").read_text().replace("kind = h1", "kind = magic")
        bad = tmp_path / "bad.cfg"
        bad.write_text(text)
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            parse_config("/nonexistent/path.cfg")


class TestRunExperiment:
    def test_smoke_run_artifacts(self, tmp_path):
        out = run_experiment(CONFIGS / "smoke_h1.cfg", out_dir=tmp_path / "run")
        for name in (
            "manifest.txt",
            "truth_mu_a.csv",
            "truth_mu_s.csv",
            "data_energy_1.csv",
            "recon_mu_a.csv",
            "recon_mu_s.csv",
            "iterations.log",
        ):
            assert (out / name).is_file(), name
        assert (out / "truth_mu_a.pgm").is_file()

    def test_byte_identical_reruns(self, tmp_path):
        out1 = run_experiment(CONFIGS / "smoke_h1.cfg", out_dir=tmp_path / "a")
        out2 = run_experiment(CONFIGS / "smoke_h1.cfg", out_dir=tmp_path / "b")
        files1, files2 = read_bytes_sorted(out1), read_bytes_sorted(out2)
        assert files1.keys() == files2.keys() and len(files1) > 0
        for name in files1:
            assert files1[name] == files2[name], name

    def test_seed_override_changes_noise(self, tmp_path):
        out1 = run_experiment(CONFIGS / "smoke_h1.cfg", out_dir=tmp_path / "a", seed=1)
        out2 = run_experiment(CONFIGS / "smoke_h1.cfg", out_dir=tmp_path / "b", seed=2)
        d1 = (out1 / "data_energy_1.csv").read_bytes()
        d2 = (out2 / "data_energy_1.csv").read_bytes()
        assert d1 != d2

    def test_beer_lambert_table(self, tmp_path):
        out = run_experiment(CONFIGS / "beer_lambert.cfg", out_dir=tmp_path / "bl")
        lines = (out / "beer_lambert_errors.csv").read_text().strip().splitlines()
        assert lines[0] == "nx,linf_rel_error"
        rows = [line.split(",") for line in lines[1:]]
        assert [int(r[0]) for r in rows] == [64, 128]
        errs = [float(r[1]) for r in rows]
        assert errs[1] <= 0.05 and errs[0] / errs[1] >= 1.7

    def test_data_only_skips_reconstruction(self, tmp_path):
        out = run_experiment(
            CONFIGS / "smoke_h1.cfg", out_dir=tmp_path / "fw", data_only=True
        )
        assert (out / "data_energy_1.csv").is_file()
        assert not (out / "recon_mu_a.csv").exists()


class TestCli:
    def test_info_exits_zero(self, capsys):
        assert main(["info", "--config", str(CONFIGS / "smoke_h1.cfg")]) == 0
        assert "scheme: h1" in capsys.readouterr().out

    def test_missing_field_exit_2(self, tmp_path, capsys):
        text = (CONFIGS / "smoke_h1.cfg").read_text().replace("ns = 8\n", "")
        bad = tmp_path / "bad.cfg"
        bad.write_text(text)
        code = main(["run", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "quadrature.ns" in capsys.readouterr().err

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_forward_verb(self, tmp_path):
        code = main(
            ["forward", "--config", str(CONFIGS / "smoke_h1.cfg"), "--out", str(tmp_path / "f")]
        )
        assert code == 0
        assert (tmp_path / "f" / "data_energy_1.csv").is_file()

    def test_gradcheck_verb(self, tmp_path):
        code = main(
            ["gradcheck", "--config", str(CONFIGS / "gradcheck.cfg"), "--out", str(tmp_path / "g")]
        )
        assert code == 0
        lines = (tmp_path / "g" / "gradcheck.csv").read_text().strip().splitlines()
        assert lines[0] == "step,rel_error"
        errors = [float(line.split(",")[1]) for line in lines[1:]]
        assert min(errors) < 1e-4

    def test_run_smoke_and_manifest(self, tmp_path):
        code = main(
            ["run", "--config", str(CONFIGS / "smoke_h1.cfg"), "--out", str(tmp_path / "r"),
             "--threads", "1"]
        )
        assert code == 0
        manifest = (tmp_path / "r" / "manifest.txt").read_text()
        assert "scheme=h1" in manifest
        assert "config_sha256=" in manifest
