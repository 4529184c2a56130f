import json
import shutil
import subprocess

import numpy as np
import pytest

from nslab import cli
from nslab.io import read_archive, read_field

SMALL = ["--n", "16", "--t-end", "0.05", "--stride", "10"]


def _run(*args):
    return cli.main([str(a) for a in args])


def _csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    return lines


@pytest.fixture(scope="module")
def preset_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("preset")
    assert _run("simulate", "--preset", "beltrami-perturbation", "--out", out) == 0
    return out


class TestGenerate:
    def test_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            assert _run("generate", "--family", "abc", "--A", 1, "--B", 1, "--C", 1, "--out", tmp_path / f"{name}.nsrf") == 0
        assert (tmp_path / "a.nsrf").read_bytes() == (tmp_path / "b.nsrf").read_bytes()
        assert read_field(tmp_path / "a.nsrf").grid.n == 32

    @pytest.mark.parametrize("family", ["bump", "axisym", "taylor-green", "taylor-green-3d", "random"])
    def test_families(self, tmp_path, family):
        assert _run("generate", "--family", family, "--n", 16, "--out", tmp_path / "f.nsrf") == 0
        f = read_field(tmp_path / "f.nsrf")
        assert np.isfinite(f.values).all()

    def test_bad_support(self, tmp_path):
        assert _run("generate", "--family", "bump", "--shift", 3, "--out", tmp_path / "f.nsrf") == 2


class TestPresets:
    def test_every_result_has_a_preset(self):
        tags = {p["result"] for p in cli.PRESETS.values()}
        assert tags == {"thm1.7", "prop2.1", "prop2.3", "prop2.4", "thm6.1-gap", "appendix-ckn",
                        "appendix-stein", "prop4.4-mollified"}

    def test_lookup_by_result(self):
        assert cli.preset_config("thm1.7").scenario == "regular-set"
        assert cli.preset_config("prop2.4").scenario == "beltrami-perturbation"
        with pytest.raises(cli.ConfigError):
            cli.preset_config("nope")

    def test_hash_ignores_output(self):
        a = cli.preset_config("appendix-ckn")
        b = cli.preset_config("appendix-ckn")
        b.output = "elsewhere"
        assert a.digest() == b.digest()
        b.seeds = [1]
        assert a.digest() != b.digest()


class TestSimulate:
    def test_preset_run(self, preset_run):
        man = json.loads((preset_run / "traj" / "manifest.json").read_text())
        assert man["meta"]["result"] == "prop2.4"
        assert man["meta"]["perturbation_weighted_L2"] < man["meta"]["threshold"]
        lines = _csv(preset_run / "energy_audit.csv")
        assert lines[1] == "t,energy,dissipation_cum,ledger,gronwall_bound"
        assert len(lines) == 2 + 501 + 2
        tr = read_archive(preset_run / "traj")
        assert tr.reference is not None and len(tr) == 51

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            assert _run("simulate", "--preset", "regular-set", *SMALL, "--out", tmp_path / name) == 0
        assert (tmp_path / "a" / "energy_audit.csv").read_bytes() == (tmp_path / "b" / "energy_audit.csv").read_bytes()
        for f in (tmp_path / "a" / "traj").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / "traj" / f.name).read_bytes()

    @pytest.mark.parametrize("preset", ["extension-2d", "axisymmetric"])
    def test_other_perturbed_presets(self, tmp_path, preset):
        assert _run("simulate", "--preset", preset, *SMALL, "--out", tmp_path) == 0
        man = json.loads((tmp_path / "traj" / "manifest.json").read_text())
        assert 0 < man["meta"]["perturbation_weighted_L2"] < man["meta"]["threshold"]

    def test_modes(self, tmp_path):
        assert _run("simulate", "--mode", "direct", *SMALL, "--out", tmp_path / "d") == 0
        assert _run("simulate", "--mode", "2d", *SMALL, "--out", tmp_path / "t") == 0
        assert read_archive(tmp_path / "t" / "traj").grid.dims == 2

    def test_mollified(self, tmp_path):
        cfg = tmp_path / "m.yaml"
        cfg.write_text("preset: mollified-ladder\ngrid: {n: 16}\nsolver: {t_end: 0.02}\nparams: {eps: [0.4, 0.0]}\n")
        assert _run("simulate", "--config", cfg, "--out", tmp_path / "o") == 0
        lines = _csv(tmp_path / "o" / "mollified.csv")
        assert lines[1] == "eps,t,l2_diff_next,monitor_max"
        assert len([l for l in lines if not l.startswith("#")]) == 3

    def test_from_files(self, tmp_path):
        _run("generate", "--family", "abc", "--n", 16, "--A", 0.3, "--B", 0.3, "--C", 0.3, "--out", tmp_path / "w.nsrf")
        assert _run("perturb", "--base", tmp_path / "w.nsrf", "--out", tmp_path / "v.nsrf") == 2  # no eigenvalue in file
        _run("generate", "--family", "bump", "--n", 16, "--amplitude", 1e-6, "--out", tmp_path / "v.nsrf")
        assert _run("simulate", "--mode", "perturbed", "--reference", tmp_path / "w.nsrf", "--initial",
                    tmp_path / "v.nsrf", *SMALL, "--out", tmp_path / "o") == 0
        assert read_archive(tmp_path / "o" / "traj").reference is not None


class TestErrors:
    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("grid: {n: 15}\n")
        assert _run("simulate", "--config", cfg) == 2
        cfg.write_text("mystery: 1\n")
        assert _run("simulate", "--config", cfg) == 2
        cfg.write_text("constants: {delta9: 1}\n")
        assert _run("simulate", "--config", cfg) == 2
        cfg.write_text(": : :\n")
        assert _run("simulate", "--config", cfg) == 2
        assert _run("simulate", "--config", tmp_path / "missing.yaml") == 2
        assert _run("simulate", "--preset", "unknown") == 2

    def test_numerical_failure(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("mode: direct\ngrid: {n: 16}\nsolver: {dt: 0.05, t_end: 5.0, stride: 1, blowup_factor: 10}\n"
                       "fields: {initial: {family: random, amplitude: 500}}\n")
        assert _run("simulate", "--config", cfg, "--out", tmp_path / "o") == 3

    def test_parse_error(self):
        with pytest.raises(SystemExit) as e:
            cli.main(["simulate", "--mode", "warp"])
        assert e.value.code == 2


class TestAnalysis:
    def test_regular_map(self, preset_run, tmp_path):
        assert _run("regular-map", "--traj", preset_run / "traj", "--center", "0,0,0", "--out", tmp_path) == 0
        lines = _csv(tmp_path / "regular_map.csv")
        assert lines[1] == "t,x1,x2,x3,r,score,pass"
        alpha = float(lines[-1].split()[1].split("=")[1])
        assert alpha > 0
        first = (tmp_path / "regular_map.csv").read_bytes()
        _run("regular-map", "--traj", preset_run / "traj", "--center", "0,0,0", "--out", tmp_path)
        assert (tmp_path / "regular_map.csv").read_bytes() == first

    def test_tstar_and_segment(self, preset_run, tmp_path):
        assert _run("tstar", "--traj", preset_run / "traj", "--xi", "0.5,0,0", "--out", tmp_path) == 0
        assert "# bracket_ok=1" in _csv(tmp_path / "tstar.csv")
        assert _run("tstar", "--traj", preset_run / "traj", "--gamma-M", 2, "--out", tmp_path) == 0
        assert _run("segment", "--traj", preset_run / "traj", "--T", 0.4, "--xi", "0.5,0,0", "--out", tmp_path) == 0
        assert "# monotone=1" in _csv(tmp_path / "segment.csv")
        assert _run("segment", "--traj", preset_run / "traj", "--T", 0.4, "--xi", "9,0,0", "--out", tmp_path) == 2

    def test_decompose_and_kato(self, tmp_path):
        assert _run("decompose", "--seeds", "0,1", "--n", 16, "--out", tmp_path) == 0
        lines = _csv(tmp_path / "decompose.csv")
        assert lines[1].startswith("seed,s,") and len(lines) == 4
        _run("generate", "--family", "bump", "--n", 16, "--out", tmp_path / "b.nsrf")
        assert _run("decompose", "--field", tmp_path / "b.nsrf", "--s", 0.5, "--out", tmp_path) == 0
        assert _run("decompose", "--field", tmp_path / "b.nsrf", "--out", tmp_path) == 2
        assert _run("kato-check", "--field", tmp_path / "b.nsrf", "--out", tmp_path) == 0
        assert _csv(tmp_path / "kato.csv")[1] == "pass,w0_L3,eps1,l5_ratio"

    def test_inequality_harnesses(self, tmp_path):
        assert _run("verify-ckn", "--seeds", "0,1", "--n", 16, "--out", tmp_path) == 0
        lines = _csv(tmp_path / "ckn.csv")
        assert len(lines) == 2 + 4 * 2 * 3
        first = (tmp_path / "ckn.csv").read_bytes()
        _run("verify-ckn", "--seeds", "0,1", "--n", 16, "--out", tmp_path)
        assert (tmp_path / "ckn.csv").read_bytes() == first
        assert _run("verify-stein", "--seeds", "0", "--n", 16, "--out", tmp_path) == 0
        assert len(_csv(tmp_path / "stein.csv")) == 2 + 6 * 3 + 2

    def test_norms(self, tmp_path):
        _run("generate", "--family", "abc", "--n", 16, "--out", tmp_path / "a.nsrf")
        assert _run("norms", "--field", tmp_path / "a.nsrf", "--out", tmp_path) == 0
        rows = dict(l.split(",") for l in _csv(tmp_path / "norms.csv")[2:])
        assert float(rows["Linf"]) == pytest.approx(np.sqrt(6), rel=0.05)


@pytest.mark.skipif(shutil.which("nslab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["nslab", "generate", "--family", "abc", "--n", "16", "--out", str(tmp_path / "a.nsrf")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "wrote" in res.stdout
