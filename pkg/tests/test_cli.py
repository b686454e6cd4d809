"""End-to-end checks for the waveop2d command line driver.

Everything runs in-process through cli.main() so exit codes and artifact
bytes can be asserted directly; one test shells out to the installed
console script to make sure the entry point is wired up.  Configs use a
literal coupling (the frozen s-wave critical value) instead of
`critical:k` so no bisection runs inside these tests.
"""

import os
import subprocess

import pytest

from waveop2d import cli

from conftest import C_SWAVE

# Inside the rank-gap dead band between the s-wave and eigenvalue-only
# readings: classification must refuse rather than guess.
C_UNCERTAIN = 10.776541978612086

BASE = """\
[potential]
family = gaussian
coupling = {coupling}
beta = 8.0

[grid]
radius = 30.0
n_r = 48
n_theta = 16

[lambda]
lambda1 = 0.1

[sweep]
n_osc = 6
n_radii = 2
n_angles = 2
lo = 0.5
hi = 20.0

[output]
dir = {out}
"""


def write_config(tmp, coupling=C_SWAVE, drop=None):
    text = BASE.format(coupling="%.17g" % coupling, out=tmp / "out")
    if drop is not None:
        text = "\n".join(ln for ln in text.splitlines()
                         if not ln.startswith(drop + " ")) + "\n"
    path = tmp / "run.cfg"
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def classified(tmp_path_factory):
    """One classify run shared by the tests that only need its artifact."""
    tmp = tmp_path_factory.mktemp("cli")
    cfg = write_config(tmp)
    assert cli.main(["classify", "--config", cfg]) == 0
    return cfg, str(tmp / "out")


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("waveop2d ")


def test_console_script_installed():
    done = subprocess.run(["waveop2d", "--version"],
                          capture_output=True, text=True)
    assert done.returncode == 0
    assert done.stdout.startswith("waveop2d ")


def test_pipeline_and_determinism(tmp_path):
    cfg = write_config(tmp_path)
    outs = [str(tmp_path / d) for d in ("out1", "out2")]
    for out in outs:
        assert cli.main(["classify", "--config", cfg, "--out", out]) == 0
        assert cli.main(["bounds", "swave", "--config", cfg,
                         "--out", out]) == 0
        assert cli.main(["report", "--config", cfg, "--out", out]) == 0

    names = ["classify.json", "classify.txt", "bounds_swave.csv",
             "bounds_swave.txt", "manifest.txt"]
    for name in names:
        a = read_bytes(os.path.join(outs[0], name))
        b = read_bytes(os.path.join(outs[1], name))
        if name == "manifest.txt":
            # the timestamp line is the only tolerated difference
            strip = lambda blob: [ln for ln in blob.splitlines()
                                  if not ln.startswith(b"generated:")]
            assert strip(a) == strip(b)
        else:
            assert a == b
        head = a.decode("utf-8").splitlines()
        assert head[0].startswith("# waveop2d ")
        assert head[1].startswith("# config sha256: ")

    txt = read_bytes(os.path.join(outs[0], "classify.txt")).decode("utf-8")
    assert "kind: SWaveResonance" in txt
    assert "certified: True" in txt
    payload = cli._read_json_artifact(os.path.join(outs[0], "classify.json"))
    assert payload["bisection"] is None
    assert payload["h_minus"]["b"] != 0.0
    assert payload["config_sha256"] == cli.load_config(cfg).sha

    csv = read_bytes(os.path.join(outs[0], "bounds_swave.csv"))
    lines = csv.decode("utf-8").splitlines()
    assert lines[2] == "x_abs,y_abs,angle,re_A,im_A,majorant,ratio"
    manifest = read_bytes(os.path.join(outs[0], "manifest.txt"))
    assert b"bounds_swave: C=" in manifest
    assert b"artifacts: 2" in manifest


def test_missing_required_key_exits_1(tmp_path, capsys):
    cfg = write_config(tmp_path, drop="beta")
    assert cli.main(["classify", "--config", cfg]) == 1
    err = capsys.readouterr().err
    assert "config error" in err
    assert "beta" in err


def test_uncertain_coupling_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, coupling=C_UNCERTAIN)
    assert cli.main(["classify", "--config", cfg]) == 2
    assert "classification uncertain" in capsys.readouterr().err


def test_bounds_before_classify_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert cli.main(["bounds", "d3", "--config", cfg]) == 3
    err = capsys.readouterr().err
    assert "missing prerequisite" in err
    assert "classify" in err


def test_bounds_kind_mismatch_exits_3(classified, capsys):
    cfg, _ = classified               # artifact records SWaveResonance
    assert cli.main(["bounds", "d3", "--config", cfg]) == 3
    assert "EigenvalueOnly" in capsys.readouterr().err


def test_bounds_stale_hash_exits_3(classified, capsys):
    cfg, _ = classified
    code = cli.main(["bounds", "swave", "--config", cfg,
                     "--lambda1", "0.05"])
    assert code == 3
    assert "different config" in capsys.readouterr().err


def test_report_without_artifacts_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert cli.main(["report", "--config", cfg]) == 3
    assert "missing prerequisite" in capsys.readouterr().err


def test_bounds_js_artifact(classified):
    cfg, out = classified
    assert cli.main(["bounds", "Js", "--config", cfg]) == 0
    lines = read_bytes(os.path.join(out, "bounds_Js.csv")) \
        .decode("utf-8").splitlines()
    assert lines[2] == "r,s,re_I,im_I,k,ratio"
    assert len(lines) == 3 + 6 * 6
    txt = read_bytes(os.path.join(out, "bounds_Js.txt")).decode("utf-8")
    assert "C=" in txt
    assert "pass" in txt
    # report folds the sweep summary in next to the classification
    assert cli.main(["report", "--config", cfg]) == 0
    manifest = read_bytes(os.path.join(out, "manifest.txt")).decode("utf-8")
    assert "classify: kind=SWaveResonance" in manifest
    assert "bounds_Js: C=" in manifest


def test_bounds_bracket_csv(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["bounds", "bracket", "--config", cfg]) == 0
    lines = read_bytes(str(tmp_path / "out" / "bounds_bracket.csv")) \
        .decode("utf-8").splitlines()
    assert lines[2] == "label,value,bound,verdict"
    row = next(ln for ln in lines if ln.startswith("alpha=3 beta=3,"))
    _, fitted, expected, verdict = row.split(",")
    assert abs(float(fitted) - 3.0) <= 0.05
    assert float(expected) == 3.0
    assert verdict == "pass"


def test_bounds_lp_kernels_stem(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["bounds", "lp-kernels", "--config", cfg]) == 0
    # dashed target maps onto an underscore artifact stem
    assert (out / "bounds_lp_kernels.csv").exists()
    txt = (out / "bounds_lp_kernels.txt").read_text(encoding="utf-8")
    assert "K1" in txt
    assert "pass" in txt


def test_config_hash_tracks_numerics_only(tmp_path):
    cfg = write_config(tmp_path)
    base = cli.load_config(cfg)
    assert cli.load_config(cfg, out="elsewhere", jobs=4).sha == base.sha
    assert cli.load_config(cfg, lambda1=0.05).sha != base.sha
    assert cli.load_config(cfg, tol=1e-6).sha != base.sha


def test_config_parse_and_validation_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[nope]\nx = 1\n", encoding="utf-8")
    with pytest.raises(cli.ConfigError, match="unknown section"):
        cli.load_config(str(bad))
    bad.write_text("[potential]\nfamily gaussian\n", encoding="utf-8")
    with pytest.raises(cli.ConfigError, match="key = value"):
        cli.load_config(str(bad))
    bad.write_text("family = gaussian\n", encoding="utf-8")
    with pytest.raises(cli.ConfigError, match="outside"):
        cli.load_config(str(bad))
    cfg = write_config(tmp_path)
    with pytest.raises(cli.ConfigError, match="lambda1"):
        cli.load_config(cfg, lambda1=0.7)
    text = open(cfg, encoding="utf-8").read()
    bad.write_text(text.replace("coupling = %.17g" % C_SWAVE,
                                "coupling = critical:0"), encoding="utf-8")
    with pytest.raises(cli.ConfigError, match="k >= 1"):
        cli.load_config(str(bad))


def test_bundled_configs_load():
    import importlib.resources as res
    root = res.files("waveop2d") / "configs"
    names = sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))
    assert names == ["eigenonly.cfg", "regular.cfg", "swave.cfg"]
    for name in names:
        cfg = cli.load_config(str(root / name), out="ignored")
        assert len(cfg.sha) == 64
