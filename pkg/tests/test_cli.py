import json
import math
from pathlib import Path

import numpy as np
import pytest

from specgeom.cli import main
from specgeom.connes import load_metric
from specgeom.deformation import load_spectrum
from specgeom.spaces import load_space
from specgeom.support import load_support


def write_config(path, body):
    path.write_text(body, encoding="utf-8")
    return path


@pytest.fixture()
def files(tmp_path):
    assert main(["space", "cantor", "--n", "1", "--p", "2", "--depth", "5", "--out", str(tmp_path)]) == 0
    assert main(["support", "--space", str(tmp_path / "space.txt"), "--D", "4", "--density",
                 "--out", str(tmp_path)]) == 0
    return tmp_path


def test_space_and_support_files_load(files, capsys):
    X = load_space(files / "space.txt")
    assert X.n == 32
    B = load_support(files / "support.txt", X)
    assert len(B) > 0


def test_summary_formats(tmp_path, capsys):
    assert main(["space", "circle", "--samples", "12", "--out", str(tmp_path), "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows["points"] == 12
    assert main(["space", "circle", "--samples", "12", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("key,value\npoints,12\n")


def test_spectrum_and_connes(files, capsys):
    sp, su = str(files / "space.txt"), str(files / "support.txt")
    assert main(["spectrum", "--space", sp, "--support", su, "--kind", "scaled", "--factor", "2",
                 "--out", str(files)]) == 0
    X = load_space(sp)
    B = load_support(su, X)
    rho = load_spectrum(files / "spectrum.txt", B)
    assert np.array_equal(rho.values, 2 * B.lengths)
    assert (files / "eigenvalues.csv").is_file()
    capsys.readouterr()
    assert main(["connes", "--space", sp, "--support", su, "--spectrum", str(files / "spectrum.txt"),
                 "--oracle", "--out", str(files), "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows["oracle_match"] is True
    M = load_metric(files / "metric.txt")
    i, j = B.pairs[0]
    assert M.value(i, j) == 2 * B.lengths[0]


def test_deform_and_dims(files, capsys):
    sp, su = str(files / "space.txt"), str(files / "support.txt")
    capsys.readouterr()
    assert main(["deform", "--space", sp, "--support", su, "--lipschitz", "--t", "0.1",
                 "--out", str(files), "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows["uniform"] == 0.0 and rows["lipschitz"] == 0.0 and rows["compact_open"] == 0.0
    # perturbation needs few pairs to stay above double precision
    assert main(["deform", "--space", sp, "--support", su, "--perturb", "0.5", "--out", str(files)]) == 2
    assert "PrecisionError" in capsys.readouterr().err
    capsys.readouterr()
    assert main(["dims", "--space", sp, "--support", su, "--out", str(files), "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows["box_slope"] > 0
    assert (files / "box_dim.csv").read_text().startswith("t,count")


def test_perturb_small(tmp_path, capsys):
    assert main(["space", "circle", "--samples", "5", "--out", str(tmp_path)]) == 0
    sp = str(tmp_path / "space.txt")
    assert main(["support", "--space", sp, "--method", "complete", "--out", str(tmp_path)]) == 0
    su = str(tmp_path / "support.txt")
    assert main(["spectrum", "--space", sp, "--support", su, "--kind", "perturb", "--h", "0.5",
                 "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["deform", "--space", sp, "--support", su, "--spectrum", str(tmp_path / "spectrum.txt"),
                 "--perturb", "0.5", "--out", str(tmp_path), "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert 0 < rows["perturbed_uniform"] <= 0.5
    X = load_space(sp)
    out = load_spectrum(tmp_path / "perturbed_spectrum.txt", load_support(su, X))
    from specgeom.deformation import is_regular, is_simple

    assert is_simple(out) and is_regular(out)


def test_disconnected_connes_exit(tmp_path, capsys):
    (tmp_path / "space.txt").write_text("4\n0,1,2,3\n1,0,1,2\n2,1,0,1\n3,2,1,0\n")
    (tmp_path / "support.txt").write_text("#support n=4\n0,1,1\n1,0,1\n2,3,1\n3,2,1\n")
    code = main(["connes", "--space", str(tmp_path / "space.txt"), "--support", str(tmp_path / "support.txt"),
                 "--out", str(tmp_path), "--format", "json"])
    assert code == 1
    rows = json.loads(capsys.readouterr().out)
    assert rows["connected"] is False
    assert "inf" in (tmp_path / "metric.txt").read_text()


def test_bad_input_exit_two(tmp_path, capsys):
    (tmp_path / "bad.txt").write_text("2\n0 1\n2 0\n")
    assert main(["support", "--space", str(tmp_path / "bad.txt"), "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


RUN = """\
space: {generator: cantor, n: 1, p: 2, depth: 5}
support: {method: multiscale, D: 4}
spectrum: {kind: base}
analysis: [density, connes, dims, deform-convergence, bounds-check]
"""


def test_run_writes_artifacts_and_is_deterministic(tmp_path, capsys):
    cfg = write_config(tmp_path / "exp.yaml", RUN)
    assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    for name in ("space.txt", "support.txt", "spectrum.txt", "eigenvalues.csv", "metric.txt", "gamma.txt",
                 "report.json", "spectral_dim.csv", "box_dim.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    man = json.loads((a / "manifest.json").read_text())
    assert man["config"]["support"]["D"] == 4
    assert man["argv"][0] == "run"
    assert "report.json" in man["artifacts"] and "timestamp" in man
    assert all(man["checks"].values())
    report = json.loads((a / "report.json").read_text())
    assert report["density"] >= 4


def test_run_output_key_relative_to_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "exp.yaml", RUN.replace("analysis: [density, connes, dims, deform-convergence, "
                                                          "bounds-check]", "analysis: [connes]\noutput: res"))
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "res" / "metric.txt").is_file()


def test_run_disconnected_writes_error(tmp_path, capsys):
    (tmp_path / "space.txt").write_text("4\n0,1,2,3\n1,0,1,2\n2,1,0,1\n3,2,1,0\n")
    (tmp_path / "support.txt").write_text("#support n=4\n0,1,1\n1,0,1\n2,3,1\n3,2,1\n")
    cfg = write_config(tmp_path / "exp.yaml",
                       "space: {path: space.txt}\nsupport: {path: support.txt}\nanalysis: [connes]\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["module"] == "connes" and err["op"] == "connes_metric_on_Y"
    assert err["input"] == {"components": 2}
    assert (tmp_path / "o" / "manifest.json").is_file()


@pytest.mark.parametrize("body, needle", [
    ("space: {generator: cantor, n: 1, p: 2, depth: 3}\nsupport: {method: multiscale, D: 1.5}\n", "support.D"),
    ("space: {generator: sphere}\nsupport: {method: complete}\n", "generator"),
    ("space: {generator: circle, samples: 8}\nsupport: {method: complete}\nanalysis: [magic]\n", "unknown analyses"),
    ("space: {generator: circle, samples: 8}\nsupport: {method: complete}\nspectrum: {kind: perturb, h: 1}\n",
     "(0, 1)"),
    ("space: {generator: circle, samples: 8}\nsupport: {method: complete}\nextra: 1\n", "unknown keys"),
    ("- not a mapping\n", "mapping"),
])
def test_run_config_errors(tmp_path, capsys, body, needle):
    cfg = write_config(tmp_path / "exp.yaml", body)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["op"] == "load_config" and needle in err["message"]


def test_run_inf_density_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "exp.yaml", "space: {generator: circle, samples: 16}\n"
                                              "support: {method: multiscale, D: inf}\nanalysis: [density, connes]\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["density"] == 5.0
    assert "density >= D" not in report["checks"]
    assert report["local density"] == "inf"


def test_verify_suite(capsys):
    assert main(["verify", "dims"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("C5") and "PASS" in out


CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("name, code", [
    ("cantor_qqh_dims", 0),
    ("cantor_multiscale_all", 0),
    ("circle_infinite_density", 0),
    ("small_perturbed", 0),
    ("disconnected", 2),
])
def test_shipped_configs(tmp_path, capsys, name, code):
    out = tmp_path / name
    assert main(["run", str(CONFIGS / f"{name}.yaml"), "--out", str(out)]) == code
    if code:
        assert json.loads((out / "error.json").read_text())["module"] == "connes"
        return
    report = json.loads((out / "report.json").read_text())
    assert all(report["checks"].values())
    if name == "cantor_qqh_dims":
        assert abs(report["dims"]["spectral"]["slope"] - math.log2(3)) <= 0.15


def test_run_independent_of_threads(tmp_path, capsys):
    cfg = write_config(tmp_path / "exp.yaml", RUN)
    assert main(["run", str(cfg), "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    for p in sorted((tmp_path / "a").iterdir()):
        if p.name != "manifest.json":
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes(), p.name
