import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from kernelquant import cli
from kernelquant.flows import FlowSpec
from kernelquant.kernelspace import kernel_eval
from kernelquant.spectral import series_from_measure

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_json(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_classify_elliptic(capsys):
    code, out, _ = run(["classify", "--flow", DATA / "disc_elliptic.json"], capsys)
    assert code == 0
    assert json.loads(out) == {"class": "elliptic", "quantizable": True}


def test_classify_not_quantizable(capsys):
    code, out, _ = run(["classify", "--flow", DATA / "punctured_loxodromic.json"], capsys)
    assert code == 0 and json.loads(out)["quantizable"] is False


def test_parse_and_validation_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["classify", "--flow", bad], capsys)[0] == 2
    assert run(["classify", "--flow", tmp_path / "missing.json"], capsys)[0] == 2
    invalid = write_json(tmp_path, "inv.json", {"domain": "plane", "c": [1, 0], "a": [0, 0], "b": [1, 0]})
    assert run(["classify", "--flow", invalid], capsys)[0] == 3
    assert run(["classify"], capsys)[0] == 2
    assert run(["bogus"], capsys)[0] == 2


def test_polys(capsys):
    code, out, _ = run(["polys", "--flow", DATA / "plane_translation.json", "--n", "3", "--lambda-grid", "0:0.5:1"], capsys)
    r = json.loads(out)
    assert code == 0
    assert r["lambdas"] == [0.0, 0.5, 1.0]
    assert r["family"] == "exponential"
    assert r["K"][2] == [[0.0, 0.0], [0.0, 0.0], [0.5, 0.0]]
    assert r["values"][1][2] == [0.0, 1.0]


def test_polys_b0_invalid(capsys):
    assert run(["polys", "--flow", DATA / "punctured_rotation.json"], capsys)[0] == 3


def test_gram_and_verify(tmp_path, capsys):
    code, out, _ = run(["gram", "--flow", DATA / "punctured_rotation.json", "--series", DATA / "laurent_series.json"], capsys)
    r = json.loads(out)
    assert code == 0 and r["minIndex"] == -1
    assert r["blocks"][0][0] == [[[0.2, 0.0]]]
    code, out, _ = run(["gram", "--flow", DATA / "plane_translation.json", "--series", DATA / "plane_translation_corrupted_series.json", "--n", "6", "--verify"], capsys)
    assert code == 1 and json.loads(out)["pass"] is False


def test_kernel_eval(tmp_path, capsys):
    f = FlowSpec.from_json(json.loads((DATA / "plane_translation.json").read_text()))
    mu = cli.load_measure(str(DATA / "measure3.json"))
    S = series_from_measure(mu, f, 40)
    sp = write_json(tmp_path, "s.json", cli._jsonable(cli.series_to_json(S)))
    code, out, _ = run(["kernel", "--flow", DATA / "plane_translation.json", "--series", sp, "--eval", "0.2,0.1-0.3i"], capsys)
    assert code == 0
    K = json.loads(out)["K"][0][0]
    expected = kernel_eval(S, 0.2, 0.1 - 0.3j)[0, 0]
    assert complex(*K) == pytest.approx(expected)
    assert run(["kernel", "--flow", DATA / "plane_translation.json", "--series", sp, "--eval", "0.2"], capsys)[0] == 2
    assert run(["kernel", "--flow", DATA / "plane_translation.json", "--series", sp], capsys)[0] == 2


def test_kernel_verify_all(capsys):
    code, out, _ = run(["kernel", "--flow", DATA / "punctured_rotation.json", "--series", DATA / "laurent_series.json", "--verify-all"], capsys)
    r = json.loads(out)
    assert code == 0
    assert set(r) == {"hermSym", "psd", "invariance", "ode"}
    assert all(v["pass"] for v in r.values())


def test_spectral(tmp_path, capsys):
    series_out = tmp_path / "series.json"
    code, out, _ = run(["spectral", "--measure", DATA / "measure3.json", "--flow", DATA / "disc_hyperbolic.json",
                        "--n", "30", "--reconstruct", "0.1,0.2i", "--jacobi", "--series-out", series_out], capsys)
    r = json.loads(out)
    assert code == 0
    assert len(r["moments"]) == 7 and r["moments"][0] == [[[1.0, 0.0]]]
    assert r["reconstruction"]["residual"] <= 1e-8
    np.testing.assert_allclose(r["jacobi"]["eigenvalues"], [-0.8, 0.4, 1.1], atol=1e-12)
    assert len(json.loads(series_out.read_text())["coeffs"]) == 31


def test_spectral_requires_flow(capsys):
    assert run(["spectral", "--measure", DATA / "measure3.json", "--reconstruct", "0,0"], capsys)[0] == 2


@pytest.mark.parametrize("flow", ["plane_translation", "plane_rotation", "disc_hyperbolic", "disc_elliptic"])
def test_verify_all_reference(flow, capsys):
    code, out, _ = run(["verify-all", "--flow", DATA / f"{flow}.json", "--measure", DATA / "measure3.json", "--n", "40"], capsys)
    r = json.loads(out)
    assert code == 0, r
    assert r["metadata"]["truncation"] == 40 and r["metadata"]["seed"] == 42
    for c in r["perCheck"].values():
        assert c["pass"] == (c["maxResidual"] <= c["tolerance"])


def test_verify_all_corrupted(capsys):
    code, out, _ = run(["verify-all", "--flow", DATA / "plane_translation.json", "--measure", DATA / "measure3.json",
                        "--series", DATA / "plane_translation_corrupted_series.json", "--n", "40"], capsys)
    r = json.loads(out)
    assert code == 1
    assert r["perCheck"]["difference_equation"]["pass"] is False


def test_verify_all_degree_zero(capsys):
    code, out, _ = run(["verify-all", "--flow", DATA / "plane_rotation.json", "--measure", DATA / "measure3.json", "--n", "0"], capsys)
    assert code == 0
    assert all(c["pass"] for c in json.loads(out)["perCheck"].values())


def test_verify_all_skips_b0(capsys):
    code, out, _ = run(["verify-all", "--flow", DATA / "punctured_rotation.json", "--series", DATA / "laurent_series.json", "--n", "3"], capsys)
    r = json.loads(out)
    assert code == 0
    assert "beta_oracle" in r["metadata"]["skipped"] and "bochner" in r["metadata"]["skipped"]


def test_verify_all_needs_input(capsys):
    assert run(["verify-all", "--flow", DATA / "plane_rotation.json"], capsys)[0] == 3


def test_verify_all_threads_same_report(monkeypatch, capsys):
    argv = ["verify-all", "--flow", DATA / "disc_hyperbolic.json", "--measure", DATA / "measure3.json", "--n", "30"]
    _, one, _ = run(argv, capsys)
    # concurrent checks must not disturb each other's extended precision
    for threads in ("4", "8", "8"):
        monkeypatch.setenv("KERNELQUANT_THREADS", threads)
        assert run(argv, capsys)[1] == one


def test_verify_all_subprocess_deterministic(tmp_path):
    argv = [sys.executable, "-m", "kernelquant.cli", "verify-all", "--flow", str(DATA / "disc_elliptic.json"),
            "--measure", str(DATA / "measure3.json"), "--n", "40", "--seed", "7"]
    outs = [subprocess.run(argv, capture_output=True, check=False) for _ in range(2)]
    assert outs[0].returncode == outs[1].returncode == 0
    assert outs[0].stdout == outs[1].stdout


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_decompose_one_atom(tmp_path, capsys):
    mu = write_json(tmp_path, "mu.json", {"atoms": [{"lambda": 0.7, "W": [[[0.4, 0.0]]]}]})
    code, out, _ = run(["decompose", "--flow", DATA / "plane_translation.json", "--measure", mu, "--grid=-1:1:3,-1:1:3"], capsys)
    rows = _csv_rows(out)
    assert code == 0 and len(rows) == 9
    for r in rows:
        assert float(r["sum_re_00"]) == pytest.approx(0.4 * float(r["lam0_re"]), abs=1e-15)
        assert float(r["sum_im_00"]) == pytest.approx(0.4 * float(r["lam0_im"]), abs=1e-15)


def test_decompose_five_atoms(tmp_path, capsys):
    rng = np.random.default_rng(0)
    lam = np.sort(rng.uniform(-2, 2, 5))
    w = rng.uniform(0.1, 1, 5)
    mu = write_json(tmp_path, "mu.json", {"atoms": [{"lambda": float(l), "W": [[[float(x), 0.0]]]} for l, x in zip(lam, w)]})
    code, out, _ = run(["decompose", "--flow", DATA / "plane_rotation.json", "--measure", mu, "--n", "50", "--grid=-0.5:0.5:11,-0.5:0.5:11"], capsys)
    rows = _csv_rows(out)
    assert code == 0 and len(rows) == 121
    for r in rows:
        s = complex(float(r["sum_re_00"]), float(r["sum_im_00"]))
        e = complex(float(r["eval_re_00"]), float(r["eval_im_00"]))
        assert abs(s - e) <= 1e-8 * max(1.0, abs(s))


def test_decompose_empty_grid(tmp_path, capsys):
    out_file = tmp_path / "grid.csv"
    code, _, _ = run(["decompose", "--flow", DATA / "plane_translation.json", "--measure", DATA / "measure3.json",
                      "--grid", "0:1:0,0:1:0", "--out", out_file], capsys)
    assert code == 0 and out_file.read_text() == ""


def test_decompose_skips_outside(capsys):
    code, out, err = run(["decompose", "--flow", DATA / "disc_hyperbolic.json", "--measure", DATA / "measure3.json",
                          "--grid=-1.5:1.5:3,0:0:1", "--v", "diag"], capsys)
    assert code == 0
    assert len(_csv_rows(out)) == 1
    assert "outside" in err


def test_parsers():
    assert cli.parse_complex("1-2i") == 1 - 2j
    assert cli.parse_pair("0.1, 2j") == (0.1, 2j)
    np.testing.assert_allclose(cli.parse_grid("0:0.1:0.3"), [0, 0.1, 0.2, 0.3])
    with pytest.raises(cli.ParseFailure):
        cli.parse_grid("0:0:1")
    with pytest.raises(cli.ParseFailure):
        cli.parse_axes("0:1")
