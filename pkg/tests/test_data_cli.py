import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dfosr import cli
from dfosr.data import DataFormatError, FunctionalDataset, load_dataset, save_dataset
from dfosr.simstudy import simulate_design

AGES = np.arange(17, 48).astype(float)
OBS_AGES = [17, 22, 27, 32, 37, 42, 47]


def fertility_like(T=20, seed=0):
    rng = np.random.default_rng(seed)
    Y = np.outer(rng.uniform(50, 150, T), np.exp(-((AGES - 27) / 8) ** 2))
    Y *= 1 + 0.05 * rng.standard_normal(Y.shape)
    Y[:, ~np.isin(AGES, OBS_AGES)] = np.nan
    X = rng.standard_normal((T, 2))
    return FunctionalDataset(Y, AGES, X, [str(1990 + t) for t in range(T)], ["gdp", "school"])


def test_toy_round_trip_bit_exact(tmp_path):
    d = FunctionalDataset(np.array([[0.1, np.nan], [1 / 3, 2e-300], [-5.0, 7.25]]), np.array([0.5, 1.5]),
                          np.array([[1.0], [np.pi], [-2.0]]))
    save_dataset(d, tmp_path / "y.csv", tmp_path / "x.csv")
    e = load_dataset(tmp_path / "y.csv", tmp_path / "x.csv")
    assert np.array_equal(d.Y, e.Y, equal_nan=True)
    assert np.array_equal(d.X, e.X) and np.array_equal(d.tau, e.tau)
    assert e.time_labels == d.time_labels and e.predictor_names == d.predictor_names


@given(arrays(np.float64, (4, 5), elements=st.floats(-1e6, 1e6) | st.just(np.nan)))
def test_round_trip_property(Y):
    import tempfile, pathlib
    with tempfile.TemporaryDirectory() as tmp:
        path = pathlib.Path(tmp) / "y.csv"
        d = FunctionalDataset(Y, np.arange(5.0), None)
        save_dataset(d, path)
        assert np.array_equal(load_dataset(path).Y, Y, equal_nan=True)


def test_fertility_shaped_mask(tmp_path):
    d = fertility_like()
    save_dataset(d, tmp_path / "y.csv", tmp_path / "x.csv")
    e = load_dataset(tmp_path / "y.csv", tmp_path / "x.csv")
    assert e.missing.sum(axis=1).tolist() == [24] * e.T


def test_standardize(tmp_path):
    d = fertility_like()
    save_dataset(d, tmp_path / "y.csv", tmp_path / "x.csv")
    e = load_dataset(tmp_path / "y.csv", tmp_path / "x.csv", standardize=True)
    assert np.abs(e.X.mean(0)).max() < 1e-12
    assert np.abs(e.X.std(0, ddof=1) - 1).max() < 1e-12


@pytest.mark.parametrize("body,match", [
    ("t,0,1\na,1,2\nb,3\n", "row 3"),
    ("t,0,1\na,1,x\n", "row 2, column 3"),
    ("t,0,z\na,1,2\n", "numeric"),
])
def test_response_errors(tmp_path, body, match):
    (tmp_path / "y.csv").write_text(body)
    with pytest.raises(DataFormatError, match=match):
        load_dataset(tmp_path / "y.csv")


def test_predictor_row_mismatch(tmp_path):
    (tmp_path / "y.csv").write_text("t,0,1,2,3\na,1,2,3,4\nb,1,2,3,4\n")
    (tmp_path / "x.csv").write_text("x1\n1\n")
    with pytest.raises(DataFormatError, match="1 predictor rows but 2"):
        load_dataset(tmp_path / "y.csv", tmp_path / "x.csv")


def test_missing_file():
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_dataset("nope.csv")


# -- command line --------------------------------------------------------------------

def write_sim(tmp_path, T=20, M=12):
    tr = simulate_design("dynamic", T, M, 1)
    d = tr.dataset()
    d.Y[0, 3] = np.nan
    save_dataset(d, tmp_path / "y.csv", tmp_path / "x.csv")
    return d


FAST = ["--iters", "120", "--burnin", "20", "--thin", "1", "--k", "3"]


def test_fit_missing_file_exit_1(tmp_path, capsys):
    assert cli.main(["fit", str(tmp_path / "absent.csv")]) == 1
    assert "absent.csv" in capsys.readouterr().err


def test_unknown_flag_exit_1(capsys):
    assert cli.main(["fit", "y.csv", "--frobnicate"]) == 1
    assert cli.main([]) == 1


def test_malformed_row_exit_2(tmp_path, capsys):
    (tmp_path / "y.csv").write_text("t,0,1,2,3\na,1,2,3\n")
    assert cli.main(["fit", str(tmp_path / "y.csv"), "--out", str(tmp_path / "o")]) == 2
    assert "ragged row 2" in capsys.readouterr().err


def test_unwritable_output_exit_2(tmp_path):
    write_sim(tmp_path)
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    code = cli.main(["fit", str(tmp_path / "y.csv"), "--out", str(blocker / "sub")] + FAST)
    assert code == 2


def test_fit_and_summarize(tmp_path):
    d = write_sim(tmp_path)
    out = tmp_path / "run"
    args = ["fit", str(tmp_path / "y.csv"), "--predictors", str(tmp_path / "x.csv"),
            "--out", str(out), "--seed", "13", "--variant", "nig"] + FAST
    assert cli.main(args) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 13 and manifest["mcmc"]["variant"] == "DFOSR-NIG"
    assert len(manifest["inputs"]["response"]["sha256"]) == 64
    rows = (out / "surfaces.csv").read_text().splitlines()
    assert len(rows) - 1 == d.p * d.T * d.M * len(cli.STATISTICS)
    assert (out / "imputed.csv").exists()
    # re-summarizing the stored draws reproduces every file byte for byte
    again = tmp_path / "again"
    assert cli.main(["summarize", str(out / "draws.npz"), "--out", str(again)]) == 0
    for name in ("surfaces.csv", "fitted.csv", "loadings.csv", "imputed.csv", "obs_sd.csv"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_config_file_and_override(tmp_path):
    write_sim(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nk = 2\niters = 60\nburnin = 10\nthin = 5\nseed = 4\nvariant = fosr-ar\n")
    out = tmp_path / "o"
    assert cli.main(["fit", str(tmp_path / "y.csv"), "--config", str(cfg), "--seed", "8", "--out", str(out),
                     "--no-summary"]) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["seed"] == 8 and m["mcmc"]["K"] == 2 and m["n_draws"] == 10
    assert m["mcmc"]["variant"] == "FOSR-AR"


def test_bad_config(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert cli.main(["fit", "y.csv", "--config", str(cfg)]) == 1
    cfg.write_text("k = many\n")
    assert cli.main(["fit", "y.csv", "--config", str(cfg)]) == 1


def test_simulate_reproducible(tmp_path):
    args = ["simulate", "--design", "dynamic-small", "--reps", "2", "--seed", "7", "--variant", "fosr-ar",
            "--iters", "150", "--burnin", "50", "--thin", "1"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert a == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert len(a.decode().splitlines()) == 3


def test_static_fit_on_sparse_ages(tmp_path):
    d = fertility_like(T=15)
    save_dataset(d, tmp_path / "y.csv", tmp_path / "x.csv")
    out = tmp_path / "fert"
    code = cli.main(["fit", str(tmp_path / "y.csv"), "--predictors", str(tmp_path / "x.csv"), "--standardize",
                     "--variant", "fosr-ar", "--k", "3", "--iters", "200", "--burnin", "50", "--thin", "1",
                     "--out", str(out)])
    assert code == 0
    lines = (out / "imputed.csv").read_text().splitlines()[1:]
    ages = {float(l.split(",")[4]) for l in lines}
    assert len(ages) == 31
    assert len(lines) == 15 * 31 * len(cli.STATISTICS)
