import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndmono.cli import RunConfig, delta_tag, main
from ndmono.noise import operator_norm
from ndmono.phantom import BallShape, Phantom
from ndmono.spectral import read_matrix

FAST = ["--order", "8", "--assembly-order", "80", "--hex-radius", "0.1", "--mesh-h", "0.05"]


@pytest.fixture
def ball_file(tmp_path):
    p = tmp_path / "ball.json"
    Phantom((BallShape(0.3 + 0.1j, 0.3, 4.0),), "ball").save(p)
    return p


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.sampled_from(["linear", "nonlinear"]), min_size=1, max_size=2, unique=True),
    st.lists(st.floats(0, 1, allow_nan=False), max_size=5),
    st.integers(0, 10**6),
    st.floats(0.9, 1.1),
    st.floats(0.01, 0.5),
)
def test_config_round_trip(methods, deltas, seed, mu, hex_radius):
    cfg = RunConfig(methods=methods, deltas=deltas, seed=seed, mu=mu, hex_radius=hex_radius)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    assert RunConfig.from_json(RunConfig.from_json(cfg.to_json()).to_json()) == cfg


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(deltas=[-1e-3])
    with pytest.raises(ValueError):
        RunConfig(methods=["other"])
    with pytest.raises(ValueError):
        RunConfig.from_json('{"unknown": 1}')


def test_delta_tags_have_no_dots():
    assert delta_tag(1e-4) == "d0p0001" and delta_tag(0.0) == "d0" and delta_tag(1e-5) == "d1e-05"


def test_gen_data_empty_phantom(tmp_path):
    p = tmp_path / "empty.json"
    Phantom((), "empty").save(p)
    out = tmp_path / "run"
    assert main(["gen-data", "--phantom", str(p), "--out", str(out), "--delta", "0", *FAST]) == 0
    A = read_matrix(out / "data" / "noiseless.bin").entries
    n = np.abs(np.r_[-8:0, 1:9])
    assert np.array_equal(A, np.diag(1.0 / n))


def test_gen_data_single_ball(tmp_path, ball_file):
    out = tmp_path / "run"
    main(["gen-data", "--phantom", str(ball_file), "--out", str(out), "--delta", "0", "--delta", "1e-3", *FAST])
    data = out / "data"
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["source"] == "exact" and manifest["exact_vs_fem"] < 1e-2
    assert (data / "exact.bin").exists() and (data / "fem.bin").exists() and (out / "mesh.off").exists()
    A = read_matrix(data / "noiseless.bin").entries
    noisy = read_matrix(data / manifest["files"]["0.001"]["file"]).entries
    assert abs(operator_norm(noisy - A) - 1e-3) < 1e-12
    seeds = [v["seed"] for v in manifest["files"].values()]
    assert len(set(seeds)) == len(seeds)


def test_pipeline_is_reproducible(tmp_path, ball_file):
    out = tmp_path / "run"
    args = ["--phantom", str(ball_file), "--out", str(out), "--delta", "0", "--delta", "1e-4", *FAST]
    main(["gen-data", *args])
    main(["reconstruct", *args])
    first = {p.name: p.read_bytes() for p in (out / "results").glob("*.csv")}
    assert len(first) == 4
    main(["reconstruct", *args])
    second = {p.name: p.read_bytes() for p in (out / "results").glob("*.csv")}
    assert first == second
    assert (out / "results" / "linear_d0p0001.svg").exists()

    assert main(["compare", str(out), "--out", str(tmp_path / "table.csv")]) == 0
    rows = (tmp_path / "table.csv").read_text().splitlines()
    assert rows[0] == "delta,run_e_abs,run_e_rel" and len(rows) == 3

    assert main(["render", str(out / "results" / "nonlinear_d0.csv"), "--phantom", str(ball_file)]) == 0
    assert (out / "results" / "nonlinear_d0.svg").exists()


def test_compare_identical_results_gives_zero(tmp_path, ball_file):
    out = tmp_path / "run"
    args = ["--phantom", str(ball_file), "--out", str(out), "--delta", "0", *FAST]
    main(["gen-data", *args])
    main(["reconstruct", *args, "--method", "nonlinear"])
    res = out / "results"
    for suffix in (".csv", ".json"):
        (res / f"linear_d0{suffix}").write_bytes((res / f"nonlinear_d0{suffix}").read_bytes())
    main(["compare", str(out), "--delta", "0", "--out", str(tmp_path / "t.csv")])
    assert (tmp_path / "t.csv").read_text().splitlines()[1] == "0.0,0,0.000000e+00"


def test_config_file_with_overrides(tmp_path, ball_file):
    cfg = RunConfig(phantom=str(ball_file), deltas=[0.0], order=8, assembly_order=80, hex_radius=0.1, mesh_h=0.05,
                    out=str(tmp_path / "run"), seed=3)
    (tmp_path / "c.json").write_text(cfg.to_json())
    main(["gen-data", "--config", str(tmp_path / "c.json"), "--seed", "9"])
    saved = RunConfig.from_json((tmp_path / "run" / "config.json").read_text())
    assert saved.seed == 9 and saved.order == 8


def test_reconstruct_reuses_run_config(tmp_path, ball_file):
    out = tmp_path / "run"
    main(["gen-data", "--phantom", str(ball_file), "--out", str(out), "--delta", "0", *FAST])
    assert main(["reconstruct", "--out", str(out), "--method", "linear"]) == 0
    assert (out / "results" / "linear_d0.csv").exists()


def test_missing_data_is_an_error(tmp_path, capsys):
    assert main(["reconstruct", "--out", str(tmp_path / "nothing")]) == 2
    assert "gen-data" in capsys.readouterr().err


def test_cache_dir_flag(tmp_path, monkeypatch):
    monkeypatch.delenv("NDMONO_CACHE_DIR", raising=False)
    # a ball no other test uses, so its H strip is not already in memory
    ball_file = tmp_path / "b.json"
    Phantom((BallShape(-0.2 + 0.05j, 0.2871, 2.0),)).save(ball_file)
    cache = tmp_path / "cache"
    main(["--cache-dir", str(cache), "gen-data", "--phantom", str(ball_file), "--out", str(tmp_path / "r"),
          "--delta", "0", *FAST])
    assert os.environ["NDMONO_CACHE_DIR"] == str(cache) and any(cache.glob("hrho_*.npy"))
