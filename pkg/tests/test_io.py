import json
import math

import numpy as np
import pytest

from manifoldgp.inference import Dataset
from manifoldgp.io import (
    atomic_write,
    dataset_to_csv,
    format_float,
    load_config,
    load_dataset,
    parse_config_text,
    records_to_csv,
    save_dataset,
    summary_to_json,
)
from manifoldgp.spectrum import circle, custom, sphere, sphere2


def test_format_float_round_trips():
    rng = np.random.default_rng(0)
    for x in rng.standard_normal(200) * 10.0 ** rng.integers(-30, 30, 200):
        assert float(format_float(x)) == x
    assert format_float(0.1) == "0.10000000000000001"


@pytest.mark.parametrize("m", [circle(), sphere2()])
def test_dataset_round_trip(tmp_path, m):
    rng = np.random.default_rng(1)
    if m.kind == circle().kind:
        sites = rng.random(7)
    else:
        sites = rng.standard_normal((7, m.dimension + 1))
        sites /= np.linalg.norm(sites, axis=1, keepdims=True)
    d = Dataset(m, sites, rng.standard_normal(7))
    f = tmp_path / "d.csv"
    save_dataset(f, d)
    back = load_dataset(f, m)
    np.testing.assert_array_equal(back.sites, d.sites)
    np.testing.assert_array_equal(back.observations, d.observations)
    assert dataset_to_csv(back) == f.read_text()


def test_dataset_headers():
    assert dataset_to_csv(Dataset(circle(), [0.25], [1.0])).splitlines()[0] == "theta,z"
    assert dataset_to_csv(Dataset(sphere2(), [[0, 0, 1]], [1.0])).splitlines()[0] == "x,y,z,obs"


@pytest.mark.parametrize(
    "text",
    [
        "",
        "theta,obs\n0.1,1\n",
        "theta,z\n",
        "theta,z\n0.1\n",
        "theta,z\n0.1,abc\n",
        "theta,z\n0.1,nan\n",
        "theta,z\n0.1,1\n0.1,2\n",
    ],
)
def test_malformed_circle_csv(tmp_path, text):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(ValueError):
        load_dataset(f, circle())


def test_sphere_unit_norm_enforced(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("x,y,z,obs\n0,0,1.000000001,0.5\n")
    with pytest.raises(ValueError, match="norm"):
        load_dataset(f, sphere2())
    f.write_text("x,y,z,obs\n0,0,1,0.5\n\n1,0,0,0.2\n")
    assert len(load_dataset(f, sphere2())) == 2


def test_spectra_without_points_have_no_dataset_format(tmp_path):
    f = tmp_path / "c.csv"
    f.write_text("theta,z\n0,1\n")
    with pytest.raises(ValueError):
        load_dataset(f, custom(1, 1.0, [0.0, 1.0], [1, 2]))
    with pytest.raises(ValueError):
        load_dataset(f, sphere(3))


def test_records_csv():
    rows = [{"n": 5, "r": 0.5, "flag": True}, {"n": 6, "r": float("nan"), "flag": False}]
    assert records_to_csv(rows) == "n,r,flag\n5,0.5,1\n6,nan,0\n"
    assert records_to_csv([], ["a"]) == "a\n"


def test_summary_json_exact_and_sorted():
    s = {"b": np.float64(1 / 3), "a": [np.int64(2), float("nan"), float("inf")], "c": np.bool_(True)}
    text = summary_to_json(s)
    obj = json.loads(text)
    assert list(obj) == ["a", "b", "c"]
    assert obj["b"] == 1 / 3
    assert obj["a"] == [2, None, "inf"]
    assert obj["c"] is True


def test_parse_config_kv():
    cfg = parse_config_text(
        """
        # paper setting
        manifold = circle
        alpha_1 = 1.0       # misspecified
        n_schedule = [25, 50, 100]
        truncation_N = 10, 100
        x0 = none
        design = "uniform_random"
        replicates = 50
        """
    )
    assert cfg == {
        "manifold": "circle",
        "alpha_1": 1.0,
        "n_schedule": [25, 50, 100],
        "truncation_N": [10, 100],
        "x0": None,
        "design": "uniform_random",
        "replicates": 50,
    }


def test_parse_config_json_and_errors(tmp_path):
    assert parse_config_text('{"seed": 3}') == {"seed": 3}
    for bad in ["seed 3", "seed = 1\nseed = 2", "{bad json", "[1, 2]x"]:
        with pytest.raises(ValueError):
            parse_config_text(bad)
    f = tmp_path / "c.txt"
    f.write_text("seed = 9\n")
    assert load_config(f) == {"seed": 9}


def test_atomic_write_leaves_no_temp_files(tmp_path):
    f = tmp_path / "out.txt"
    atomic_write(f, "hello")
    assert f.read_text() == "hello"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]
    with pytest.raises(OSError):
        atomic_write(tmp_path / "missing" / "x.txt", "x")
