import numpy as np
import pytest

from disclosure import formats
from disclosure.attacks import run_attack
from disclosure.core import ValidationError

from conftest import random_observations


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_observation_round_trip(tmp_path, fmt):
    _, _, obs = random_observations(0, 7, 4, 120)
    path = tmp_path / f"trace.{fmt}"
    formats.save_observations(obs, path, seed=2**64 - 1)
    back, meta = formats.load_observations(path)
    assert back == obs
    assert back.x.dtype == np.int64
    assert meta["seed"] == 2**64 - 1 and meta["N"] == 7 and meta["t"] == 4 and meta["rho"] == 120


def test_csv_layout_is_one_row_per_round():
    _, _, obs = random_observations(1, 3, 2, 4)
    lines = formats.dumps_observations(obs, "csv", seed=5).splitlines()
    assert lines[:4] == ["# N=3", "# t=2", "# rho=4", "# seed=5"]
    assert lines[4] == "x0,x1,x2,y0,y1,y2"
    assert len(lines) == 5 + 4
    assert lines[5] == ",".join(map(str, [*obs.x[0], *obs.y[0]]))


def test_json_layout_is_column_major():
    _, _, obs = random_observations(1, 3, 2, 4)
    import json

    doc = json.loads(formats.dumps_observations(obs, "json", seed=9))
    assert doc["x"][1] == obs.x[:, 1].tolist()
    assert (doc["N"], doc["t"], doc["rho"], doc["seed"]) == (3, 2, 4, 9)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_profiles_round_trip_bit_exact(tmp_path, fmt):
    f, p, _ = random_observations(2, 5, 2, 10)
    path = tmp_path / f"p.{fmt}"
    formats.save_profiles(p, path)
    np.testing.assert_array_equal(formats.load_profiles(path).probs, p.probs)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_estimate_round_trip_keeps_header(tmp_path, fmt):
    _, _, obs = random_observations(3, 6, 3, 200)
    est = run_attack("sda1", obs)
    est = type(est)(np.where(np.arange(6) == 2, np.nan, est.est), "sda1", {2})
    path = tmp_path / f"e.{fmt}"
    formats.save_estimate(est, path, seed=77)
    back, seed = formats.load_estimate(path)
    assert seed == 77 and back.attack_name == "sda1" and back.undefined_users == {2}
    np.testing.assert_array_equal(back.est, est.est)


def test_bad_files_report_location(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# N=2\nx0,x1,y0,y1\n1,1,2,0\n1,1,2\n")
    with pytest.raises(formats.FormatError, match=r"bad.csv:4"):
        formats.load_observations(bad)
    bad.write_text("x0,x1,y0,y1\n1,1,2,0\n2,1,2,0\n")
    with pytest.raises(ValidationError, match="round 1"):
        formats.load_observations(bad)
    bad.write_text("# N=3\nx0,x1,y0,y1\n1,1,2,0\n")
    with pytest.raises(formats.FormatError, match="N=3"):
        formats.load_observations(bad)
    with pytest.raises(formats.FormatError, match="suffix"):
        formats.load_observations(tmp_path / "trace.txt")
    with pytest.raises(formats.FormatError):
        formats.load_observations(tmp_path / "missing.csv")
