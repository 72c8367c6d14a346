import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wwlab import dn, io
from wwlab.paradiff import symbol_lambda
from wwlab.spectral import PeriodicGrid, SpectralField


def sample_field(dim=1, n=16, period=3.0):
    g = PeriodicGrid(dim, n, period)
    rng = np.random.default_rng(dim * 100 + n)
    return SpectralField.from_values(g, rng.normal(size=g.shape))


@pytest.mark.parametrize("dim", [1, 2])
def test_field_json_roundtrip(tmp_path, dim):
    f = sample_field(dim)
    io.save_field_json(f, tmp_path / "f.json")
    back = io.load_field_json(tmp_path / "f.json")
    assert back.grid == f.grid
    np.testing.assert_array_equal(back.coeffs, f.coeffs)
    rec = json.loads((tmp_path / "f.json").read_text())
    assert rec["dim"] == dim and rec["N"] == 16 and rec["L"] == 3.0
    assert rec["coeffs"][0] == f.coeffs.ravel()[0].real and rec["coeffs"][1] == f.coeffs.ravel()[0].imag


@pytest.mark.parametrize("dim", [1, 2])
def test_field_binary_roundtrip(tmp_path, dim):
    f = sample_field(dim, 32)
    io.save_field_binary(f, tmp_path / "f.bin")
    back = io.load_field_binary(tmp_path / "f.bin")
    np.testing.assert_array_equal(back.coeffs, f.coeffs)
    assert back.real == f.real


def test_binary_rejects_corruption(tmp_path):
    f = sample_field()
    path = tmp_path / "f.bin"
    io.save_field_binary(f, path)
    raw = path.read_bytes()
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        io.load_field_binary(tmp_path / "bad.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        io.load_field_binary(tmp_path / "short.bin")


def test_record_validation():
    with pytest.raises(ValueError):
        io.field_from_record({"dim": 1, "N": 16, "L": 1.0})
    with pytest.raises(ValueError):
        io.field_from_record({"dim": 1, "N": 16, "L": 1.0, "coeffs": [0.0] * 10})


def test_symbol_dump_roundtrip(tmp_path):
    g = PeriodicGrid(1, 16)
    lam = symbol_lambda(SpectralField.from_values(g, 0.1 * np.cos(g.x1d)))
    path = io.dump_symbol(lam, tmp_path, "lam")
    doc = json.loads(path.read_text())
    assert doc["label"] == "lambda" and doc["order"] == 1.0 and len(doc["columns"]) == len(doc["freq_set"])
    back = io.load_symbol(path)
    np.testing.assert_allclose(back.values, lam.values, atol=1e-14)
    np.testing.assert_array_equal(back.freq_set, lam.freq_set)


def test_strip_snapshot(tmp_path):
    g = PeriodicGrid(1, 16)
    fmap = dn.build_flattening(SpectralField.from_values(g, 0.05 * np.cos(g.x1d)))
    sol = dn.solve_dirichlet(fmap, SpectralField.from_values(g, np.sin(g.x1d)))
    io.save_strip_snapshot(sol, tmp_path / "strip.json", tmp_path / "hist.csv")
    z, fields = io.load_strip_snapshot(tmp_path / "strip.json")
    np.testing.assert_allclose(z, fmap.z_levels)
    for lv, f in zip(sol.v, fields):
        np.testing.assert_allclose(f.values, lv, atol=1e-13)
    rows = io.read_rows_csv(tmp_path / "hist.csv")
    assert list(rows[0]) == ["iteration", "relative_residual"]


def test_experiment_csv_column_order(tmp_path):
    rows = [{"extra": 1, "measured": 2.0, "parameter": 3}, {"parameter": 4, "measured": 5.0, "other": "x"}]
    io.write_experiment_csv(tmp_path / "e.csv", rows)
    header = (tmp_path / "e.csv").read_text().splitlines()[0]
    assert header == "parameter,measured,fitted_slope,residual,extra,other"


def test_floats_roundtrip_exactly(tmp_path):
    rows = [{"parameter": 0.1, "measured": 1 / 3}]
    io.write_experiment_csv(tmp_path / "e.csv", rows)
    back = io.read_rows_csv(tmp_path / "e.csv")
    assert float(back[0]["measured"]) == 1 / 3


def test_write_json_numpy_values(tmp_path):
    io.write_json(tmp_path / "x.json", {"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True)})
    assert json.loads((tmp_path / "x.json").read_text()) == {"a": 1.5, "b": [0, 1, 2], "c": True}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=16, max_size=16))
def test_record_roundtrip_property(vals):
    g = PeriodicGrid(1, 16, 2.0)
    f = SpectralField.from_values(g, np.array(vals))
    back = io.field_from_record(json.loads(json.dumps(io.field_record(f))))
    np.testing.assert_array_equal(back.coeffs, f.coeffs)
