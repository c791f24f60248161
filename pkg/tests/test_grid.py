import numpy as np
import pytest

from subfrac.errors import InvalidInputError
from subfrac.grid import SampledFunction, box_grid
from subfrac.groups import parse_group


def test_box_grid_cell_centres():
    pts, idx, h = box_grid([0.0, -1.0], [1.0, 1.0], (4, 2))
    assert np.allclose(h, [0.25, 1.0]) and idx.max(axis=0).tolist() == [3, 1]
    assert np.allclose(pts[0], [0.125, -0.5]) and len(pts) == 8


def test_support_margin_enforced():
    with pytest.raises(InvalidInputError):
        SampledFunction("abelian:1", [-1], [1], 8, np.ones(8), 1)
    v = np.zeros(8)
    v[3] = 1
    SampledFunction("abelian:1", [-1], [1], 8, v, 2)


def test_roundtrip(tmp_path):
    g = parse_group("heisenberg1")
    u = SampledFunction.from_function(g, lambda P: np.exp(-np.sum(P * P, -1)) * (np.abs(P).max(-1) < 0.7),
                                      -np.ones(3), np.ones(3), (6, 5, 4))
    path = tmp_path / "u.npz"
    u.save(path)
    v = SampledFunction.load(path)
    assert v.same_grid(u) and np.array_equal(v.values, u.values) and v.group_id == u.group_id


def test_lp_norm():
    u = SampledFunction("abelian:1", [0.0], [4.0], 4, [0.0, 1.0, 2.0, 0.0], 1)
    assert u.lp_norm(2) == pytest.approx(np.sqrt(5.0))


def test_nonfinite_rejected():
    with pytest.raises(InvalidInputError):
        SampledFunction("abelian:1", [0.0], [1.0], 3, [0.0, np.nan, 0.0], 1)
