import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subfrac.errors import InvalidInputError
from subfrac.groups import (check_compatible, compose, dilate, inverse, parse_group, parse_norm,
                            quasi_norm, relative_offset)

from conftest import random_points

finite = st.one_of(st.just(0.0), st.floats(1e-100, 50), st.floats(-50, -1e-100))


def test_quasi_norm_axioms(pair, rng):
    g, spec = pair
    x = random_points(g, 2000, rng)
    q = quasi_norm(g, spec, x)
    assert np.allclose(quasi_norm(g, spec, inverse(g, x)), q, rtol=1e-12, atol=0)
    lam = np.exp(rng.uniform(-3, 3, len(x)))
    assert np.allclose(quasi_norm(g, spec, dilate(g, lam, x)), lam * q, rtol=1e-12, atol=0)
    assert quasi_norm(g, spec, g.identity) == 0.0
    assert np.all(q > 0)


def test_group_law_is_associative_with_inverse(pair, rng):
    g, _ = pair
    a, b, c = (random_points(g, 100, rng) for _ in range(3))
    assert np.allclose(compose(g, compose(g, a, b), c), compose(g, a, compose(g, b, c)))
    assert np.allclose(compose(g, a, inverse(g, a)), 0.0, atol=1e-12)


def test_dilation_is_an_automorphism(rng):
    g = parse_group("heisenberg1")
    a, b = random_points(g, 50, rng), random_points(g, 50, rng)
    lam = 1.7
    lhs = dilate(g, lam, compose(g, a, b))
    rhs = compose(g, dilate(g, lam, a), dilate(g, lam, b))
    assert np.allclose(lhs, rhs)


def test_heisenberg_law_is_not_commutative():
    g = parse_group("heisenberg1")
    a, b = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    assert compose(g, a, b)[2] != compose(g, b, a)[2]


def test_relative_offset_is_y_inverse_x(rng):
    g = parse_group("heisenberg1")
    x, y = random_points(g, 20, rng), random_points(g, 20, rng)
    assert np.allclose(relative_offset(g, x, y), compose(g, inverse(g, y), x))


def test_koranyi_formula():
    g, spec = parse_group("heisenberg1"), parse_norm("koranyi")
    x = np.array([1.0, 2.0, 0.5])
    assert quasi_norm(g, spec, x) == pytest.approx((25.0 + 16 * 0.25) ** 0.25)


@pytest.mark.parametrize("gid,nid", [("abelian:2", "koranyi"), ("heisenberg1", "euclidean")])
def test_incompatible_pairs_rejected(gid, nid):
    with pytest.raises(InvalidInputError):
        check_compatible(parse_group(gid), parse_norm(nid))


@pytest.mark.parametrize("bad", ["abelian:0", "abelian:x", "sl2", ""])
def test_bad_group_ids(bad):
    with pytest.raises(InvalidInputError):
        parse_group(bad)


def test_point_shape_checked():
    g = parse_group("abelian:2")
    with pytest.raises(InvalidInputError):
        quasi_norm(g, parse_norm("euclidean"), np.zeros((3, 3)))


@settings(max_examples=200, deadline=None)
@given(st.tuples(finite, finite, finite), st.floats(1e-3, 1e3))
def test_heisenberg_homogeneity_property(x, lam):
    g = parse_group("heisenberg1")
    x = np.array(x)
    for nid in ("koranyi", "wmax"):
        spec = parse_norm(nid)
        q = quasi_norm(g, spec, x)
        assert quasi_norm(g, spec, dilate(g, lam, x)) == pytest.approx(lam * q, rel=1e-12, abs=1e-300)
        assert quasi_norm(g, spec, inverse(g, x)) == pytest.approx(q, rel=1e-12, abs=0)
