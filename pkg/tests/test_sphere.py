import numpy as np
import pytest

from subfrac.groups import parse_group, parse_norm, quasi_norm
from subfrac.sphere import (ball_volume, build_sphere_quadrature, polar_integral, sphere_measure,
                            unit_ball_volume)


def test_nodes_lie_on_unit_sphere(pair):
    g, spec = pair
    sph = build_sphere_quadrature(g, spec, 32)
    assert np.allclose(quasi_norm(g, spec, sph.nodes), 1.0, rtol=1e-12)
    assert np.all(sph.weights > 0)


@pytest.mark.parametrize("gid,nid,expected", [
    ("abelian:1", "euclidean", 2.0),
    ("abelian:2", "euclidean", 2 * np.pi),
    ("abelian:3", "euclidean", 4 * np.pi),
    ("heisenberg1", "koranyi", np.pi ** 2 / 2),
])
def test_sphere_measure(gid, nid, expected):
    g, spec = parse_group(gid), parse_norm(nid)
    assert sphere_measure(g, spec) == pytest.approx(expected)
    assert build_sphere_quadrature(g, spec, 128).total == pytest.approx(expected, rel=1e-6)


def test_koranyi_chart_matches_generic_pushforward():
    g, spec = parse_group("heisenberg1"), parse_norm("koranyi")
    a = build_sphere_quadrature(g, spec, 128).total
    b = build_sphere_quadrature(g, spec, 128, method="generic").total
    assert a == pytest.approx(b, rel=1e-3)


def test_wmax_ball_volume_from_polar_formula():
    # B = [-1, 1]^2 for weights (1, 1): area 4 = sigma / Q. The push-forward
    # rule sees the corners of the square as kinks, so convergence is O(h^2).
    g, spec = parse_group("abelian:2"), parse_norm("wmax")
    err = [abs(build_sphere_quadrature(g, spec, r).total / g.Q - 4.0) for r in (64, 128, 256)]
    assert err[2] < 1e-3
    assert err[0] / err[1] > 3.5 and err[1] / err[2] > 3.5
    # heisenberg: [-1,1]^2 x [-1,1], volume 8
    g = parse_group("heisenberg1")
    assert ball_volume(g, spec, 1.0) == pytest.approx(8.0, rel=1e-4)


def test_polar_integral_gaussian():
    g, spec = parse_group("abelian:2"), parse_norm("euclidean")
    sph = build_sphere_quadrature(g, spec, 64)
    val = polar_integral(sph, lambda P: np.exp(-np.sum(P * P, axis=-1)), 8.0)
    assert val == pytest.approx(np.pi, rel=1e-8)


def test_ball_volume_scales_with_Q():
    g, spec = parse_group("heisenberg1"), parse_norm("koranyi")
    assert ball_volume(g, spec, 2.0) == pytest.approx(16 * ball_volume(g, spec, 1.0))
    assert unit_ball_volume(g, spec) == pytest.approx(np.pi ** 2 / 8)
