import numpy as np
import pytest

from subfrac.groups import parse_group, parse_norm

PAIRS = [
    ("abelian:1", "euclidean"),
    ("abelian:1", "wmax"),
    ("abelian:2", "euclidean"),
    ("abelian:2", "wmax"),
    ("abelian:3", "euclidean"),
    ("heisenberg1", "koranyi"),
    ("heisenberg1", "wmax"),
]


@pytest.fixture(params=PAIRS, ids=lambda p: f"{p[0]}-{p[1]}")
def pair(request):
    gid, nid = request.param
    return parse_group(gid), parse_norm(nid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_points(g, m, rng, scale=3.0):
    return rng.normal(scale=scale, size=(m, g.N))
