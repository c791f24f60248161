import os
import subprocess
import sys

import numpy as np
import pytest

from subfrac import kernels
from subfrac.grid import box_grid
from subfrac.groups import parse_group, parse_norm
from subfrac.nonlocal_ops import FracParams, _codes, kernel
from subfrac.sphere import build_sphere_quadrature

from conftest import random_points

BACKENDS = kernels.available_backends()
needs_cython = pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")


def test_kernel_symmetry(pair, rng):
    g, spec = pair
    P = FracParams.for_group(g, 0.4, 2.5)
    x, y = random_points(g, 1000, rng), random_points(g, 1000, rng)
    a, b = kernel(g, spec, P, x, y), kernel(g, spec, P, y, x)
    assert np.max(np.abs(a - b) / a) <= 1e-12


def test_kernel_left_invariant(rng):
    g, spec = parse_group("heisenberg1"), parse_norm("koranyi")
    P = FracParams.for_group(g, 0.5, 2.0)
    from subfrac.groups import compose
    x, y, z = (random_points(g, 200, rng) for _ in range(3))
    assert np.allclose(kernel(g, spec, P, compose(g, z, x), compose(g, z, y)),
                       kernel(g, spec, P, x, y), rtol=1e-9)


def _inputs(gid, nid, n=9):
    g, spec = parse_group(gid), parse_norm(nid)
    pts, _, _ = box_grid(-np.ones(g.N), np.ones(g.N), n)
    pts = np.ascontiguousarray(pts)
    idx = np.ascontiguousarray(np.indices((n,) * g.N).reshape(g.N, -1).T.astype(np.int64))
    law, code, inv_w = _codes(g, spec)
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=len(pts)), rng.normal(size=len(pts))
    return g, spec, pts, idx, law, code, inv_w, u, v


@needs_cython
@pytest.mark.parametrize("gid,nid", [("abelian:1", "euclidean"), ("abelian:2", "wmax"),
                                     ("heisenberg1", "koranyi"), ("heisenberg1", "wmax")])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_backend_parity(gid, nid, p):
    g, spec, x, i, law, code, inv_w, u, v = _inputs(gid, nid)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    expo = g.Q + 0.5 * p
    for mode in (kernels.MODE_KERNEL, kernels.MODE_ENERGY, kernels.MODE_FLUX, kernels.MODE_WEAK):
        args = (x, x, i, i, u, u, v, v, mode, law, code, inv_w, expo, p, 0.25)
        np.testing.assert_allclose(cy.pair_rows(*args), py.pair_rows(*args), rtol=1e-11, atol=1e-9)
    K1 = py.kernel_matrix(x, x, i, i, law, code, inv_w, expo, 2.25)
    K2 = cy.kernel_matrix(x, x, i, i, law, code, inv_w, expo, 2.25)
    np.testing.assert_allclose(K2, K1, rtol=1e-12)
    W = np.ascontiguousarray(np.abs(K1[:50, :50]))
    for a, b in zip(py.dense_pgrad(W, u[:50].copy(), p), cy.dense_pgrad(W, u[:50].copy(), p)):
        np.testing.assert_allclose(b, a, rtol=1e-11)


@needs_cython
@pytest.mark.parametrize("gid,nid", [("abelian:2", "euclidean"), ("heisenberg1", "koranyi")])
def test_tail_parity(gid, nid):
    g, spec, x, *_ = _inputs(gid, nid, 7)
    sph = build_sphere_quadrature(g, spec, 16)
    lo, hi = -1.2 * np.ones(g.N), 1.1 * np.ones(g.N)
    args = (x, np.ascontiguousarray(sph.nodes), np.ascontiguousarray(sph.weights), lo, hi,
            1 if g.law == "heisenberg" else 0, 0.7)
    np.testing.assert_allclose(BACKENDS["cython"].tail_rows(*args),
                               BACKENDS["python"].tail_rows(*args), rtol=1e-10)


def test_near_exclusion_zeroes_diagonal():
    g, spec, x, i, law, code, inv_w, *_ = _inputs("abelian:1", "euclidean")
    K = kernels.kernel_matrix(x, x, i, i, law, code, inv_w, 1.5, 0.25)
    assert np.all(np.diag(K) == 0) and np.all(K[~np.eye(len(x), dtype=bool)] > 0)


def test_env_var_forces_fallback():
    env = dict(os.environ, SUBFRAC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from subfrac import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
