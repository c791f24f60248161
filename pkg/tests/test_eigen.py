import json

import numpy as np
import pytest

from subfrac.errors import InvalidInputError
from subfrac.eigen import (Domain, append_ledger, assemble, dense_eigen, energy, lyapunov_check,
                           lyapunov_product, minimize_rayleigh, quasi_ball, rayleigh_quotient,
                           run_id)
from subfrac.groups import parse_group, parse_norm
from subfrac.nonlocal_ops import FracParams, QuadratureConfig, gagliardo_seminorm
from subfrac.grid import SampledFunction

LINE, EUC = parse_group("abelian:1"), parse_norm("euclidean")
PLANE = parse_group("abelian:2")


def _form(g, spec, s, p, n, R=1.0, minres=0):
    dom = quasi_ball(g, spec, R, n)
    return dom, assemble(dom, FracParams.for_group(g, s, p), min_resolution=minres)


def test_p2_matrix_reproduces_energy(rng):
    _, form = _form(LINE, EUC, 0.3, 2.0, 24)
    u = rng.normal(size=form.size)
    assert u @ form.p2_matrix() @ u == pytest.approx(energy(form, u), rel=1e-12)


def test_energy_equals_grid_seminorm():
    # E(u) is the skip-mode seminorm of u extended by zero, with exact tails
    dom, form = _form(LINE, EUC, 0.3, 1.5, 40)
    pts = dom.points[:, 0]
    u = np.cos(np.pi * pts / 2) ** 2
    full = np.zeros(dom.n)
    full[dom.mask] = u
    sf = SampledFunction(LINE.name, dom.lo, dom.hi, dom.n, full, 0)
    semi = gagliardo_seminorm(LINE, EUC, form.params, sf,
                              QuadratureConfig(sphere_resolution=64))
    assert energy(form, u) == pytest.approx(semi, rel=1e-10)


@pytest.mark.parametrize("g,n", [(LINE, 20), (PLANE, 12)])
def test_inverse_iteration_matches_dense(g, n):
    _, form = _form(g, EUC, 0.4 if g.N == 2 else 0.25, 2.0, n)
    res = minimize_rayleigh(form)
    lam, vec = dense_eigen(form)
    assert res.lambda1 == pytest.approx(lam, rel=1e-8)
    assert np.allclose(res.eigvec, vec, atol=1e-6 * np.max(vec))
    assert res.residual < 1e-8 and res.sign_constant


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_general_p_solution(p):
    _, form = _form(LINE, EUC, 0.25, p, 36)
    res = minimize_rayleigh(form)
    assert res.residual < 1e-4 and res.sign_constant
    assert np.all(np.diff(res.history) <= 1e-12 * res.lambda1)
    assert max(res.seeds) - min(res.seeds) <= 1e-6 * res.lambda1
    assert rayleigh_quotient(form, res.eigvec) == pytest.approx(res.lambda1, rel=1e-12)


def test_quotient_bounded_below_by_lambda1(rng):
    _, form = _form(LINE, EUC, 0.25, 1.5, 30)
    lam = minimize_rayleigh(form).lambda1
    for _ in range(20):
        assert rayleigh_quotient(form, rng.random(form.size) + 0.01) >= lam * (1 - 1e-9)


def test_domain_monotonicity():
    # a larger domain on the same grid has a smaller first eigenvalue
    g = PLANE
    base = quasi_ball(g, EUC, 1.0, 20)
    pts = base.grid()[0]
    r = np.linalg.norm(pts, axis=1).reshape(base.n)
    lams = []
    for rad in (0.6, 0.8, 1.0):
        dom = Domain(g.name, "euclidean", base.lo, base.hi, base.n, r < rad)
        lams.append(minimize_rayleigh(assemble(dom, FracParams.for_group(g, 0.4, 2.0))).lambda1)
    assert lams[0] > lams[1] > lams[2]


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_ball_scaling(p):
    P = FracParams(0.25, p, 1.0)
    lam = [minimize_rayleigh(assemble(quasi_ball(LINE, EUC, R, 36), P)).lambda1 for R in (1.0, 2.0)]
    assert lam[1] / lam[0] == pytest.approx(2 ** (-P.sp), rel=1e-8)


def test_weighted_problem_and_lyapunov_product():
    P = FracParams(0.25, 2.0, 1.0)
    doms = [quasi_ball(LINE, EUC, R, 36) for R in (0.5, 1.0)]
    res, weights = [], []
    for d in doms:
        x = d.points[:, 0] / d.R
        w = (1.0 + x ** 2) / d.R ** P.sp  # dilates with the domain
        weights.append(w)
        res.append(minimize_rayleigh(assemble(d, P), weight=w))
    theta = 4.0 * P.Q / P.sp
    out = lyapunov_check(doms, P, theta, res, weights=weights)
    assert out["pass"] and out["spread"] < 1e-8
    assert lyapunov_product(doms[0], P, theta, res[0].lambda1, weights[0]) > 0


def test_under_resolved_grid_refused():
    dom = quasi_ball(LINE, EUC, 1.0, 20)
    with pytest.raises(InvalidInputError):
        assemble(dom, FracParams(0.25, 2.0, 1.0))


def test_supercritical_refused():
    dom = quasi_ball(LINE, EUC, 1.0, 40)
    with pytest.raises(InvalidInputError):
        assemble(dom, FracParams(0.5, 2.0, 1.0))


def test_lyapunov_theta_range():
    P = FracParams(0.25, 2.0, 1.0)
    dom = quasi_ball(LINE, EUC, 1.0, 36)
    with pytest.raises(InvalidInputError):
        lyapunov_product(dom, P, 2.0, 1.0)


def test_ledger_append(tmp_path):
    P = FracParams(0.25, 2.0, 1.0)
    dom = quasi_ball(LINE, EUC, 1.0, 36)
    res = minimize_rayleigh(assemble(dom, P))
    path = tmp_path / "runs.jsonl"
    a = append_ledger(path, dom, P, res)
    b = append_ledger(path, dom, P, res)
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    assert len(lines) == 2 and a["run_id"] == b["run_id"] == lines[0]["run_id"]
    rec = {k: v for k, v in lines[0].items() if k != "run_id"}
    assert run_id(rec) == a["run_id"]


def test_heisenberg_ball_scaling():
    g, spec = parse_group("heisenberg1"), parse_norm("koranyi")
    P = FracParams.for_group(g, 0.5, 2.0)
    lam = [minimize_rayleigh(assemble(quasi_ball(g, spec, R, (14, 14, 8)), P,
                                      QuadratureConfig(sphere_resolution=32),
                                      min_resolution=0)).lambda1 for R in (1.0, 2.0)]
    assert lam[1] / lam[0] == pytest.approx(2 ** (-P.sp), rel=1e-8)
