"""mu(gamma): agreement of the independent routes and the reflection identity."""
import numpy as np
import pytest
from scipy.integrate import quad

from subfrac.errors import InvalidInputError
from subfrac.groups import parse_group, parse_norm
from subfrac.hardy import (admissible_gamma_max, averaged_sphere_function, default_base_points,
                           hardy_mu, mu_direct, mu_unfolded, sphere_evaluator)
from subfrac.inequalities import mu_operator_oracle
from subfrac.nonlocal_ops import FracParams
from subfrac.sphere import build_sphere_quadrature

LINE, EUC = parse_group("abelian:1"), parse_norm("euclidean")


def mu_line_quad(s, p, gam):
    """Unfolded integral on R^1 by adaptive quadrature (base point x' = 1)."""
    a = 1.0 + s * p

    def f(r):
        d = 1.0 - r ** (-gam)
        return np.sign(d) * abs(d) ** (p - 1) * (abs(1 - r) ** (-a) + (1 + r) ** (-a))

    opts = dict(limit=500, epsabs=1e-13, epsrel=1e-12)
    # pair r = 1 +- t near the singular point to take the principal value
    pv = quad(lambda t: f(1 + t) + f(1 - t), 0, 0.5, **opts)[0]
    return pv + quad(f, 0, 0.5, **opts)[0] + quad(f, 1.5, np.inf, **opts)[0]


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("s,p,gam", [(0.3, 1.5, 0.2), (0.25, 2.0, 0.25), (0.2, 3.0, 0.1),
                                     (0.25, 2.0, 0.05)])
def test_line_routes_agree_with_quadrature(s, p, gam):
    P = FracParams(s, p, 1.0)
    ref = mu_line_quad(s, p, gam)
    assert hardy_mu(LINE, EUC, P, [gam]).mu[0] == pytest.approx(ref, rel=1e-7)
    assert mu_unfolded(LINE, EUC, P, gam, [1.0]) == pytest.approx(ref, rel=1e-7)
    assert mu_direct(LINE, EUC, P, gam, [1.0]) == pytest.approx(ref, rel=1e-6)


def test_radial_routes_agree_in_plane():
    g = parse_group("abelian:2")
    P = FracParams(0.5, 2.0, 2.0)
    gam = 0.5
    folded = hardy_mu(g, EUC, P, [gam]).mu[0]
    assert mu_unfolded(g, EUC, P, gam, [1.0, 0.0]) == pytest.approx(folded, rel=1e-5)
    # the direct route sees the q^-gamma singularity through the direction
    # rule only, so it converges algebraically in the sphere resolution
    err = [abs(mu_direct(g, EUC, P, gam, [1.0, 0.0], resolution=r) / folded - 1)
           for r in (256, 512, 1024)]
    assert err[0] > err[1] > err[2] and err[2] < 1e-3


def test_mu_positive_on_admissible_interval():
    P = FracParams(0.25, 2.0, 1.0)
    gmax = admissible_gamma_max(P)
    tab = hardy_mu(LINE, EUC, P, np.linspace(0, gmax, 12)[1:-1])
    assert np.all(tab.mu > 0) and tab.scalar_path


def test_mu_vanishes_at_interval_ends():
    P = FracParams(0.25, 2.0, 1.0)
    gmax = admissible_gamma_max(P)
    mu = hardy_mu(LINE, EUC, P, [1e-6, gmax - 1e-6]).mu
    assert np.all(np.abs(mu) < 1e-4)


def test_signed_value_outside_interval():
    P = FracParams(0.5, 2.0, 1.0)  # Q = sp: admissible interval empty
    with pytest.raises(InvalidInputError):
        hardy_mu(LINE, EUC, P, [0.2])
    mu = hardy_mu(LINE, EUC, P, [0.2], strict=False).mu[0]
    assert mu < 0
    assert mu == pytest.approx(mu_line_quad(0.5, 2.0, 0.2), rel=1e-6)


@pytest.mark.parametrize("s,p,gam", [(0.5, 2.0, 0.2), (0.25, 2.0, 0.25), (0.25, 1.5, 0.3)])
def test_grid_operator_cross_oracle(s, p, gam):
    P = FracParams(s, p, 1.0)
    mu = hardy_mu(LINE, EUC, P, [gam], strict=False).mu[0]
    est = mu_operator_oracle(P, gam, n=2048)["mu"]
    assert est == pytest.approx(mu, rel=1e-3)


@pytest.mark.parametrize("gid,nid", [("abelian:1", "euclidean"), ("abelian:2", "euclidean"),
                                     ("abelian:2", "wmax"), ("heisenberg1", "koranyi"),
                                     ("heisenberg1", "wmax")])
def test_reflection_identity_averaged(gid, nid):
    g, spec = parse_group(gid), parse_norm(nid)
    P = FracParams.for_group(g, 0.4, 2.0)
    sph = build_sphere_quadrature(g, spec, 16)
    z = np.array([0.2, 0.6, 0.9, 1.2, 2.5])
    lhs = averaged_sphere_function(g, spec, P, 1 / z, sph)
    rhs = z ** P.expo * averaged_sphere_function(g, spec, P, z, sph)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=0)


def test_reflection_identity_koranyi_evaluator():
    g, spec = parse_group("heisenberg1"), parse_norm("koranyi")
    P = FracParams.for_group(g, 0.5, 2.0)
    z = np.array([0.3, 0.6, 1.5, 3.0])
    for bp in default_base_points(g, spec)[:2]:
        ev = sphere_evaluator(g, spec, P, bp, 512)
        assert np.allclose(ev.L(1 / z), z ** P.expo * ev.M(z), rtol=1e-6)


def test_heisenberg_mu_direct_matches_folded():
    g, spec = parse_group("heisenberg1"), parse_norm("koranyi")
    P = FracParams.for_group(g, 0.5, 2.0)
    bp = default_base_points(g, spec)[0]
    folded = hardy_mu(g, spec, P, [1.5], base_points=bp[None, :]).mu[0]
    err = [abs(mu_direct(g, spec, P, 1.5, bp, resolution=r) / folded - 1) for r in (64, 128)]
    assert folded > 0
    assert err[1] < err[0] / 3 and err[1] < 1e-2
