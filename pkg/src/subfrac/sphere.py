"""Polar-decomposition quadrature on the unit quasi-sphere {q = 1}.

Every x != 0 is uniquely ``dilate(r, u)`` with r > 0 and u on the Euclidean
unit sphere, and in those coordinates

    dx = r^(Q-1) <A u, u> dr dS(u),      A = diag(weights).

Pushing u to the quasi-sphere along its dilation orbit, y' = dilate(1/q(u), u),
turns this into the polar formula with surface measure

    d sigma(y') = <A u, u> q(u)^(-Q) dS(u).

The generic builder discretizes dS with deterministic product rules
(trapezoid in azimuth, Gauss-Jacobi in the polar angles) and carries the
factor above into the weights. For the Koranyi sphere a closed-form chart is
used instead: with (x^2 + y^2, 4t) = (cos th, sin th) and azimuth psi the
measure is exactly d sigma = dth dpsi / 4.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import InvalidInputError
from .groups import GroupDescriptor, QuasiNormSpec, _norm_unchecked, check_compatible

__all__ = [
    "SphereQuadrature",
    "build_sphere_quadrature",
    "sphere_measure",
    "ball_volume",
    "unit_ball_volume",
    "polar_integral",
    "koranyi_point",
]


@dataclass(frozen=True)
class SphereQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    group: GroupDescriptor
    norm: QuasiNormSpec
    resolution: int

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)


def euclidean_sphere(N: int, resolution: int):
    """Nodes and weights of a product rule on S^(N-1) in R^N."""
    if N == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if N == 2:
        th = 2.0 * pi * np.arange(resolution) / resolution
        nodes = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return nodes, np.full(resolution, 2.0 * pi / resolution)
    # S^(N-1): first coordinate t = cos(phi) with weight (1 - t^2)^((N-3)/2)
    alpha = 0.5 * (N - 3)
    m = max(resolution // 2, 2)
    t, wt = roots_jacobi(m, alpha, alpha)
    sub_nodes, sub_w = euclidean_sphere(N - 1, resolution)
    tt = np.repeat(t, len(sub_w))
    rr = np.sqrt(1.0 - tt * tt)
    nodes = np.concatenate([tt[:, None], rr[:, None] * np.tile(sub_nodes, (m, 1))], axis=1)
    weights = np.outer(wt, sub_w).ravel()
    return nodes, weights


def koranyi_point(theta, psi):
    """Point of the Koranyi unit sphere at chart coordinates (theta, psi)."""
    c = np.sqrt(np.maximum(np.cos(theta), 0.0))
    return np.stack([c * np.cos(psi), c * np.sin(psi), 0.25 * np.sin(theta)], axis=-1)


def _koranyi_sphere(resolution: int):
    # theta = (pi/2) sin(pi xi / 2) makes the integrand smooth at the poles
    m = max(resolution // 2, 2)
    xi, wxi = roots_legendre(m)
    theta = 0.5 * pi * np.sin(0.5 * pi * xi)
    dtheta = 0.25 * pi * pi * np.cos(0.5 * pi * xi) * wxi
    npsi = resolution + (resolution % 2)
    psi = 2.0 * pi * np.arange(npsi) / npsi
    T, P = np.meshgrid(theta, psi, indexing="ij")
    nodes = koranyi_point(T.ravel(), P.ravel())
    weights = 0.25 * np.outer(dtheta, np.full(npsi, 2.0 * pi / npsi)).ravel()
    return nodes, weights


def build_sphere_quadrature(g: GroupDescriptor, spec: QuasiNormSpec, resolution: int = 64,
                            method: str = "auto") -> SphereQuadrature:
    """Deterministic quadrature for the surface measure on {q = 1}.

    ``method="generic"`` forces the Euclidean-sphere push-forward even where
    a closed-form chart exists (used to cross-check the chart).
    """
    check_compatible(g, spec)
    if resolution < 8:
        raise InvalidInputError(f"sphere resolution {resolution} < 8 is too coarse")
    if spec.kind == "koranyi" and method != "generic":
        nodes, weights = _koranyi_sphere(resolution)
    else:
        u, dS = euclidean_sphere(g.N, resolution)
        qu = _norm_unchecked(g, spec, u)
        v = g.weight_array
        jac = np.sum(v * u * u, axis=-1) * qu ** (-g.Q)
        nodes = u * (1.0 / qu)[:, None] ** v
        weights = dS * jac
    return SphereQuadrature(nodes, weights, g, spec, int(resolution))


def sphere_measure(g: GroupDescriptor, spec: QuasiNormSpec) -> float:
    """Closed-form sigma(omega_Q) for the shipped (group, norm) pairs."""
    check_compatible(g, spec)
    if spec.kind == "euclidean":
        return 2.0 * pi ** (g.N / 2) / gamma(g.N / 2)
    if spec.kind == "koranyi":
        return pi * pi / 2.0
    # the wmax unit ball is the box [-1, 1]^N, of volume 2^N
    return g.Q * 2.0 ** g.N


def unit_ball_volume(g: GroupDescriptor, spec: QuasiNormSpec) -> float:
    return sphere_measure(g, spec) / g.Q


def ball_volume(g: GroupDescriptor, spec: QuasiNormSpec, R: float,
                sphere: SphereQuadrature | None = None) -> float:
    """|B_q(0, R)| = R^Q sigma / Q, with sigma taken from a sphere quadrature."""
    if not R > 0:
        raise InvalidInputError("radius must be positive")
    if sphere is None:
        sphere = build_sphere_quadrature(g, spec, 256)
    return R ** g.Q * sphere.total / g.Q


def polar_integral(sphere: SphereQuadrature, f, r_max: float, panels: int = 16,
                   order: int = 16) -> float:
    """Integrate ``f`` over R^N through the polar formula, truncated at r_max.

    ``f`` takes an array of points ``(..., N)`` and returns values ``(...)``.
    """
    g = sphere.group
    x, w = roots_legendre(order)
    edges = np.linspace(0.0, r_max, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wr = (half[:, None] * w[None, :]).ravel() * r ** (g.Q - 1)
    pts = sphere.nodes[None, :, :] * r[:, None, None] ** g.weight_array
    vals = f(pts)
    return float(np.einsum("i,ij,j->", wr, vals, sphere.weights))
