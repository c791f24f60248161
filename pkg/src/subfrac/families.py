"""Smooth, compactly supported test functions and their dilates/translates.

The functions are plain callables on arrays of points (shape ``(M, N)``), so a
dilated or translated copy can be sampled on any grid. ``support_box`` gives a
grid box that contains the support with a margin of zero layers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .grid import SampledFunction
from .groups import GroupDescriptor, QuasiNormSpec, _norm_unchecked, compose, parse_group, parse_norm
from .sphere import build_sphere_quadrature

__all__ = [
    "bump",
    "AnnulusBump",
    "Dilated",
    "Translated",
    "annulus_family",
    "support_box",
    "sample",
]


def bump(t):
    """exp(1 - 1/(1 - t^2)) on |t| < 1, zero elsewhere; equals 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
    return out


@dataclass(frozen=True)
class AnnulusBump:
    """amp * bump((q(x) - c) / w)^shape * (1 + tilt . x), supported in c-w < q < c+w.

    ``tilt`` breaks radial symmetry; keep ``|tilt| (c + w)`` below 1 so the
    function keeps one sign. With ``c <= w`` the support reaches the origin
    (a filled bump rather than an annulus).
    """

    group: str
    norm: str
    c: float
    w: float
    amp: float = 1.0
    shape: float = 1.0
    tilt: tuple = ()

    def __post_init__(self):
        if not (self.w > 0 and self.c >= 0):
            raise InvalidInputError("annulus needs w > 0 and c >= 0")

    @property
    def outer(self) -> float:
        return self.c + self.w

    @property
    def inner(self) -> float:
        return max(self.c - self.w, 0.0)

    def __call__(self, pts):
        g = parse_group(self.group)
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        qn = _norm_unchecked(g, parse_norm(self.norm), pts)
        val = self.amp * bump((qn - self.c) / self.w) ** self.shape
        if self.tilt:
            val = val * (1.0 + pts @ np.asarray(self.tilt, dtype=float))
        return val


@dataclass(frozen=True)
class Dilated:
    """x -> f(dilate(lam, x)); the support shrinks by the factor lam."""

    f: object
    lam: float

    @property
    def group(self):
        return self.f.group

    @property
    def norm(self):
        return self.f.norm

    @property
    def outer(self) -> float:
        return self.f.outer / self.lam

    def __call__(self, pts):
        g = parse_group(self.group)
        return self.f(np.atleast_2d(pts) * self.lam ** g.weight_array)


@dataclass(frozen=True)
class Translated:
    """x -> f(a o x) (left translation); support moves to a^{-1} o supp f."""

    f: object
    a: tuple

    @property
    def group(self):
        return self.f.group

    @property
    def norm(self):
        return self.f.norm

    @property
    def outer(self) -> float:
        return self.f.outer

    def __call__(self, pts):
        g = parse_group(self.group)
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        a = np.broadcast_to(np.asarray(self.a, dtype=float), pts.shape)
        return self.f(compose(g, a, pts))


def _support_extent(g: GroupDescriptor, spec: QuasiNormSpec, R: float, shift=None):
    """Coordinate bounding box of shift^{-1} o B_q(0, R) (shift=None: the ball)."""
    sph = build_sphere_quadrature(g, spec, 64)
    pts = sph.nodes * R ** g.weight_array
    if g.N == 1:
        pts = np.array([[R], [-R]])
    if shift is not None:
        a = np.broadcast_to(-np.asarray(shift, dtype=float), pts.shape)
        pts = compose(g, a, pts)
    return pts.min(axis=0), pts.max(axis=0)


def support_box(g: GroupDescriptor, spec: QuasiNormSpec, R: float, n, shift=None,
                margin: int = 2, pad: float = 0.02):
    """Box and per-axis counts whose outer ``margin`` layers miss shift^{-1} o B_q(0, R).

    The ball's coordinate extent is padded by a relative ``pad`` and then by
    ``margin + 1`` cells on each side.
    """
    lo, hi = _support_extent(g, spec, R, shift)
    span = hi - lo
    lo, hi = lo - pad * span, hi + pad * span
    n = np.broadcast_to(np.asarray(n, dtype=int), lo.shape)
    # grow the box so that margin + 1 whole cells lie outside the support
    k = margin + 1
    h = (hi - lo) / (n - 2 * k)
    return lo - k * h, hi + k * h, tuple(int(m) for m in n)


def sample(g: GroupDescriptor, f, lo, hi, n, margin: int = 1) -> SampledFunction:
    return SampledFunction.from_function(g, f, lo, hi, n, support_margin=margin)


def annulus_family(g: GroupDescriptor, spec: QuasiNormSpec, count: int = 12,
                   seed: int = 0, inner_min: float = 0.25) -> list[AnnulusBump]:
    """Deterministic family of annulus-supported bumps inside B_q(0, 1).

    Every member vanishes on B_q(0, inner_min), which keeps the Hardy weight
    q^{-ps} bounded on the support.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        lo = inner_min + 0.3 * rng.random() * (1.0 - inner_min)
        hi = lo + (1.0 - lo) * (0.35 + 0.65 * rng.random())
        c, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
        shape = float(rng.choice([0.5, 1.0, 2.0]))
        amp = float(0.5 + 1.5 * rng.random())
        tilt = ()
        if i % 3 == 2:
            v = rng.normal(size=g.N)
            tilt = tuple(0.6 * v / np.linalg.norm(v) / hi)
        out.append(AnnulusBump(g.name, spec.kind, float(c), float(w), amp, shape, tilt))
    return out
