"""The singular kernel, Gagliardo seminorm, principal-value operator and weak form.

Conventions (fixed, and checked in the tests):

* ``k(x, y) = q(y^{-1} o x)^{-(Q + sp)}``.
* ``gagliardo_seminorm`` returns ``[u]^p``, the full double integral over G x G.
* ``apply_operator`` carries the leading factor 2 of the principal-value
  definition, ``2 PV int |u(x)-u(y)|^{p-2}(u(x)-u(y)) k(x,y) dy``.
* ``weak_form(u, v)`` is the plain double integral
  ``iint phi(u(x)-u(y)) (v(x)-v(y)) k``. Over the whole group this equals
  ``int apply_operator(u) v``: the antisymmetrization that splits the
  integrand absorbs the factor 2. In particular ``weak_form(u, u) = [u]^p``.

Discretization is the midpoint rule on the cell-centred grid of a
:class:`SampledFunction`. Since ``u`` vanishes outside its box, pairs with both
points outside contribute nothing, and pairs with exactly one point outside
reduce to ``|u(x)|^p T(x)`` with the exterior tail ``T(x) = int_{box^c} k(x,y) dy``,
evaluated by the polar formula along each sphere direction.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from . import kernels
from .errors import InvalidInputError, SingularityError
from .grid import SampledFunction
from .groups import (GroupDescriptor, QuasiNormSpec, _norm_unchecked, check_compatible,
                     relative_offset)
from .sphere import SphereQuadrature, build_sphere_quadrature

__all__ = [
    "FracParams",
    "QuadratureConfig",
    "kernel",
    "exterior_tail",
    "gagliardo_seminorm",
    "apply_operator",
    "operator_on_grid",
    "pv_stability",
    "weak_form",
    "truncate",
]


@dataclass(frozen=True)
class FracParams:
    """Fractional order ``s``, integrability ``p`` and homogeneous dimension ``Q``."""

    s: float
    p: float
    Q: float

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise InvalidInputError(f"s must lie in (0, 1), got {self.s}")
        if not 1.0 < self.p < np.inf:
            raise InvalidInputError(f"p must lie in (1, inf), got {self.p}")
        if not self.Q >= 1:
            raise InvalidInputError(f"Q must be >= 1, got {self.Q}")

    @classmethod
    def for_group(cls, g: GroupDescriptor, s: float, p: float) -> "FracParams":
        return cls(float(s), float(p), g.Q)

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def expo(self) -> float:
        """Kernel exponent Q + sp."""
        return self.Q + self.sp

    @property
    def subcritical(self) -> bool:
        return self.Q > self.sp

    @property
    def p_star(self) -> float | None:
        """Critical Sobolev exponent Qp/(Q - sp); None when Q <= sp."""
        if not self.subcritical:
            return None
        return self.Q * self.p / (self.Q - self.sp)

    def require_subcritical(self):
        if not self.subcritical:
            raise InvalidInputError(
                f"requires Q > sp (Q={self.Q}, sp={self.sp})"
            )


@dataclass(frozen=True)
class QuadratureConfig:
    """Near-field and tail settings for the grid quadratures.

    pv_cutoff: radius, in grid-index units, of the excluded neighbourhood;
      grid offsets ``d`` with ``|d| < pv_cutoff`` are skipped. The default 0.5
      drops only the diagonal.
    near_mode: ``"skip"`` or ``"local_correction"`` (adds a Taylor estimate of
      the excluded region, modelled as a quasi-ball of equal volume).
    """

    pv_cutoff: float = 0.5
    near_mode: str = "skip"
    tol: float = 1e-3
    sphere_resolution: int = 64
    tail: bool = True

    def __post_init__(self):
        if self.pv_cutoff < 0.5:
            raise InvalidInputError("pv_cutoff must be at least half a cell (>= 0.5)")
        if self.near_mode not in ("skip", "local_correction"):
            raise InvalidInputError(f"unsupported near_mode {self.near_mode!r}")
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")

    @property
    def cut2(self) -> float:
        return float(self.pv_cutoff) ** 2


@lru_cache(maxsize=32)
def _sphere(g: GroupDescriptor, spec: QuasiNormSpec, resolution: int) -> SphereQuadrature:
    return build_sphere_quadrature(g, spec, resolution)


def _codes(g, spec):
    law = 1 if g.law == "heisenberg" else 0
    inv_w = np.ascontiguousarray(1.0 / g.weight_array)
    return law, spec.code, inv_w


def kernel(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams, x, y):
    """k(x, y) = q(y^{-1} o x)^{-(Q+sp)}, vectorized over leading axes."""
    check_compatible(g, spec)
    x, y = g.check_points(x, y)
    q = _norm_unchecked(g, spec, relative_offset(g, x, y))
    if np.any(q == 0.0):
        raise SingularityError("kernel is singular at x = y")
    return q ** (-params.expo)


# ---------------------------------------------------------------------------
# exterior tail


def _curve_coeffs(g, x, nodes):
    """Coefficients of y(r) = x o dilate(r, z) = x + r a + r^2 b.

    Returns a, b with shape (P, J, N). Only the Heisenberg t-coordinate has a
    quadratic part (weight 2); all other weights are 1.
    """
    P, J = len(x), len(nodes)
    a = np.broadcast_to(nodes, (P, J, g.N)).copy()
    b = np.zeros_like(a)
    if g.law == "heisenberg":
        a[..., 2] = 0.5 * (x[:, None, 0] * nodes[None, :, 1] - x[:, None, 1] * nodes[None, :, 0])
        b[..., 2] = nodes[None, :, 2]
    return a, b


def exterior_tail(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams, lo, hi,
                  points, sphere: SphereQuadrature | None = None, resolution: int = 64):
    """T(x) = int_{G \\ box} k(x, y) dy for points x strictly inside ``[lo, hi]``.

    Along a direction z on the unit quasi-sphere, y = x o dilate(r, z) gives
    q(y^{-1} o x) = r, so T(x) = sum_j sigma_j int_{r: y(r) outside} r^{-1-sp} dr.
    Each coordinate of y(r) is at most quadratic in r, so the outside set is a
    finite union of intervals found from the boundary crossings.
    """
    if sphere is None:
        sphere = _sphere(g, spec, resolution)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts <= lo) or np.any(pts >= hi):
        raise InvalidInputError("exterior_tail needs points strictly inside the box")
    return kernels.tail_rows(np.ascontiguousarray(pts), np.ascontiguousarray(sphere.nodes),
                             np.ascontiguousarray(sphere.weights), np.ascontiguousarray(lo),
                             np.ascontiguousarray(hi), 1 if g.law == "heisenberg" else 0,
                             float(params.sp))


# ---------------------------------------------------------------------------
# grid pair sums


class _GridContext:
    """Contiguous arrays and codes shared by the pair-sum routines."""

    def __init__(self, g, spec, params, u: SampledFunction, cfg: QuadratureConfig):
        check_compatible(g, spec)
        if u.group_id != g.name:
            raise InvalidInputError(f"function lives on {u.group_id}, not {g.name}")
        if len(u.n) != g.N:
            raise InvalidInputError("grid dimension does not match the group")
        self.g, self.spec, self.params, self.cfg = g, spec, params, cfg
        self.u = u
        self.pts = u.points
        self.idx = u.indices
        self.hN = u.cell_volume
        self.law, self.norm, self.inv_w = _codes(g, spec)

    def rows(self, sel_a, sel_b, ua, ub, va, vb, mode):
        z = np.zeros(0)
        p = self.params.p
        return kernels.pair_rows(
            self.pts[sel_a], self.pts[sel_b], self.idx[sel_a], self.idx[sel_b],
            np.ascontiguousarray(ua) if ua is not None else z,
            np.ascontiguousarray(ub) if ub is not None else z,
            np.ascontiguousarray(va) if va is not None else z,
            np.ascontiguousarray(vb) if vb is not None else z,
            mode, self.law, self.norm, self.inv_w, self.params.expo, p, self.cfg.cut2,
        )

    def tail(self, sel):
        if not self.cfg.tail:
            return np.zeros(int(np.count_nonzero(sel)) if sel.dtype == bool else len(sel))
        return exterior_tail(self.g, self.spec, self.params, self.u.lo, self.u.hi,
                             self.pts[sel], resolution=self.cfg.sphere_resolution)

    def sphere(self):
        return _sphere(self.g, self.spec, self.cfg.sphere_resolution)


_CHUNK = 256


def _grad(vals, h):
    """np.gradient as a list of per-axis arrays, also for 1-D input."""
    out = np.gradient(vals, *h)
    return [out] if vals.ndim == 1 else list(out)


def _phi(d, p):
    return np.sign(d) * np.abs(d) ** (p - 1.0)


def _excluded_radius(ctx: _GridContext) -> float:
    """Quasi-radius of the ball whose volume equals the excluded cell set."""
    c = int(np.ceil(ctx.cfg.pv_cutoff))
    rng = np.arange(-c, c + 1)
    mesh = np.meshgrid(*([rng] * ctx.g.N), indexing="ij")
    d2 = sum(m.astype(float) ** 2 for m in mesh)
    count = int(np.count_nonzero(d2 < ctx.cfg.cut2))
    vol = count * ctx.hN
    sph = ctx.sphere()
    return (vol * ctx.g.Q / sph.total) ** (1.0 / ctx.g.Q)


def _taylor_dirs(ctx: _GridContext, x):
    """alpha, beta with y - x = r alpha + r^2 beta for y = x o dilate(r, z_j)."""
    sph = ctx.sphere()
    a, b = _curve_coeffs(ctx.g, np.atleast_2d(x), sph.nodes)
    return a, b, sph.weights


def _near_form_correction(ctx: _GridContext, u: np.ndarray, v: np.ndarray) -> float:
    """First-order estimate of the excluded part of iint phi(du) dv k.

    With du ~ grad u . r alpha_j on the quasi-ball of radius R,
    int_0^R r^p r^{-1-sp} dr = R^{p-sp}/(p-sp).
    """
    p, sp = ctx.params.p, ctx.params.sp
    h = ctx.u.h
    gu = np.stack(_grad(u.reshape(ctx.u.n), h), axis=-1).reshape(-1, ctx.g.N)
    gv = np.stack(_grad(v.reshape(ctx.u.n), h), axis=-1).reshape(-1, ctx.g.N)
    active = np.flatnonzero(np.any(gu != 0.0, axis=1) & np.any(gv != 0.0, axis=1))
    if len(active) == 0:
        return 0.0
    R = _excluded_radius(ctx)
    total = 0.0
    for blk in np.array_split(active, max(1, len(active) // _CHUNK)):
        a, _, w = _taylor_dirs(ctx, ctx.pts[blk])
        Gu = np.einsum("pjn,pn->pj", a, gu[blk])
        Gv = np.einsum("pjn,pn->pj", a, gv[blk])
        total += float(np.sum((_phi(Gu, p) * Gv) @ w))
    return total * ctx.hN * R ** (p - sp) / (p - sp)


def _mixed_and_box(ctx: _GridContext, u, v):
    """Full-space iint phi(u(x)-u(y))(v(x)-v(y)) k on the grid, with tails."""
    hN = ctx.hN
    S = (u != 0.0) | (v != 0.0)
    if not np.any(S):
        return 0.0
    allp = np.ones(len(u), dtype=bool)
    mode = kernels.MODE_ENERGY if v is u else kernels.MODE_WEAK
    e_sb = ctx.rows(S, allp, u[S], u, v[S], v, mode)
    e_ss = ctx.rows(S, S, u[S], u[S], v[S], v[S], mode)
    box = hN * hN * (2.0 * np.sum(e_sb) - np.sum(e_ss))
    T = ctx.tail(S)
    mixed = 2.0 * hN * np.sum(_phi(u[S], ctx.params.p) * v[S] * T)
    return float(box + mixed)


def gagliardo_seminorm(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                       u: SampledFunction, cfg: QuadratureConfig | None = None) -> float:
    """[u]^p = iint |u(x) - u(y)|^p k(x, y) dx dy over G x G."""
    cfg = cfg or QuadratureConfig()
    ctx = _GridContext(g, spec, params, u, cfg)
    f = np.ascontiguousarray(u.flat)
    val = _mixed_and_box(ctx, f, f)
    if cfg.near_mode == "local_correction":
        val += _near_form_correction(ctx, f, f)
    return max(val, 0.0)


def weak_form(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
              u: SampledFunction, v: SampledFunction, domain_mask=None,
              cfg: QuadratureConfig | None = None) -> float:
    """iint phi(u(x)-u(y)) (v(x)-v(y)) k(x,y) dx dy, phi(d) = |d|^{p-2} d.

    With ``domain_mask`` the integral runs over Omega x Omega only (the mask
    marks grid points of Omega); without it, over G x G including the
    exterior tails.
    """
    cfg = cfg or QuadratureConfig()
    if not u.same_grid(v):
        raise InvalidInputError("u and v must live on the same grid")
    ctx = _GridContext(g, spec, params, u, cfg)
    fu = np.ascontiguousarray(u.flat)
    fv = np.ascontiguousarray(v.flat)
    if domain_mask is None:
        val = _mixed_and_box(ctx, fu, fv)
        if cfg.near_mode == "local_correction":
            val += _near_form_correction(ctx, fu, fv)
        return val
    m = np.asarray(domain_mask, dtype=bool).reshape(-1)
    if m.shape != fu.shape:
        raise InvalidInputError("domain mask does not match the grid")
    if not np.any(m):
        return 0.0
    rows = ctx.rows(m, m, fu[m], fu[m], fv[m], fv[m], kernels.MODE_WEAK)
    return float(ctx.hN * ctx.hN * np.sum(rows))


# ---------------------------------------------------------------------------
# principal value operator


def _near_apply_correction(ctx: _GridContext, sel: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Taylor estimate of int_{B_q(x,R)} phi(u(x) - u(y)) k(x,y) dy at selected points.

    Directions are paired with their negatives so the odd first-order term
    cancels exactly; the remainder is integrated by Gauss-Jacobi in r with
    weight r^{p-1-sp}.
    """
    p, sp = ctx.params.p, ctx.params.sp
    h = ctx.u.h
    vals = f.reshape(ctx.u.n)
    grads = _grad(vals, h)
    gu = np.stack(grads, axis=-1).reshape(-1, ctx.g.N)[sel]
    H = np.empty((len(gu), ctx.g.N, ctx.g.N))
    for i, gi in enumerate(grads):
        for j, gij in enumerate(_grad(gi, h)):
            H[:, i, j] = gij.reshape(-1)[sel]
    H = 0.5 * (H + np.transpose(H, (0, 2, 1)))
    R = _excluded_radius(ctx)
    beta = p - 1.0 - sp
    xg, wg = roots_jacobi(12, 0.0, beta)
    r = 0.5 * R * (1.0 + xg)
    wr = wg * (0.5 * R) ** (1.0 + beta)
    pts = ctx.pts[sel]
    out = np.zeros(len(gu))
    active = np.flatnonzero(np.any(gu != 0.0, axis=1) | np.any(H != 0.0, axis=(1, 2)))
    for blk in np.array_split(active, max(1, len(active) // _CHUNK)):
        if len(blk) == 0:
            continue
        a, b, w = _taylor_dirs(ctx, pts[blk])
        G = np.einsum("pjn,pn->pj", a, gu[blk])
        Bq = np.einsum("pjn,pn->pj", b, gu[blk])
        curv = 0.5 * np.einsum("pjn,pnm,pjm->pj", a, H[blk], a)
        acc = np.zeros(len(blk))
        for rk, wk in zip(r, wr):
            # u(x) - u(x o dilate(r, +-z)) ~ -(+-r G + r^2 (+-B + curv))
            plus = _phi(-(rk * G + rk * rk * (Bq + curv)), p)
            minus = _phi(rk * G - rk * rk * (-Bq + curv), p)
            acc += wk * ((0.5 * (plus + minus) / rk ** p) @ w)
        out[blk] = acc
    return out


def operator_on_grid(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                     u: SampledFunction, cfg: QuadratureConfig | None = None,
                     where=None) -> np.ndarray:
    """apply_operator at every grid point (or at the boolean selection ``where``)."""
    cfg = cfg or QuadratureConfig()
    ctx = _GridContext(g, spec, params, u, cfg)
    f = np.ascontiguousarray(u.flat)
    sel = np.ones(len(f), dtype=bool) if where is None else np.asarray(where, bool).reshape(-1)
    allp = np.ones(len(f), dtype=bool)
    z = np.zeros(0)
    inner = ctx.rows(sel, allp, f[sel], f, z, z, kernels.MODE_FLUX) * ctx.hN
    live = np.flatnonzero(sel)[f[sel] != 0.0]
    if len(live):
        mask = np.zeros(len(f), dtype=bool)
        mask[live] = True
        inner[f[sel] != 0.0] += _phi(f[live], params.p) * ctx.tail(mask)
    if cfg.near_mode == "local_correction":
        inner += _near_apply_correction(ctx, sel, f)
    return 2.0 * inner


def _locate(u: SampledFunction, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k = (x - u.lo) / u.h - 0.5
    ki = np.rint(k)
    if np.any(np.abs(k - ki) > 1e-6) or np.any(ki < 0) or np.any(ki >= np.asarray(u.n)):
        raise InvalidInputError("x must be a grid point of u")
    flat = np.ravel_multi_index(tuple(ki.astype(int).T), u.n)
    return flat


def apply_operator(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                   u: SampledFunction, x, cfg: QuadratureConfig | None = None):
    """2 PV int phi(u(x) - u(y)) k(x, y) dy at grid point(s) ``x``.

    Returns a float for a single point, an array for a batch.
    """
    flat = _locate(u, x)
    sel = np.zeros(int(np.prod(u.n)), dtype=bool)
    sel[flat] = True
    vals = operator_on_grid(g, spec, params, u, cfg, where=sel)
    # values come back in grid order; map them to the requested order
    out = vals[np.searchsorted(np.flatnonzero(sel), flat)]
    return float(out[0]) if np.ndim(x) == 1 else out


def pv_stability(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                 u: SampledFunction, x, cutoffs=(0.5, 1.5, 2.5)) -> dict:
    """Operator value at ``x`` for shrinking exclusion radii, with a spread flag.

    The corrected values should agree for a function that is smooth near x;
    a large relative spread signals that the principal value is not resolved.
    """
    vals = []
    for c in cutoffs:
        cfg = QuadratureConfig(pv_cutoff=c, near_mode="local_correction")
        vals.append(apply_operator(g, spec, params, u, x, cfg))
    vals = np.asarray(vals)
    scale = max(np.max(np.abs(vals)), 1e-300)
    spread = float(np.ptp(vals) / scale)
    return {"cutoffs": tuple(cutoffs), "values": vals, "spread": spread,
            "stable": spread < 0.05}


def truncate(u: SampledFunction, level: float) -> SampledFunction:
    """u_n = max(min(u, n), -n)."""
    if not level > 0:
        raise InvalidInputError("truncation level must be positive")
    return u.with_values(np.clip(u.values, -level, level))
