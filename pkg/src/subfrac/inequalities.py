"""Numerical checks of the inequality chain: level sets, the sequence lemma,
the complement-integral floor, the elementary inequality, Picone, Hardy and
Sobolev.

Every check returns a :class:`CheckReport` carrying both sides, the margin
``rhs - lhs`` (so ``margin >= -tolerance`` means the inequality holds) and
any extra diagnostics.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import roots_legendre

from . import kernels
from .errors import InvalidInputError
from .grid import SampledFunction
from .groups import GroupDescriptor, QuasiNormSpec, _norm_unchecked, check_compatible
from .hardy import MuTable, hardy_mu
from .nonlocal_ops import (FracParams, QuadratureConfig, _codes, exterior_tail,
                           gagliardo_seminorm, weak_form)
from .sphere import sphere_measure, unit_ball_volume

__all__ = [
    "CheckReport",
    "LevelSetProfile",
    "level_set_profile",
    "levelset_lower_bound",
    "sequence_lemma_check",
    "complement_integral_check",
    "complement_floor_constant",
    "elementary_inequality_check",
    "picone_remainder",
    "picone_check",
    "hardy_check",
    "sobolev_ratio",
    "sobolev_ratio_scan",
    "sobolev_invariance",
    "mu_operator_oracle",
]

CSV_FIELDS = ("check_id", "group", "norm", "s", "p", "param", "lhs", "rhs", "margin",
              "tolerance", "pass")


@dataclass
class CheckReport:
    """One inequality evaluation: ``lhs <= rhs`` holds when ``margin >= -tolerance``."""

    check_id: str
    group: str
    norm: str
    s: float
    p: float
    param: float | None
    lhs: float
    rhs: float
    tolerance: float
    extra: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return float(self.rhs - self.lhs)

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -self.tolerance)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        d["margin"] = self.margin
        d["pass"] = self.passed
        return {k: d[k] for k in CSV_FIELDS}


# ---------------------------------------------------------------------------
# level sets


@dataclass
class LevelSetProfile:
    """a_k = |{|u| > 2^k}| on the window ``k_min <= k <= k_max``.

    Below the window every a_k equals the support measure (``a_k`` is then
    constant); from ``k_max`` on, a_k = 0. Measures are grid counts times the
    cell volume, so the counting identities are exact in integers.
    """

    k: np.ndarray
    counts: np.ndarray
    cell_volume: float

    @property
    def a(self) -> np.ndarray:
        return self.counts * self.cell_volume

    @property
    def d_counts(self) -> np.ndarray:
        nxt = np.append(self.counts[1:], 0)
        return self.counts - nxt

    @property
    def d(self) -> np.ndarray:
        return self.d_counts * self.cell_volume

    @property
    def support_measure(self) -> float:
        return float(self.counts[0] * self.cell_volume) if len(self.counts) else 0.0

    def a_at(self, k: int) -> float:
        if len(self.k) == 0 or k >= self.k[-1]:
            return 0.0
        if k <= self.k[0]:
            return self.support_measure
        return float(self.a[k - self.k[0]])

    def identities_hold(self) -> bool:
        """sum_{l >= k} d_l = a_k and d_k = a_k - sum_{l >= k+1} d_l, in counts."""
        if len(self.counts) == 0:
            return True
        tail = np.cumsum(self.d_counts[::-1])[::-1]
        ok1 = np.array_equal(tail, self.counts)
        ok2 = np.array_equal(self.d_counts, self.counts - np.append(tail[1:], 0))
        mono = bool(np.all(np.diff(self.counts) <= 0))
        return bool(ok1 and ok2 and mono)


def level_set_profile(u: SampledFunction) -> LevelSetProfile:
    """Exact grid level-set measures of |u| at the dyadic levels 2^k."""
    v = np.abs(u.flat)
    nz = v[v > 0]
    if len(nz) == 0:
        return LevelSetProfile(np.zeros(0, dtype=int), np.zeros(0, dtype=np.int64),
                               u.cell_volume)
    # k_min: every nonzero value exceeds 2^k_min; k_max: none exceeds 2^k_max
    k_min = int(np.frexp(nz.min())[1]) - 2
    k_max = int(np.frexp(nz.max())[1])
    ks = np.arange(k_min, k_max + 1)
    counts = np.array([np.count_nonzero(v > np.ldexp(1.0, int(k))) for k in ks], dtype=np.int64)
    return LevelSetProfile(ks, counts, u.cell_volume)


def _levelset_sum(prof: LevelSetProfile, p: float, sp: float, Q: float) -> float:
    """sum over k in Z with a_k != 0 of 2^{kp} a_k^{-sp/Q} a_{k+1}."""
    if len(prof.k) == 0:
        return 0.0
    a = prof.a
    e = sp / Q
    total = 0.0
    for i in range(len(a) - 1):
        if a[i] > 0:
            total += 2.0 ** (prof.k[i] * p) * a[i] ** (-e) * a[i + 1]
    # k < k_min: a_k = a_{k+1} = |supp u|, a geometric series in 2^{kp}
    A = a[0]
    total += A ** (1.0 - e) * 2.0 ** ((prof.k[0] - 1) * p) / (1.0 - 2.0 ** (-p))
    return float(total)


def levelset_lower_bound(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                         u: SampledFunction, cfg: QuadratureConfig | None = None,
                         seminorm: float | None = None) -> CheckReport:
    """S* = sum_{k: a_k != 0} 2^{kp} a_k^{-sp/Q} a_{k+1} against [u]^p.

    The constant in the level-set bound is not explicit, so the report's
    content is the ratio ``[u]^p / S*`` (``extra['ratio']``), which must stay
    bounded away from 0 across a family. ``lhs``/``rhs`` are S* and [u]^p.
    """
    params.require_subcritical()
    prof = level_set_profile(u)
    S = _levelset_sum(prof, params.p, params.sp, params.Q)
    if seminorm is None:
        seminorm = gagliardo_seminorm(g, spec, params, u, cfg)
    ratio = seminorm / S if S > 0 else float("nan")
    return CheckReport("levelset", g.name, spec.kind, params.s, params.p, None, S, seminorm,
                       0.0, {"ratio": ratio, "identities": prof.identities_hold(),
                             "k_min": int(prof.k[0]) if len(prof.k) else None})


# ---------------------------------------------------------------------------
# sequence lemma


def sequence_lemma_check(a, T: float, params: FracParams, k0: int = 0,
                         extend: str = "window") -> CheckReport:
    """Compare sum_k a_k^{(Q-sp)/Q} T^k with sum_{a_k != 0} a_{k+1} a_k^{-sp/Q} T^k.

    ``a`` holds a_{k0}, a_{k0+1}, ...; entries past the end are 0.
    ``extend="window"`` sums over the given window only (a_k = 0 below k0);
    a single nonzero entry then makes the right side vanish and the report is
    flagged ``degenerate``. ``extend="constant"`` continues a_k = a_{k0} for
    k < k0, the bounded non-increasing extension to all of Z; both sides then
    pick up the same geometric tail.

    ``extra['ratio']`` = lhs / rhs is the empirical constant.
    """
    params.require_subcritical()
    if not T > 1:
        raise InvalidInputError("T must exceed 1")
    if extend not in ("window", "constant"):
        raise InvalidInputError(f"unknown extension {extend!r}")
    a = np.asarray(a, dtype=float).reshape(-1)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise InvalidInputError("sequence must be finite and nonnegative")
    if np.any(np.diff(a) > 0):
        raise InvalidInputError("sequence must be non-increasing")
    Q, sp = params.Q, params.sp
    ks = k0 + np.arange(len(a))
    nxt = np.append(a[1:], 0.0)
    nz = a > 0
    w = np.power(float(T), ks)
    lhs = float(np.sum(a[nz] ** ((Q - sp) / Q) * w[nz]))
    rhs = float(np.sum(nxt[nz] * a[nz] ** (-sp / Q) * w[nz]))
    if extend == "constant" and len(a) and a[0] > 0:
        tail = a[0] ** ((Q - sp) / Q) * T ** k0 / (T - 1.0)
        lhs += tail
        rhs += tail
    degenerate = lhs > 0 and rhs == 0
    if lhs == 0:
        ratio = 0.0
    elif degenerate:
        ratio = float("inf")
    else:
        ratio = lhs / rhs
    return CheckReport("sequence", "-", "-", params.s, params.p, float(T), lhs, rhs, 0.0,
                       {"ratio": ratio, "degenerate": bool(degenerate), "extend": extend})


# ---------------------------------------------------------------------------
# complement integral


def complement_floor_constant(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams) -> float:
    """C = sigma/(sp) * V_1^{sp/Q}, so that the floor is C |K|^{-sp/Q}.

    This is the polar integral of the kernel outside B_q(x, delta) with
    delta = (|K| / V_1)^{1/Q}, V_1 the volume of the unit quasi-ball.
    """
    sig = sphere_measure(g, spec)
    V1 = unit_ball_volume(g, spec)
    return sig / params.sp * V1 ** (params.sp / params.Q)


def _cell_integrals(g, spec, params, x, centres, h, base_order=2):
    """int over each grid cell of k(x, y) dy, with Gauss rules graded by distance.

    The cell containing x must be excluded by the caller.
    """
    law, norm, inv_w = _codes(g, spec)
    N = g.N
    dist = _norm_unchecked(g, spec, centres - x)
    # cell size measured in the quasi-norm
    hq = float(np.max(h ** (1.0 / g.weight_array)))
    ratio = dist / hq
    out = np.empty(len(centres))
    zi = np.zeros((1, N), dtype=np.int64)
    xa = np.ascontiguousarray(np.atleast_2d(x), dtype=float)
    levels = [(8.0, np.inf, base_order), (3.0, 8.0, 4), (1.5, 3.0, 8), (0.0, 1.5, 16)]
    for lo, hi, order in levels:
        sel = np.flatnonzero((ratio >= lo) & (ratio < hi))
        if len(sel) == 0:
            continue
        t, wt = roots_legendre(order)
        grids = np.meshgrid(*([t] * N), indexing="ij")
        off = np.stack([m.ravel() for m in grids], axis=-1) * 0.5 * h
        ww = np.prod(np.meshgrid(*([wt] * N), indexing="ij"), axis=0).ravel() * 0.5 ** N
        for blk in np.array_split(sel, max(1, len(sel) * len(ww) // 200_000)):
            pts = (centres[blk, None, :] + off[None, :, :]).reshape(-1, N)
            zb = np.zeros((len(pts), N), dtype=np.int64)
            k = kernels.kernel_matrix(xa, np.ascontiguousarray(pts), zi, zb, law, norm, inv_w,
                                      params.expo, 0.0)[0]
            out[blk] = (k.reshape(len(blk), -1) @ ww) * np.prod(h)
    return out


def complement_integral_check(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                              K: SampledFunction, x, tol: float = 0.02,
                              sphere_resolution: int = 128) -> CheckReport:
    """int_{K^c} k(x, y) dy against the explicit floor C |K|^{-sp/Q}.

    K is the union of the grid cells where ``K.values`` is nonzero, an exact
    set. The integral over the box minus K is summed cell by cell with
    distance-graded Gauss rules; the part outside the box is the exterior
    tail. If x is not in K the integral diverges and lhs is reported as inf.
    ``tolerance`` is relative: the check passes when lhs >= (1 - tol) floor.
    """
    check_compatible(g, spec)
    x = np.asarray(x, dtype=float).reshape(-1)
    mask = K.flat != 0
    if not np.any(mask):
        raise InvalidInputError("K has zero measure")
    measure = float(np.count_nonzero(mask) * K.cell_volume)
    floor = complement_floor_constant(g, spec, params) * measure ** (-params.sp / params.Q)
    h = K.h
    kx = (x - K.lo) / h
    inside_box = np.all((kx > 0) & (kx < np.asarray(K.n)))
    in_K = False
    if inside_box:
        cell = np.minimum(np.floor(kx).astype(int), np.asarray(K.n) - 1)
        in_K = bool(K.values[tuple(cell)] != 0)
    if not in_K:
        lhs = float("inf")
    else:
        comp = ~mask
        inner = float(np.sum(_cell_integrals(g, spec, params, x, K.points[comp], h)))
        tail = float(exterior_tail(g, spec, params, K.lo, K.hi, x[None, :],
                                   resolution=sphere_resolution)[0])
        lhs = inner + tail
    # the inequality reads lhs >= floor; margin = lhs - floor
    rep = CheckReport("lemma-lem1", g.name, spec.kind, params.s, params.p, measure,
                      floor, lhs, tol * floor,
                      {"measure": measure, "x_in_K": in_K,
                       "relative_margin": (lhs - floor) / floor})
    return rep


# ---------------------------------------------------------------------------
# elementary inequality


def elementary_slack(a, t, p):
    """|a - t|^p - (1 - t)^{p-1} (|a|^p - t), for real or complex a."""
    a = np.asarray(a)
    return np.abs(a - t) ** p - (1.0 - t) ** (p - 1.0) * (np.abs(a) ** p - t)


def elementary_inequality_check(samples: int = 1_000_000, seed: int = 0,
                                amax: float = 1e3, pmax: float = 10.0,
                                chunk: int = 200_000) -> CheckReport:
    """Sample (a, t, p) and report the smallest slack of |a-t|^p >= (1-t)^{p-1}(|a|^p - t).

    Half the samples use complex a. Besides the raw minimum (``lhs`` is the
    negated minimum slack, ``rhs`` 0) the report carries the minimum of the
    slack relative to the magnitude of the terms, which is what rounding
    can actually resolve when |a|^p is large.
    """
    if samples < 1:
        raise InvalidInputError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    min_abs = np.inf
    min_rel = np.inf
    worst = None
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        t = rng.random(m)
        p = 1.0 + (pmax - 1.0) * (1.0 - rng.random(m))  # (1, pmax]
        # |a| log-uniform on [1e-3, amax] plus a few exact edge cases
        r = np.exp(rng.uniform(np.log(1e-3), np.log(amax), m))
        ang = rng.uniform(0, 2 * np.pi, m)
        cplx = rng.random(m) < 0.5
        a = np.where(cplx, r * np.exp(1j * ang), r * np.sign(np.cos(ang)))
        if done == 0:
            t[:3] = [0.0, 1.0, 0.5]
            a[:3] = [2.0, -3.0, 1.0]
        sl = elementary_slack(a, t, p)
        scale = np.abs(a - t) ** p + (1.0 - t) ** (p - 1.0) * (np.abs(a) ** p + t)
        rel = sl / np.maximum(scale, 1.0)
        i = int(np.argmin(sl))
        if sl[i] < min_abs:
            min_abs = float(sl[i])
            worst = (complex(a[i]), float(t[i]), float(p[i]))
        min_rel = min(min_rel, float(rel.min()))
        done += m
    return CheckReport("elementary-inequality", "-", "-", float("nan"), float("nan"), None, -min_abs, 0.0, 1e-12,
                       {"min_slack": min_abs, "min_relative_slack": min_rel,
                        "worst": worst, "samples": samples})


# ---------------------------------------------------------------------------
# Picone


def picone_remainder(omega_vals, u_vals, p: float) -> np.ndarray:
    """R(x, y) = |u(x)-u(y)|^p - (|u(x)|^p/w(x)^{p-1} - |u(y)|^p/w(y)^{p-1}) phi(w(x)-w(y))."""
    w = np.asarray(omega_vals, dtype=float)
    u = np.asarray(u_vals, dtype=float)
    if np.any(w <= 0):
        raise InvalidInputError("omega must be positive on the domain")
    psi = np.abs(u) ** p / w ** (p - 1.0)
    du = u[:, None] - u[None, :]
    dw = w[:, None] - w[None, :]
    return np.abs(du) ** p - (psi[:, None] - psi[None, :]) * np.sign(dw) * np.abs(dw) ** (p - 1.0)


def picone_check(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                 omega: SampledFunction, u: SampledFunction, mask=None,
                 cfg: QuadratureConfig | None = None, tol: float = 1e-10) -> CheckReport:
    """Pointwise Picone remainder on all pairs of Omega plus the integrated form.

    ``lhs``/``rhs`` are the integrated sides
    ``(1/2) iint_{Omega^2} phi(w(x)-w(y)) (psi(x)-psi(y)) k`` and
    ``(1/2) [u]^p_{Omega x Omega}`` with psi = |u|^p / w^{p-1};
    ``extra['min_R']`` is the smallest pointwise remainder.
    """
    if not omega.same_grid(u):
        raise InvalidInputError("omega and u must share a grid")
    m = np.ones(u.flat.shape, bool) if mask is None else np.asarray(mask, bool).reshape(-1)
    w = omega.flat
    if np.any(w[m] <= 0):
        raise InvalidInputError("omega must be positive on Omega")
    if np.any(u.flat[~m] != 0):
        raise InvalidInputError("u must be supported in Omega")
    R = picone_remainder(w[m], u.flat[m], params.p)
    min_R = float(R.min())
    psi = np.zeros_like(w)
    psi[m] = np.abs(u.flat[m]) ** params.p / w[m] ** (params.p - 1.0)
    # the integrated sides only involve Omega x Omega, where omega > 0
    w_full = omega.values.copy().reshape(-1)
    w_full[~m] = 0.0
    om = SampledFunction(omega.group_id, omega.lo, omega.hi, omega.n, w_full.reshape(omega.n), 0)
    uu = SampledFunction(u.group_id, u.lo, u.hi, u.n, u.values, 0)
    ps = SampledFunction(u.group_id, u.lo, u.hi, u.n, psi.reshape(u.n), 0)
    half_semi = 0.5 * weak_form(g, spec, params, uu, uu, domain_mask=m, cfg=cfg)
    pairing = 0.5 * weak_form(g, spec, params, om, ps, domain_mask=m, cfg=cfg)
    scale = max(abs(half_semi), abs(pairing), 1.0)
    return CheckReport("picone", g.name, spec.kind, params.s, params.p, None, pairing,
                       half_semi, tol * scale,
                       {"min_R": min_R, "pairs": int(R.size), "pointwise_ok": min_R >= -tol})


# ---------------------------------------------------------------------------
# Hardy


def hardy_check(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams, gam: float,
                u: SampledFunction, cfg: QuadratureConfig | None = None,
                mu: float | MuTable | None = None, policy: str = "exclude",
                tol: float = 1e-3) -> CheckReport:
    """2 mu(gamma) int |u|^p q^{-ps} <= [u]^p.

    The weight is singular at the origin; with ``policy="exclude"`` the grid
    cell containing it is left out of the left side, with ``"require_zero"``
    a nonzero value there is an error. ``mu`` can be passed in (a number or
    a MuTable row for this gamma) to avoid recomputing it.
    """
    params.require_subcritical()
    if policy not in ("exclude", "require_zero"):
        raise InvalidInputError(f"unknown singular-cell policy {policy!r}")
    if mu is None:
        mu = float(hardy_mu(g, spec, params, [gam]).mu[0])
    elif isinstance(mu, MuTable):
        i = int(np.argmin(np.abs(mu.gamma_grid - gam)))
        mu = float(mu.mu[i])
    pts = u.points
    qn = _norm_unchecked(g, spec, pts)
    kx = -u.lo / u.h
    origin_cell = None
    if np.all((kx >= 0) & (kx < np.asarray(u.n))):
        origin_cell = np.ravel_multi_index(tuple(np.minimum(np.floor(kx).astype(int),
                                                            np.asarray(u.n) - 1)), u.n)
    f = np.abs(u.flat) ** params.p
    keep = np.ones(len(f), dtype=bool)
    if origin_cell is not None:
        if policy == "require_zero" and f[origin_cell] != 0:
            raise InvalidInputError("u must vanish on the grid cell containing the origin")
        keep[origin_cell] = False
    keep &= qn > 0
    weighted = float(np.sum(f[keep] * qn[keep] ** (-params.sp)) * u.cell_volume)
    lhs = 2.0 * mu * weighted
    rhs = gagliardo_seminorm(g, spec, params, u, cfg)
    return CheckReport("hardy", g.name, spec.kind, params.s, params.p, float(gam), lhs, rhs,
                       tol * rhs, {"mu": mu, "weighted_lp": weighted,
                                   "ratio": rhs / lhs if lhs > 0 else float("inf")})


# ---------------------------------------------------------------------------
# Sobolev


def sobolev_ratio(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                  u: SampledFunction, cfg: QuadratureConfig | None = None) -> float:
    """[u]^p / ||u||_{p*}^p."""
    params.require_subcritical()
    ps = params.p_star
    nrm = u.lp_norm(ps)
    if nrm == 0:
        raise InvalidInputError("zero function has no Sobolev ratio")
    return gagliardo_seminorm(g, spec, params, u, cfg) / nrm ** params.p


def sobolev_ratio_scan(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                       family, cfg: QuadratureConfig | None = None) -> CheckReport:
    """Sobolev ratios over a family; the minimum estimates 1/C from below-ish.

    ``lhs`` is 0 and ``rhs`` the family minimum, so the report passes when
    every ratio is positive; all ratios are in ``extra['ratios']``.
    """
    family = list(family)
    if not family:
        raise InvalidInputError("family is empty")
    ratios = np.array([sobolev_ratio(g, spec, params, u, cfg) for u in family])
    return CheckReport("sobolev", g.name, spec.kind, params.s, params.p, None, 0.0,
                       float(ratios.min()), 0.0, {"ratios": ratios.tolist()})


def sobolev_invariance(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams, f,
                       n, lams=(0.5, 2.0), shift=None, cfg: QuadratureConfig | None = None,
                       tol: float = 0.03, resolution: str = "fixed") -> CheckReport:
    """Sobolev ratio of f against its dilates f(dilate(lam, .)) and a left translate.

    ``resolution="fixed"`` samples every variant on one common box, so the
    discretizations genuinely differ. ``"matched"`` samples each variant on
    its own tight box, the dilate on the dilated box of f (then the grid sums
    transform exactly and the check exercises the scaling exponents rather
    than the discretization). ``extra['deviation']`` is the largest relative
    departure from the ratio of f; the check passes when it is at most ``tol``
    (``lhs`` = deviation, ``rhs`` = tol).
    """
    from .families import Dilated, Translated, sample, support_box

    if resolution not in ("fixed", "matched"):
        raise InvalidInputError(f"unknown resolution mode {resolution!r}")
    variants = [("base", f)] + [(f"dilate:{lam:g}", Dilated(f, float(lam))) for lam in lams]
    if shift is not None:
        variants.append(("translate", Translated(f, tuple(map(float, shift)))))
    boxes = {}
    for name, v in variants:
        sh = v.a if isinstance(v, Translated) else None
        boxes[name] = support_box(g, spec, v.outer, n, shift=sh)
    if resolution == "fixed":
        lo = np.min([b[0] for b in boxes.values()], axis=0)
        hi = np.max([b[1] for b in boxes.values()], axis=0)
        boxes = {k: (lo, hi, b[2]) for k, b in boxes.items()}
    else:
        lo0, hi0, n0 = boxes["base"]
        for name, v in variants:
            if isinstance(v, Dilated):
                sc = v.lam ** (-g.weight_array)
                boxes[name] = (lo0 * sc, hi0 * sc, n0)
    ratios = {}
    for name, v in variants:
        lo, hi, nn = boxes[name]
        ratios[name] = sobolev_ratio(g, spec, params, sample(g, v, lo, hi, nn), cfg)
    base = ratios["base"]
    dev = max(abs(r / base - 1.0) for r in ratios.values())
    return CheckReport("sobolev-invariance", g.name, spec.kind, params.s, params.p, None, dev,
                       tol, 0.0, {"ratios": ratios, "deviation": dev, "resolution": resolution})


# ---------------------------------------------------------------------------
# operator cross-oracle for mu on the line


def mu_operator_oracle(params: FracParams, gam: float, n: int = 4096, half_width: float = 8.0,
                       r_min: float = 0.25, x0: float = 1.0,
                       cfg: QuadratureConfig | None = None) -> dict:
    """mu(gamma) on R^1 from the grid operator applied to |x|^{-gamma}.

    The power is sampled on the cells covering r_min <= |x| <= r_max (grid
    edges sit exactly on r_min and r_max) and set to zero elsewhere. The grid
    operator at the cell centre nearest ``x0`` then misses
    int_{removed} [phi(w(x0) - w(y)) - phi(w(x0))] k(x0, y) dy, which is added
    by adaptive 1-D quadrature. By homogeneity

        (operator without its factor 2) at x0 = mu |x0|^{-ps - gamma(p-1)}.

    Returns the grid estimate, its pieces and the point actually used.
    """
    from scipy.integrate import quad

    from .groups import abelian, parse_norm
    from .nonlocal_ops import operator_on_grid

    g, spec = abelian(1), parse_norm("euclidean")
    p, sp = params.p, params.sp
    cfg = cfg or QuadratureConfig(near_mode="local_correction")
    h = 2.0 * half_width / n
    # snap r_min to a cell edge and keep a zero margin of 2 cells inside the box
    r_min = h * round(r_min / h)
    r_max = half_width - 2 * h
    edges = -half_width + h * np.arange(n + 1)
    centres = 0.5 * (edges[:-1] + edges[1:])
    ax = np.abs(centres)
    vals = np.where((ax > r_min) & (ax < r_max), np.maximum(ax, r_min) ** (-gam), 0.0)
    u = SampledFunction(g.name, [-half_width], [half_width], (n,), vals, 1)
    i0 = int(np.argmin(np.abs(centres - x0)))
    x = centres[i0]
    sel = np.zeros(n, dtype=bool)
    sel[i0] = True
    grid_val = 0.5 * float(operator_on_grid(g, spec, params, u, cfg, where=sel)[0])
    w0 = x ** (-gam)

    def phi(d):
        return np.sign(d) * abs(d) ** (p - 1.0)

    def integrand(y):
        return (phi(w0 - abs(y) ** (-gam)) - phi(w0)) * abs(x - y) ** (-1.0 - sp)

    # removed regions: |y| < r_min (singular at 0 when gamma(p-1) > 0) and |y| > r_max
    kw = dict(limit=400, epsabs=1e-12, epsrel=1e-10)
    inner = quad(integrand, -r_min, 0.0, **kw)[0] + quad(integrand, 0.0, r_min, **kw)[0]
    outer = quad(integrand, r_max, np.inf, **kw)[0] + quad(integrand, -np.inf, -r_max, **kw)[0]
    total = grid_val + inner + outer
    mu = total * x ** (sp + gam * (p - 1.0))
    return {"mu": mu, "x": x, "grid": grid_val, "inner": inner, "outer": outer}
