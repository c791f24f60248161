"""The Hardy constant mu(gamma) of the fractional p-sub-Laplacian.

For omega = q^{-gamma} and x = dilate(r, x') with q(x') = 1, the operator without
its leading factor 2,

    PV int |w(x) - w(y)|^{p-2} (w(x) - w(y)) k(x, y) dy = mu(gamma; x') q(x)^{-ps-gamma(p-1)},

where, with a = Q + ps, the sphere functions

    L(rho; x') = int_{q(y')=1} q((dilate(rho, y'))^{-1} o x')^{-a} dsigma(y'),
    M(rho; x') = int_{q(y')=1} q(y'^{-1} o dilate(rho, x'))^{-a} dsigma(y')

give

    mu(gamma; x') = int_0^inf phi(1 - rho^{-gamma}) L(rho; x') rho^{Q-1} drho                (unfolded)
                  = int_1^inf (rho^gamma - 1)^{p-1} [rho^{Q-1-gamma(p-1)} L - rho^{ps-1} M] drho  (folded)

The folded form follows from rho -> 1/rho and L(1/z; x') = z^a M(z; x'). When L
does not depend on x' (Euclidean norms, by rotation invariance) M = L and the
bracket is L rho^{ps-1}(rho^{Q-ps-gamma(p-1)} - 1), which is positive for
0 < gamma < (Q-ps)/(p-1).

L and M are nearly singular for rho -> 1 (they blow up like |rho-1|^{-1-ps}),
so each (group, norm) pair gets an evaluator that resolves the peak:
a closed form on R^1, a graded 1-D integral for Euclidean R^N, and a local
chart with graded tensor Gauss rules on the Koranyi sphere. Other pairs fall
back to the plain sphere sum and compute mu by the translation-centred route
:func:`mu_direct`, which never meets the near-singular sphere integrals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gamma as gamma_fn, pi

import numpy as np
from scipy.optimize import minimize
from scipy.special import beta as beta_fn, betainc, roots_jacobi, roots_legendre

from .errors import ConvergenceError, InvalidInputError
from .groups import (GroupDescriptor, QuasiNormSpec, _norm_unchecked, check_compatible,
                     relative_offset)
from .nonlocal_ops import FracParams
from .sphere import SphereQuadrature, build_sphere_quadrature, koranyi_point

__all__ = [
    "MuTable",
    "admissible_gamma_max",
    "default_base_points",
    "sphere_function",
    "sphere_evaluator",
    "hardy_mu",
    "mu_direct",
    "mu_unfolded",
    "mu_folded_from",
    "averaged_sphere_function",
]


def admissible_gamma_max(params: FracParams) -> float:
    """Upper end (Q - ps)/(p - 1) of the admissible gamma interval."""
    return (params.Q - params.sp) / (params.p - 1.0)


def _check_gamma(params: FracParams, gam: float, strict: bool = True):
    gmax = admissible_gamma_max(params)
    if strict and not (0.0 < gam < gmax):
        raise InvalidInputError(
            f"gamma={gam} outside the admissible interval (0, {gmax:.6g})"
        )
    if not strict and not (0.0 <= gam < params.Q / (params.p - 1.0)):
        # the operator of q^{-gamma} exists as long as q^{-gamma(p-1)} is locally integrable
        raise InvalidInputError(f"gamma={gam} makes the operator of q^-gamma diverge")


def default_base_points(g: GroupDescriptor, spec: QuasiNormSpec) -> np.ndarray:
    """A few points of the unit quasi-sphere used to probe x'-dependence of L."""
    check_compatible(g, spec)
    if spec.kind == "koranyi":
        # rotations in (x, y) are automorphisms preserving q, so only the chart
        # latitude matters; stay away from the poles where the chart degenerates
        return koranyi_point(np.array([0.0, pi / 8, pi / 4, 3 * pi / 8]), np.zeros(4))
    if g.N == 1:
        return np.array([[1.0], [-1.0]])
    raw = [np.eye(g.N)[0], np.full(g.N, 1.0), np.r_[1.0, -0.5, np.zeros(g.N - 2)]]
    if g.law == "heisenberg":
        raw.append(np.array([0.3, 0.2, 1.0]))
    pts = np.array(raw)
    qn = _norm_unchecked(g, spec, pts)
    return pts / qn[:, None] ** g.weight_array


def _dilate(g, r, y):
    return y * np.power(np.asarray(r, dtype=float)[..., None], g.weight_array)


def sphere_function(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams, rho,
                    base_point, sphere: SphereQuadrature) -> np.ndarray:
    """Plain quadrature sum L(rho; x') = sum_j w_j q((dilate(rho, y_j))^{-1} o x')^{-(Q+ps)}.

    Accurate away from rho = 1 only; see :func:`sphere_evaluator` for the
    peak-resolving versions.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    x0 = np.asarray(base_point, dtype=float)
    y = _dilate(g, rho[:, None], sphere.nodes[None, :, :])
    qv = _norm_unchecked(g, spec, relative_offset(g, x0, y))
    return (qv ** (-params.expo)) @ sphere.weights


def averaged_sphere_function(g, spec, params, rho, sphere: SphereQuadrature) -> np.ndarray:
    """x'-average of L over the sphere, as a symmetric double sum.

    Using the same node set for x' and y' makes the discrete average satisfy
    the reflection identity Lbar(1/z) = z^{Q+ps} Lbar(z) exactly (up to rounding).
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.empty(len(rho))
    for i, r in enumerate(rho):
        y = _dilate(g, r, sphere.nodes)
        z = relative_offset(g, sphere.nodes[:, None, :], y[None, :, :])
        qv = _norm_unchecked(g, spec, z)
        out[i] = sphere.weights @ (qv ** (-params.expo)) @ sphere.weights
    return out / sphere.total


# ---------------------------------------------------------------------------
# peak-resolving evaluators


def _graded_nodes(c, lo, hi, h0, order=8, segments=16):
    """Gauss nodes on [lo, hi] with panels doubling away from c, starting at h0."""
    xg, wg = roots_legendre(order)
    br = [c]
    k = h0
    while c - k > lo:
        br.insert(0, c - k)
        k *= 2.0
    k = h0
    while c + k < hi:
        br.append(c + k)
        k *= 2.0
    br = np.unique(np.clip(np.r_[lo, br, hi], lo, hi))
    cap = (hi - lo) / segments
    fine = [br[0]]
    for b in br[1:]:
        m = int(np.ceil((b - fine[-1]) / cap))
        fine.extend(np.linspace(fine[-1], b, m + 1)[1:])
    br = np.asarray(fine)
    mid = 0.5 * (br[1:] + br[:-1])
    half = 0.5 * (br[1:] - br[:-1])
    return (mid[:, None] + half[:, None] * xg).ravel(), (half[:, None] * wg).ravel()


def _cutoff(t):
    """Smooth even bump: 1 on |t| <= 1/4, 0 on |t| >= 1."""
    t = np.abs(t)
    out = np.zeros_like(t)
    out[t <= 0.25] = 1.0
    m = (t > 0.25) & (t < 1.0)
    u = (t[m] - 0.25) / 0.75
    e1 = np.exp(-1.0 / (1.0 - u))
    e0 = np.exp(-1.0 / u)
    out[m] = e1 / (e1 + e0)
    return out


class _LineEvaluator:
    """R^1: the sphere is {+-1} with unit weights; closed form."""

    accurate = True

    def __init__(self, params):
        self.a = params.expo

    def L(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.abs(1.0 - rho) ** (-self.a) + (1.0 + rho) ** (-self.a)

    M = L


class _RadialEvaluator:
    """Euclidean R^N, N >= 2: by rotation invariance

    L(rho) = |S^{N-2}| int_0^pi (1 - 2 rho cos t + rho^2)^{-a/2} sin^{N-2} t dt,

    integrated on panels graded toward the near-singular endpoint t = 0.
    """

    accurate = True

    def __init__(self, g, params):
        self.N = g.N
        self.a = params.expo
        self.area = 2.0 * pi ** ((g.N - 1) / 2) / gamma_fn((g.N - 1) / 2)

    def _one(self, r):
        eps = max(abs(r - 1.0), 1e-300)
        t, w = _graded_nodes(0.0, 0.0, pi, min(eps, 0.5) / 2.0, order=10, segments=32)
        # 1 - 2 r cos t + r^2 = (r-1)^2 + 4 r sin^2(t/2), without cancellation
        base = (r - 1.0) ** 2 + 4.0 * r * np.sin(0.5 * t) ** 2
        return self.area * np.sum(w * base ** (-0.5 * self.a) * np.sin(t) ** (self.N - 2))

    def L(self, rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        return np.array([self._one(r) for r in rho])

    M = L


class _KoranyiEvaluator:
    """Koranyi sphere on H^1, via the chart (x^2+y^2, 4t) = (cos th, sin th), d sigma = dth dpsi / 4.

    Around the peak the integrand varies on scale eps = |rho - 1| along the
    horizontal direction d(th, psi) ~ (2, 1) and on scale eps^2 across it. With
    th = th_c + 2s + w, psi = psi_c + s (unit Jacobian) centred on the located
    peak, the cut-off part chi * F is integrated on a graded tensor Gauss grid
    and (1 - chi) * F on the global chart rule.
    """

    accurate = True

    def __init__(self, g, spec, params, base_point, resolution=512, far_resolution=128):
        self.g = g
        self.spec = spec
        self.a = params.expo
        self.x0 = np.asarray(base_point, dtype=float)
        self.glob = build_sphere_quadrature(g, spec, resolution)
        self.far = build_sphere_quadrature(g, spec, far_resolution)
        nodes = self.glob.nodes
        self._th = np.arcsin(np.clip(4.0 * nodes[:, 2], -1.0, 1.0))
        self._psi = np.arctan2(nodes[:, 1], nodes[:, 0])

    def _q4(self, z):
        r2 = z[..., 0] ** 2 + z[..., 1] ** 2
        return r2 * r2 + 16.0 * z[..., 2] ** 2

    def _integrand(self, rho, which):
        g, x0 = self.g, self.x0
        if which == "L":
            return lambda y: self._q4(relative_offset(g, x0, _dilate(g, rho, y)))
        P = _dilate(g, rho, x0)
        return lambda y: self._q4(relative_offset(g, y, P))

    def _peak(self, G, th0, eps):
        def at(v, sc):
            s, w = v[0] * sc[0], v[1] * sc[1]
            return G(koranyi_point(th0 + 2.0 * s + w, s)) / eps ** 4

        opts = dict(xatol=1e-10, fatol=1e-14, maxiter=4000)
        r1 = minimize(at, [0.0, 0.0], args=((eps, eps),), method="Nelder-Mead", options=opts)
        start = [r1.x[0], r1.x[1] / eps]
        r2 = minimize(at, start, args=((eps, eps * eps),), method="Nelder-Mead", options=opts)
        return r2.x[0] * eps, r2.x[1] * eps * eps

    def _value(self, rho, which):
        G = self._integrand(rho, which)
        eps = abs(rho - 1.0)
        th0 = float(np.arcsin(np.clip(4.0 * self.x0[2], -1.0, 1.0)))
        if eps >= 1.0:
            nodes, w = self.far.nodes, self.far.weights
            return float(np.sum(w * G(nodes) ** (-0.25 * self.a)))
        s0, w0 = self._peak(G, th0, eps)
        thc = th0 + 2.0 * s0 + w0
        psc = s0
        eta = min(0.4, (0.5 * pi - abs(thc)) / 4.0)
        if eta < 0.02:
            raise ConvergenceError(f"peak too close to the pole (theta={thc:.4f})")
        ss, ws = _graded_nodes(0.0, -eta, eta, eps / 2.0)
        ww, wws = _graded_nodes(0.0, -eta, eta, eps * eps / 2.0)
        S, W = np.meshgrid(ss, ww, indexing="ij")
        pts = koranyi_point(thc + 2.0 * S + W, psc + S)
        f = G(pts) ** (-0.25 * self.a) * _cutoff(S / eta) * _cutoff(W / eta)
        local = 0.25 * np.einsum("i,ij,j->", ws, f, wws)
        s = np.mod(self._psi - psc + pi, 2.0 * pi) - pi
        w = self._th - thc - 2.0 * s
        chi = _cutoff(s / eta) * _cutoff(w / eta)
        far = np.sum(self.glob.weights * (1.0 - chi) * G(self.glob.nodes) ** (-0.25 * self.a))
        return float(local + far)

    def L(self, rho):
        return np.array([self._value(r, "L") for r in np.atleast_1d(rho)])

    def M(self, rho):
        return np.array([self._value(r, "M") for r in np.atleast_1d(rho)])


class _PlainEvaluator:
    """Plain sphere sums; not reliable near rho = 1."""

    accurate = False

    def __init__(self, g, spec, params, base_point, resolution=256):
        self.g, self.spec, self.params = g, spec, params
        self.x0 = np.asarray(base_point, dtype=float)
        self.sphere = build_sphere_quadrature(g, spec, resolution)

    def L(self, rho):
        return sphere_function(self.g, self.spec, self.params, rho, self.x0, self.sphere)

    def M(self, rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        P = _dilate(self.g, rho[:, None], self.x0[None, :])
        z = relative_offset(self.g, self.sphere.nodes[None, :, :], P[:, None, :])
        qv = _norm_unchecked(self.g, self.spec, z)
        return (qv ** (-self.params.expo)) @ self.sphere.weights


def sphere_evaluator(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams,
                     base_point, resolution: int = 512):
    """Evaluator object with methods ``L(rho)``, ``M(rho)`` and flag ``accurate``."""
    check_compatible(g, spec)
    base_point = np.asarray(base_point, dtype=float)
    if g.law == "abelian" and g.N == 1:
        return _LineEvaluator(params)
    if spec.kind == "euclidean":
        return _RadialEvaluator(g, params)
    if spec.kind == "koranyi":
        return _KoranyiEvaluator(g, spec, params, base_point, resolution)
    return _PlainEvaluator(g, spec, params, base_point, resolution)


# ---------------------------------------------------------------------------
# the rho quadrature


def _power_beta(e, gam, p, tau):
    """int_0^tau t^{e-1} (1 - t^gamma)^{p-1} dt, an incomplete beta function."""
    a = e / gam
    return beta_fn(a, p) * betainc(a, p, tau ** gam) / gam


_NEAR_LEVELS = 14
_FAR_LEVELS = 20


def _rho_rule(order=6):
    """Gauss nodes on (1, 1 + 2^-K] (geometric panels) and [2, 2^J]."""
    xg, wg = roots_legendre(order)
    near = [(1.0 + 2.0 ** (-k - 1), 1.0 + 2.0 ** (-k)) for k in range(_NEAR_LEVELS)]
    far = [(2.0 ** j, 2.0 ** (j + 1)) for j in range(1, _FAR_LEVELS)]
    pan = np.array(near[::-1] + far)
    mid = 0.5 * (pan[:, 1] + pan[:, 0])
    half = 0.5 * (pan[:, 1] - pan[:, 0])
    rho = (mid[:, None] + half[:, None] * xg).ravel()
    w = (half[:, None] * wg).ravel()
    return rho, w


@dataclass
class _SphereTable:
    rho: np.ndarray
    weights: np.ndarray
    L: np.ndarray
    M: np.ndarray
    accurate: bool


@lru_cache(maxsize=64)
def _table(g, spec, s, p, base_key, resolution):
    params = FracParams(s, p, g.Q)
    ev = sphere_evaluator(g, spec, params, np.array(base_key), resolution)
    rho, w = _rho_rule()
    return _SphereTable(rho, w, ev.L(rho), ev.M(rho), ev.accurate)


def mu_folded_from(params: FracParams, gam: float, rho, weights, L, M) -> float:
    """Folded-form integral from tabulated L, M on the standard rho rule.

    The piece (1, 1 + 2^-K) is integrated from the power law
    f ~ C (rho - 1)^{p-1-ps} fitted at the innermost node; the tail beyond
    the last panel uses f ~ C rho^{-1-ps}.
    """
    Q, p, sp = params.Q, params.p, params.sp
    f = (rho ** gam - 1.0) ** (p - 1.0) * (
        rho ** (Q - 1.0 - gam * (p - 1.0)) * L - rho ** (sp - 1.0) * M
    )
    total = float(np.sum(weights * f))
    i0 = int(np.argmin(rho))
    e0 = rho[i0] - 1.0
    c0 = f[i0] / e0 ** (p - 1.0 - sp)
    eK = 2.0 ** (-_NEAR_LEVELS)
    total += c0 * eK ** (p - sp) / (p - sp)
    # beyond R, with t = 1/rho and L(rho) = rho^-a M(1/rho), M(rho) = rho^-a L(1/rho):
    # f drho = [t^{ps-1} M(t) - t^{Q-1-gamma(p-1)} L(t)] (1 - t^gamma)^{p-1} dt,
    # where L(t), M(t) -> sigma as t -> 0
    i1 = int(np.argmax(rho))
    R = rho[i1]
    mt = L[i1] * R ** params.expo
    lt = M[i1] * R ** params.expo
    tau = 1.0 / (2.0 ** _FAR_LEVELS)
    total += mt * _power_beta(sp, gam, p, tau) - lt * _power_beta(Q - gam * (p - 1.0), gam, p, tau)
    return total


# ---------------------------------------------------------------------------
# MuTable and the public entry point


@dataclass
class MuTable:
    """mu(gamma) values with the sphere-function diagnostics they came from.

    ``mu`` is the constant valid at every base point: computed from the mean L
    when the anisotropy is below ``gate``, otherwise the minimum of the
    per-base-point values (which are kept in ``mu_per_base``).
    """

    group: str
    norm: str
    s: float
    p: float
    gamma_grid: np.ndarray
    mu: np.ndarray
    mu_per_base: np.ndarray
    base_points: np.ndarray
    rho_samples: np.ndarray
    L_samples: np.ndarray
    anisotropy: float
    scalar_path: bool
    method: str
    gate: float = 0.01
    notes: list = field(default_factory=list)

    def rows(self):
        for i, gm in enumerate(self.gamma_grid):
            yield {"gamma": float(gm), "mu": float(self.mu[i]),
                   "mu_min": float(np.min(self.mu_per_base[i])),
                   "mu_max": float(np.max(self.mu_per_base[i])),
                   "anisotropy": self.anisotropy, "method": self.method}


def hardy_mu(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams, gamma,
             base_points=None, resolution: int = 512, strict: bool = True,
             gate: float = 0.01) -> MuTable:
    """mu(gamma) for one or more gamma values.

    With ``strict`` (default) gamma must lie in (0, (Q-ps)/(p-1)). With
    ``strict=False`` any gamma for which the operator of q^-gamma exists is
    accepted and the signed value is returned (used for cross-checks when the
    admissible interval is empty).
    """
    check_compatible(g, spec)
    gammas = np.atleast_1d(np.asarray(gamma, dtype=float))
    for gm in gammas:
        _check_gamma(params, float(gm), strict)
    if strict:
        params.require_subcritical()
    bps = default_base_points(g, spec) if base_points is None else np.atleast_2d(base_points)
    tables = [_table(g, spec, params.s, params.p, tuple(map(float, b)), resolution) for b in bps]
    accurate = all(t.accurate for t in tables)
    rho = tables[0].rho
    Ls = np.array([t.L for t in tables])
    Lmean = Ls.mean(axis=0)
    spread = float(np.max((Ls.max(axis=0) - Ls.min(axis=0)) / np.abs(Lmean)))
    notes = []
    if accurate:
        per = np.array([[mu_folded_from(params, gm, t.rho, t.weights, t.L, t.M) for t in tables]
                        for gm in gammas])
        method = "folded"
    else:
        per = np.array([[mu_direct(g, spec, params, gm, b, resolution=resolution) for b in bps]
                        for gm in gammas])
        method = "direct"
        notes.append("no peak-resolving sphere evaluator for this norm; used translation-centred route")
    scalar = spread < gate
    if scalar and accurate:
        Mmean = np.array([t.M for t in tables]).mean(axis=0)
        mu = np.array([mu_folded_from(params, gm, rho, tables[0].weights, Lmean, Mmean)
                       for gm in gammas])
    else:
        mu = per.min(axis=1)
    if not np.all(np.isfinite(mu)):
        raise ConvergenceError("mu quadrature produced non-finite values")
    return MuTable(g.name, spec.kind, params.s, params.p, gammas, mu, per, bps, rho, Ls,
                   spread, scalar, method, gate, notes)


# ---------------------------------------------------------------------------
# independent routes


def mu_unfolded(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams, gam: float,
                base_point, resolution: int = 512, strict: bool = True) -> float:
    """mu from the signed full-line integral int_0^inf phi(1 - rho^-gamma) L rho^{Q-1} drho.

    The principal value at rho = 1 is taken by pairing rho = 1 + t with
    rho = 1 - t for t < 1/2; the rest is integrated directly.
    """
    _check_gamma(params, gam, strict)
    Q, p, sp = params.Q, params.p, params.sp
    ev = sphere_evaluator(g, spec, params, base_point, resolution)

    def phi(d):
        return np.sign(d) * np.abs(d) ** (p - 1.0)

    def f(r):
        return phi(1.0 - r ** (-gam)) * ev.L(r) * r ** (Q - 1.0)

    xg, wg = roots_legendre(8)
    # paired part, t in (0, 1/2)
    tot = 0.0
    for k in range(1, 30):
        a, b = 2.0 ** (-k - 1), 2.0 ** (-k)
        t = 0.5 * (a + b) + 0.5 * (b - a) * xg
        tot += 0.5 * (b - a) * np.sum(wg * (f(1.0 + t) + f(1.0 - t)))
    # (0, 1/2) on panels graded toward 0; below tau the integrand is
    # -L(0) rho^{Q-1-gamma(p-1)} (1 - rho^gamma)^{p-1}
    edges0 = 0.5 ** np.arange(60, 0, -1)
    for a, b in zip(edges0[:-1], edges0[1:]):
        r = 0.5 * (a + b) + 0.5 * (b - a) * xg
        tot += 0.5 * (b - a) * np.sum(wg * f(r))
    L0 = float(ev.L(np.array([0.0]))[0])  # = sigma(unit sphere)
    tot -= L0 * _power_beta(Q - gam * (p - 1.0), gam, p, edges0[0])
    # (3/2, inf)
    edges = np.r_[1.5, 2.0 ** np.arange(1, _FAR_LEVELS + 1)]
    for a, b in zip(edges[:-1], edges[1:]):
        r = 0.5 * (a + b) + 0.5 * (b - a) * xg
        tot += 0.5 * (b - a) * np.sum(wg * f(r))
    R = edges[-1]
    coef = ev.L(np.array([R]))[0] * R ** params.expo
    tot += coef * _power_beta(sp, gam, p, 1.0 / R)
    return float(tot)


def mu_direct(g: GroupDescriptor, spec: QuasiNormSpec, params: FracParams, gam: float,
              base_point, resolution: int = 256, strict: bool = True) -> float:
    """mu(gamma; x') by polar coordinates centred at x' itself.

    With y = x' o dilate(r, z), q(y^{-1} o x') = r, so

        mu = int_0^inf r^{-1-ps} A(r) dr,  A(r) = sum_j sigma_j phi(1 - q(x' o dilate(r, z_j))^{-gamma}).

    Directions are paired with their negatives, which cancels the odd
    first-order part of A and leaves A(r) = O(r^p) at r = 0; that end is
    integrated by Gauss-Jacobi with weight r^{p-1-ps}. The integrable
    singularity of q(y)^{-gamma} at y = 0 (r = 1, z = -x') is handled by
    panels graded toward r = 1.
    """
    _check_gamma(params, gam, strict)
    check_compatible(g, spec)
    p, sp = params.p, params.sp
    x0 = np.asarray(base_point, dtype=float)
    sph = build_sphere_quadrature(g, spec, resolution)
    nodes, sw = sph.nodes, sph.weights

    def phi(d):
        return np.sign(d) * np.abs(d) ** (p - 1.0)

    def A(r):
        r = np.atleast_1d(r)
        out = np.empty(len(r))
        for i, rk in enumerate(r):
            acc = 0.0
            for sgn in (1.0, -1.0):
                # x' o dilate(r, z): compose with the group law
                d = _dilate(g, rk, sgn * nodes)
                yy = d + x0
                if g.law == "heisenberg":
                    yy = yy.copy()
                    yy[:, 2] += 0.5 * (x0[0] * d[:, 1] - x0[1] * d[:, 0])
                qy = _norm_unchecked(g, spec, yy)
                with np.errstate(divide="ignore"):
                    acc += sw @ phi(1.0 - qy ** (-gam))
            out[i] = 0.5 * acc
        return out

    xg, wg = roots_legendre(8)
    tot = 0.0
    # (0, 2^-6]: Gauss-Jacobi on A(r) / r^p with weight r^{p-1-ps};
    # geometric Gauss-Legendre panels from there up to 1/4
    beta = p - 1.0 - sp
    jx, jw = roots_jacobi(16, 0.0, beta)
    c = 2.0 ** -7
    r = c * (1.0 + jx)
    tot += np.sum(jw * c ** (1.0 + beta) * A(r) / r ** p)
    for k in range(6, 2, -1):
        a, b = 2.0 ** (-k), 2.0 ** (1 - k)
        rr = 0.5 * (a + b) + 0.5 * (b - a) * xg
        tot += 0.5 * (b - a) * np.sum(wg * rr ** (-1.0 - sp) * A(rr))
    # (1/4, 1) and (1, 2), graded toward 1
    deep = 40 if g.N == 1 else 24
    left = [0.25] + [1.0 - 2.0 ** (-k) for k in range(2, deep)]
    right = [1.0 + 2.0 ** (-k) for k in range(deep - 1, 1, -1)]
    if g.N == 1:
        # phi is only Hoelder at q(y) = 1, which on the line is r = 2
        right += [2.0 - 2.0 ** (-k) for k in range(2, 30)]
        right += [2.0 + 2.0 ** (-k) for k in range(29, 1, -1)]
    right += [v for v in 2.0 ** np.arange(1, _FAR_LEVELS + 1) if v > right[-1]]
    edges = np.asarray(left + right)
    skip = len(left) - 1  # index of the panel straddling r = 1
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if i == skip and g.N == 1:
            continue
        rr = 0.5 * (a + b) + 0.5 * (b - a) * xg
        tot += 0.5 * (b - a) * np.sum(wg * rr ** (-1.0 - sp) * A(rr))
    if g.N == 1:
        # the gap |r - 1| < 2^-(deep-1) around the node z = -x', where
        # phi(1 - |1-r|^-gamma) = -|1-r|^{-gamma(p-1)} (1 - |1-r|^gamma)^{p-1}
        gap = 2.0 ** (-(deep - 1))
        tot -= 2.0 * _power_beta(1.0 - gam * (p - 1.0), gam, p, gap)
    R = edges[-1]
    # A(r) ~ sigma (1 - r^-gamma)^{p-1} for large r
    coef = A(np.array([R]))[0] / (1.0 - R ** (-gam)) ** (p - 1.0)
    tot += coef * _power_beta(sp, gam, p, 1.0 / R)
    return float(tot)
