"""First Dirichlet eigenvalue of the fractional p-sub-Laplacian on grid domains.

The discrete energy of interior values u_i (u = 0 outside Omega) is

    E(u) = sum_{i != j} W_ij |u_i - u_j|^p + sum_i b_i |u_i|^p,

with W_ij = h^N h^N k(x_i, x_j) over ordered pairs (the double integral
counts each unordered pair twice) and b_i = 2 h^N int_{G \\ Omega} k(x_i, y) dy,
the interaction with the zero exterior on both orderings. The grid part of
b runs over the box cells outside Omega, the rest is the exterior tail of the
box. Then E(u) is the midpoint discretization of [u]^p and

    lambda_1 = min E(u) / (h^N sum_i omega_i |u_i|^p),

with omega = 1 unless a weight is given. The Euler-Lagrange equation is the
discrete weak form  2 sum_j W_ij phi(u_i - u_j) + b_i phi(u_i) = lambda h^N omega_i phi(u_i).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from . import kernels
from .errors import ConvergenceError, InvalidInputError
from .grid import box_grid
from .groups import (GroupDescriptor, QuasiNormSpec, _norm_unchecked, check_compatible,
                     parse_group, parse_norm)
from .nonlocal_ops import FracParams, QuadratureConfig, _codes, exterior_tail

__all__ = [
    "Domain",
    "quasi_ball",
    "NonlocalForm",
    "assemble",
    "energy",
    "rayleigh_quotient",
    "SolverConfig",
    "EigenResult",
    "minimize_rayleigh",
    "dense_eigen",
    "weak_residual",
    "lyapunov_product",
    "lyapunov_check",
    "append_ledger",
]

MAX_DENSE = 6000


@dataclass
class Domain:
    """A grid domain Omega inside the box [lo, hi] with n cells per axis."""

    group_id: str
    norm_id: str
    lo: np.ndarray
    hi: np.ndarray
    n: tuple
    mask: np.ndarray
    R: float | None = None

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        self.n = tuple(int(m) for m in self.n)
        self.mask = np.asarray(self.mask, dtype=bool).reshape(self.n)
        if not np.any(self.mask):
            raise InvalidInputError("domain mask is empty")

    @property
    def group(self) -> GroupDescriptor:
        return parse_group(self.group_id)

    @property
    def norm(self) -> QuasiNormSpec:
        return parse_norm(self.norm_id)

    @property
    def h(self) -> np.ndarray:
        return (self.hi - self.lo) / np.asarray(self.n)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def grid(self):
        return box_grid(self.lo, self.hi, self.n)

    @property
    def points(self) -> np.ndarray:
        return self.grid()[0][self.mask.reshape(-1)]

    @property
    def volume(self) -> float:
        return float(np.count_nonzero(self.mask) * self.cell_volume)

    @property
    def r_inner(self) -> float:
        """max of q over the grid points of Omega."""
        return float(np.max(_norm_unchecked(self.group, self.norm, self.points)))

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.mask))


def quasi_ball(g: GroupDescriptor, spec: QuasiNormSpec, R: float, n, pad_cells: int = 2) -> Domain:
    """Grid domain B_q(0, R) on a box that fits the ball plus ``pad_cells`` layers.

    The box scales with R (coordinate i by R^{v_i}), so balls of different
    radii with the same ``n`` are exact dilates of each other on the grid.
    """
    check_compatible(g, spec)
    if not R > 0:
        raise InvalidInputError("radius must be positive")
    n = np.broadcast_to(np.asarray(n, dtype=int), (g.N,))
    # coordinate extent of the unit ball
    if spec.kind == "koranyi":
        ext = np.array([1.0, 1.0, 0.25])
    else:
        ext = np.ones(g.N)
    # n cells across the ball: the pad adds cells of the same size outside
    inner = n - 2 * pad_cells
    if np.any(inner < 2):
        raise InvalidInputError("grid too small for the requested padding")
    h1 = 2.0 * ext / inner
    hi = ext + pad_cells * h1
    scale = R ** g.weight_array
    lo, hi = -hi * scale, hi * scale
    pts, _, _ = box_grid(lo, hi, n)
    mask = _norm_unchecked(g, spec, pts) < R
    return Domain(g.name, spec.kind, lo, hi, tuple(n), mask.reshape(tuple(n)), float(R))


@dataclass
class NonlocalForm:
    """Dense pair weights on the interior points and the exterior column b."""

    domain: Domain
    params: FracParams
    W: np.ndarray
    b: np.ndarray
    cell_volume: float

    @property
    def size(self) -> int:
        return len(self.b)

    def p2_matrix(self) -> np.ndarray:
        """A with E(u) = u^T A u when p = 2: A = 2 (diag(W 1) - W) + diag(b)."""
        A = -2.0 * self.W
        A[np.diag_indices_from(A)] += 2.0 * self.W.sum(axis=1) + self.b
        return A


def assemble(domain: Domain, params: FracParams, cfg: QuadratureConfig | None = None,
             min_resolution: float = 16.0) -> NonlocalForm:
    """Assemble W and b for Omega (skip mode: the diagonal pair is excluded).

    ``min_resolution`` is the smallest admissible R/h along the weight-1
    (horizontal) axes; coarser grids are refused.
    """
    params.require_subcritical()
    cfg = cfg or QuadratureConfig()
    g, spec = domain.group, domain.norm
    check_compatible(g, spec)
    if domain.R is not None:
        horiz = g.weight_array == 1
        res = domain.R / np.max(domain.h[horiz])
        if res < min_resolution:
            raise InvalidInputError(
                f"under-resolved grid: R/h = {res:.3g} < {min_resolution:g}")
    if domain.size > MAX_DENSE:
        raise InvalidInputError(f"{domain.size} interior points exceed the dense limit {MAX_DENSE}")
    pts, idx, _ = domain.grid()
    m = domain.mask.reshape(-1)
    law, norm, inv_w = _codes(g, spec)
    hN = domain.cell_volume
    xi = np.ascontiguousarray(pts[m])
    ii = np.ascontiguousarray(idx[m])
    K = kernels.kernel_matrix(xi, xi, ii, ii, law, norm, inv_w, params.expo, cfg.cut2)
    W = hN * hN * K
    W = 0.5 * (W + W.T)  # exact symmetry irrespective of rounding in the kernel
    ext = ~m
    grid_ext = np.zeros(len(xi))
    if np.any(ext):
        grid_ext = kernels.pair_rows(xi, np.ascontiguousarray(pts[ext]), ii,
                                     np.ascontiguousarray(idx[ext]), np.zeros(0), np.zeros(0),
                                     np.zeros(0), np.zeros(0), kernels.MODE_KERNEL, law, norm,
                                     inv_w, params.expo, params.p, cfg.cut2) * hN
    tail = exterior_tail(g, spec, params, domain.lo, domain.hi, xi,
                         resolution=cfg.sphere_resolution)
    b = 2.0 * hN * (grid_ext + tail)
    return NonlocalForm(domain, params, W, b, hN)


def energy(form: NonlocalForm, u) -> float:
    u = np.ascontiguousarray(u, dtype=float)
    p = form.params.p
    pair, _ = kernels.dense_pgrad(form.W, u, p)
    return float(np.sum(pair) + np.sum(form.b * np.abs(u) ** p))


def _grad_energy(form: NonlocalForm, u):
    """(E(u), dE/du) with dE/du_i = p (2 sum_j W_ij phi(u_i - u_j) + b_i phi(u_i))."""
    p = form.params.p
    pair, flux = kernels.dense_pgrad(form.W, np.ascontiguousarray(u), p)
    phu = np.sign(u) * np.abs(u) ** (p - 1.0)
    E = float(np.sum(pair) + np.sum(form.b * np.abs(u) ** p))
    return E, p * (2.0 * np.asarray(flux) + form.b * phu)


def _mass(form: NonlocalForm, weight):
    w = np.ones(form.size) if weight is None else np.asarray(weight, dtype=float).reshape(-1)
    if w.shape != (form.size,) or np.any(w < 0) or not np.any(w > 0):
        raise InvalidInputError("weight must be nonnegative, nonzero, one value per interior point")
    return form.cell_volume * w


def rayleigh_quotient(form: NonlocalForm, u, weight=None) -> float:
    """E(u) / (h^N sum_i omega_i |u_i|^p)."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (form.size,):
        raise InvalidInputError("u must have one value per interior point")
    m = _mass(form, weight)
    den = float(np.sum(m * np.abs(u) ** form.params.p))
    if den == 0:
        raise InvalidInputError("Rayleigh quotient of the zero vector")
    return energy(form, u) / den


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    tol: relative eigenvalue-increment tolerance (p = 2) and the stagnation
      threshold over ``window`` iterations (general p).
    residual_tol: acceptance bound on the relative weak residual.
    seeds: number of random positive starts for the general-p path.
    """

    max_iter: int = 5000
    tol: float = 1e-9
    window: int = 25
    residual_tol: float = 1e-4
    seeds: int = 3
    seed: int = 0
    agree: float = 1e-6


@dataclass
class EigenResult:
    lambda1: float
    eigvec: np.ndarray
    residual: float
    iters: int
    history: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    sign_constant: bool = True


def _normalize(u, mass, p):
    return u / np.sum(mass * np.abs(u) ** p) ** (1.0 / p)


def _inverse_iteration(form, mass, cfg: SolverConfig):
    A = form.p2_matrix()
    try:
        cho = linalg.cho_factor(A)
    except linalg.LinAlgError as exc:
        raise ConvergenceError(f"p = 2 operator is not positive definite: {exc}") from None
    u = _normalize(np.ones(form.size), mass, 2.0)
    Au = A @ u
    lam = float(u @ Au)
    hist = [lam]
    for it in range(1, cfg.max_iter + 1):
        v = linalg.cho_solve(cho, mass * u)
        u = _normalize(v, mass, 2.0)
        Au = A @ u
        new = float(u @ Au)
        hist.append(new)
        # the eigenvalue settles long before the vector; stop on the residual
        res = np.max(np.abs(Au - new * mass * u)) / np.max(np.abs(new * mass * u))
        if abs(lam - new) <= 1e-13 * new and res <= 1e-11:
            return new, u, it, hist
        lam = new
    raise ConvergenceError("inverse iteration did not converge", hist)


def _hessian_precond(form, u, eps):
    """Cholesky factor of the (regularized) Hessian of E at u, divided by p(p-1).

    2 (diag(V 1) - V) + diag(b |u|^{p-2}),  V_ij = W_ij (d_ij^2 + eps^2)^{(p-2)/2}.
    For p = 2 this is the fixed operator of the linear problem.
    """
    p = form.params.p
    d = u[:, None] - u[None, :]
    V = form.W * (d * d + eps * eps) ** (0.5 * (p - 2.0))
    H = -2.0 * V
    H[np.diag_indices_from(H)] += 2.0 * V.sum(axis=1) + form.b * (u * u + eps * eps) ** (0.5 * (p - 2.0))
    return linalg.cho_factor(H)


def _descent(form, mass, u0, cfg: SolverConfig, refresh: int = 5):
    """Projected descent with Armijo backtracking on the quotient.

    The search direction is the gradient preconditioned by the regularized
    Hessian of the energy at the current iterate (refreshed every
    ``refresh`` steps), which makes the iteration behave like inverse
    iteration on the linearized problem.
    """
    p = form.params.p
    u = _normalize(u0, mass, p)
    E, gE = _grad_energy(form, u)
    lam = E  # denominator is 1 after normalization
    hist = [lam]
    step = 1.0
    precond = None
    for it in range(1, cfg.max_iter + 1):
        if precond is None or it % refresh == 0:
            precond = _hessian_precond(form, u, 1e-6 * np.max(np.abs(u)))
        phu = np.sign(u) * np.abs(u) ** (p - 1.0)
        grad = gE - lam * p * mass * phu  # gradient of the quotient at ||u|| = 1
        d = -linalg.cho_solve(precond, grad)
        slope = float(grad @ d)
        if slope >= 0:  # lost descent (should not happen): fall back to the gradient
            d, slope = -grad, -float(grad @ grad)
        t = min(1.0, 2.0 * step)
        while True:
            v = _normalize(u + t * d, mass, p)
            Ev, gv = _grad_energy(form, v)
            if Ev <= lam + 1e-4 * t * slope or t < 1e-14:
                break
            t *= 0.5
        if Ev < lam:
            u, E, gE, lam = v, Ev, gv, Ev
        hist.append(lam)
        step = t
        if it >= cfg.window:
            old = hist[-1 - cfg.window]
            if old - lam <= cfg.tol * lam:
                return lam, u, it, hist
    raise ConvergenceError("descent did not stagnate within the iteration budget", hist)


def minimize_rayleigh(form: NonlocalForm, cfg: SolverConfig | None = None,
                      weight=None) -> EigenResult:
    """First eigenpair: inverse iteration for p = 2, preconditioned descent otherwise.

    The general-p path runs from ``cfg.seeds`` random positive starts and
    requires their quotients to agree within ``cfg.agree``; the best run is
    returned. The eigenvector is normalized to ||u||_{L^p(Omega)} = 1 and
    made positive.
    """
    cfg = cfg or SolverConfig()
    p = form.params.p
    mass = _mass(form, weight)
    if p == 2.0:
        lam, u, iters, hist = _inverse_iteration(form, mass, cfg)
        seeds = [lam]
    else:
        rng = np.random.default_rng(cfg.seed)
        runs = []
        for k in range(max(1, cfg.seeds)):
            u0 = 1.0 + 0.5 * rng.random(form.size) if k else np.ones(form.size)
            runs.append(_descent(form, mass, u0, cfg))
        seeds = [r[0] for r in runs]
        best = min(runs, key=lambda r: r[0])
        if (max(seeds) - min(seeds)) > cfg.agree * best[0]:
            raise ConvergenceError(
                f"seed runs disagree: quotients {seeds} (possible near-degeneracy)", best[3])
        lam, u, iters, hist = best
    if np.sum(u) < 0:
        u = -u
    sign_constant = bool(np.all(u >= -1e-12 * np.max(np.abs(u))))
    res = EigenResult(float(lam), u, 0.0, iters, hist, seeds, sign_constant)
    res.residual = weak_residual(form, res, weight)
    return res


def dense_eigen(form: NonlocalForm, weight=None):
    """Dense generalized eigensolve (p = 2 only): smallest eigenpair of A u = lambda M u."""
    if form.params.p != 2.0:
        raise InvalidInputError("dense oracle is only defined for p = 2")
    mass = _mass(form, weight)
    vals, vecs = linalg.eigh(form.p2_matrix(), np.diag(mass), subset_by_index=[0, 0])
    u = vecs[:, 0]
    u = _normalize(u if np.sum(u) > 0 else -u, mass, 2.0)
    return float(vals[0]), u


def weak_residual(form: NonlocalForm, result: EigenResult, weight=None) -> float:
    """Relative residual of the discrete weak equation tested on the unit vectors.

    max_i |2 sum_j W_ij phi(u_i-u_j) + b_i phi(u_i) - lambda h^N omega_i phi(u_i)|
    divided by max_i |lambda h^N omega_i phi(u_i)|.
    """
    p = form.params.p
    u = np.ascontiguousarray(result.eigvec, dtype=float)
    mass = _mass(form, weight)
    _, flux = kernels.dense_pgrad(form.W, u, p)
    phu = np.sign(u) * np.abs(u) ** (p - 1.0)
    lhs = 2.0 * np.asarray(flux) + form.b * phu
    rhs = result.lambda1 * mass * phu
    return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))


# ---------------------------------------------------------------------------
# Lyapunov-type bound


def lyapunov_product(domain: Domain, params: FracParams, theta: float, lambda1: float,
                     weight=None) -> float:
    """||lambda1 omega||_{L^theta(Omega)} r^{sp - Q/theta}.

    With omega = 1 this is lambda1 |Omega|^{1/theta} r^{sp - Q/theta}.
    """
    params.require_subcritical()
    lo_theta = params.Q / params.sp
    if not lo_theta < theta < np.inf:
        raise InvalidInputError(f"theta must lie in (Q/sp, inf) = ({lo_theta:g}, inf)")
    w = np.ones(domain.size) if weight is None else np.asarray(weight, dtype=float)
    norm = float(np.sum(np.abs(lambda1 * w) ** theta) * domain.cell_volume) ** (1.0 / theta)
    return norm * domain.r_inner ** (params.sp - params.Q / theta)


def lyapunov_check(domains, params: FracParams, theta: float, results, tol: float = 0.05,
                   weights=None) -> dict:
    """P(theta, R) across radii: positive and R-independent within ``tol``."""
    weights = weights or [None] * len(domains)
    P = np.array([lyapunov_product(d, params, theta, r.lambda1, w)
                  for d, r, w in zip(domains, results, weights)])
    spread = float((P.max() - P.min()) / P.mean())
    return {"theta": float(theta), "R": [d.R for d in domains], "P": P.tolist(),
            "spread": spread, "positive": bool(np.all(P > 0)),
            "pass": bool(np.all(P > 0) and spread <= tol)}


# ---------------------------------------------------------------------------
# run ledger


def run_id(record: dict) -> str:
    blob = json.dumps(record, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def append_ledger(path, domain: Domain, params: FracParams, result: EigenResult,
                  extra: dict | None = None) -> dict:
    """Append one JSON line {run_id, group, norm, s, p, R, h, lambda1, residual, iters}."""
    rec = {"group": domain.group_id, "norm": domain.norm_id, "s": params.s, "p": params.p,
           "R": domain.R, "h": [float(v) for v in domain.h], "lambda1": result.lambda1,
           "residual": result.residual, "iters": result.iters}
    if extra:
        rec.update(extra)
    rec = {"run_id": run_id(rec), **rec}
    with Path(path).open("a") as fh:
        fh.write(json.dumps(rec, sort_keys=False) + "\n")
    return rec
