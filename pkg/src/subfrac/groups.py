"""Concrete homogeneous Lie groups in exponential coordinates.

Two laws ship: the abelian group R^N (any N >= 1) and the first Heisenberg
group H^1 with coordinates (x, y, t) and law

    (x1, y1, t1) o (x2, y2, t2) = (x1 + x2, y1 + y2, t1 + t2 + (x1 y2 - y1 x2) / 2).

Haar measure is Lebesgue measure in these coordinates. All point operations
are vectorized over leading axes: a point array has shape ``(..., N)``.

New laws plug in by subclassing :class:`GroupDescriptor` and overriding
``compose`` (inverse and dilation are coordinate-wise for graded groups).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "GroupDescriptor",
    "QuasiNormSpec",
    "abelian",
    "heisenberg",
    "parse_group",
    "parse_norm",
    "compose",
    "inverse",
    "dilate",
    "quasi_norm",
    "check_compatible",
]


@dataclass(frozen=True)
class GroupDescriptor:
    name: str
    N: int
    weights: tuple
    law: str

    def __post_init__(self):
        if self.N < 1 or len(self.weights) != self.N:
            raise InvalidInputError(f"{self.name}: need N >= 1 weights, got {self.weights}")
        if any(w <= 0 for w in self.weights):
            raise InvalidInputError("dilation weights must be positive")
        if self.law == "abelian" and any(w != 1 for w in self.weights):
            raise InvalidInputError("abelian law requires unit weights")
        if self.law == "heisenberg" and tuple(self.weights) != (1, 1, 2):
            raise InvalidInputError("heisenberg law requires weights (1, 1, 2)")
        if self.law not in ("abelian", "heisenberg"):
            raise InvalidInputError(f"unknown group law {self.law!r}")

    @property
    def Q(self) -> float:
        """Homogeneous dimension, the trace of the dilation generator."""
        return float(sum(self.weights))

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def identity(self) -> np.ndarray:
        return np.zeros(self.N)

    def check_points(self, *arrays):
        out = []
        for a in arrays:
            a = np.asarray(a, dtype=float)
            if a.shape[-1:] != (self.N,):
                raise InvalidInputError(
                    f"{self.name}: expected trailing dimension {self.N}, got shape {a.shape}"
                )
            if not np.all(np.isfinite(a)):
                raise InvalidInputError("point coordinates must be finite")
            out.append(a)
        return out if len(out) > 1 else out[0]


def abelian(N: int) -> GroupDescriptor:
    return GroupDescriptor(f"abelian:{N}", int(N), (1,) * int(N), "abelian")


def heisenberg() -> GroupDescriptor:
    return GroupDescriptor("heisenberg1", 3, (1, 1, 2), "heisenberg")


def parse_group(ident: str) -> GroupDescriptor:
    """Build a group from its string id: ``abelian:N`` or ``heisenberg1``."""
    ident = ident.strip().lower()
    if ident in ("heisenberg1", "heisenberg", "h1"):
        return heisenberg()
    if ident.startswith("abelian"):
        _, _, n = ident.partition(":")
        try:
            N = int(n) if n else 1
        except ValueError:
            raise InvalidInputError(f"bad abelian dimension in {ident!r}") from None
        if N < 1:
            raise InvalidInputError(f"bad abelian dimension in {ident!r}")
        return abelian(N)
    raise InvalidInputError(f"unknown group id {ident!r}")


@dataclass(frozen=True)
class QuasiNormSpec:
    """Selector for a closed-form homogeneous quasi-norm.

    euclidean: |x| (abelian groups only).
    koranyi: ((x^2 + y^2)^2 + 16 t^2)^(1/4) (Heisenberg only).
    wmax: max_i |x_i|^(1/v_i) (any group).
    """

    kind: str

    def __post_init__(self):
        if self.kind not in ("euclidean", "koranyi", "wmax"):
            raise InvalidInputError(f"unknown quasi-norm {self.kind!r}")

    @property
    def code(self) -> int:
        return {"euclidean": 0, "koranyi": 1, "wmax": 2}[self.kind]


def parse_norm(ident: str) -> QuasiNormSpec:
    ident = ident.strip().lower()
    aliases = {"weighted_max": "wmax", "max": "wmax", "korányi": "koranyi"}
    return QuasiNormSpec(aliases.get(ident, ident))


def check_compatible(g: GroupDescriptor, spec: QuasiNormSpec):
    if spec.kind == "euclidean" and g.law != "abelian":
        raise InvalidInputError("euclidean norm is only homogeneous on abelian groups")
    if spec.kind == "koranyi" and g.law != "heisenberg":
        raise InvalidInputError("koranyi norm requires the Heisenberg group")


def compose(g: GroupDescriptor, a, b) -> np.ndarray:
    a, b = g.check_points(a, b)
    out = a + b
    if g.law == "heisenberg":
        out = np.array(out, copy=True)
        out[..., 2] += 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])
    return out


def inverse(g: GroupDescriptor, a) -> np.ndarray:
    # exponential coordinates on a graded group: inversion is negation
    return -g.check_points(a)


def dilate(g: GroupDescriptor, lam, a) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise InvalidInputError("dilation factor must be positive")
    a = g.check_points(a)
    return a * np.power(lam[..., None], g.weight_array)


def quasi_norm(g: GroupDescriptor, spec: QuasiNormSpec, a) -> np.ndarray:
    check_compatible(g, spec)
    a = g.check_points(a)
    return _norm_unchecked(g, spec, a)


def _norm_unchecked(g, spec, a):
    if spec.kind == "euclidean":
        return np.sqrt(np.sum(a * a, axis=-1))
    if spec.kind == "koranyi":
        r2 = a[..., 0] ** 2 + a[..., 1] ** 2
        return np.sqrt(np.sqrt(r2 * r2 + 16.0 * a[..., 2] ** 2))
    return np.max(np.abs(a) ** (1.0 / g.weight_array), axis=-1)


def relative_offset(g: GroupDescriptor, x, y) -> np.ndarray:
    """Return ``y^{-1} o x`` without validation (hot path helper)."""
    z = x - y
    if g.law == "heisenberg":
        z = np.array(z, copy=True)
        z[..., 2] += 0.5 * (y[..., 1] * x[..., 0] - y[..., 0] * x[..., 1])
    return z
