"""Uniform cell-centred grids and sampled, compactly supported functions."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .groups import GroupDescriptor, parse_group

__all__ = ["SampledFunction", "box_grid"]


def box_grid(lo, hi, n):
    """Cell centres, integer indices and spacing of a box grid (row-major)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = np.broadcast_to(np.asarray(n, dtype=np.int64), lo.shape)
    if np.any(hi <= lo) or np.any(n < 1):
        raise InvalidInputError("grid box must have hi > lo and n >= 1 per axis")
    h = (hi - lo) / n
    axes = [lo[k] + (np.arange(n[k]) + 0.5) * h[k] for k in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    imesh = np.meshgrid(*[np.arange(m, dtype=np.int64) for m in n], indexing="ij")
    idx = np.ascontiguousarray(np.stack([m.ravel() for m in imesh], axis=-1))
    return np.ascontiguousarray(pts), idx, h


@dataclass
class SampledFunction:
    """Values at the cell centres of ``n`` cells per axis over ``[lo, hi]``.

    The outer ``support_margin`` layers must be zero: this is the compact
    support surrogate that lets pair sums stop at the box.
    """

    group_id: str
    lo: np.ndarray
    hi: np.ndarray
    n: tuple
    values: np.ndarray
    support_margin: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float).reshape(-1)
        self.hi = np.asarray(self.hi, dtype=float).reshape(-1)
        N = len(self.lo)
        self.n = tuple(int(m) for m in np.broadcast_to(np.asarray(self.n), (N,)))
        self.values = np.asarray(self.values, dtype=float).reshape(self.n)
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("sampled values must be finite")
        m = int(self.support_margin)
        if m > 0:
            inner = tuple(slice(m, k - m) for k in self.n)
            shell = self.values.copy()
            shell[inner] = 0.0
            if np.any(shell != 0.0):
                raise InvalidInputError(
                    f"values must vanish on the outer {m} grid layers (compact support)"
                )

    @classmethod
    def from_function(cls, g: GroupDescriptor | str, f, lo, hi, n, support_margin=1):
        gid = g if isinstance(g, str) else g.name
        pts, _, _ = box_grid(lo, hi, n)
        N = len(np.atleast_1d(lo))
        shape = tuple(int(m) for m in np.broadcast_to(np.asarray(n), (N,)))
        vals = np.asarray(f(pts), dtype=float).reshape(shape)
        return cls(gid, lo, hi, shape, vals, support_margin)

    @property
    def group(self) -> GroupDescriptor:
        return parse_group(self.group_id)

    @property
    def h(self) -> np.ndarray:
        return (self.hi - self.lo) / np.asarray(self.n)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def _grid(self):
        if "grid" not in self._cache:
            self._cache["grid"] = box_grid(self.lo, self.hi, self.n)
        return self._cache["grid"]

    @property
    def points(self) -> np.ndarray:
        return self._grid()[0]

    @property
    def indices(self) -> np.ndarray:
        return self._grid()[1]

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def same_grid(self, other: "SampledFunction") -> bool:
        return (
            self.group_id == other.group_id
            and self.n == other.n
            and np.allclose(self.lo, other.lo, rtol=0, atol=1e-14)
            and np.allclose(self.hi, other.hi, rtol=0, atol=1e-14)
        )

    def with_values(self, values) -> "SampledFunction":
        return SampledFunction(self.group_id, self.lo, self.hi, self.n, values,
                               self.support_margin)

    def lp_norm(self, p: float) -> float:
        return float(np.sum(np.abs(self.flat) ** p) * self.cell_volume) ** (1.0 / p)

    # serialization -----------------------------------------------------
    def save(self, path):
        path = Path(path)
        if path.suffix == ".npz":
            np.savez(path, group=self.group_id, lo=self.lo, hi=self.hi,
                     n=np.asarray(self.n), margin=self.support_margin, values=self.values)
            return
        buf = io.StringIO()
        buf.write("# subfrac-grid v1\n")
        buf.write(f"# group: {self.group_id}\n")
        buf.write("# lo: " + ",".join(repr(float(v)) for v in self.lo) + "\n")
        buf.write("# hi: " + ",".join(repr(float(v)) for v in self.hi) + "\n")
        buf.write("# n: " + ",".join(str(v) for v in self.n) + "\n")
        buf.write("# h: " + ",".join(repr(float(v)) for v in self.h) + "\n")
        buf.write(f"# support_margin: {self.support_margin}\n")
        buf.write("value\n")
        for v in self.flat:
            buf.write(repr(float(v)) + "\n")
        path.write_text(buf.getvalue())

    @classmethod
    def load(cls, path) -> "SampledFunction":
        path = Path(path)
        if path.suffix == ".npz":
            z = np.load(path)
            return cls(str(z["group"]), z["lo"], z["hi"], tuple(z["n"]), z["values"],
                       int(z["margin"]))
        header = {}
        values = []
        for line in path.read_text().splitlines():
            if line.startswith("#"):
                key, sep, val = line[1:].partition(":")
                if sep:
                    header[key.strip()] = val.strip()
            elif line.strip() and line.strip() != "value":
                values.append(float(line))
        try:
            lo = [float(v) for v in header["lo"].split(",")]
            hi = [float(v) for v in header["hi"].split(",")]
            n = tuple(int(v) for v in header["n"].split(","))
        except KeyError as exc:
            raise InvalidInputError(f"grid file missing header field {exc}") from None
        if len(values) != int(np.prod(n)):
            raise InvalidInputError("grid file value count does not match header")
        return cls(header["group"], lo, hi, n, np.array(values),
                   int(header.get("support_margin", 1)))
