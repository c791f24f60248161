"""Compiled vs numpy pair-sum kernels.

Times each kernel on both backends over the same inputs, checks that the
results agree, and prints a table with the speedup. Run from the repo root:

    python benchmarks/bench_kernels.py [--n 24] [--repeat 3] [--json out.json]
"""
import argparse
import json
import time

import numpy as np

from subfrac.grid import box_grid
from subfrac.groups import parse_group, parse_norm
from subfrac.kernels import MODE_ENERGY, MODE_KERNEL, available_backends
from subfrac.nonlocal_ops import _codes
from subfrac.sphere import build_sphere_quadrature


def _case(group, norm, n):
    g, spec = parse_group(group), parse_norm(norm)
    lo, hi = -np.ones(g.N), np.ones(g.N)
    pts, _, _ = box_grid(lo, hi, n)
    pts = np.ascontiguousarray(pts)
    idx = np.ascontiguousarray(np.indices((n,) * g.N).reshape(g.N, -1).T.astype(np.int64))
    law, code, inv_w = _codes(g, spec)
    rng = np.random.default_rng(0)
    u = np.ascontiguousarray(rng.normal(size=len(pts)))
    sph = build_sphere_quadrature(g, spec, 32)
    return dict(g=g, pts=pts, idx=idx, law=law, code=code, inv_w=inv_w, u=u, lo=lo, hi=hi,
                nodes=np.ascontiguousarray(sph.nodes), weights=np.ascontiguousarray(sph.weights))


def _tasks(c, expo=4.5, p=1.5, cut2=0.25):
    x, i, u, z = c["pts"], c["idx"], c["u"], np.zeros(0)
    m = min(len(x), 1500)
    xs, is_, us = x[:m].copy(), i[:m].copy(), u[:m].copy()
    return {
        "pair_rows/kernel": lambda k: k.pair_rows(x, x, i, i, z, z, z, z, MODE_KERNEL, c["law"],
                                                  c["code"], c["inv_w"], expo, p, cut2),
        "pair_rows/energy": lambda k: k.pair_rows(x, x, i, i, u, u, z, z, MODE_ENERGY, c["law"],
                                                  c["code"], c["inv_w"], expo, p, cut2),
        "kernel_matrix": lambda k: k.kernel_matrix(xs, xs, is_, is_, c["law"], c["code"],
                                                   c["inv_w"], expo, cut2),
        "dense_pgrad": lambda k: k.dense_pgrad(
            np.ascontiguousarray(np.abs(np.sin(np.add.outer(us, us)))), us, p),
        "tail_rows": lambda k: k.tail_rows(x, c["nodes"], c["weights"], c["lo"], c["hi"],
                                           c["law"], 0.5),
    }


def _time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=None, help="points per axis (default per group)")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy backend only")
    cases = [("abelian:2", "euclidean", args.n or 40), ("heisenberg1", "koranyi", args.n or 12)]
    results = []
    print(f"{'case':<22}{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for group, norm, n in cases:
        c = _case(group, norm, n)
        for name, task in _tasks(c).items():
            times, outs = {}, {}
            for b, mod in backends.items():
                times[b], outs[b] = _time(lambda: task(mod), args.repeat)
            ref = outs["python"]
            agree = True
            if "cython" in outs:
                a = np.concatenate([np.ravel(v) for v in np.atleast_1d(outs["cython"])]) \
                    if isinstance(outs["cython"], tuple) else np.ravel(outs["cython"])
                r = np.concatenate([np.ravel(v) for v in ref]) if isinstance(ref, tuple) else np.ravel(ref)
                agree = bool(np.allclose(a, r, rtol=1e-9, atol=1e-12 * np.max(np.abs(r))))
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            label = f"{group} n={n}^{c['g'].N}"
            print(f"{label:<22}{name:<20}" + "".join(f"{times[b]:>11.4f}s" for b in backends)
                  + f"{speed:>9.1f}x" + ("" if agree else "  MISMATCH"))
            results.append({"case": label, "kernel": name, "seconds": times, "speedup": speed,
                            "agree": agree})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=1)
    return 0 if all(r["agree"] for r in results) else 1


if __name__ == "__main__":
    raise SystemExit(main())
