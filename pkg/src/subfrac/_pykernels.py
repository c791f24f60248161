"""Pure-numpy fallback for the pair-sum kernels in ``_ckernels``.

Same signatures and semantics; rows are processed in blocks so memory stays
bounded. Results match the compiled core to rounding, not bit for bit.
"""
import numpy as np

_BLOCK = 1 << 21


def _kernel_block(xa, xb, law, norm, inv_w, expo):
    z = xa[:, None, :] - xb[None, :, :]
    if law == 1:
        z[..., 2] += 0.5 * (xb[None, :, 1] * xa[:, None, 0] - xb[None, :, 0] * xa[:, None, 1])
    if norm == 0:
        s = np.sum(z * z, axis=-1)
        power = -0.5 * expo
    elif norm == 1:
        r2 = z[..., 0] ** 2 + z[..., 1] ** 2
        s = r2 * r2 + 16.0 * z[..., 2] ** 2
        power = -0.25 * expo
    else:
        s = np.max(np.abs(z) ** inv_w, axis=-1)
        power = -expo
    zero = s == 0.0
    with np.errstate(divide="ignore"):
        k = np.where(zero, 0.0, np.power(np.where(zero, 1.0, s), power))
    return k


def _near_block(ia, ib, cut2):
    if cut2 <= 0:
        return None
    d = ia[:, None, :] - ib[None, :, :]
    return np.sum(d * d, axis=-1) < cut2


def _phi(d, p):
    if p == 2.0:
        return d
    return np.sign(d) * np.abs(d) ** (p - 1.0)


def pair_rows(xa, xb, ia, ib, ua, ub, va, vb, mode, law, norm, inv_w, expo, p, cut2):
    xa = np.ascontiguousarray(xa, dtype=float)
    xb = np.ascontiguousarray(xb, dtype=float)
    Ma, Mb = len(xa), len(xb)
    out = np.zeros(Ma)
    step = max(1, _BLOCK // max(Mb, 1))
    for s in range(0, Ma, step):
        sl = slice(s, s + step)
        k = _kernel_block(xa[sl], xb, law, norm, inv_w, expo)
        near = _near_block(ia[sl], ib, cut2)
        if near is not None:
            k[near] = 0.0
        if mode == 0:
            out[sl] = k.sum(axis=1)
            continue
        d = ua[sl, None] - ub[None, :]
        if mode == 1:
            f = d * d if p == 2.0 else np.abs(d) ** p
        elif mode == 2:
            f = _phi(d, p)
        else:
            f = _phi(d, p) * (va[sl, None] - vb[None, :])
        out[sl] = np.sum(f * k, axis=1)
    return out


def kernel_matrix(xa, xb, ia, ib, law, norm, inv_w, expo, cut2):
    xa = np.ascontiguousarray(xa, dtype=float)
    xb = np.ascontiguousarray(xb, dtype=float)
    out = np.empty((len(xa), len(xb)))
    step = max(1, _BLOCK // max(len(xb), 1))
    for s in range(0, len(xa), step):
        sl = slice(s, s + step)
        k = _kernel_block(xa[sl], xb, law, norm, inv_w, expo)
        near = _near_block(ia[sl], ib, cut2)
        if near is not None:
            k[near] = 0.0
        out[sl] = k
    return out


def dense_pgrad(W, u, p):
    d = u[:, None] - u[None, :]
    if p == 2.0:
        return np.sum(W * d * d, axis=1), np.sum(W * d, axis=1)
    ad = np.abs(d)
    t = ad ** (p - 1.0)
    return np.sum(W * t * ad, axis=1), np.sum(W * np.sign(d) * t, axis=1)


def _positive_roots(a, b, c):
    """Positive roots of b r^2 + a r + c = 0 (two slots, NaN where absent)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.where(a != 0.0, -c / a, np.nan)
        disc = a * a - 4.0 * b * c
        sq = np.sqrt(np.where(disc >= 0.0, disc, np.nan))
        qq = -0.5 * (a + np.copysign(sq, a))
        r1 = np.where(b != 0.0, qq / b, lin)
        r2 = np.where(b != 0.0, c / qq, np.nan)
    r1 = np.where(r1 > 0.0, r1, np.nan)
    r2 = np.where(r2 > 0.0, r2, np.nan)
    return r1, r2


def tail_rows(x, nodes, weights, lo, hi, law, sp):
    P, J, N = len(x), len(nodes), x.shape[1]
    out = np.empty(P)
    step = max(1, (1 << 20) // (J * 4 * N))
    for s0 in range(0, P, step):
        xb = x[s0:s0 + step]
        a = np.broadcast_to(nodes, (len(xb), J, N)).copy()
        b = np.zeros_like(a)
        if law == 1:
            a[..., 2] = 0.5 * (xb[:, None, 0] * nodes[None, :, 1] - xb[:, None, 1] * nodes[None, :, 0])
            b[..., 2] = nodes[None, :, 2]
        roots = []
        for k in range(N):
            for c in (lo[k], hi[k]):
                roots += list(_positive_roots(a[..., k], b[..., k], xb[:, None, k] - c))
        R = np.sort(np.stack(roots, axis=-1), axis=-1)  # NaNs sort last
        nroot = np.sum(np.isfinite(R), axis=-1)
        pad = np.full(R.shape[:-1] + (1,), np.nan)
        edges = np.concatenate([np.zeros(R.shape[:-1] + (1,)), R, pad], axis=-1)
        acc = np.zeros(R.shape[:-1])
        for m in range(R.shape[-1] + 1):
            r0 = edges[..., m]
            r1 = edges[..., m + 1]
            last = nroot == m
            valid = (nroot > m) & (r1 > r0)
            mid = np.where(valid, 0.5 * (r0 + r1), np.where(last, 2.0 * r0 + 1.0, np.nan))
            y = xb[:, None, :] + mid[..., None] * a + (mid ** 2)[..., None] * b
            outside = np.any((y < lo) | (y > hi), axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                seg = np.where(last, r0 ** (-sp), r0 ** (-sp) - r1 ** (-sp)) / sp
            acc += np.where((valid | last) & outside & (r0 > 0), seg, 0.0)
        out[s0:s0 + step] = acc @ weights
    return out
