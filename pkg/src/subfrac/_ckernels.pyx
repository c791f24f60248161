# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pair-sum kernels.

Every routine returns per-row partial sums computed in a fixed order, so the
caller's reduction is deterministic. Law codes: 0 abelian, 1 heisenberg.
Norm codes: 0 euclidean, 1 koranyi, 2 weighted max.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt, fabs, copysign

cnp.import_array()


cdef inline double _kern(const double[:, ::1] xa, const double[:, ::1] xb,
                         Py_ssize_t a, Py_ssize_t b, Py_ssize_t N, int law, int norm,
                         const double[::1] inv_w, double expo) nogil:
    # q(x_b^{-1} o x_a)^{-expo}; returns 0 for coincident points
    cdef double z0, z1, z2, s, m, t
    cdef Py_ssize_t k
    if norm == 0:
        s = 0.0
        if law == 1:
            z0 = xa[a, 0] - xb[b, 0]
            z1 = xa[a, 1] - xb[b, 1]
            z2 = xa[a, 2] - xb[b, 2] + 0.5 * (xb[b, 1] * xa[a, 0] - xb[b, 0] * xa[a, 1])
            s = z0 * z0 + z1 * z1 + z2 * z2
        else:
            for k in range(N):
                z0 = xa[a, k] - xb[b, k]
                s += z0 * z0
        if s == 0.0:
            return 0.0
        return pow(s, -0.5 * expo)
    elif norm == 1:
        z0 = xa[a, 0] - xb[b, 0]
        z1 = xa[a, 1] - xb[b, 1]
        z2 = xa[a, 2] - xb[b, 2] + 0.5 * (xb[b, 1] * xa[a, 0] - xb[b, 0] * xa[a, 1])
        s = z0 * z0 + z1 * z1
        s = s * s + 16.0 * z2 * z2
        if s == 0.0:
            return 0.0
        return pow(s, -0.25 * expo)
    else:
        m = 0.0
        for k in range(N):
            z0 = xa[a, k] - xb[b, k]
            if law == 1 and k == 2:
                z0 = z0 + 0.5 * (xb[b, 1] * xa[a, 0] - xb[b, 0] * xa[a, 1])
            t = fabs(z0)
            if inv_w[k] != 1.0:
                t = pow(t, inv_w[k])
            if t > m:
                m = t
        if m == 0.0:
            return 0.0
        return pow(m, -expo)


cdef inline bint _near(const long[:, ::1] ia, const long[:, ::1] ib, Py_ssize_t a,
                       Py_ssize_t b, Py_ssize_t N, double cut2) nogil:
    cdef long d
    cdef long acc = 0
    cdef Py_ssize_t k
    if cut2 <= 0.0:
        return False
    for k in range(N):
        d = ia[a, k] - ib[b, k]
        acc += d * d
    return acc < cut2


cdef inline double _phi(double d, double p) nogil:
    if d == 0.0:
        return 0.0
    if p == 2.0:
        return d
    return copysign(pow(fabs(d), p - 1.0), d)


def pair_rows(double[:, ::1] xa, double[:, ::1] xb, long[:, ::1] ia, long[:, ::1] ib,
              double[::1] ua, double[::1] ub, double[::1] va, double[::1] vb,
              int mode, int law, int norm, double[::1] inv_w, double expo, double p,
              double cut2):
    """Row sums over b of a pair integrand times the kernel.

    mode 0: k;  1: |ua - ub|^p k;  2: phi(ua - ub) k;  3: phi(ua - ub)(va - vb) k
    with phi(d) = |d|^(p-2) d. Pairs whose grid offset satisfies |ia - ib|^2 < cut2
    are excluded.
    """
    cdef Py_ssize_t Ma = xa.shape[0], Mb = xb.shape[0], N = xa.shape[1]
    cdef Py_ssize_t a, b
    cdef double acc, k, d
    out = np.zeros(Ma)
    cdef double[::1] o = out
    with nogil:
        for a in range(Ma):
            acc = 0.0
            for b in range(Mb):
                if _near(ia, ib, a, b, N, cut2):
                    continue
                if mode == 0:
                    acc += _kern(xa, xb, a, b, N, law, norm, inv_w, expo)
                    continue
                d = ua[a] - ub[b]
                if d == 0.0:
                    continue
                k = _kern(xa, xb, a, b, N, law, norm, inv_w, expo)
                if mode == 1:
                    if p == 2.0:
                        acc += d * d * k
                    else:
                        acc += pow(fabs(d), p) * k
                elif mode == 2:
                    acc += _phi(d, p) * k
                else:
                    acc += _phi(d, p) * (va[a] - vb[b]) * k
            o[a] = acc
    return out


def kernel_matrix(double[:, ::1] xa, double[:, ::1] xb, long[:, ::1] ia, long[:, ::1] ib,
                  int law, int norm, double[::1] inv_w, double expo, double cut2):
    """Dense kernel block with excluded pairs set to zero."""
    cdef Py_ssize_t Ma = xa.shape[0], Mb = xb.shape[0], N = xa.shape[1]
    cdef Py_ssize_t a, b
    out = np.zeros((Ma, Mb))
    cdef double[:, ::1] o = out
    with nogil:
        for a in range(Ma):
            for b in range(Mb):
                if not _near(ia, ib, a, b, N, cut2):
                    o[a, b] = _kern(xa, xb, a, b, N, law, norm, inv_w, expo)
    return out


def dense_pgrad(double[:, ::1] W, double[::1] u, double p):
    """Rows of sum_j W_ij |u_i - u_j|^p and of sum_j W_ij phi(u_i - u_j)."""
    cdef Py_ssize_t M = W.shape[0]
    cdef Py_ssize_t i, j
    cdef double d, ad, e, g, w, t
    energy = np.zeros(M)
    grad = np.zeros(M)
    cdef double[::1] eo = energy
    cdef double[::1] go = grad
    with nogil:
        for i in range(M):
            e = 0.0
            g = 0.0
            for j in range(M):
                w = W[i, j]
                if w == 0.0:
                    continue
                d = u[i] - u[j]
                if d == 0.0:
                    continue
                if p == 2.0:
                    e += w * d * d
                    g += w * d
                else:
                    ad = fabs(d)
                    t = pow(ad, p - 1.0)
                    e += w * t * ad
                    g += w * copysign(t, d)
            eo[i] = e
            go[i] = g
    return energy, grad


cdef inline int _roots(double a, double b, double c, double* out) nogil:
    # positive roots of b r^2 + a r + c = 0
    cdef double disc, sq, qq, r
    cdef int m = 0
    if b == 0.0:
        if a != 0.0:
            r = -c / a
            if r > 0.0:
                out[m] = r
                m += 1
        return m
    disc = a * a - 4.0 * b * c
    if disc < 0.0:
        return 0
    sq = sqrt(disc)
    qq = -0.5 * (a + copysign(sq, a))
    if qq != 0.0:
        r = qq / b
        if r > 0.0:
            out[m] = r
            m += 1
        r = c / qq
        if r > 0.0:
            out[m] = r
            m += 1
    return m


def tail_rows(double[:, ::1] x, double[:, ::1] nodes, double[::1] weights,
              double[::1] lo, double[::1] hi, int law, double sp):
    """Exterior tails T(x) = sum_j w_j int_{y(r) outside box} r^{-1-sp} dr.

    y(r) = x o dilate(r, z_j) is linear in r except for the Heisenberg t
    coordinate, which is quadratic; crossings are sorted and each segment is
    classified by its midpoint.
    """
    cdef Py_ssize_t P = x.shape[0], J = nodes.shape[0], N = x.shape[1]
    cdef Py_ssize_t i, j, k, m, n, l
    cdef double ca[3]
    cdef double cb[3]
    cdef double buf[64]
    cdef double acc, tot, prev, r, mid, yk, tmp
    cdef bint out_seg
    if N > 8:
        raise ValueError("tail_rows supports N <= 8")
    res = np.zeros(P)
    cdef double[::1] o = res
    with nogil:
        for i in range(P):
            tot = 0.0
            for j in range(J):
                n = 0
                for k in range(N):
                    if law == 1 and k == 2:
                        n += _roots(0.5 * (x[i, 0] * nodes[j, 1] - x[i, 1] * nodes[j, 0]),
                                    nodes[j, 2], x[i, 2] - lo[2], &buf[n])
                        n += _roots(0.5 * (x[i, 0] * nodes[j, 1] - x[i, 1] * nodes[j, 0]),
                                    nodes[j, 2], x[i, 2] - hi[2], &buf[n])
                    else:
                        n += _roots(nodes[j, k], 0.0, x[i, k] - lo[k], &buf[n])
                        n += _roots(nodes[j, k], 0.0, x[i, k] - hi[k], &buf[n])
                # insertion sort
                for m in range(1, n):
                    tmp = buf[m]
                    l = m - 1
                    while l >= 0 and buf[l] > tmp:
                        buf[l + 1] = buf[l]
                        l -= 1
                    buf[l + 1] = tmp
                acc = 0.0
                prev = 0.0
                for m in range(n + 1):
                    if m < n:
                        r = buf[m]
                        if r <= prev:
                            continue
                        mid = 0.5 * (prev + r)
                    else:
                        r = -1.0
                        mid = 2.0 * prev + 1.0
                    if prev > 0.0:
                        out_seg = False
                        for k in range(N):
                            yk = x[i, k] + mid * nodes[j, k]
                            if law == 1 and k == 2:
                                yk = x[i, 2] + mid * 0.5 * (x[i, 0] * nodes[j, 1] - x[i, 1] * nodes[j, 0]) + mid * mid * nodes[j, 2]
                            if yk < lo[k] or yk > hi[k]:
                                out_seg = True
                                break
                        if out_seg:
                            if r < 0.0:
                                acc += pow(prev, -sp) / sp
                            else:
                                acc += (pow(prev, -sp) - pow(r, -sp)) / sp
                    if r < 0.0:
                        break
                    prev = r
                tot += weights[j] * acc
            o[i] = tot
    return res
