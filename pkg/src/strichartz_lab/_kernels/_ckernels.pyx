# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: resonance enumeration, triangle areas, direct sums."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin
from libcpp.pair cimport pair
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

cnp.import_array()

ctypedef long long i64


cdef inline Py_ssize_t _lower_bound(const i64[::1] a, i64 v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef class _Accumulator:
    """Per-momentum accumulation of amplitudes keyed by phase sum.

    Dense mode indexes a flat buffer by ``q - qmin``; sparse mode uses a hash
    map. ``flush`` adds sum |A(q)|^2 to a compensated total and clears.
    """
    cdef bint dense
    cdef i64 qmin
    cdef double[::1] re
    cdef double[::1] im
    cdef i64[::1] stamp
    cdef i64 current
    cdef vector[i64] touched
    cdef unordered_map[i64, pair[double, double]] table
    cdef double total
    cdef double comp

    def __cinit__(self, i64 qmin, i64 qmax, i64 dense_cap):
        cdef i64 span = qmax - qmin + 1
        self.qmin = qmin
        self.dense = span <= dense_cap
        if self.dense:
            self.re = np.zeros(span, dtype=np.float64)
            self.im = np.zeros(span, dtype=np.float64)
            self.stamp = np.full(span, -1, dtype=np.int64)
        self.current = 0
        self.total = 0.0
        self.comp = 0.0

    cdef inline void add(self, i64 q, double ar, double ai) noexcept:
        cdef i64 j
        if self.dense:
            j = q - self.qmin
            if self.stamp[j] != self.current:
                self.stamp[j] = self.current
                self.re[j] = ar
                self.im[j] = ai
                self.touched.push_back(j)
            else:
                self.re[j] += ar
                self.im[j] += ai
        else:
            it = self.table.find(q)
            if it == self.table.end():
                self.table[q] = pair[double, double](ar, ai)
            else:
                self.table[q].first += ar
                self.table[q].second += ai

    cdef inline void _kahan(self, double v) noexcept:
        # Neumaier summation keeps the total order-independent to rounding.
        cdef double t = self.total + v
        if abs(self.total) >= abs(v):
            self.comp += (self.total - t) + v
        else:
            self.comp += (v - t) + self.total
        self.total = t

    cdef void flush(self) noexcept:
        cdef size_t i
        cdef i64 j
        cdef double r, s
        if self.dense:
            for i in range(self.touched.size()):
                j = self.touched[i]
                r = self.re[j]
                s = self.im[j]
                self._kahan(r * r + s * s)
            self.touched.clear()
            self.current += 1
        else:
            for kv in self.table:
                r = kv.second.first
                s = kv.second.second
                self._kahan(r * r + s * s)
            self.table.clear()

    cdef double result(self):
        return self.total + self.comp


def resonance_energy(list codes, list omegas, list amps, i64 dense_cap=1 << 23):
    """Return sum over (momentum, phase) classes of |sum of amplitude products|^2.

    ``codes[i]`` holds the sorted, unique encoded lattice points of slot i,
    ``omegas[i]`` their integer phase values and ``amps[i]`` the complex
    amplitudes. The encoding must be additive and injective on m-fold sums.
    """
    cdef int m = len(codes)
    if m < 1 or m > 3:
        raise ValueError("between 1 and 3 slots supported")
    cdef i64[::1] c1, c2, c3, w1, w2, w3
    cdef double complex[::1] a1, a2, a3
    cdef Py_ssize_t n1, n2, n3, i1, i2, j, lo, hi
    cdef i64 s, smin, smax, r1, c, qmin = 0, qmax = 0, min3, max3
    cdef double complex amp
    cdef i64[::1] lookup

    slots = []
    for i in range(m):
        cc = np.ascontiguousarray(codes[i], dtype=np.int64)
        ww = np.ascontiguousarray(omegas[i], dtype=np.int64)
        aa = np.ascontiguousarray(amps[i], dtype=np.complex128)
        if cc.shape[0] == 0:
            return 0.0
        slots.append((cc, ww, aa))
        qmin += int(ww.min())
        qmax += int(ww.max())

    acc = _Accumulator(qmin, qmax, dense_cap)
    cdef _Accumulator A = acc

    if m == 1:
        c1, w1, a1 = slots[0]
        for i1 in range(c1.shape[0]):
            A.add(w1[i1], a1[i1].real, a1[i1].imag)
            A.flush()
        return A.result()

    # lookup table for the last slot over its code range
    cl, wl, al = slots[m - 1]
    min3 = int(cl[0])
    max3 = int(cl[cl.shape[0] - 1])
    lut = np.full(max3 - min3 + 1, -1, dtype=np.int64)
    lut[cl - min3] = np.arange(cl.shape[0], dtype=np.int64)
    lookup = lut
    c3, w3, a3 = cl, wl, al
    n3 = c3.shape[0]

    if m == 2:
        c1, w1, a1 = slots[0]
        n1 = c1.shape[0]
        smin = c1[0] + min3
        smax = c1[n1 - 1] + max3
        for s in range(smin, smax + 1):
            for i1 in range(n1):
                c = s - c1[i1]
                if c < min3 or c > max3:
                    continue
                j = lookup[c - min3]
                if j < 0:
                    continue
                amp = a1[i1] * a3[j]
                A.add(w1[i1] + w3[j], amp.real, amp.imag)
            A.flush()
        return A.result()

    c1, w1, a1 = slots[0]
    c2, w2, a2 = slots[1]
    n1 = c1.shape[0]
    n2 = c2.shape[0]
    smin = c1[0] + c2[0] + min3
    smax = c1[n1 - 1] + c2[n2 - 1] + max3
    for s in range(smin, smax + 1):
        for i1 in range(n1):
            r1 = s - c1[i1]
            lo = _lower_bound(c2, r1 - max3)
            hi = _lower_bound(c2, r1 - min3 + 1)
            for i2 in range(lo, hi):
                c = r1 - c2[i2]
                j = lookup[c - min3]
                if j < 0:
                    continue
                amp = a1[i1] * a2[i2] * a3[j]
                A.add(w1[i1] + w2[i2] + w3[j], amp.real, amp.imag)
        A.flush()
    return A.result()


def min_doubled_area(const i64[:, ::1] p1, const i64[:, ::1] p2, const i64[:, ::1] p3):
    """Minimum of |det(b - a, c - a)| over a in p1, b in p2, c in p3."""
    cdef Py_ssize_t i, j, k
    cdef i64 ux, uy, vx, vy, d, best = -1
    if p1.shape[0] == 0 or p2.shape[0] == 0 or p3.shape[0] == 0:
        raise ValueError("empty support")
    with nogil:
        for i in range(p1.shape[0]):
            if best == 0:
                break
            for j in range(p2.shape[0]):
                ux = p2[j, 0] - p1[i, 0]
                uy = p2[j, 1] - p1[i, 1]
                for k in range(p3.shape[0]):
                    vx = p3[k, 0] - p1[i, 0]
                    vy = p3[k, 1] - p1[i, 1]
                    d = ux * vy - uy * vx
                    if d < 0:
                        d = -d
                    if best < 0 or d < best:
                        best = d
    return best


def exp_sum_direct(const double[:, ::1] xi, const double[::1] omega,
                   const double complex[::1] amps, const double[:, ::1] x,
                   const double[::1] t):
    """Evaluate sum_k a_k exp(i(xi_k . x - t omega_k)) at each sample point."""
    cdef Py_ssize_t n = xi.shape[0], d = xi.shape[1], P = x.shape[0]
    cdef Py_ssize_t p, k, a
    cdef double ph, sr, si
    out = np.empty(P, dtype=np.complex128)
    cdef double complex[::1] o = out
    with nogil:
        for p in range(P):
            sr = 0.0
            si = 0.0
            for k in range(n):
                ph = -t[p] * omega[k]
                for a in range(d):
                    ph = ph + xi[k, a] * x[p, a]
                sr = sr + amps[k].real * cos(ph) - amps[k].imag * sin(ph)
                si = si + amps[k].real * sin(ph) + amps[k].imag * cos(ph)
            o[p] = sr + 1j * si
    return out
