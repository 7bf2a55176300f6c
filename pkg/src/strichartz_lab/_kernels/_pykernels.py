"""Pure numpy versions of the compiled kernels.

Same signatures and results as ``_ckernels``; used when the extension is not
built or when ``STRICHARTZ_LAB_PURE=1``.
"""
import math

import numpy as np


def _energy_of_groups(q, amp):
    if q.size == 0:
        return []
    keys, inv = np.unique(q, return_inverse=True)
    re = np.bincount(inv, weights=amp.real, minlength=keys.size)
    im = np.bincount(inv, weights=amp.imag, minlength=keys.size)
    return (re * re + im * im).tolist()


def resonance_energy(codes, omegas, amps, dense_cap=1 << 23):
    """Return sum over (momentum, phase) classes of |sum of amplitude products|^2."""
    m = len(codes)
    if m < 1 or m > 3:
        raise ValueError("between 1 and 3 slots supported")
    slots = []
    for c, w, a in zip(codes, omegas, amps):
        c = np.asarray(c, dtype=np.int64)
        if c.size == 0:
            return 0.0
        slots.append((c, np.asarray(w, dtype=np.int64), np.asarray(a, dtype=np.complex128)))

    if m == 1:
        a = slots[0][2]
        return math.fsum((a.real ** 2 + a.imag ** 2).tolist())

    cl, wl, al = slots[-1]
    lo3, hi3 = int(cl[0]), int(cl[-1])
    lut = np.full(hi3 - lo3 + 1, -1, dtype=np.int64)
    lut[cl - lo3] = np.arange(cl.size)

    # prefix tuples over all but the last slot, sorted by code sum
    pc, pw, pa = slots[0]
    if m == 3:
        c2, w2, a2 = slots[1]
        pc = (pc[:, None] + c2[None, :]).ravel()
        pw = (slots[0][1][:, None] + w2[None, :]).ravel()
        pa = (slots[0][2][:, None] * a2[None, :]).ravel()
    order = np.argsort(pc, kind="stable")
    pc, pw, pa = pc[order], pw[order], pa[order]

    terms = []
    for s in range(int(pc[0]) + lo3, int(pc[-1]) + hi3 + 1):
        i0 = np.searchsorted(pc, s - hi3, side="left")
        i1 = np.searchsorted(pc, s - lo3, side="right")
        if i0 >= i1:
            continue
        j = lut[s - pc[i0:i1] - lo3]
        ok = j >= 0
        if not ok.any():
            continue
        jj = j[ok]
        q = pw[i0:i1][ok] + wl[jj]
        amp = pa[i0:i1][ok] * al[jj]
        terms.extend(_energy_of_groups(q, amp))
    return math.fsum(terms)


def min_doubled_area(p1, p2, p3):
    """Minimum of |det(b - a, c - a)| over a in p1, b in p2, c in p3."""
    p1 = np.asarray(p1, dtype=np.int64)
    p2 = np.asarray(p2, dtype=np.int64)
    p3 = np.asarray(p3, dtype=np.int64)
    if len(p1) == 0 or len(p2) == 0 or len(p3) == 0:
        raise ValueError("empty support")
    best = None
    for a in p1:
        u = p2 - a
        v = p3 - a
        d = np.abs(u[:, 0, None] * v[None, :, 1] - u[:, 1, None] * v[None, :, 0])
        cur = int(d.min())
        if best is None or cur < best:
            best = cur
            if best == 0:
                return 0
    return best


def exp_sum_direct(xi, omega, amps, x, t, chunk=4096):
    """Evaluate sum_k a_k exp(i(xi_k . x - t omega_k)) at each sample point."""
    xi = np.asarray(xi, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    amps = np.asarray(amps, dtype=np.complex128)
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(len(x), dtype=np.complex128)
    for start in range(0, len(x), chunk):
        xs = x[start:start + chunk]
        ts = t[start:start + chunk]
        ph = xs @ xi.T - ts[:, None] * omega[None, :]
        out[start:start + chunk] = np.exp(1j * ph) @ amps
    return out
