"""Propagated fields on space-time grids.

Spatial samples come from an inverse DFT on a uniform grid of ``M`` points per
axis: placing ``c_k`` at index ``k mod M`` reproduces ``f`` exactly at the grid
points whenever ``M`` is at least the support width. Time is handled by
composite Gauss-Legendre quadrature, one spatial transform per node.
"""
from __future__ import annotations

import functools
import math
import os
import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft

from . import _kernels
from .core import CoefficientVector, Dispersion, TorusSpec

DEFAULT_ORDER = 8
# complex samples held at once while streaming over time nodes
CHUNK_SAMPLES = 1 << 21


def workers():
    """Worker-pool bound from ``STRICHARTZ_LAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("STRICHARTZ_LAB_THREADS", "1")))
    except ValueError:
        return 1


@functools.lru_cache(maxsize=64)
def _gauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def composite_gauss(breakpoints, order=DEFAULT_ORDER):
    """Nodes and weights of composite Gauss-Legendre on the given panels."""
    b = np.asarray(breakpoints, dtype=np.float64)
    x, w = _gauss(order)
    mid = 0.5 * (b[1:] + b[:-1])
    half = 0.5 * (b[1:] - b[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class GridSampling:
    """Uniform spatial grid plus a composite Gauss-Legendre rule on ``[0, T]``.

    ``exact_power`` records the even power for which the spatial rule is known
    to integrate ``|f|^p`` exactly (``None`` when unknown).
    """
    spatial_points: tuple
    T: float
    breakpoints: tuple
    order: int = DEFAULT_ORDER
    exact_power: int | None = None

    def __post_init__(self):
        pts = tuple(int(m) for m in np.atleast_1d(self.spatial_points))
        object.__setattr__(self, "spatial_points", pts)
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        if any(m < 1 for m in pts):
            raise ValueError("need at least one spatial point per axis")
        if not self.T > 0:
            raise ValueError("time interval must have T > 0")
        if self.time_points < 2:
            raise ValueError("need at least two time nodes")
        b = self.breakpoints
        if abs(b[0]) > 0 or abs(b[-1] - self.T) > 1e-12 * self.T or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must increase from 0 to T")

    @classmethod
    def uniform(cls, spatial_points, T, time_points, order=DEFAULT_ORDER, exact_power=None):
        """``ceil(time_points / order)`` equal panels."""
        order = min(order, max(int(time_points), 2))
        panels = max(1, math.ceil(int(time_points) / order))
        b = np.linspace(0.0, T, panels + 1)
        b[-1] = T
        return cls(spatial_points, T, tuple(b), order, exact_power)

    @property
    def time_points(self):
        return (len(self.breakpoints) - 1) * self.order

    @functools.cached_property
    def _rule(self):
        return composite_gauss(self.breakpoints, self.order)

    @property
    def time_nodes(self):
        return self._rule[0]

    @property
    def time_weights(self):
        return self._rule[1]

    def refined(self):
        """Same grid with every panel halved."""
        b = np.asarray(self.breakpoints)
        mids = 0.5 * (b[1:] + b[:-1])
        nb = np.empty(2 * len(b) - 1)
        nb[0::2] = b
        nb[1::2] = mids
        return GridSampling(self.spatial_points, self.T, tuple(nb), self.order, self.exact_power)

    def spatial_nodes(self, torus: TorusSpec):
        axes = [np.arange(m) * (p / m) for m, p in zip(self.spatial_points, torus.periods)]
        return axes


class FieldPlan:
    """Evaluate ``sum_k c_k exp(i(xi.x - t*omega_k))`` on a fixed spatial grid.

    ``omega`` may be any per-mode phase rate (the true symbol, or a reduced one
    that differs by a common translation and per-factor constants).
    """

    def __init__(self, coeffs: CoefficientVector, omega, spatial_points):
        self.shape = tuple(int(m) for m in spatial_points)
        d = coeffs.torus.d
        if len(self.shape) != d:
            raise ValueError("spatial grid dimension does not match the torus")
        for w, m in zip(coeffs.width, self.shape):
            if m < w:
                raise ValueError(f"{m} spatial points alias a support of width {w}")
        idx = np.zeros(len(coeffs), dtype=np.int64)
        for a in range(d):
            idx = idx * self.shape[a] + np.mod(coeffs.ks[:, a], self.shape[a])
        self.index = idx
        self.amps = np.asarray(coeffs.amps)
        self.omega = np.asarray(omega, dtype=np.float64)
        self.size = int(np.prod(self.shape))

    def values(self, ts, amps=None):
        """Samples at times ``ts``; ``amps`` overrides the stored amplitudes."""
        ts = np.asarray(ts, dtype=np.float64)
        amps = self.amps if amps is None else amps
        z = np.zeros((len(ts), self.size), dtype=np.complex128)
        if len(self.index):
            z[:, self.index] = amps[None, :] * np.exp(-1j * ts[:, None] * self.omega[None, :])
        z = z.reshape((len(ts),) + self.shape)
        axes = tuple(range(1, len(self.shape) + 1))
        return scipy.fft.ifftn(z, axes=axes, norm="forward", workers=workers())

    def adjoint(self, g, ts, weights, cell):
        """``sum_j w_j exp(i t_j omega_k) * cell * sum_x g(x, t_j) exp(-i xi_k x)``."""
        axes = tuple(range(1, len(self.shape) + 1))
        gh = scipy.fft.fftn(g, axes=axes, workers=workers()).reshape(len(ts), self.size)
        gk = gh[:, self.index]
        ph = np.exp(1j * np.asarray(ts)[:, None] * self.omega[None, :])
        return cell * np.einsum("j,jk->k", np.asarray(weights), gk * ph)


def chunk_len(size):
    return max(1, CHUNK_SAMPLES // max(size, 1))


@dataclass(frozen=True, eq=False)
class FieldSamples:
    """Samples ``values[j, m...] = f(x_m, t_j)`` with grid metadata.

    ``source`` keeps the generating ``(coeffs, dispersion)`` when known so that
    norms can refine the time rule.
    """
    values: np.ndarray
    grid: GridSampling
    torus: TorusSpec
    source: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.time_points,) + self.grid.spatial_points:
            raise ValueError("sample shape does not match the grid")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def evaluate_field(coeffs: CoefficientVector, disp: Dispersion, grid: GridSampling) -> FieldSamples:
    """Sample the propagated field on ``grid``."""
    if len(grid.spatial_points) != coeffs.torus.d:
        raise ValueError("grid dimension does not match the torus")
    plan = FieldPlan(coeffs, disp.omega(coeffs.xi), grid.spatial_points)
    ts = grid.time_nodes
    out = np.empty((len(ts),) + plan.shape, dtype=np.complex128)
    step = chunk_len(plan.size)
    for s in range(0, len(ts), step):
        out[s:s + step] = plan.values(ts[s:s + step])
    return FieldSamples(out, grid, coeffs.torus, (coeffs, disp))


def fast_size(n):
    return int(scipy.fft.next_fast_len(int(n)))


def sampling_for(p, coeffs: CoefficientVector, T, time_budget) -> GridSampling:
    """Grid on which spatial quadrature of ``|f|^p`` is exact for even ``p``."""
    if p not in (2, 4, 6, 8):
        raise ValueError("sampling_for supports p in {2, 4, 6, 8}")
    pts = tuple(fast_size(p * max(w, 1) + 1) for w in coeffs.width)
    return GridSampling.uniform(pts, T, max(int(time_budget), 2), exact_power=p)


def evaluate_at(coeffs: CoefficientVector, disp: Dispersion, x, t):
    """Direct summation at arbitrary points ``x`` (shape ``(P, d)``) and times ``t``."""
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64).reshape(-1, coeffs.torus.d))
    t = np.ascontiguousarray(np.broadcast_to(np.asarray(t, dtype=np.float64), (len(x),)))
    xi = np.ascontiguousarray(coeffs.xi)
    om = np.ascontiguousarray(disp.omega(xi))
    return _kernels.exp_sum_direct(xi, om, np.ascontiguousarray(coeffs.amps), x, t)


# binary dump: magic, version, d, M per axis, M_t, order, panels, T, alphas, lambda,
# breakpoints, then little-endian float64 (re, im) pairs, time-major row-major
_MAGIC = b"SLFS"
_VERSION = 1


def dump_field(samples: FieldSamples, path):
    g = samples.grid
    tor = samples.torus
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, tor.d))
        fh.write(struct.pack(f"<{tor.d}I", *g.spatial_points))
        fh.write(struct.pack("<III", g.time_points, g.order, len(g.breakpoints) - 1))
        fh.write(struct.pack("<d", g.T))
        fh.write(struct.pack(f"<{tor.d}d", *tor.alphas))
        fh.write(struct.pack("<d", tor.lam))
        fh.write(struct.pack(f"<{len(g.breakpoints)}d", *g.breakpoints))
        fh.write(np.ascontiguousarray(samples.values, dtype="<c16").tobytes())


def load_field(path) -> FieldSamples:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a field dump")
        version, d = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported dump version {version}")
        pts = struct.unpack(f"<{d}I", fh.read(4 * d))
        mt, order, panels = struct.unpack("<III", fh.read(12))
        (T,) = struct.unpack("<d", fh.read(8))
        alphas = struct.unpack(f"<{d}d", fh.read(8 * d))
        (lam,) = struct.unpack("<d", fh.read(8))
        bps = struct.unpack(f"<{panels + 1}d", fh.read(8 * (panels + 1)))
        data = np.frombuffer(fh.read(), dtype="<c16").astype(np.complex128)
    grid = GridSampling(pts, T, bps, order)
    if grid.time_points != mt:
        raise ValueError("corrupt dump header")
    return FieldSamples(data.reshape((mt,) + tuple(pts)), grid, TorusSpec(d, alphas, lam))
