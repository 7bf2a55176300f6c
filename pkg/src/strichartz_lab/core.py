"""Tori, lattice frequencies, coefficient vectors, dispersion symbols, regions.

Conventions
-----------
A coefficient vector ``c`` on a torus with period ``2*pi*lam*alpha_i`` along
axis ``i`` defines

    f(x) = sum_k c_k exp(i xi(k) . x),    xi_i(k) = k_i / (lam * alpha_i),

with integer lattice labels ``k``. There is no ``lam**-d`` prefactor, so
``||f||_{L^2}^2 = vol * sum |c_k|^2``. A dispersion symbol ``omega`` evolves the
field as ``exp(i(xi . x - t * omega(xi)))``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

REGION_RTOL = 1e-12

LatticeFrequency = tuple  # tuple of d integers


@dataclass(frozen=True)
class TorusSpec:
    d: int = 1
    alphas: tuple = (1.0,)
    lam: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        alphas = tuple(float(a) for a in self.alphas)
        if len(alphas) != self.d:
            raise ValueError("need one period factor per axis")
        if alphas[0] != 1.0:
            raise ValueError("first period factor must be 1")
        for a in alphas:
            if not 0.5 < a <= 1.0:
                raise ValueError(f"period factor {a} outside (1/2, 1]")
        if not self.lam >= 1.0:
            raise ValueError(f"rescaling parameter must be >= 1, got {self.lam}")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def unit(cls, d=1):
        return cls(d, (1.0,) * d, 1.0)

    @classmethod
    def rectangular(cls, gamma):
        """The 2d torus R/2piZ x R/2pi*gamma*Z."""
        return cls(2, (1.0, gamma), 1.0)

    @classmethod
    def rescaled(cls, lam, d=1, alphas=None):
        return cls(d, alphas or (1.0,) * d, lam)

    @property
    def scales(self):
        """Lattice-to-physical divisor per axis, ``lam * alpha_i``."""
        return np.array([self.lam * a for a in self.alphas])

    @property
    def periods(self):
        return 2 * math.pi * self.scales

    @property
    def volume(self):
        return float(np.prod(self.periods))

    @property
    def integer_lattice(self):
        """True when physical frequencies are the integer labels themselves."""
        return self.lam == 1.0 and all(a == 1.0 for a in self.alphas)

    def physical(self, ks):
        return np.asarray(ks, dtype=np.float64) / self.scales

    def to_dict(self):
        return {"d": self.d, "alphas": list(self.alphas), "lambda": self.lam}

    @classmethod
    def from_dict(cls, obj):
        return cls(int(obj["d"]), tuple(obj["alphas"]), float(obj["lambda"]))


def _as_points(ks, d):
    arr = np.asarray(ks, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if d == 1 else arr.reshape(-1, d)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"lattice points must have shape (n, {d})")
    return arr


def _lex_order(ks):
    return np.lexsort(ks.T[::-1])


class CoefficientVector:
    """Finite map from lattice frequencies to complex amplitudes.

    Immutable: arrays are stored read-only and sorted lexicographically by
    lattice label. ``provenance`` carries generator metadata and warnings and
    does not take part in equality.
    """

    __slots__ = ("torus", "ks", "amps", "provenance", "_bbox", "_norm")

    def __init__(self, torus: TorusSpec, ks, amps, provenance: Mapping | None = None):
        ks = _as_points(ks, torus.d)
        amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
        if len(ks) != len(amps):
            raise ValueError("lattice points and amplitudes differ in length")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        order = _lex_order(ks) if len(ks) else np.arange(0)
        ks = ks[order]
        amps = amps[order]
        if len(ks) > 1 and np.any(np.all(ks[1:] == ks[:-1], axis=1)):
            raise ValueError("duplicate lattice frequencies")
        ks = np.ascontiguousarray(ks)
        amps = np.ascontiguousarray(amps)
        ks.flags.writeable = False
        amps.flags.writeable = False
        self.torus = torus
        self.ks = ks
        self.amps = amps
        self.provenance = dict(provenance or {})
        if len(ks):
            self._bbox = (ks.min(axis=0), ks.max(axis=0))
        else:
            self._bbox = (np.zeros(torus.d, np.int64), np.full(torus.d, -1, np.int64))
        self._norm = math.sqrt(math.fsum((amps.real ** 2 + amps.imag ** 2).tolist()))

    @classmethod
    def from_mapping(cls, torus, entries: Mapping, provenance=None):
        keys = [k if isinstance(k, tuple) else (k,) for k in entries]
        return cls(torus, np.array(keys, dtype=np.int64).reshape(-1, torus.d),
                   list(entries.values()), provenance)

    @classmethod
    def zeros(cls, torus):
        return cls(torus, np.zeros((0, torus.d), np.int64), [])

    def __len__(self):
        return len(self.amps)

    def __eq__(self, other):
        if not isinstance(other, CoefficientVector):
            return NotImplemented
        return (self.torus == other.torus and np.array_equal(self.ks, other.ks)
                and np.array_equal(self.amps, other.amps))

    def __repr__(self):
        return f"CoefficientVector(n={len(self)}, torus={self.torus}, l2={self._norm:.6g})"

    @property
    def entries(self):
        if self.torus.d == 1:
            return {int(k[0]): complex(a) for k, a in zip(self.ks, self.amps)}
        return {tuple(int(v) for v in k): complex(a) for k, a in zip(self.ks, self.amps)}

    @property
    def bbox(self):
        return self._bbox

    @property
    def width(self):
        """Number of lattice sites spanned per axis (``max - min + 1``)."""
        lo, hi = self._bbox
        return tuple(int(v) for v in np.maximum(hi - lo + 1, 0))

    def l2(self):
        """The coefficient norm ``sqrt(sum |c_k|^2)``."""
        return self._norm

    def function_l2(self):
        """``||f||_{L^2}`` on the torus."""
        return math.sqrt(self.torus.volume) * self._norm

    @property
    def xi(self):
        return self.torus.physical(self.ks)

    def with_amps(self, amps, provenance=None):
        return CoefficientVector(self.torus, self.ks, amps,
                                 self.provenance if provenance is None else provenance)

    def scaled(self, a):
        return self.with_amps(self.amps * a)

    def normalized(self):
        if self._norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return self.with_amps(self.amps / self._norm)

    def is_zero(self):
        return self._norm == 0.0

    def to_dict(self):
        rows = [[int(v) for v in k] + [float(a.real), float(a.imag)]
                for k, a in zip(self.ks, self.amps)]
        return {"torus": self.torus.to_dict(), "entries": rows}

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj):
        torus = TorusSpec.from_dict(obj["torus"])
        rows = obj["entries"]
        d = torus.d
        ks = np.array([r[:d] for r in rows], dtype=np.int64).reshape(-1, d)
        amps = [complex(r[d], r[d + 1]) for r in rows]
        return cls(torus, ks, amps)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def combine(a: CoefficientVector, b: CoefficientVector, sa=1.0, sb=1.0):
    """Linear combination ``sa*a + sb*b`` on the union of supports."""
    if a.torus != b.torus:
        raise ValueError("different tori")
    acc = {}
    for k, v in zip(map(tuple, a.ks.tolist()), a.amps):
        acc[k] = acc.get(k, 0) + sa * v
    for k, v in zip(map(tuple, b.ks.tolist()), b.amps):
        acc[k] = acc.get(k, 0) + sb * v
    return CoefficientVector.from_mapping(a.torus, acc)


@dataclass(frozen=True)
class Dispersion:
    """Phase symbol. The field evolves as ``exp(i(xi.x - t*omega(xi)))``.

    ``kdv_galilean`` with parameter ``A`` has the dispersion relation
    ``3*A*l**2 + l**3`` entering with the Airy sign, i.e.
    ``omega(l) = -(3*A*l**2 + l**3)``; ``A = 0`` is the Airy symbol.
    """
    kind: str
    param: float | None = None

    KINDS = ("schrodinger", "airy", "fractional", "kdv_galilean")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown dispersion {self.kind!r}")
        if self.kind == "fractional" and not (self.param is not None and self.param > 2):
            raise ValueError("fractional dispersion needs exponent a > 2")
        if self.kind == "kdv_galilean" and self.param is None:
            raise ValueError("kdv_galilean needs the shift A")

    @classmethod
    def schrodinger(cls):
        return cls("schrodinger")

    @classmethod
    def airy(cls):
        return cls("airy")

    @classmethod
    def fractional(cls, a):
        return cls("fractional", float(a))

    @classmethod
    def kdv_galilean(cls, A):
        return cls("kdv_galilean", int(A))

    @property
    def one_dimensional(self):
        return self.kind in ("airy", "kdv_galilean")

    def relation(self, xi):
        """Dispersion relation without the propagation sign (``3 A l^2 + l^3`` for kdv)."""
        if self.kind == "kdv_galilean":
            l = np.asarray(xi, dtype=np.float64)[..., 0]
            return 3 * self.param * l ** 2 + l ** 3
        return self.omega(xi)

    def omega(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        if self.one_dimensional and xi.shape[-1] != 1:
            raise ValueError(f"{self.kind} dispersion is one-dimensional")
        if self.kind == "schrodinger":
            return np.sum(xi * xi, axis=-1)
        if self.kind == "airy":
            return -xi[..., 0] ** 3
        if self.kind == "fractional":
            return np.sqrt(np.sum(xi * xi, axis=-1)) ** self.param
        l = xi[..., 0]
        return -(3 * self.param * l ** 2 + l ** 3)

    def integer_omega(self, ks):
        """Exact integer symbol values on the integer lattice."""
        ks = np.asarray(ks, dtype=np.int64)
        if self.one_dimensional and ks.shape[-1] != 1:
            raise ValueError(f"{self.kind} dispersion is one-dimensional")
        if self.kind == "schrodinger":
            return np.sum(ks * ks, axis=-1)
        if self.kind == "airy":
            return -ks[..., 0] ** 3
        if self.kind == "kdv_galilean":
            l = ks[..., 0]
            return -(3 * int(self.param) * l * l + l ** 3)
        a = self.param
        sq = np.sum(ks * ks, axis=-1)
        if float(a).is_integer() and (int(a) % 2 == 0 or ks.shape[-1] == 1):
            if int(a) % 2 == 0:
                return sq ** (int(a) // 2)
            return np.abs(ks[..., 0]) ** int(a)
        raise ValueError(f"|k|^{a} is not integer valued on the lattice")

    def to_dict(self):
        return {"kind": self.kind, "param": self.param}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["kind"], obj.get("param"))

    @classmethod
    def parse(cls, text):
        """``schrodinger``, ``airy``, ``fractional:3``, ``kdv_galilean:64``."""
        name, _, arg = str(text).partition(":")
        if name == "fractional":
            return cls.fractional(float(arg))
        if name == "kdv_galilean":
            return cls.kdv_galilean(int(arg))
        return cls(name)


@dataclass(frozen=True)
class FrequencyRegion:
    """A set of physical frequencies.

    kinds: ``annulus`` (radial band, params ``rmin, rmax, upper_open``),
    ``ball`` (``center, r``), ``box`` (``lo, hi, upper_open``) and ``set``
    (explicit lattice labels). Boundaries are inclusive with relative
    tolerance ``REGION_RTOL`` unless ``upper_open``.
    """
    kind: str
    params: tuple = field(default_factory=tuple)

    @classmethod
    def annulus(cls, N):
        """Littlewood-Paley band ``N/2 <= |xi| <= 2N``."""
        return cls("annulus", (N / 2, 2 * N, False))

    @classmethod
    def shell(cls, N):
        """Dyadic shell ``N <= |xi| < 2N``."""
        return cls("annulus", (float(N), 2.0 * N, True))

    @classmethod
    def band(cls, rmin, rmax, upper_open=False):
        return cls("annulus", (float(rmin), float(rmax), bool(upper_open)))

    @classmethod
    def ball(cls, center, r):
        return cls("ball", (tuple(float(c) for c in np.atleast_1d(center)), float(r)))

    @classmethod
    def interval(cls, lo, hi, upper_open=False):
        return cls("box", ((float(lo),), (float(hi),), bool(upper_open)))

    @classmethod
    def box(cls, lo, hi, upper_open=False):
        return cls("box", (tuple(float(v) for v in lo), tuple(float(v) for v in hi),
                           bool(upper_open)))

    @classmethod
    def explicit(cls, points):
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls("set", tuple(tuple(int(v) for v in p) for p in pts))

    def contains(self, ks, torus: TorusSpec):
        ks = _as_points(ks, torus.d)
        if self.kind == "set":
            members = set(self.params)
            return np.array([tuple(k) in members for k in ks.tolist()], dtype=bool)
        xi = torus.physical(ks)
        if self.kind == "annulus":
            rmin, rmax, upper_open = self.params
            r = np.sqrt(np.sum(xi * xi, axis=1))
            ok = r >= rmin * (1 - REGION_RTOL)
            if upper_open:
                return ok & (r < rmax * (1 - REGION_RTOL))
            return ok & (r <= rmax * (1 + REGION_RTOL))
        if self.kind == "ball":
            center, rad = self.params
            dist = np.sqrt(np.sum((xi - np.array(center)) ** 2, axis=1))
            return dist <= rad * (1 + REGION_RTOL)
        if self.kind == "box":
            lo, hi, upper_open = self.params
            lo = np.array(lo)
            hi = np.array(hi)
            tol = REGION_RTOL * np.maximum(np.abs(lo), np.abs(hi))
            ok = np.all(xi >= lo - tol, axis=1)
            if upper_open:
                return ok & np.all(xi < hi - tol, axis=1)
            return ok & np.all(xi <= hi + tol, axis=1)
        raise ValueError(f"unknown region kind {self.kind!r}")

    def _bounds(self, torus):
        if self.kind == "annulus":
            r = self.params[1]
            return np.full(torus.d, -r), np.full(torus.d, r)
        if self.kind == "ball":
            c = np.array(self.params[0])
            return c - self.params[1], c + self.params[1]
        if self.kind == "box":
            return np.array(self.params[0]), np.array(self.params[1])
        raise ValueError(self.kind)

    def lattice_points(self, torus: TorusSpec):
        """All lattice labels in the region, sorted lexicographically."""
        if self.kind == "set":
            pts = np.array(self.params, dtype=np.int64).reshape(-1, torus.d)
            return pts[_lex_order(pts)] if len(pts) else pts
        lo, hi = self._bounds(torus)
        scales = torus.scales
        axes = []
        for a in range(torus.d):
            k0 = math.floor(lo[a] * scales[a] * (1 - np.sign(lo[a]) * REGION_RTOL)) - 1
            k1 = math.ceil(hi[a] * scales[a] * (1 + np.sign(hi[a]) * REGION_RTOL)) + 1
            axes.append(np.arange(k0, k1 + 1, dtype=np.int64))
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, torus.d)
        pts = grid[self.contains(grid, torus)]
        return pts[_lex_order(pts)] if len(pts) else pts


def project(coeffs: CoefficientVector, region: FrequencyRegion) -> CoefficientVector:
    """Restrict the entries to lattice frequencies inside ``region``."""
    if len(coeffs) == 0:
        return coeffs
    keep = region.contains(coeffs.ks, coeffs.torus)
    return CoefficientVector(coeffs.torus, coeffs.ks[keep], coeffs.amps[keep], coeffs.provenance)


def galilean_shift(coeffs: CoefficientVector, k0) -> CoefficientVector:
    """Translate in frequency: ``new[k + k0] = old[k]``."""
    k0 = np.asarray(np.atleast_1d(k0), dtype=np.int64).reshape(1, coeffs.torus.d)
    return CoefficientVector(coeffs.torus, coeffs.ks + k0, coeffs.amps, coeffs.provenance)


def kdv_galilean_reduce(coeffs: CoefficientVector, A: int):
    """Shift ``l = k - A`` and return the matching ``kdv_galilean(A)`` symbol.

    The Airy field of ``coeffs`` and the reduced field satisfy
    ``|u_airy|(x, t) == |u_reduced|(x + 3 A^2 t, t)``.
    """
    if coeffs.torus.d != 1:
        raise ValueError("KdV-Galilean reduction is one-dimensional")
    if not coeffs.torus.integer_lattice:
        raise ValueError("KdV-Galilean reduction needs integer frequencies")
    return galilean_shift(coeffs, -int(A)), Dispersion.kdv_galilean(int(A))

