"""Matrix-valued symbols on the unit circle.

A symbol is stored as a dense window of explicit Fourier coefficients plus an
optional list of closed-form tail terms.  Coefficients follow the convention

    s^(k) = (1/2pi) * integral of s(e^{i theta}) e^{-i k theta} d theta,

so that ``s(w) = sum_k s^(k) w^k`` on the circle.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.fft

from . import quadrature

EPS_BOUNDARY = 1e-6
SERIES_TOL = 1e-14
MAX_SERIES_TERMS = 2**22


class SymbolError(ValueError):
    """Malformed symbol input or incompatible shapes."""


class SupportOverflow(SymbolError):
    """An operation needs a finite coefficient window but the support is unbounded."""


class NonConvergence(RuntimeError):
    """A series or quadrature evaluation could not meet its tolerance."""


# --------------------------------------------------------------------------
# disk points


@dataclass(frozen=True)
class DiskPoint:
    """A point of the open unit disk kept away from the boundary."""

    z: complex

    def __post_init__(self):
        z = complex(self.z)
        if not np.isfinite(z.real) or not np.isfinite(z.imag):
            raise SymbolError(f"disk point must be finite, got {self.z!r}")
        if abs(z) >= 1.0 - EPS_BOUNDARY:
            raise SymbolError(f"|z| = {abs(z):.9g} is not below 1 - {EPS_BOUNDARY:g}")
        object.__setattr__(self, "z", z)

    @classmethod
    def polar(cls, r: float, theta: float) -> "DiskPoint":
        return cls(r * complex(math.cos(theta), math.sin(theta)))

    def __complex__(self) -> complex:
        return self.z


def as_complex_point(z) -> complex:
    """Validate ``z`` as a disk point and return it as a Python complex."""
    if isinstance(z, DiskPoint):
        return z.z
    return DiskPoint(z).z


# --------------------------------------------------------------------------
# scalar closed-form coefficient rules


_NEG = "neg"
_ZERO = "zero"
_POS = "pos"


def _pieces(lo, hi) -> set[str] | None:
    """Translate a degree interval into the pieces neg/zero/pos, or None if not a union."""
    lo_ok = {None: True, 0: True, 1: True}
    hi_ok = {None: True, 0: True, -1: True}
    if lo not in lo_ok or hi not in hi_ok:
        return None
    out = set()
    if lo is None:
        out.add(_NEG)
    if (lo is None or lo <= 0) and (hi is None or hi >= 0):
        out.add(_ZERO)
    if hi is None:
        out.add(_POS)
    return out


class Rule:
    """Scalar coefficient sequence with a closed form.

    Subclasses supply ``coeffs`` (vectorized over integer degrees),
    ``sample_full`` on the circle and, for two-sided rules, ``sample_neg``.
    ``const`` and ``rate`` give a bound ``|c(k)| <= const * rate**|k|`` for
    ``k != 0``; ``max_degree`` marks a finite span.
    """

    support: tuple[int | None, int | None] = (None, None)
    const: float = 1.0
    rate: float = 1.0
    max_degree: int | None = None
    kind: str = "rule"

    def coeffs(self, ks: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def sample_full(self, w: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def sample_neg(self, w: np.ndarray) -> np.ndarray:
        if self.support[0] is not None and self.support[0] >= 0:
            return np.zeros(w.shape, dtype=complex)
        raise NotImplementedError

    def sample_part(self, w: np.ndarray, lo, hi) -> np.ndarray:
        slo, shi = self.support
        lo = slo if lo is None else (lo if slo is None else max(lo, slo))
        hi = shi if hi is None else (hi if shi is None else min(hi, shi))
        if lo is not None and hi is not None and lo > hi:
            return np.zeros(w.shape, dtype=complex)
        if (lo, hi) == self.support:
            return self.sample_full(w)
        pieces = _pieces(lo, hi)
        if pieces is None:
            raise NotImplementedError(f"no closed-form samples for degrees [{lo}, {hi}]")
        c0 = complex(self.coeffs(np.array([0]))[0])
        neg = self.sample_neg(w)
        out = np.zeros(w.shape, dtype=complex)
        if _NEG in pieces:
            out += neg
        if _ZERO in pieces:
            out += c0
        if _POS in pieces:
            out += self.sample_full(w) - neg - c0
        return out

    def params(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class MobiusRule(Rule):
    """Coefficients of ``(w - a)/(1 - conj(a) w)``."""

    a: complex
    kind: str = field(default="mobius", init=False)

    @property
    def support(self):
        return (0, None)

    @property
    def rate(self):
        return abs(self.a)

    @property
    def const(self):
        r = abs(self.a)
        return 1.0 if r == 0 else (1.0 - r * r) / r

    @property
    def max_degree(self):
        return 1 if self.a == 0 else None

    def coeffs(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        a = complex(self.a)
        out = np.zeros(ks.shape, dtype=complex)
        out[ks == 0] = -a
        pos = ks >= 1
        if np.any(pos):
            out[pos] = (1.0 - abs(a) ** 2) * np.conj(a) ** (ks[pos] - 1).astype(float)
        return out

    def sample_full(self, w):
        a = complex(self.a)
        return (w - a) / (1.0 - np.conj(a) * w)

    def params(self):
        return {"a": self.a}


_LAGUERRE_LOCK = threading.Lock()
_LAGUERRE_CACHE: dict[float, np.ndarray] = {}


def laguerre_minus_one(x: float, count: int) -> np.ndarray:
    """Values ``L_k^{(-1)}(x)`` for ``k = 0..count-1`` by the three-term recurrence."""
    with _LAGUERRE_LOCK:
        cached = _LAGUERRE_CACHE.get(x)
    if cached is not None and cached.size >= count:
        return cached[:count]
    size = max(count, 2)
    out = np.empty(size)
    out[0] = 1.0
    out[1] = -x
    prev, cur = 1.0, -x
    for k in range(1, size - 1):
        nxt = ((2 * k - x) * cur - (k - 1) * prev) / (k + 1)
        out[k + 1] = nxt
        prev, cur = cur, nxt
    out.setflags(write=False)
    with _LAGUERRE_LOCK:
        old = _LAGUERRE_CACHE.get(x)
        if old is None or old.size < out.size:
            _LAGUERRE_CACHE[x] = out
    return out[:count]


@dataclass(frozen=True)
class SingularInnerRule(Rule):
    """Coefficients of ``exp(-mass (zeta + w)/(zeta - w))`` for a unimodular ``zeta``.

    The generating function of the Laguerre polynomials with parameter -1
    gives the closed form ``exp(-mass) L_k^{(-1)}(2 mass) zeta^{-k}``.
    """

    zeta: complex = 1.0
    mass: float = 1.0
    kind: str = field(default="singular_inner", init=False)

    @property
    def support(self):
        return (0, None)

    const = 1.0
    rate = 1.0

    def coeffs(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        out = np.zeros(ks.shape, dtype=complex)
        ok = ks >= 0
        if np.any(ok):
            kk = ks[ok]
            lag = laguerre_minus_one(2.0 * self.mass, int(kk.max()) + 1)[kk]
            out[ok] = math.exp(-self.mass) * lag * np.conj(complex(self.zeta)) ** kk.astype(float)
        return out

    def sample_full(self, w):
        zeta = complex(self.zeta)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.exp(-self.mass * (zeta + w) / (zeta - w))
        return np.where(np.abs(w - zeta) < 1e-300, 0.0, np.nan_to_num(val, nan=0.0))

    def params(self):
        return {"zeta": self.zeta, "mass": self.mass}


@dataclass(frozen=True)
class HalfIndicatorRule(Rule):
    """Indicator of the upper half circle, valued 1/2 at the two jump points."""

    kind: str = field(default="half_indicator", init=False)
    support = (None, None)
    const = 1.0 / math.pi
    rate = 1.0

    def coeffs(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        out = np.zeros(ks.shape, dtype=complex)
        out[ks == 0] = 0.5
        odd = (ks % 2) != 0
        out[odd] = -1j / (np.pi * ks[odd])
        return out

    def sample_full(self, w):
        im = np.imag(w)
        out = np.where(im > 0, 1.0, 0.0).astype(complex)
        edge = np.abs(im) < 1e-15
        out[edge] = 0.5
        return out

    def sample_neg(self, w):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (1j / np.pi) * np.arctanh(np.conj(w))

    def params(self):
        return {}


@dataclass(frozen=True)
class GeometricRule(Rule):
    """``r^|k|`` on the nonnegative (``side='plus'``) or negative degrees."""

    r: float
    side: str = "plus"
    kind: str = field(default="geometric", init=False)

    def __post_init__(self):
        if not 0.0 <= self.r < 1.0:
            raise SymbolError(f"geometric ratio must lie in [0, 1), got {self.r}")
        if self.side not in ("plus", "minus"):
            raise SymbolError(f"unknown geometric side {self.side!r}")

    @property
    def support(self):
        return (0, None) if self.side == "plus" else (None, -1)

    const = 1.0

    @property
    def rate(self):
        return self.r

    @property
    def max_degree(self):
        if self.r == 0:
            return 0 if self.side == "plus" else -1
        return None

    def coeffs(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        mask = ks >= 0 if self.side == "plus" else ks <= -1
        out = np.zeros(ks.shape, dtype=complex)
        out[mask] = float(self.r) ** np.abs(ks[mask]).astype(float)
        return out

    def sample_full(self, w):
        r = self.r
        if self.side == "plus":
            return 1.0 / (1.0 - r * w)
        wb = np.conj(w)
        return r * wb / (1.0 - r * wb)

    def sample_neg(self, w):
        if self.side == "plus":
            return np.zeros(w.shape, dtype=complex)
        return self.sample_full(w)

    def params(self):
        return {"r": self.r, "side": self.side}


def _clip_bounds(lo, hi, lo2, hi2):
    lo = lo2 if lo is None else (lo if lo2 is None else max(lo, lo2))
    hi = hi2 if hi is None else (hi if hi2 is None else min(hi, hi2))
    return lo, hi


@dataclass(frozen=True, eq=False)
class TailTerm:
    """``weight * g`` where ``g`` is a transformed scalar rule restricted to degrees [lo, hi].

    ``reflect`` substitutes ``w -> conj(w)`` in the rule and ``conj`` conjugates
    its values.  ``lo``/``hi`` refer to degrees of the transformed sequence.
    """

    rule: Rule
    weight: np.ndarray
    reflect: bool = False
    conj: bool = False
    lo: int | None = None
    hi: int | None = None

    @property
    def sign(self) -> int:
        return -1 if (self.reflect ^ self.conj) else 1

    def bounds(self) -> tuple[int | None, int | None]:
        slo, shi = self.rule.support
        if self.sign < 0:
            slo, shi = (None if shi is None else -shi), (None if slo is None else -slo)
        return _clip_bounds(self.lo, self.hi, slo, shi)

    def is_empty(self) -> bool:
        lo, hi = self.bounds()
        return (lo is not None and hi is not None and lo > hi) or not np.any(self.weight)

    def finite_span(self) -> tuple[int, int] | None:
        """Exact degree span when the transformed rule is finitely supported."""
        lo, hi = self.bounds()
        md = self.rule.max_degree
        if md is not None:
            slo = self.rule.support[0] if self.rule.support[0] is not None else -abs(md)
            span = sorted((self.sign * slo, self.sign * md))
            lo = span[0] if lo is None else max(lo, span[0])
            hi = span[1] if hi is None else min(hi, span[1])
        if lo is None or hi is None:
            return None
        return lo, hi

    def scalar_coeffs(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        c = self.rule.coeffs(self.sign * ks)
        if self.conj:
            c = np.conj(c)
        lo, hi = self.lo, self.hi
        if lo is not None:
            c = np.where(ks >= lo, c, 0)
        if hi is not None:
            c = np.where(ks <= hi, c, 0)
        return c

    def coeffs(self, ks: np.ndarray) -> np.ndarray:
        return self.scalar_coeffs(ks)[:, None, None] * self.weight[None, :, :]

    def sample(self, w: np.ndarray) -> np.ndarray:
        wb = np.conj(w) if self.reflect else w
        blo, bhi = self.lo, self.hi
        if self.sign < 0:
            blo, bhi = (None if bhi is None else -bhi), (None if blo is None else -blo)
        vals = self.rule.sample_part(wb, blo, bhi)
        if self.conj:
            vals = np.conj(vals)
        return vals[:, None, None] * self.weight[None, :, :]

    def bound_scale(self) -> float:
        return self.rule.const * float(np.linalg.norm(self.weight, 2))

    # transformations
    def tilde(self) -> "TailTerm":
        return replace(
            self,
            reflect=not self.reflect,
            lo=None if self.hi is None else -self.hi,
            hi=None if self.lo is None else -self.lo,
        )

    def star(self) -> "TailTerm":
        return replace(
            self,
            weight=_frozen(self.weight.conj().T),
            conj=not self.conj,
            lo=None if self.hi is None else -self.hi,
            hi=None if self.lo is None else -self.lo,
        )

    def restrict(self, lo, hi) -> "TailTerm":
        lo, hi = _clip_bounds(self.lo, self.hi, lo, hi)
        return replace(self, lo=lo, hi=hi)

    def with_weight(self, weight: np.ndarray) -> "TailTerm":
        return replace(self, weight=_frozen(weight))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# the symbol type


class MatrixSymbol:
    """Matrix-valued function on the circle: explicit coefficient window plus tails.

    ``block[j]`` holds the coefficient of degree ``lo + j``.  Instances are
    immutable; all arrays are read-only.  The constructor validates that no
    degree is defined both explicitly and by a tail term unless
    ``strict=False`` (used for internal sums).
    """

    __slots__ = ("shape", "lo", "block", "tails", "norm_hint")

    def __init__(
        self,
        lo: int,
        block: np.ndarray,
        tails: Sequence[TailTerm] = (),
        shape: tuple[int, int] | None = None,
        norm_hint: float | None = None,
        strict: bool = True,
    ):
        block = np.asarray(block, dtype=complex)
        if block.ndim != 3:
            raise SymbolError("coefficient block must be three-dimensional (degree, row, col)")
        if shape is None:
            if block.shape[0] == 0 and not tails:
                raise SymbolError("shape needed for an empty symbol")
            shape = block.shape[1:] if block.shape[0] else tails[0].weight.shape
        shape = (int(shape[0]), int(shape[1]))
        if shape[0] < 1 or shape[1] < 1:
            raise SymbolError(f"block dimensions must be positive, got {shape}")
        if block.shape[0] and block.shape[1:] != shape:
            raise SymbolError(f"coefficients of shape {block.shape[1:]} do not match {shape}")
        if block.shape[0] == 0:
            block = np.zeros((0,) + shape, dtype=complex)
        lo, block = _trim(int(lo), block)
        tails = tuple(t for t in tails if not t.is_empty())
        for t in tails:
            if t.weight.shape != shape:
                raise SymbolError(f"tail weight shape {t.weight.shape} does not match {shape}")
        if strict and tails and block.shape[0]:
            nz = np.nonzero(np.any(block != 0, axis=(1, 2)))[0] + lo
            for t in tails:
                tlo, thi = t.bounds()
                mask = np.ones(nz.shape, dtype=bool)
                if tlo is not None:
                    mask &= nz >= tlo
                if thi is not None:
                    mask &= nz <= thi
                clash = nz[mask]
                if clash.size:
                    raise SymbolError(
                        f"degree {int(clash[0])} is defined both explicitly and by a {t.rule.kind} tail"
                    )
        block = block.copy()
        block.setflags(write=False)
        self.shape = shape
        self.lo = lo
        self.block = block
        self.tails = tails
        self.norm_hint = None if norm_hint is None else float(norm_hint)

    # -- basic views
    @property
    def n(self) -> int:
        if self.shape[0] != self.shape[1]:
            raise SymbolError(f"symbol of shape {self.shape} is not square")
        return self.shape[0]

    @property
    def hi(self) -> int:
        return self.lo + self.block.shape[0] - 1

    @property
    def is_laurent(self) -> bool:
        return not self.tails

    def coeff(self, k: int) -> np.ndarray:
        return self.coeffs(np.array([int(k)]))[0]

    def coeffs(self, ks) -> np.ndarray:
        """Coefficients at the integer degrees ``ks``; shape ``(len(ks), p, q)``."""
        ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
        out = np.zeros((ks.size,) + self.shape, dtype=complex)
        if self.block.shape[0]:
            idx = ks - self.lo
            ok = (idx >= 0) & (idx < self.block.shape[0])
            out[ok] = self.block[idx[ok]]
        for t in self.tails:
            out += t.coeffs(ks)
        return out

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients for degrees ``lo..hi`` inclusive."""
        if hi < lo:
            return np.zeros((0,) + self.shape, dtype=complex)
        return self.coeffs(np.arange(lo, hi + 1))

    def support_bounds(self) -> tuple[int | None, int | None]:
        """Smallest and largest possibly nonzero degree (None when unbounded)."""
        los, his = [], []
        if self.block.shape[0]:
            los.append(self.lo)
            his.append(self.hi)
        for t in self.tails:
            span = t.finite_span()
            tlo, thi = span if span is not None else t.bounds()
            los.append(tlo)
            his.append(thi)
        if not los:
            return (0, -1)
        lo = None if any(v is None for v in los) else min(los)
        hi = None if any(v is None for v in his) else max(his)
        return lo, hi

    def is_zero(self) -> bool:
        return not self.tails and not np.any(self.block)

    def sample(self, w) -> np.ndarray:
        """Values at circle points ``w``; shape ``(len(w), p, q)``."""
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        out = np.zeros((w.size,) + self.shape, dtype=complex)
        if self.block.shape[0]:
            ks = np.arange(self.lo, self.hi + 1)
            powers = np.power(w[:, None], ks[None, :].astype(float))
            out += np.einsum("mk,kpq->mpq", powers, self.block)
        for t in self.tails:
            out += t.sample(w)
        return out

    def tail_coefficient_bound(self, k: int) -> float:
        """Upper bound for the norm of tail contributions at degree ``k`` (``k != 0``)."""
        total = 0.0
        for t in self.tails:
            lo, hi = t.bounds()
            if (lo is not None and k < lo) or (hi is not None and k > hi):
                continue
            total += t.bound_scale() * t.rule.rate ** abs(k)
        return total

    def __repr__(self) -> str:
        tails = ", ".join(t.rule.kind for t in self.tails)
        return f"MatrixSymbol(shape={self.shape}, degrees=[{self.lo}, {self.hi}], tails=[{tails}])"

    # -- arithmetic
    def __add__(self, other: "MatrixSymbol") -> "MatrixSymbol":
        return add(self, other)

    def __sub__(self, other: "MatrixSymbol") -> "MatrixSymbol":
        return add(self, scale(other, -1.0))

    def __neg__(self) -> "MatrixSymbol":
        return scale(self, -1.0)

    def __mul__(self, other: "MatrixSymbol") -> "MatrixSymbol":
        return mul(self, other)


def _trim(lo: int, block: np.ndarray) -> tuple[int, np.ndarray]:
    if block.shape[0] == 0:
        return 0, block
    nz = np.nonzero(np.any(block != 0, axis=(1, 2)))[0]
    if nz.size == 0:
        return 0, block[:0]
    return lo + int(nz[0]), block[nz[0] : nz[-1] + 1]


def _from_window(lo: int, block: np.ndarray, shape, tails=(), norm_hint=None) -> MatrixSymbol:
    return MatrixSymbol(lo, block, tails, shape=shape, norm_hint=norm_hint, strict=False)


# --------------------------------------------------------------------------
# operations


def coeff(s: MatrixSymbol, k: int) -> np.ndarray:
    return s.coeff(k)


def add(a: MatrixSymbol, b: MatrixSymbol) -> MatrixSymbol:
    if a.shape != b.shape:
        raise SymbolError(f"cannot add symbols of shapes {a.shape} and {b.shape}")
    if not a.block.shape[0]:
        lo, block = b.lo, b.block
    elif not b.block.shape[0]:
        lo, block = a.lo, a.block
    else:
        lo = min(a.lo, b.lo)
        hi = max(a.hi, b.hi)
        block = np.zeros((hi - lo + 1,) + a.shape, dtype=complex)
        block[a.lo - lo : a.hi - lo + 1] += a.block
        block[b.lo - lo : b.hi - lo + 1] += b.block
    return _from_window(lo, block, a.shape, a.tails + b.tails)


def scale(s: MatrixSymbol, c: complex) -> MatrixSymbol:
    tails = tuple(t.with_weight(c * t.weight) for t in s.tails)
    return _from_window(s.lo, c * s.block, s.shape, tails)


def restrict(s: MatrixSymbol, lo: int | None, hi: int | None) -> MatrixSymbol:
    """Keep only degrees in ``[lo, hi]`` (None meaning unbounded)."""
    block = s.block
    blo = s.lo
    if block.shape[0]:
        keep = np.arange(s.lo, s.hi + 1)
        mask = np.ones(keep.shape, dtype=bool)
        if lo is not None:
            mask &= keep >= lo
        if hi is not None:
            mask &= keep <= hi
        block = np.where(mask[:, None, None], block, 0)
    tails = tuple(t.restrict(lo, hi) for t in s.tails)
    return _from_window(blo, block, s.shape, tails, s.norm_hint if lo is None and hi is None else None)


def plus_part(s: MatrixSymbol) -> MatrixSymbol:
    """Degrees ``k >= 0``."""
    return restrict(s, 0, None)


def minus_part(s: MatrixSymbol) -> MatrixSymbol:
    """Degrees ``k < 0``."""
    return restrict(s, None, -1)


def tilde(s: MatrixSymbol) -> MatrixSymbol:
    """``s(conj(w))``: coefficient ``k`` becomes ``s^(-k)``."""
    if s.block.shape[0]:
        lo, block = -s.hi, s.block[::-1]
    else:
        lo, block = 0, s.block
    return _from_window(lo, block, s.shape, tuple(t.tilde() for t in s.tails), s.norm_hint)


def star(s: MatrixSymbol) -> MatrixSymbol:
    """Pointwise adjoint: coefficient ``k`` becomes ``s^(-k)`` conjugate-transposed."""
    shape = (s.shape[1], s.shape[0])
    if s.block.shape[0]:
        lo, block = -s.hi, np.conj(np.transpose(s.block[::-1], (0, 2, 1)))
    else:
        lo, block = 0, np.zeros((0,) + shape, dtype=complex)
    return _from_window(lo, block, shape, tuple(t.star() for t in s.tails), s.norm_hint)


def const_mul(s: MatrixSymbol, A, side: str = "left") -> MatrixSymbol:
    """Multiply every coefficient by the constant matrix ``A`` on the given side."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if side == "left":
        if A.shape[1] != s.shape[0]:
            raise SymbolError(f"cannot left-multiply {s.shape} symbol by {A.shape} matrix")
        shape = (A.shape[0], s.shape[1])
        block = np.einsum("ij,kjl->kil", A, s.block)
        tails = tuple(t.with_weight(A @ t.weight) for t in s.tails)
    elif side == "right":
        if A.shape[0] != s.shape[1]:
            raise SymbolError(f"cannot right-multiply {s.shape} symbol by {A.shape} matrix")
        shape = (s.shape[0], A.shape[1])
        block = np.einsum("kij,jl->kil", s.block, A)
        tails = tuple(t.with_weight(t.weight @ A) for t in s.tails)
    else:
        raise SymbolError(f"side must be 'left' or 'right', got {side!r}")
    return _from_window(s.lo, block, shape, tails)


def truncate(s: MatrixSymbol, lo: int, hi: int) -> MatrixSymbol:
    """Laurent symbol holding the coefficients of ``s`` on degrees ``lo..hi``."""
    return _from_window(lo, s.window(lo, hi), s.shape)


def _convolve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix-coefficient convolution: ``C_k = sum_j A_j B_{k-j}``."""
    la, lb = A.shape[0], B.shape[0]
    if la == 0 or lb == 0:
        return np.zeros((0, A.shape[1], B.shape[2]), dtype=complex)
    if la * lb <= 65536:
        out = np.zeros((la + lb - 1, A.shape[1], B.shape[2]), dtype=complex)
        if la <= lb:
            for j in range(la):
                out[j : j + lb] += np.einsum("pr,krq->kpq", A[j], B)
        else:
            for j in range(lb):
                out[j : j + la] += np.einsum("kpr,rq->kpq", A, B[j])
        return out
    size = scipy.fft.next_fast_len(la + lb - 1)
    fa = np.fft.fft(A, size, axis=0)
    fb = np.fft.fft(B, size, axis=0)
    return np.fft.ifft(np.einsum("kpr,krq->kpq", fa, fb), axis=0)[: la + lb - 1]


def mul(a: MatrixSymbol, b: MatrixSymbol, degree: int | None = None) -> MatrixSymbol:
    """Pointwise product ``a * b`` via the Cauchy product of coefficients.

    Laurent inputs are multiplied exactly.  When either factor has an
    unbounded tail, ``degree`` must be given: both factors are cut to
    ``[-degree, degree]`` and so is the result.
    """
    if a.shape[1] != b.shape[0]:
        raise SymbolError(f"cannot multiply symbols of shapes {a.shape} and {b.shape}")
    shape = (a.shape[0], b.shape[1])
    alo, ahi = a.support_bounds()
    blo, bhi = b.support_bounds()
    bounded = None not in (alo, ahi, blo, bhi)
    if degree is None and not bounded:
        raise SupportOverflow("product of symbols with unbounded support needs a truncation degree")
    if degree is not None:
        D = int(degree)
        alo, ahi = (-D, D) if not bounded else (max(alo, -D), min(ahi, D))
        blo, bhi = (-D, D) if not bounded else (max(blo, -D), min(bhi, D))
    if ahi < alo or bhi < blo:
        return zero_symbol(shape)
    block = _convolve(a.window(alo, ahi), b.window(blo, bhi))
    lo = alo + blo
    out = _from_window(lo, block, shape)
    if degree is not None:
        out = restrict(out, -int(degree), int(degree))
    return out


# --------------------------------------------------------------------------
# harmonic extension


def series_cutoff(const: float, rate: float, x: float, tol: float) -> int:
    """Degree ``D`` with ``const * sum_{k > D} (rate*x)^k <= tol``."""
    q = rate * x
    if q <= 0.0 or const <= 0.0:
        return 0
    if q >= 1.0:
        raise NonConvergence(f"coefficient bound ratio {q:.6g} does not decay")
    target = tol * (1.0 - q) / const
    if target >= 1.0:
        return 0
    return max(0, int(math.ceil(math.log(target) / math.log(q))))


def tail_cutoff(s: MatrixSymbol, x: float, tol: float) -> int:
    """Largest cutoff over the tails so that ``|sum_{|k|>D} s^(k) x^|k|| <= tol``."""
    D = 0
    for t in s.tails:
        span = t.finite_span()
        if span is not None:
            D = max(D, abs(span[0]), abs(span[1]))
            continue
        D = max(D, series_cutoff(t.bound_scale(), t.rule.rate, x, tol / max(1, len(s.tails))))
    return D


def _powers(ks: np.ndarray, z: complex) -> np.ndarray:
    ks = np.asarray(ks)
    out = np.empty(ks.shape, dtype=complex)
    pos = ks >= 0
    out[pos] = z ** ks[pos].astype(float)
    out[~pos] = np.conj(z) ** (-ks[~pos]).astype(float)
    return out


def harmonic_ext(
    s: MatrixSymbol,
    z,
    tol: float = SERIES_TOL,
    method: str = "auto",
) -> np.ndarray:
    """Poisson extension of ``s`` at the disk point ``z``.

    ``method='series'`` sums ``s^(k) z^k`` (k >= 0) and ``s^(k) conj(z)^|k|``
    (k < 0) with a cutoff from the tail bounds; ``'quadrature'`` integrates
    samples against the Poisson kernel with node doubling; ``'auto'`` uses
    the series when the cutoff stays below ``MAX_SERIES_TERMS``.
    """
    z = as_complex_point(z)
    if method not in ("auto", "series", "quadrature"):
        raise SymbolError(f"unknown method {method!r}")
    if method != "quadrature":
        try:
            D = tail_cutoff(s, abs(z), tol)
        except NonConvergence:
            if method == "series":
                raise
            D = None
        if D is not None and D <= MAX_SERIES_TERMS:
            return _series_ext(s, z, D)
        if method == "series":
            raise NonConvergence(f"series cutoff {D} exceeds {MAX_SERIES_TERMS} terms")
    try:
        jumps = any(isinstance(t.rule, HalfIndicatorRule) for t in s.tails)
        val, _ = quadrature.adaptive_poisson(s.sample, z, tol=max(tol, 1e-13), substitute=not jumps)
    except quadrature.QuadratureNonConvergence as exc:
        raise NonConvergence(str(exc)) from exc
    return np.asarray(val).reshape(s.shape)


def _series_ext(s: MatrixSymbol, z: complex, D: int) -> np.ndarray:
    out = np.zeros(s.shape, dtype=complex)
    if s.block.shape[0]:
        ks = np.arange(s.lo, s.hi + 1)
        out += np.einsum("k,kpq->pq", _powers(ks, z), s.block)
    for t in s.tails:
        lo, hi = t.bounds()
        lo = -D if lo is None else max(lo, -D)
        hi = D if hi is None else min(hi, D)
        if hi < lo:
            continue
        ks = np.arange(lo, hi + 1)
        out += np.sum(t.scalar_coeffs(ks) * _powers(ks, z)) * t.weight
    return out


# --------------------------------------------------------------------------
# builders


def _as_matrix(m, n: int | None = None) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim == 0:
        arr = arr * np.eye(n or 1, dtype=complex)
    if arr.ndim != 2:
        raise SymbolError(f"expected a matrix, got array of shape {arr.shape}")
    return arr


def zero_symbol(shape) -> MatrixSymbol:
    if isinstance(shape, int):
        shape = (shape, shape)
    return MatrixSymbol(0, np.zeros((0,) + tuple(shape)), shape=tuple(shape))


def constant(C, n: int | None = None) -> MatrixSymbol:
    C = _as_matrix(C, n)
    return MatrixSymbol(0, C[None], shape=C.shape)


def identity(n: int) -> MatrixSymbol:
    return constant(np.eye(n))


def monomial(k: int, n: int = 1, C=None) -> MatrixSymbol:
    """``C w^k`` (``C`` defaults to the identity)."""
    C = np.eye(n, dtype=complex) if C is None else _as_matrix(C, n)
    return MatrixSymbol(int(k), C[None], shape=C.shape)


def laurent(spec: Mapping[int, object], n: int | None = None, norm_hint: float | None = None) -> MatrixSymbol:
    """Symbol with the given finitely many coefficients ``{k: matrix}``.

    Scalars are promoted to multiples of the ``n x n`` identity.
    """
    if not spec:
        return zero_symbol(n or 1)
    mats = {int(k): v for k, v in spec.items()}
    if n is None:
        for v in mats.values():
            arr = np.asarray(v)
            if arr.ndim == 2:
                n = arr.shape[0]
                break
    mats = {k: _as_matrix(v, n) for k, v in mats.items()}
    shapes = {m.shape for m in mats.values()}
    if len(shapes) != 1:
        raise SymbolError(f"coefficient matrices of different shapes: {sorted(shapes)}")
    shape = shapes.pop()
    lo, hi = min(mats), max(mats)
    block = np.zeros((hi - lo + 1,) + shape, dtype=complex)
    for k, m in mats.items():
        block[k - lo] = m
    return MatrixSymbol(lo, block, shape=shape, norm_hint=norm_hint)


def _check_in_disk(a, what: str) -> complex:
    a = complex(a)
    if not abs(a) < 1.0:
        raise SymbolError(f"{what} must lie in the open unit disk, got {a}")
    return a


def _weight(weight, n: int) -> np.ndarray:
    return _frozen(np.eye(n) if weight is None else _as_matrix(weight, n))


def mobius_phi(z, n: int = 1) -> MatrixSymbol:
    """``(w - z)/(1 - conj(z) w)`` times the ``n x n`` identity."""
    z = _check_in_disk(z, "Mobius parameter")
    if z == 0:
        return monomial(1, n)
    tail = TailTerm(MobiusRule(z), _weight(None, n))
    return MatrixSymbol(0, np.zeros((0, n, n)), (tail,), shape=(n, n), norm_hint=1.0)


def blaschke_conj(a, n: int = 1, weight=None) -> MatrixSymbol:
    """Conjugate of the Blaschke factor ``b_a(w) = (w - a)/(1 - conj(a) w)``.

    Coefficients: degree 0 is ``-conj(a)``, degree ``-m`` is ``(1-|a|^2) a^(m-1)``.
    """
    a = _check_in_disk(a, "Blaschke zero")
    w = _weight(weight, n)
    tail = TailTerm(MobiusRule(a), w, conj=True)
    return MatrixSymbol(0, np.zeros((0,) + w.shape), (tail,), shape=w.shape,
                        norm_hint=float(np.linalg.norm(w, 2)))


def singular_inner_conj(zeta=1.0, mass: float = 1.0, n: int = 1, weight=None) -> MatrixSymbol:
    """Conjugate of ``exp(-mass (zeta + w)/(zeta - w))``, a singular inner function."""
    zeta = complex(zeta)
    if abs(abs(zeta) - 1.0) > 1e-12:
        raise SymbolError(f"singular point must be unimodular, got {zeta}")
    if not mass > 0:
        raise SymbolError(f"point mass must be positive, got {mass}")
    w = _weight(weight, n)
    tail = TailTerm(SingularInnerRule(zeta / abs(zeta), float(mass)), w, conj=True)
    return MatrixSymbol(0, np.zeros((0,) + w.shape), (tail,), shape=w.shape,
                        norm_hint=float(np.linalg.norm(w, 2)))


def half_indicator(n: int = 1, weight=None) -> MatrixSymbol:
    """Indicator of the upper half circle ``0 < theta < pi`` times ``weight``."""
    w = _weight(weight, n)
    tail = TailTerm(HalfIndicatorRule(), w)
    return MatrixSymbol(0, np.zeros((0,) + w.shape), (tail,), shape=w.shape,
                        norm_hint=float(np.linalg.norm(w, 2)))


def geometric(r: float, plus=None, minus=None, n: int | None = None) -> MatrixSymbol:
    """``plus/(1 - r w) + minus * r conj(w)/(1 - r conj(w))``."""
    mats = [m for m in (plus, minus) if m is not None]
    if n is None:
        n = next((np.asarray(m).shape[0] for m in mats if np.ndim(m) == 2), 1)
    tails = []
    shape = (n, n)
    for side, m in (("plus", plus), ("minus", minus)):
        if m is None:
            continue
        wgt = _weight(m, n)
        shape = wgt.shape
        tails.append(TailTerm(GeometricRule(float(r), side), wgt))
    return MatrixSymbol(0, np.zeros((0,) + shape), tuple(tails), shape=shape)


def kernel_kz(z, M: int) -> np.ndarray:
    """First ``M`` Taylor coefficients of the normalized reproducing kernel ``k_z``."""
    z = _check_in_disk(z, "kernel point")
    m = np.arange(int(M))
    return math.sqrt(1.0 - abs(z) ** 2) * np.conj(z) ** m.astype(float)


def random_laurent(
    rng: np.random.Generator,
    n: int,
    degree: int,
    lo: int | None = None,
    hi: int | None = None,
    scale: float = 1.0,
) -> MatrixSymbol:
    """Random complex Gaussian Laurent symbol on degrees ``[lo, hi]`` (default ``[-degree, degree]``)."""
    lo = -degree if lo is None else lo
    hi = degree if hi is None else hi
    size = (hi - lo + 1, n, n)
    block = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) * (scale / math.sqrt(2 * size[0]))
    return MatrixSymbol(lo, block, shape=(n, n))


def sup_norm(s: MatrixSymbol, nodes: int = 4096) -> float:
    """Largest spectral norm over ``nodes`` equispaced circle samples."""
    w = quadrature.circle_nodes(nodes, offset=0.25)
    vals = s.sample(w)
    return float(np.max(np.linalg.norm(vals, ord=2, axis=(1, 2)))) if vals.size else 0.0


def allclose(a: MatrixSymbol, b: MatrixSymbol, lo: int, hi: int, atol: float = 1e-12) -> bool:
    """Coefficientwise comparison on the degree window ``[lo, hi]``."""
    return a.shape == b.shape and np.allclose(a.window(lo, hi), b.window(lo, hi), rtol=0, atol=atol)


# --------------------------------------------------------------------------
# JSON symbol files

_TOP_KEYS = {"n", "terms", "special", "norm_hint"}
_TERM_KEYS = {"k", "re", "im"}
_SPECIAL_KEYS = {
    "blaschke_conj": {"kind", "a", "weight"},
    "singular_inner_conj": {"kind", "zeta", "mass", "weight"},
    "half_indicator": {"kind", "weight"},
    "geometric": {"kind", "r", "plus", "minus"},
}


def _reject_unknown(obj: Mapping, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise SymbolError(f"unknown key(s) {sorted(extra)} in {where}")


def _parse_matrix(obj, n: int, where: str) -> np.ndarray:
    if isinstance(obj, Mapping):
        _reject_unknown(obj, {"re", "im"}, where)
        re = np.asarray(obj.get("re", np.zeros((n, n))), dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        mat = re + 1j * im
    else:
        mat = np.asarray(obj, dtype=complex)
    mat = _as_matrix(mat, n)
    if mat.shape != (n, n):
        raise SymbolError(f"{where}: expected a {n}x{n} matrix, got {mat.shape}")
    return mat


def _parse_complex(v, where: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, Sequence) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, Mapping):
        _reject_unknown(v, {"re", "im"}, where)
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    raise SymbolError(f"{where}: cannot read a complex number from {v!r}")


def symbol_from_json(obj: Mapping) -> MatrixSymbol:
    """Build a symbol from the JSON description ``{"n", "terms", "special"}``."""
    if not isinstance(obj, Mapping):
        raise SymbolError("symbol description must be a JSON object")
    _reject_unknown(obj, _TOP_KEYS, "symbol")
    if "n" not in obj:
        raise SymbolError("symbol description needs the block dimension 'n'")
    n = int(obj["n"])
    if n < 1:
        raise SymbolError(f"block dimension must be positive, got {n}")
    terms = {}
    for i, term in enumerate(obj.get("terms", [])):
        _reject_unknown(term, _TERM_KEYS, f"terms[{i}]")
        if "k" not in term:
            raise SymbolError(f"terms[{i}] lacks the degree 'k'")
        k = int(term["k"])
        mat = _parse_matrix({key: term[key] for key in ("re", "im") if key in term}, n, f"terms[{i}]")
        terms[k] = terms.get(k, 0) + mat
    base = laurent(terms, n=n) if terms else zero_symbol(n)
    special = obj.get("special")
    if special is None:
        out = base
    else:
        kind = special.get("kind")
        if kind not in _SPECIAL_KEYS:
            raise SymbolError(f"unknown special kind {kind!r}")
        _reject_unknown(special, _SPECIAL_KEYS[kind], f"special ({kind})")
        wgt = special.get("weight")
        wgt = None if wgt is None else _parse_matrix(wgt, n, "special.weight")
        if kind == "blaschke_conj":
            tail_sym = blaschke_conj(_parse_complex(special.get("a", 0.0), "special.a"), n, wgt)
        elif kind == "singular_inner_conj":
            tail_sym = singular_inner_conj(
                _parse_complex(special.get("zeta", 1.0), "special.zeta"),
                float(special.get("mass", 1.0)), n, wgt,
            )
        elif kind == "half_indicator":
            tail_sym = half_indicator(n, wgt)
        else:
            plus = special.get("plus")
            minus = special.get("minus")
            tail_sym = geometric(
                float(special["r"]),
                None if plus is None else _parse_matrix(plus, n, "special.plus"),
                None if minus is None else _parse_matrix(minus, n, "special.minus"),
                n,
            )
        out = MatrixSymbol(base.lo, base.block, tail_sym.tails, shape=(n, n), strict=True)
    if "norm_hint" in obj:
        out = MatrixSymbol(out.lo, out.block, out.tails, shape=out.shape,
                           norm_hint=float(obj["norm_hint"]), strict=False)
    return out


def load_symbol(path: str | Path) -> MatrixSymbol:
    with open(path, encoding="utf-8") as fh:
        return symbol_from_json(json.load(fh))


def _matrix_json(m: np.ndarray) -> dict:
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def symbol_to_json(s: MatrixSymbol) -> dict:
    """JSON description of a square symbol whose tails came from the builders."""
    n = s.n
    obj: dict = {"n": n}
    terms = []
    for j, c in enumerate(s.block):
        if np.any(c):
            terms.append({"k": s.lo + j, **_matrix_json(c)})
    if terms:
        obj["terms"] = terms
    if s.tails:
        obj["special"] = _special_json(s.tails)
    if s.norm_hint is not None:
        obj["norm_hint"] = s.norm_hint
    return obj


def _special_json(tails: Iterable[TailTerm]) -> dict:
    tails = list(tails)
    t = tails[0]
    plain = t.lo is None and t.hi is None and not t.reflect
    if isinstance(t.rule, MobiusRule) and len(tails) == 1 and plain and t.conj:
        return {"kind": "blaschke_conj", "a": [t.rule.a.real, t.rule.a.imag], "weight": _matrix_json(t.weight)}
    if isinstance(t.rule, SingularInnerRule) and len(tails) == 1 and plain and t.conj:
        z = complex(t.rule.zeta)
        return {"kind": "singular_inner_conj", "zeta": [z.real, z.imag], "mass": t.rule.mass,
                "weight": _matrix_json(t.weight)}
    if isinstance(t.rule, HalfIndicatorRule) and len(tails) == 1 and plain and not t.conj:
        return {"kind": "half_indicator", "weight": _matrix_json(t.weight)}
    if all(isinstance(u.rule, GeometricRule) and u.lo is None and u.hi is None
           and not u.reflect and not u.conj for u in tails):
        rs = {u.rule.r for u in tails}
        sides = [u.rule.side for u in tails]
        if len(rs) == 1 and len(set(sides)) == len(sides):
            out = {"kind": "geometric", "r": rs.pop()}
            for u in tails:
                out[u.rule.side] = _matrix_json(u.weight)
            return out
    raise SymbolError("symbol tails are not expressible in the JSON format")
