"""Compactness diagnostics for ``H_Phi T_Psi`` along radial paths to the circle.

Everything is expressed through kernel images ``H_F(k_z e_i)``.  For a
symbol ``F`` the coefficients of ``F k_z e_i`` at negative degrees ``m`` are
``C_m e_i`` with

    C_m = sqrt(1-|z|^2) * sum_{l <= m} F^(l) conj(z)^(m-l),

computed by a first-order recursive filter.  The Gram matrix
``sum_m C_m^* C_m`` is the harmonic extension ``|F_- - F_-(z)|^2(z)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.signal
import scipy.special

from . import mobius
from . import operators as ops
from . import symbols as sym
from .hankelness import BoxMatrix, project_box
from .symbols import (
    GeometricRule,
    HalfIndicatorRule,
    MatrixSymbol,
    MobiusRule,
    SingularInnerRule,
)

GRAM_TOL = 1e-15
SLOW_TAIL_TERMS = 2**18
QUANTITIES = ("c1", "c2", "zheng", "gamma1", "gamma2", "omega", "product_kernel")


def policy_N(z) -> int:
    """Section length for diagnostics at ``z``: ``max(64, ceil(12/(1-|z|)))``."""
    return max(64, int(math.ceil(12.0 / (1.0 - abs(complex(z))))))


# --------------------------------------------------------------------------
# kernel images and Gram matrices


def _rule_tail_sq(rule, M: int) -> float:
    """Upper bound for ``sum_{|k| > M} |c(k)|^2``."""
    if isinstance(rule, (MobiusRule, GeometricRule)):
        r = rule.rate
        if r == 0.0:
            return 0.0
        return rule.const**2 * r ** (2 * (M + 1)) / (1.0 - r * r)
    if isinstance(rule, HalfIndicatorRule):
        j0 = (M + 1) // 2
        return 2.0 / math.pi**2 * float(scipy.special.polygamma(1, j0 + 0.5)) / 4.0
    if isinstance(rule, SingularInnerRule):
        c = rule.coeffs(np.arange(0, M + 1))
        return max(0.0, 1.0 - float(np.sum(np.abs(c) ** 2)))
    return math.inf


@dataclass(frozen=True)
class SeriesPlan:
    """How many negative degrees to keep and the resulting error bound in ``l^2``."""

    M: int
    coeff_tail: float  # l^2 norm of the neglected coefficients
    exact: bool


def series_plan(F: MatrixSymbol, tol: float = GRAM_TOL, slow_terms: int = SLOW_TAIL_TERMS,
                minimum: int = 0) -> SeriesPlan:
    lo, _ = F.support_bounds()
    if lo is not None:
        return SeriesPlan(max(minimum, max(0, -lo)), 0.0, True)
    M = max(minimum, -F.lo if F.block.shape[0] else 0)
    for t in F.tails:
        tlo, _ = t.bounds()
        if tlo is not None:
            M = max(M, -tlo)
            continue
        if t.rule.rate < 1.0:
            M = max(M, sym.series_cutoff(t.bound_scale(), t.rule.rate, 1.0, tol) + 1)
        else:
            M = max(M, slow_terms)
    tail_sq = 0.0
    for t in F.tails:
        tlo, _ = t.bounds()
        if tlo is not None and tlo >= -M:
            continue
        tail_sq += float(np.linalg.norm(t.weight, 2)) ** 2 * _rule_tail_sq(t.rule, M)
    return SeriesPlan(M, math.sqrt(tail_sq), False)


def kernel_columns(F: MatrixSymbol, z, M: int) -> np.ndarray:
    """Columns ``H_F(k_z e_i)``, truncated to degrees ``0..M-1``; shape ``(M p, q)``."""
    z = complex(z)
    p, q = F.shape
    if M == 0:
        return np.zeros((0, q), dtype=complex)
    coeffs = F.window(-M, -1)  # ascending degree
    s = math.sqrt(1.0 - abs(z) ** 2)
    C = scipy.signal.lfilter([s], [1.0, -np.conj(z)], coeffs, axis=0)
    return np.ascontiguousarray(C[::-1]).reshape(M * p, q)


@dataclass(frozen=True, eq=False)
class Gram:
    """``|F_- - F_-(z)|^2(z)`` with the columns it came from and an error bound on its trace."""

    matrix: np.ndarray
    columns: np.ndarray
    M: int
    error: float

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


def kernel_gram(F: MatrixSymbol, z, tol: float = GRAM_TOL, slow_terms: int = SLOW_TAIL_TERMS,
                minimum: int = 0) -> Gram:
    z = sym.as_complex_point(z)
    plan = series_plan(F, tol, slow_terms, minimum)
    cols = kernel_columns(F, z, plan.M)
    G = cols.conj().T @ cols
    err = 0.0
    if not plan.exact:
        s = math.sqrt(1.0 - abs(z) ** 2)
        dC = s * plan.coeff_tail / (1.0 - abs(z)) * math.sqrt(F.shape[1])
        tr = math.sqrt(max(0.0, float(np.real(np.trace(G)))))
        err = 2.0 * tr * dC + dC * dC + tol
    return Gram(G, cols, plan.M, err)


def conj_reflect(F: MatrixSymbol) -> MatrixSymbol:
    """``((F_-)~)^*``: the co-analytic symbol whose Hankel operator is ``H_F^*``."""
    return sym.star(sym.tilde(sym.minus_part(F)))


# --------------------------------------------------------------------------
# trace quantities


@dataclass(frozen=True)
class TraceValue:
    value: float
    error: float
    M: int


def c1_trace(phi: MatrixSymbol, psi: MatrixSymbol, z, **kw) -> TraceValue:
    """``trace[ |Phi_- - Phi_-(z)|^2(z) |G - G(zbar)|^2(zbar) ]`` with ``G = ((Psi_-)~)^*``."""
    z = sym.as_complex_point(z)
    gx = kernel_gram(phi, z, **kw)
    gy = kernel_gram(conj_reflect(psi), np.conj(z), **kw)
    val = float(np.real(np.trace(gx.matrix @ gy.matrix)))
    err = gx.error * gy.trace + gy.error * gx.trace + gx.error * gy.error
    return TraceValue(max(val, 0.0) if val > -1e-12 else val, err, max(gx.M, gy.M))


def c2_symbol(phi: MatrixSymbol, psi: MatrixSymbol, z, degree: int | None = None) -> MatrixSymbol:
    """``(Phi_- Psi_+)_- + Phi_- Psi_-(z)``: the symbol whose kernel images are ``H_Phi T_Psi k_z e_i``."""
    z = sym.as_complex_point(z)
    pm = sym.minus_part(phi)
    pp = sym.plus_part(psi)
    psi_z = sym.harmonic_ext(sym.minus_part(psi), z)
    lo_m, _ = pm.support_bounds()
    _, hi_p = pp.support_bounds()
    if degree is None and (lo_m is None or hi_p is None):
        degree = max(SLOW_TAIL_TERMS, policy_N(z))
    if lo_m is not None and hi_p is not None or degree is None:
        prod = sym.mul(pm, pp)
    else:
        prod = _minus_product(pm, pp, degree)
    return sym.minus_part(prod) + sym.const_mul(pm, psi_z, "right")


def _minus_product(a: MatrixSymbol, b: MatrixSymbol, D: int) -> MatrixSymbol:
    """Negative-degree part of ``a b`` on ``[-D, -1]`` for co-analytic ``a`` and analytic ``b``."""
    lo_a, _ = a.support_bounds()
    _, hi_b = b.support_bounds()
    lo = -D if lo_a is None else max(lo_a, -D - (hi_b if hi_b is not None else D))
    A = a.window(lo if lo_a is not None else -2 * D, -1)
    alo = lo if lo_a is not None else -2 * D
    bhi = hi_b if hi_b is not None else 2 * D
    B = b.window(0, bhi)
    block = sym._convolve(A, B)
    out = sym._from_window(alo, block, (a.shape[0], b.shape[1]))
    return sym.restrict(out, -D, -1)


def c2_trace(phi: MatrixSymbol, psi: MatrixSymbol, z, **kw) -> TraceValue:
    """Trace of ``|K - K(z)|^2(z)`` for ``K = (Phi_- Psi_+)_- + Phi_- Psi_-(z)``."""
    g = kernel_gram(c2_symbol(phi, psi, z), z, **kw)
    return TraceValue(g.trace, g.error, g.M)


def zheng_product(phi: MatrixSymbol, psi: MatrixSymbol, z, **kw) -> TraceValue:
    """``|phi_- - phi_-(z)|^2(z) * |psi_- - psi_-(z)|^2(z)`` for scalar symbols."""
    if phi.shape != (1, 1) or psi.shape != (1, 1):
        raise sym.SymbolError("the product criterion applies to scalar symbols")
    a = kernel_gram(phi, z, **kw)
    b = kernel_gram(psi, z, **kw)
    return TraceValue(a.trace * b.trace, a.error * b.trace + b.error * a.trace + a.error * b.error,
                      max(a.M, b.M))


def trace_crosscheck(phi: MatrixSymbol, z, N: int | None = None) -> tuple[float, float]:
    """Series value of ``trace |Phi_- - Phi_-(z)|^2(z)`` and ``||H_Phi H_{conj(phi_zbar)}||_F^2`` from sections."""
    z = sym.as_complex_point(z)
    series = kernel_gram(phi, z).trace
    N = policy_N(z) if N is None else N
    frame = mobius.MobiusFrame(z, N, phi.n)
    prod = ops.hankel_trunc(phi, N) @ frame.hankel_conj_bar
    return series, ops.frob_norm(prod) ** 2


# --------------------------------------------------------------------------
# Gamma infima


def _compress(cols: np.ndarray) -> np.ndarray:
    """``R`` with ``cols = Q R`` (so every spectral norm of ``cols @ B`` equals that of ``R @ B``)."""
    if cols.shape[0] <= cols.shape[1]:
        return cols
    return np.linalg.qr(cols, mode="r")


@dataclass
class GammaProblem:
    """Convex objective ``||Rx(I-A)|| + ||Ry A^*|| (+ ||sum A_pq Z_pq||)`` over the box."""

    Rx: np.ndarray
    Ry: np.ndarray
    Z: np.ndarray | None  # (n, n, k, n) compressed images of Phi E_pq Psi
    d: float

    @property
    def n(self) -> int:
        return self.Rx.shape[1]

    def mats(self, A):
        I = np.eye(self.n)
        out = [self.Rx @ (I - A), self.Ry @ A.conj().T]
        if self.Z is not None:
            out.append(np.einsum("pq,pqkj->kj", A, self.Z))
        return out

    def terms(self, A) -> tuple[float, ...]:
        return tuple(float(np.linalg.norm(M, 2)) if M.size else 0.0 for M in self.mats(A))

    def value(self, A) -> float:
        return float(sum(self.terms(A)))

    def _grads_from_factors(self, A, factors):
        """Assemble the gradient from ``U diag(w) V^H`` factors of each term."""
        F1, F2 = factors[0], factors[1]
        G = -self.Rx.conj().T @ F1 + (self.Ry.conj().T @ F2).conj().T
        if self.Z is not None:
            G = G + np.einsum("pqkj,kj->pq", self.Z.conj(), factors[2])
        return G

    def smooth(self, A, mu: float):
        """``mu log tr exp(D/mu)`` of each term's Hermitian dilation ``D``, with gradient.

        The dilation has eigenvalues ``+-s_i`` and zeros, so the smoothing is
        differentiable even where singular values vanish.
        """
        total = 0.0
        factors = []
        for M in self.mats(A):
            if M.size == 0:
                factors.append(np.zeros_like(M))
                continue
            U, s, Vh = np.linalg.svd(M, full_matrices=False)
            smax = s[0]
            ep = np.exp((s - smax) / mu)
            em = np.exp((-s - smax) / mu)
            zeros = sum(M.shape) - 2 * s.size
            S = float(ep.sum() + em.sum()) + zeros * math.exp(-smax / mu)
            total += smax + mu * math.log(S)
            factors.append((U * ((ep - em) / S)) @ Vh)
        return total, self._grads_from_factors(A, factors)

    def quad(self, A):
        """Half the squared-Frobenius surrogate and its gradient."""
        mats = self.mats(A)
        val = 0.5 * float(sum(np.linalg.norm(M) ** 2 for M in mats))
        return val, self._grads_from_factors(A, mats)


def _fista(prob: GammaProblem, A0, fun, L0: float, iters: int, best):
    d = prob.d
    x = A0
    y = A0
    t = 1.0
    L = max(L0, 1e-12)
    fy, gy = fun(y)
    for _ in range(iters):
        while True:
            xn = project_box(y - gy / L, d)
            fx, gx = fun(xn)
            diff = xn - y
            if fx <= fy + float(np.real(np.vdot(gy, diff))) + 0.5 * L * float(np.vdot(diff, diff).real) + 1e-15:
                break
            L *= 2.0
            if L > 1e16:
                break
        val = prob.value(xn)
        if val < best[0]:
            best[0], best[1] = val, xn
        if val == 0.0:
            break
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = xn + ((t - 1.0) / tn) * (xn - x)
        x, t = xn, tn
        fy, gy = fun(y)
        if np.linalg.norm(diff) <= 1e-14 * max(1.0, np.linalg.norm(xn)):
            break
        L *= 0.9
    return x, L


MU_SCHEDULE = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 1e-6, 1e-7, 1e-8)


def minimize_gamma(prob: GammaProblem, A0: np.ndarray, iters: int = 150) -> tuple[np.ndarray, float]:
    """Two-phase minimization: squared surrogate, then smoothed spectral norms with continuation."""
    A = project_box(np.asarray(A0, dtype=complex), prob.d)
    best = [prob.value(A), A]
    scale = sum(float(np.sum(np.abs(M) ** 2)) for M in (prob.Rx, prob.Ry))
    if prob.Z is not None:
        scale += float(np.sum(np.abs(prob.Z) ** 2))
    if scale == 0.0 or best[0] == 0.0:
        return best[1], best[0]
    A, _ = _fista(prob, A, prob.quad, scale, iters, best)
    A = best[1]
    for mu in MU_SCHEDULE:
        if best[0] == 0.0:
            break
        A, _ = _fista(prob, A, lambda B, mu=mu: prob.smooth(B, mu), math.sqrt(scale) / mu * 0.1, iters, best)
        A = best[1]
    return best[1], best[0]


@dataclass(frozen=True, eq=False)
class GammaResult:
    value: float
    A: BoxMatrix
    terms: tuple[float, ...]
    start_values: tuple[float, ...]
    M: int
    error: float

    @property
    def spread(self) -> float:
        return max(self.start_values) - min(self.start_values)


def default_box(n: int) -> float:
    return float(2 ** (2 * n))


def _starts(n: int, d: float, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    fixed = [np.zeros((n, n), dtype=complex), project_box(np.eye(n, dtype=complex), d),
             project_box(0.5 * np.eye(n, dtype=complex), d)]
    out = fixed[: max(1, min(count, len(fixed)))]
    while len(out) < count:
        R = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        out.append(project_box(R * (min(d, 2.0) / 2.0), d))
    return out


def gamma_problem(phi: MatrixSymbol, psi: MatrixSymbol, z, d: float | None = None, with_product: bool = False,
                  **kw) -> tuple[GammaProblem, int, float]:
    z = sym.as_complex_point(z)
    n = phi.n
    d = default_box(n) if d is None else d
    gx = kernel_gram(phi, z, **kw)
    gy = kernel_gram(conj_reflect(psi), np.conj(z), **kw)
    Rx = _compress(gx.columns)
    Ry = _compress(gy.columns)
    err = gx.error + gy.error
    M = max(gx.M, gy.M)
    Z = None
    if with_product:
        cols = []
        Ms = []
        for p in range(n):
            for q in range(n):
                E = np.zeros((n, n))
                E[p, q] = 1.0
                F = _product_symbol(sym.const_mul(phi, E, "right"), psi, z)
                g = kernel_gram(F, z, **kw)
                cols.append(g.columns)
                Ms.append(g.M)
                err += g.error
        Mz = max(Ms)
        padded = [np.vstack([c, np.zeros((Mz * n - c.shape[0], n), dtype=complex)]) for c in cols]
        stacked = np.hstack(padded)
        if stacked.shape[0] > stacked.shape[1]:
            Q = np.linalg.qr(stacked, mode="reduced")[0]
            comp = [Q.conj().T @ c for c in padded]
        else:
            comp = padded
        Z = np.array(comp).reshape(n, n, comp[0].shape[0], n)
        M = max(M, Mz)
    return GammaProblem(Rx, Ry, Z, d), M, err


def _product_symbol(a: MatrixSymbol, b: MatrixSymbol, z) -> MatrixSymbol:
    bounded = None not in a.support_bounds() + b.support_bounds()
    if bounded:
        return sym.mul(a, b)
    return sym.mul(a, b, max(SLOW_TAIL_TERMS, policy_N(z)))


def _gamma(phi, psi, z, d, with_product, starts, seed, rng, iters, **kw) -> GammaResult:
    prob, M, err = gamma_problem(phi, psi, z, d, with_product, **kw)
    rng = rng if rng is not None else np.random.default_rng(seed)
    vals = []
    best = (math.inf, None)
    for A0 in _starts(prob.n, prob.d, starts, rng):
        A, v = minimize_gamma(prob, A0, iters)
        vals.append(v)
        if v < best[0]:
            best = (v, A)
    A = best[1]
    return GammaResult(best[0], BoxMatrix(A, prob.d), prob.terms(A), tuple(vals), M, err)


def gamma1(phi: MatrixSymbol, psi: MatrixSymbol, z, d: float | None = None, starts: int = 5,
           seed: int = 0, rng: np.random.Generator | None = None, iters: int = 150, **kw) -> GammaResult:
    """``inf_A ||H_{Phi(I-A)} H_{conj(phi_zbar)}|| + ||H_{conj(phi_zbar)} H_{A Psi}||`` over ``|a_ij| <= d``."""
    return _gamma(phi, psi, z, d, False, starts, seed, rng, iters, **kw)


def gamma2(phi: MatrixSymbol, psi: MatrixSymbol, z, d: float | None = None, starts: int = 5,
           seed: int = 0, rng: np.random.Generator | None = None, iters: int = 150, **kw) -> GammaResult:
    """``gamma1`` objective plus ``||H_{Phi A Psi} H_{conj(phi_zbar)}||``."""
    return _gamma(phi, psi, z, d, True, starts, seed, rng, iters, **kw)


def omega_norm(phi: MatrixSymbol, psi: MatrixSymbol, z, **kw) -> float:
    """``||sum_i H_Phi(k_z e_i) (x) H_Psi^*(k_zbar e_i)||``."""
    z = sym.as_complex_point(z)
    X = kernel_gram(phi, z, **kw).columns
    Y = kernel_gram(conj_reflect(psi), np.conj(z), **kw).columns
    if X.shape[0] == 0 or Y.shape[0] == 0:
        return 0.0
    Rx = _compress(X)
    Ry = _compress(Y)
    return float(np.linalg.norm(Rx @ Ry.conj().T, 2))


def product_kernel_norm(phi: MatrixSymbol, psi: MatrixSymbol, z, **kw) -> float:
    """``||sum_i (H_Phi T_Psi)(k_z e_i) (x) k_zbar e_i||``."""
    z = sym.as_complex_point(z)
    P = kernel_gram(c2_symbol(phi, psi, z), z, **kw).columns
    if P.shape[0] == 0:
        return 0.0
    return float(np.linalg.norm(_compress(P), 2))


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepGrid:
    """Rays ``theta`` and increasing radii; each pair gives ``z = r e^{i theta}``."""

    rays: tuple[float, ...]
    radii: tuple[float, ...]

    def __post_init__(self):
        rays = tuple(float(t) for t in self.rays)
        radii = tuple(float(r) for r in self.radii)
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be strictly increasing")
        for r in radii:
            if not 0.0 <= r < 1.0 - sym.EPS_BOUNDARY:
                raise ValueError(f"radius {r} outside [0, 1 - {sym.EPS_BOUNDARY:g})")
        object.__setattr__(self, "rays", rays)
        object.__setattr__(self, "radii", radii)

    def points(self) -> list[tuple[int, int, float, float]]:
        return [(i, j, t, r) for i, t in enumerate(self.rays) for j, r in enumerate(self.radii)]


@dataclass
class DiagnosticRow:
    theta: float
    r: float
    c1: float = math.nan
    c2: float = math.nan
    zheng: float = math.nan
    gamma1: float = math.nan
    gamma2: float = math.nan
    omega_norm: float = math.nan
    product_kernel_norm: float = math.nan
    N: int = 0
    tail_bound: float = 0.0
    argmin_gamma1: np.ndarray | None = None
    argmin_gamma2: np.ndarray | None = None
    error: str | None = None

    CSV_FIELDS = ("theta", "r", "c1", "c2", "zheng", "gamma1", "gamma2", "omega_norm",
                  "product_kernel_norm", "N", "tail_bound")

    def csv_values(self) -> list:
        return [getattr(self, f) for f in self.CSV_FIELDS]


FIELD_OF = {"c1": "c1", "c2": "c2", "zheng": "zheng", "gamma1": "gamma1", "gamma2": "gamma2",
            "omega": "omega_norm", "product_kernel": "product_kernel_norm"}


@dataclass
class DiagnosticReport:
    rows: list[DiagnosticRow]
    which: tuple[str, ...]
    trends: dict = field(default_factory=dict)

    @property
    def failures(self) -> list[DiagnosticRow]:
        return [r for r in self.rows if r.error is not None]

    def series(self, theta: float, quantity: str) -> tuple[np.ndarray, np.ndarray]:
        attr = FIELD_OF[quantity]
        rows = [r for r in self.rows if r.theta == theta]
        return np.array([r.r for r in rows]), np.array([getattr(r, attr) for r in rows])

    def summary(self) -> dict:
        out = {"points": len(self.rows), "failures": len(self.failures), "which": list(self.which),
               "rays": []}
        for theta, stats in self.trends.items():
            out["rays"].append({"theta": theta, **stats})
        return out


def _trend(r: np.ndarray, v: np.ndarray) -> dict:
    ok = np.isfinite(v)
    r, v = r[ok], v[ok]
    if r.size == 0:
        return {"slope": math.nan, "last": math.nan, "max": math.nan, "decreasing": False}
    slope = float(np.polyfit(r, v, 1)[0]) if r.size >= 2 else 0.0
    return {
        "slope": slope,
        "last": float(v[-1]),
        "max": float(v.max()),
        "decreasing": bool(np.all(np.diff(v) <= 1e-15 * max(1.0, float(np.abs(v).max())))),
    }


def evaluate_point(phi, psi, theta: float, r: float, which: Sequence[str], d: float | None,
                   rng: np.random.Generator, starts: int = 5) -> DiagnosticRow:
    z = sym.DiskPoint.polar(r, theta)
    row = DiagnosticRow(theta, r)
    kw = {"minimum": policy_N(z)}
    Ns = [0]
    bounds = [0.0]
    try:
        if "c1" in which:
            tv = c1_trace(phi, psi, z, **kw)
            row.c1, Ns, bounds = tv.value, Ns + [tv.M], bounds + [tv.error]
        if "c2" in which:
            tv = c2_trace(phi, psi, z, **kw)
            row.c2, Ns, bounds = tv.value, Ns + [tv.M], bounds + [tv.error]
        if "zheng" in which:
            if phi.shape == (1, 1):
                tv = zheng_product(phi, psi, z, **kw)
                row.zheng, Ns, bounds = tv.value, Ns + [tv.M], bounds + [tv.error]
        if "gamma1" in which:
            g = gamma1(phi, psi, z, d, starts=starts, rng=rng, **kw)
            row.gamma1, row.argmin_gamma1 = g.value, g.A.A
            Ns, bounds = Ns + [g.M], bounds + [g.error]
        if "gamma2" in which:
            g = gamma2(phi, psi, z, d, starts=starts, rng=rng, **kw)
            row.gamma2, row.argmin_gamma2 = g.value, g.A.A
            Ns, bounds = Ns + [g.M], bounds + [g.error]
        if "omega" in which:
            row.omega_norm = omega_norm(phi, psi, z, **kw)
        if "product_kernel" in which:
            row.product_kernel_norm = product_kernel_norm(phi, psi, z, **kw)
    except Exception as exc:  # recorded per point; the sweep goes on
        row.error = f"{type(exc).__name__}: {exc}"
    row.N = int(max(Ns))
    row.tail_bound = float(max(bounds))
    return row


def default_workers() -> int:
    env = os.environ.get("HAPLITZ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def radial_sweep(
    phi: MatrixSymbol,
    psi: MatrixSymbol,
    grid: SweepGrid,
    which: Iterable[str] = QUANTITIES,
    d: float | None = None,
    seed: int = 0,
    workers: int | None = None,
    starts: int = 5,
) -> DiagnosticReport:
    """Evaluate the requested quantities on every grid point, in ``(theta, r)`` order.

    Each point draws optimizer starts from its own generator seeded by
    ``(seed, ray index, radius index)``, so results do not depend on the
    number of worker threads.
    """
    unknown = set(which) - set(QUANTITIES)
    if unknown:
        raise ValueError(f"unknown quantities {sorted(unknown)}")
    which = tuple(w for w in QUANTITIES if w in set(which))
    if not which:
        return DiagnosticReport([], which, {})
    pts = grid.points()
    workers = default_workers() if workers is None else max(1, workers)

    def task(p):
        i, j, theta, r = p
        rng = np.random.default_rng([seed, i, j])
        return evaluate_point(phi, psi, theta, r, which, d, rng, starts)

    if workers == 1:
        rows = [task(p) for p in pts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, pts))
    rows.sort(key=lambda row: (row.theta, row.r))
    trends = {}
    for theta in grid.rays:
        trends[theta] = {}
        for q in which:
            rr, vv = DiagnosticReport(rows, which).series(theta, q)
            trends[theta][q] = _trend(rr, vv)
    return DiagnosticReport(rows, which, trends)


# --------------------------------------------------------------------------
# embedding scalar sums


def embed_sum(pairs: Sequence[tuple[MatrixSymbol, MatrixSymbol]], n: int | None = None
              ) -> tuple[MatrixSymbol, MatrixSymbol]:
    """Place ``phi_i`` along the first row of ``Phi`` and ``psi_i`` down the first column of ``Psi``.

    Then the ``(0, 0)`` scalar block of ``H_Phi T_Psi`` is ``sum_i H_{phi_i} T_{psi_i}``.
    """
    n = len(pairs) if n is None else n
    if len(pairs) > n or not pairs:
        raise ValueError(f"need between 1 and {n} pairs, got {len(pairs)}")
    Phi = sym.zero_symbol(n)
    Psi = sym.zero_symbol(n)
    e = np.eye(n)
    for i, (f, g) in enumerate(pairs):
        if f.shape != (1, 1) or g.shape != (1, 1):
            raise sym.SymbolError("embed_sum takes scalar symbols")
        Phi = Phi + sym.const_mul(sym.const_mul(f, e[:, :1], "left"), e[i : i + 1], "right")
        Psi = Psi + sym.const_mul(sym.const_mul(g, e[:, i : i + 1], "left"), e[:1], "right")
    return Phi, Psi
