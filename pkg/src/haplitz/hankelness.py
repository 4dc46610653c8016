"""Deciding when ``H_Phi T_Psi`` is a block Hankel operator.

The product is Hankel exactly when some constant matrix ``A`` makes both
``Phi (I - A)`` and ``A Psi`` analytic; then ``H_Phi T_Psi = H_{Phi A Psi}``.
With ``X`` stacking the coefficients ``Phi^(-k)`` vertically and ``Y``
stacking ``Psi^(-k)`` horizontally (``k = 1..cap``), the conditions read
``X (I - A) = 0`` and ``A Y = 0``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import operators as ops
from . import symbols as sym
from .symbols import MatrixSymbol

BOX_SLACK = 1e-12
DEFAULT_TAIL_CAP = 64


class HankelnessError(ValueError):
    """Invalid input to a decomposition routine; ``code`` names the reason."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True, eq=False)
class BoxMatrix:
    """An ``n x n`` complex matrix with every entry of modulus at most ``d``."""

    A: np.ndarray
    d: float

    def __post_init__(self):
        A = np.array(self.A, dtype=complex, copy=True)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"box matrix must be square, got shape {A.shape}")
        if not self.d > 0:
            raise ValueError(f"box bound must be positive, got {self.d}")
        excess = float(np.max(np.abs(A))) - self.d if A.size else -1.0
        if excess > BOX_SLACK * max(1.0, self.d):
            raise ValueError(f"entry modulus exceeds the bound {self.d} by {excess:.3e}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.A.shape[0]


def project_box(A: np.ndarray, d: float) -> np.ndarray:
    """Entrywise radial projection onto ``|a_ij| <= d``."""
    mod = np.abs(A)
    factor = np.where(mod > d, d / np.where(mod > 0, mod, 1.0), 1.0)
    return A * factor


# --------------------------------------------------------------------------
# coefficient stacks


def negative_cap(s: MatrixSymbol, degree_cap: int | None) -> tuple[int, float]:
    """Number of negative degrees to examine and a bound on the neglected mass."""
    lo, _ = s.support_bounds()
    if lo is not None:
        exact = max(0, -lo)
        if degree_cap is None or degree_cap >= exact:
            return exact, 0.0
        cap = degree_cap
    else:
        cap = DEFAULT_TAIL_CAP if degree_cap is None else degree_cap
    mass = 0.0
    for t in s.tails:
        tlo, _ = t.bounds()
        if tlo is not None and tlo > -cap - 1:
            continue
        r = t.rule.rate
        scale = t.bound_scale()
        mass += scale * (r ** (cap + 1) / (1.0 - r) if r < 1.0 else math.inf)
    if s.block.shape[0] and s.lo < -cap:
        mass += float(np.sum(np.linalg.norm(s.window(s.lo, -cap - 1), axis=(1, 2))))
    return cap, mass


def stack_X(phi: MatrixSymbol, cap: int) -> np.ndarray:
    """``[Phi^(-1); Phi^(-2); ...; Phi^(-cap)]`` of shape ``(cap n, n)``."""
    n = phi.n
    if cap == 0:
        return np.zeros((0, n), dtype=complex)
    return phi.coeffs(-np.arange(1, cap + 1)).reshape(cap * n, n)


def stack_Y(psi: MatrixSymbol, cap: int) -> np.ndarray:
    """``[Psi^(-1), ..., Psi^(-cap)]`` of shape ``(n, cap n)``."""
    n = psi.n
    if cap == 0:
        return np.zeros((n, 0), dtype=complex)
    return np.concatenate(list(psi.coeffs(-np.arange(1, cap + 1))), axis=1)


# --------------------------------------------------------------------------
# feasibility


@dataclass(frozen=True, eq=False)
class Feasible:
    A: BoxMatrix
    residual_x: float
    residual_y: float
    threshold: float
    route: str
    note: str = ""
    truncated_mass: float = 0.0

    @property
    def verdict(self) -> str:
        return "HANKEL"


@dataclass(frozen=True, eq=False)
class Infeasible:
    """No box matrix annihilates both stacks.

    ``margin`` is a certified lower bound for the minimum of
    ``||X(I-A)||_F^2 + ||AY||_F^2`` over the box (objective value minus the
    Frank-Wolfe duality gap); ``attained`` is the best value found.
    """

    margin: float
    attained: float
    A_best: np.ndarray
    gap: float
    iterations: int
    note: str = ""
    truncated_mass: float = 0.0

    @property
    def verdict(self) -> str:
        return "NOT-HANKEL"


@dataclass
class _Quadratic:
    """``f(A) = ||X(I-A)||_F^2 + ||AY||_F^2`` with cached Gram matrices."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.G = self.X.conj().T @ self.X
        self.K = self.Y @ self.Y.conj().T
        self.L = float(np.linalg.eigvalsh(self.G)[-1] if self.G.size else 0.0) + float(
            np.linalg.eigvalsh(self.K)[-1] if self.K.size else 0.0
        )

    def value(self, A):
        n = A.shape[0]
        R1 = self.X @ (np.eye(n) - A)
        R2 = A @ self.Y
        return float(np.linalg.norm(R1) ** 2 + np.linalg.norm(R2) ** 2)

    def grad(self, A):
        """Half the real gradient: ``G (A - I) + A K``."""
        n = A.shape[0]
        return self.G @ (A - np.eye(n)) + A @ self.K

    def curvature(self, D):
        return float(np.linalg.norm(self.X @ D) ** 2 + np.linalg.norm(D @ self.Y) ** 2)


def _fw_gap(q: _Quadratic, A: np.ndarray, g: np.ndarray, d: float) -> float:
    # min over the box of <grad, B> is attained at B = -d g/|g|
    return 2.0 * (float(np.real(np.vdot(g, A))) + d * float(np.sum(np.abs(g))))


def minimize_box_quadratic(q: _Quadratic, A0: np.ndarray, d: float, target: float = 0.0,
                           max_iter: int = 20000, gap_tol: float = 1e-15):
    """Projected gradient with exact line search on the box.

    Stops when the objective drops below ``target``, the duality gap is
    negligible, or ``max_iter`` is reached.  Returns ``(A, f, gap, iterations)``.
    """
    A = project_box(A0, d)
    f = q.value(A)
    L = max(q.L, 1e-300)
    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = q.grad(A)
        gap = _fw_gap(q, A, g, d)
        if f <= target or gap <= gap_tol * max(1.0, f):
            break
        D = project_box(A - g / L, d) - A
        curv = q.curvature(D)
        slope = float(np.real(np.vdot(g, D)))
        if curv <= 0.0 or slope >= 0.0:
            break
        t = min(1.0, -slope / curv)
        A = A + t * D
        f_new = q.value(A)
        if f - f_new <= 1e-16 * max(f, 1e-300) and it > 50:
            f = f_new
            g = q.grad(A)
            gap = _fw_gap(q, A, g, d)
            break
        f = f_new
    return A, f, gap, it


def _linear_solution(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Least-squares minimal-norm solution of ``X A = X``, ``A Y = 0``."""
    n = X.shape[1]
    I = np.eye(n)
    # vec(XA) = (I kron X) vec(A); vec(AY) = (Y^T kron I) vec(A)  (column-major vec)
    M = np.vstack([np.kron(I, X), np.kron(Y.T, I)])
    rhs = np.concatenate([X.reshape(-1, order="F"), np.zeros(Y.size, dtype=complex)])
    if M.shape[0] == 0:
        return np.zeros((n, n), dtype=complex)
    sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return sol.reshape(n, n, order="F")


def find_feasible_A(
    phi: MatrixSymbol,
    psi: MatrixSymbol,
    d: float = 1.0,
    degree_cap: int | None = None,
    rtol: float = 1e-9,
    max_iter: int = 20000,
) -> Feasible | Infeasible:
    """Search the box ``|a_ij| <= d`` for ``A`` with ``Phi(I-A)`` and ``A Psi`` analytic.

    Candidates are tried in order: the minimal-norm solution of the linear
    constraints, the rank-one certificate of :func:`xy_certificate` (when
    ``d >= 1``), then projected gradient from the best candidate.
    """
    if phi.n != psi.n:
        raise ValueError(f"block sizes differ: {phi.n} vs {psi.n}")
    n = phi.n
    cap_x, mass_x = negative_cap(phi, degree_cap)
    cap_y, mass_y = negative_cap(psi, degree_cap)
    cap = max(cap_x, cap_y)
    mass = mass_x + mass_y
    X = stack_X(phi, cap)
    Y = stack_Y(psi, cap)
    nx, ny = np.linalg.norm(X, 2) if X.size else 0.0, np.linalg.norm(Y, 2) if Y.size else 0.0
    thr = rtol * (1.0 + nx + ny)
    I = np.eye(n, dtype=complex)

    def residuals(A):
        rx = float(np.linalg.norm(X @ (I - A))) if X.size else 0.0
        ry = float(np.linalg.norm(A @ Y)) if Y.size else 0.0
        return rx, ry

    def accept(A, route, note=""):
        rx, ry = residuals(A)
        if rx <= thr and ry <= thr and np.max(np.abs(A)) <= d * (1 + BOX_SLACK) + BOX_SLACK:
            A = project_box(A, d)
            return Feasible(BoxMatrix(A, d), rx, ry, thr, route, note, mass)
        return None

    if nx == 0.0 and ny == 0.0:
        return Feasible(BoxMatrix(np.zeros((n, n)), d), 0.0, 0.0, thr, "degenerate",
                        "both coefficient stacks vanish; A = 0", mass)
    if nx == 0.0:
        return Feasible(BoxMatrix(np.zeros((n, n)), d), 0.0, residuals(np.zeros((n, n)))[1], thr,
                        "analytic-phi", "Phi is analytic", mass)
    if ny == 0.0 and d >= 1.0:
        return Feasible(BoxMatrix(I, d), 0.0, 0.0, thr, "analytic-psi", "Psi is analytic", mass)

    starts = []
    A_ls = _linear_solution(X, Y)
    found = accept(A_ls, "linear")
    if found:
        return found
    starts.append(A_ls)
    if d >= 1.0:
        cert = xy_certificate(list(X.T), list(Y.conj()), tol=rtol)
        if isinstance(cert, XYCertificate):
            found = accept(cert.A.A, f"rank-one-{cert.route}")
            if found:
                return found
            starts.append(cert.A.A)
    starts.extend([np.zeros((n, n), dtype=complex), project_box(I, d)])

    q = _Quadratic(X, Y)
    best = min((project_box(A, d) for A in starts), key=q.value)
    A, f, gap, it = minimize_box_quadratic(q, best, d, target=0.25 * thr * thr, max_iter=max_iter)
    found = accept(A, "projected-gradient")
    if found:
        return found
    margin = max(0.0, f - max(gap, 0.0))
    return Infeasible(margin, f, A, gap, it, "minimum of the residual functional is positive", mass)


# --------------------------------------------------------------------------
# rank-one certificate


@dataclass(frozen=True, eq=False)
class XYCertificate:
    """``A`` in the unit box with ``x (I - A) = 0`` and ``y A^* = 0``."""

    sigma: tuple[int, ...]
    A: BoxMatrix
    route: str
    residual_x: float
    residual_y: float


@dataclass(frozen=True)
class Failure:
    code: str
    message: str
    frob_norm: float = 0.0


def _columns(vs: Sequence) -> np.ndarray:
    if not len(vs):
        return np.zeros((0, 0), dtype=complex)
    return np.column_stack([np.asarray(v, dtype=complex).ravel() for v in vs])


def _xy_recursion(x: np.ndarray, y: np.ndarray, tol: float, order: list[int]) -> np.ndarray:
    """Pivot on the longest ``y_j``, split it off and recurse on the rest."""
    n = x.shape[1]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    norms = np.linalg.norm(y, axis=0)
    j = int(np.argmax(norms))  # first maximizer on ties
    if norms[j] <= tol:
        return np.eye(n, dtype=complex)
    order.append(j)
    yj = y[:, j]
    a = (y.conj().T @ yj) / np.vdot(yj, yj)  # a_i = <y_j, y_i>/<y_j, y_j> conjugated
    rest = [i for i in range(n) if i != j]
    y_red = y[:, rest] - np.outer(yj, a[rest].conj())
    sub_order: list[int] = []
    A1 = _xy_recursion(x[:, rest], y_red, tol, sub_order)
    order.extend(rest[i] for i in sub_order)
    A = np.zeros((n, n), dtype=complex)
    A[np.ix_(rest, rest)] = A1
    A[rest, j] = -(A1 @ a[rest])
    return A


def _max_volume_basis(x: np.ndarray, r: int) -> tuple[list[int], np.ndarray]:
    """Columns of ``x`` spanning its range with all expansion coefficients of modulus <= 1.

    Starts from a pivoted QR choice and swaps columns while some coefficient
    exceeds one; each swap multiplies the basis volume by that coefficient.
    """
    n = x.shape[1]
    _, _, piv = scipy.linalg.qr(x, pivoting=True, mode="economic")
    basis = [int(i) for i in piv[:r]]
    for _ in range(10 * n * n + 100):
        coef = np.linalg.lstsq(x[:, basis], x, rcond=None)[0]  # (r, n)
        k, c = np.unravel_index(int(np.argmax(np.abs(coef))), coef.shape)
        if abs(coef[k, c]) <= 1.0 + 1e-13:
            break
        basis[k] = int(c)
    coef = np.linalg.lstsq(x[:, basis], x, rcond=None)[0]
    return basis, coef


def _xy_max_volume(x: np.ndarray, tol: float) -> tuple[np.ndarray, list[int]]:
    n = x.shape[1]
    sv = np.linalg.svd(x, compute_uv=False) if x.size else np.zeros(0)
    r = int(np.sum(sv > tol))
    if r == 0:
        return np.zeros((n, n), dtype=complex), list(range(n))
    if r == n:
        return np.eye(n, dtype=complex), list(range(n))
    basis, coef = _max_volume_basis(x, r)
    dep = [i for i in range(n) if i not in basis]
    A = np.zeros((n, n), dtype=complex)
    A[:, basis] = np.eye(n, dtype=complex)[:, basis]
    for c in dep:
        A[basis, c] = coef[:, c]
    return A, dep + basis


def xy_certificate(xs: Sequence, ys: Sequence, tol: float = 1e-10) -> XYCertificate | Failure:
    """Given ``sum_i x_i (x) y_i = 0``, find ``A`` with ``|a_ij| <= 1``, ``x(I-A) = 0``, ``yA^* = 0``.

    Here ``x`` and ``y`` are the matrices with columns ``x_i`` and ``y_i``.
    The pivoting recursion on the longest ``y_j`` is tried first.  When its
    output leaves the unit box, the matrix is rebuilt from a maximal-volume
    column basis of ``x``: ``I - A`` is then the projection onto the kernel
    of ``x`` along the basis coordinates, whose coefficients are ratios of
    volumes and hence bounded by one.
    """
    x = _columns(xs)
    y = _columns(ys)
    if x.shape[1] != y.shape[1]:
        raise ValueError("xs and ys must have the same number of vectors")
    n = x.shape[1]
    scale = max(1.0, float(np.linalg.norm(x)) * float(np.linalg.norm(y)))
    S = x @ y.conj().T
    frob = float(np.linalg.norm(S))
    if frob > tol * scale:
        return Failure("nonzero_sum", f"rank-one sum has Frobenius norm {frob:.3e}", frob)
    xtol = tol * max(1.0, float(np.linalg.norm(x)))
    ytol = tol * max(1.0, float(np.linalg.norm(y)))
    I = np.eye(n, dtype=complex)

    def residual(A):
        return float(np.linalg.norm(x @ (I - A))), float(np.linalg.norm(y @ A.conj().T))

    def ok(A):
        rx, ry = residual(A)
        box = float(np.max(np.abs(A))) if n else 0.0
        return rx <= 10 * xtol * max(1.0, n) and ry <= 10 * ytol * max(1.0, n) and box <= 1.0 + BOX_SLACK

    if float(np.linalg.norm(y)) <= ytol:
        return XYCertificate(tuple(range(n)), BoxMatrix(I, 1.0), "y-vanishes", *residual(I))
    if float(np.linalg.norm(x)) <= xtol:
        Z = np.zeros((n, n), dtype=complex)
        return XYCertificate(tuple(range(n)), BoxMatrix(Z, 1.0), "x-vanishes", *residual(Z))
    order: list[int] = []
    A = _xy_recursion(x, y, ytol, order)
    if ok(A):
        sigma = tuple(order) + tuple(i for i in range(n) if i not in order)
        return XYCertificate(sigma, BoxMatrix(A, 1.0), "recursion", *residual(A))
    A, sigma = _xy_max_volume(x, xtol)
    if not ok(A):
        rx, ry = residual(A)
        return Failure("not_certified", f"residuals {rx:.3e}, {ry:.3e} after basis construction", frob)
    return XYCertificate(tuple(sigma), BoxMatrix(project_box(A, 1.0), 1.0), "max-volume", *residual(A))


# --------------------------------------------------------------------------
# bounded basis extraction


@dataclass(frozen=True, eq=False)
class BasisExtraction:
    """``x_dep = x_basis @ B`` with ``dep = sigma[:n-r]`` and ``basis = sigma[n-r:]``."""

    sigma: tuple[int, ...]
    B: np.ndarray
    L: np.ndarray
    B_raw: np.ndarray
    rank: int

    @property
    def dependent(self) -> tuple[int, ...]:
        return self.sigma[: len(self.sigma) - self.rank]

    @property
    def basis(self) -> tuple[int, ...]:
        return self.sigma[len(self.sigma) - self.rank :]


def _extract(x: np.ndarray, r: int, idx: list[int]):
    """Recursive pivot elimination returning ``(sigma, M)`` with ``x_sigma M = 0``."""
    n = x.shape[1]
    _, _, vh = np.linalg.svd(x)
    c = vh[-1].conj()  # null vector (smallest singular direction)
    j = int(np.argmax(np.abs(c)))
    c = c / c[j]
    rest = [i for i in range(n) if i != j]
    if n - 1 == r:
        sigma = [idx[j]] + [idx[i] for i in rest]
        M = np.concatenate([[1.0 + 0j], c[rest]])[:, None]
        return sigma, M
    sub_sigma, M1 = _extract(x[:, rest], r, [idx[i] for i in rest])
    pos = {g: k for k, g in enumerate(idx)}
    b = np.array([c[pos[g]] for g in sub_sigma])
    M = np.zeros((n, n - r), dtype=complex)
    M[0, 0] = 1.0
    M[1:, 0] = b
    M[1:, 1:] = M1
    return [idx[j]] + sub_sigma, M


def bounded_basis_extraction(xs: Sequence, tol: float = 1e-10) -> BasisExtraction:
    """Express dependent vectors over a basis with coefficients at most ``2^(2n)``.

    Each step takes a null vector, scales its largest entry to one and
    removes that vector; the collected coefficients form a unit lower
    triangular ``L`` and a matrix ``B_raw`` (all entries of modulus <= 1)
    with ``x_dep L + x_basis B_raw = 0``.
    """
    x = _columns(xs)
    n = x.shape[1]
    sv = np.linalg.svd(x, compute_uv=False) if x.size else np.zeros(0)
    if sv.size == 0 or sv[0] <= tol:
        raise HankelnessError("zero_family", "all vectors vanish at the given tolerance")
    r = int(np.sum(sv > tol * max(1.0, sv[0])))
    if r >= n:
        raise HankelnessError("full_rank", f"the {n} vectors are linearly independent")
    sigma, M = _extract(x, r, list(range(n)))
    L = M[: n - r]
    B_raw = M[n - r :]
    B = -scipy.linalg.solve_triangular(L.T, B_raw.T, lower=False, unit_diagonal=True).T
    return BasisExtraction(tuple(sigma), B, L, B_raw, r)


# --------------------------------------------------------------------------
# structured decomposition


@dataclass(frozen=True, eq=False)
class HuwDecomposition:
    """``Phi = [U1, W2] D`` and ``Psi = D^{-1} [W1; U2]`` with ``W1``, ``W2`` analytic.

    ``U1``/``W1`` are ``None`` when ``l = 0`` and ``W2``/``U2`` are ``None``
    when ``l = n``.  ``H_Phi T_Psi = H_{U1 W1}``.
    """

    D: np.ndarray
    l: int
    U1: MatrixSymbol | None
    W2: MatrixSymbol | None
    W1: MatrixSymbol | None
    U2: MatrixSymbol | None
    condition: float
    A: Feasible
    discarded: float = 0.0

    @property
    def n(self) -> int:
        return self.D.shape[0]

    def product_symbol(self, degree: int | None = None) -> MatrixSymbol:
        """``U1 W1`` (the zero symbol when ``l = 0``)."""
        if self.l == 0:
            return sym.zero_symbol(self.n)
        return sym.mul(self.U1, self.W1, degree)

    def reassemble(self, degree: int | None = None) -> tuple[MatrixSymbol, MatrixSymbol]:
        n = self.n
        Dinv = np.linalg.inv(self.D)
        parts_phi = []
        parts_psi = []
        if self.l:
            parts_phi.append(sym.const_mul(self.U1, self.D[: self.l], "right"))
            parts_psi.append(sym.const_mul(self.W1, Dinv[:, : self.l], "left"))
        if self.l < n:
            parts_phi.append(sym.const_mul(self.W2, self.D[self.l :], "right"))
            parts_psi.append(sym.const_mul(self.U2, Dinv[:, self.l :], "left"))
        phi = parts_phi[0]
        for p in parts_phi[1:]:
            phi = phi + p
        psi = parts_psi[0]
        for p in parts_psi[1:]:
            psi = psi + p
        return phi, psi


def huw_decompose(
    phi: MatrixSymbol,
    psi: MatrixSymbol,
    degree_cap: int | None = None,
    d: float | None = None,
    tol: float = 1e-9,
) -> HuwDecomposition | Infeasible:
    """Split ``Phi`` and ``Psi`` so that the product reduces to ``H_{U1 W1}``.

    ``D`` is unitary: its first ``l`` rows span the row space of the
    coefficient stack ``X`` and the rest span the kernel of ``X``.
    """
    n = phi.n
    d = float(2 ** (2 * n)) if d is None else d
    feas = find_feasible_A(phi, psi, d, degree_cap)
    if isinstance(feas, Infeasible):
        return feas
    cap_x, _ = negative_cap(phi, degree_cap)
    cap_y, _ = negative_cap(psi, degree_cap)
    X = stack_X(phi, max(cap_x, cap_y))
    if X.size:
        _, s, vh = np.linalg.svd(X)
        l = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    else:
        vh = np.eye(n, dtype=complex)
        l = 0
    Qr = vh[:l].conj().T  # n x l, orthonormal basis of the row space of X
    Qn = vh[l:].conj().T  # n x (n-l), kernel of X
    D = np.vstack([Qr.conj().T, Qn.conj().T])
    discarded = 0.0
    U1 = W1 = W2 = U2 = None
    if l:
        U1 = sym.const_mul(phi, Qr, "right")
        W1_full = sym.const_mul(psi, Qr.conj().T, "left")
        discarded += _negative_mass(W1_full, degree_cap)
        W1 = sym.plus_part(W1_full)
    if l < n:
        W2_full = sym.const_mul(phi, Qn, "right")
        discarded += _negative_mass(W2_full, degree_cap)
        W2 = sym.plus_part(W2_full)
        U2 = sym.const_mul(psi, Qn.conj().T, "left")
    return HuwDecomposition(D, l, U1, W2, W1, U2, float(np.linalg.cond(D)), feas, discarded)


def _negative_mass(s: MatrixSymbol, degree_cap: int | None) -> float:
    cap, _ = negative_cap(s, degree_cap)
    if cap == 0:
        return 0.0
    return float(np.max(np.abs(s.window(-cap, -1))))


def random_huw_instance(rng: np.random.Generator, n: int, l: int | None = None, degree: int = 3):
    """Random ``(Phi, Psi)`` of the form ``[U1, W2] D``, ``D^{-1} [W1; U2]``."""
    if l is None:
        l = int(rng.integers(0, n + 1))

    def rect(p, q, lo, hi):
        size = (hi - lo + 1, p, q)
        block = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        return block / math.sqrt(2 * size[0]), lo

    D = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    while np.linalg.cond(D) > 1e3:
        D = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Dinv = np.linalg.inv(D)
    phi_block = np.zeros((2 * degree + 1, n, n), dtype=complex)
    psi_block = np.zeros((2 * degree + 1, n, n), dtype=complex)
    if l:
        U1, _ = rect(n, l, -degree, degree)
        W1, _ = rect(l, n, 0, degree)
        phi_block += np.einsum("kil,lj->kij", U1, D[:l])
        psi_block[degree:] += np.einsum("il,klj->kij", Dinv[:, :l], W1)
    if l < n:
        W2, _ = rect(n, n - l, 0, degree)
        U2, _ = rect(n - l, n, -degree, degree)
        phi_block[degree:] += np.einsum("kil,lj->kij", W2, D[l:])
        psi_block += np.einsum("il,klj->kij", Dinv[:, l:], U2)
    phi = MatrixSymbol(-degree, phi_block, shape=(n, n))
    psi = MatrixSymbol(-degree, psi_block, shape=(n, n))
    return phi, psi


def xy0_check(zs: Sequence, ys: Sequence, A) -> float:
    """Residual of ``sum x_i (x) y_i = sum z_i (x) w_i`` for ``x = z A``, ``w = y A^*``.

    ``A`` is ``r x n`` with ``r = len(zs)`` and ``n = len(ys)``.
    """
    Z = _columns(zs)
    Yc = _columns(ys)
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.shape != (Z.shape[1], Yc.shape[1]):
        raise ValueError(f"A must be {Z.shape[1]}x{Yc.shape[1]}, got {A.shape}")
    Xc = Z @ A
    Wc = Yc @ A.conj().T
    lhs = Xc @ Yc.conj().T
    rhs = Z @ Wc.conj().T
    return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0


def product_window_check(phi: MatrixSymbol, psi: MatrixSymbol, A, N: int = 48, margin: int | None = None,
                         degree: int | None = None) -> tuple[float, float]:
    """Window residual of ``H_Phi T_Psi`` against ``H_{Phi A Psi}`` and its Hankel defect.

    Tail symbols are truncated at ``degree`` (default ``2N``) for the product.
    """
    lo1, _ = phi.support_bounds()
    lo2, hi2 = psi.support_bounds()
    spread = max(abs(v) for v in (lo1, lo2, hi2) if v is not None) if None not in (lo1, lo2, hi2) else 0
    margin = max(2 * spread + 2, 4) if margin is None else margin
    N_int = N + margin
    prod = ops.hankel_trunc(phi, N_int) @ ops.toeplitz_trunc(psi, N_int)
    deg = degree if degree is not None else (None if phi.is_laurent and psi.is_laurent else 2 * N_int)
    target = sym.mul(sym.const_mul(phi, np.asarray(A), "right"), psi, deg)
    H = ops.hankel_trunc(target, N_int)
    W = ops.interior_window(N_int, margin)
    return ops.window_residual(prod, H, W), ops.is_hankel_window(prod, W)
