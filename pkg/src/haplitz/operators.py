"""Finite sections of block Toeplitz and Hankel operators on the vector-valued Hardy space.

Vectors of ``H^2`` with values in ``C^n`` are truncated to degrees ``0..N-1``
and laid out degree-major: the entry of component ``i`` at degree ``j``
sits at index ``j*n + i``.  An operator section is the dense
``(N n) x (N n)`` matrix in that basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse.linalg

from .symbols import MatrixSymbol

MAX_DIM = 4096
SVD_DIM_LIMIT = 1024
RANK_RTOL = 1e-9


class OperatorError(ValueError):
    """Dimension mismatch or invalid window."""


class EdgeWindowError(OperatorError):
    """A structure test window touches the truncation edge."""


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """Dense section of an operator on ``H^2`` with values in ``C^n``."""

    n: int
    N: int
    data: np.ndarray
    provenance: str = "dense"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        dim = self.n * self.N
        if data.shape != (dim, dim):
            raise OperatorError(f"data of shape {data.shape} does not match n={self.n}, N={self.N}")
        if dim > MAX_DIM:
            raise OperatorError(f"dimension {dim} exceeds the cap {MAX_DIM}")
        if data.flags.writeable:
            data = data.copy()
            data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.n * self.N

    def block(self, i: int, j: int) -> np.ndarray:
        n = self.n
        return self.data[i * n : (i + 1) * n, j * n : (j + 1) * n]

    def blocks(self) -> np.ndarray:
        """View as an ``(N, N, n, n)`` array of blocks."""
        return self.data.reshape(self.N, self.n, self.N, self.n).transpose(0, 2, 1, 3)

    def __matmul__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        return compose(self, other)

    def __add__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        return add(self, other)

    def __sub__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        return sub(self, other)

    def __neg__(self) -> "TruncatedOperator":
        return scale(self, -1.0)

    def __rmul__(self, c) -> "TruncatedOperator":
        return scale(self, c)

    @property
    def H(self) -> "TruncatedOperator":
        return adjoint(self)

    def __repr__(self) -> str:
        return f"TruncatedOperator(n={self.n}, N={self.N}, provenance={self.provenance!r})"


@dataclass(frozen=True)
class WindowSpec:
    """Half-open block index ranges ``[start, stop)`` for rows and columns."""

    rows: tuple[int, int]
    cols: tuple[int, int]

    def __post_init__(self):
        for r in (self.rows, self.cols):
            if r[0] < 0 or r[1] < r[0]:
                raise OperatorError(f"invalid block range {r}")

    @classmethod
    def leading(cls, size: int) -> "WindowSpec":
        return cls((0, size), (0, size))

    def check(self, N: int) -> None:
        if self.rows[1] > N or self.cols[1] > N:
            raise OperatorError(f"window {self} exceeds truncation length {N}")

    def slices(self, n: int) -> tuple[slice, slice]:
        return (slice(self.rows[0] * n, self.rows[1] * n), slice(self.cols[0] * n, self.cols[1] * n))


def interior_window(N: int, margin: int) -> WindowSpec:
    """Leading window ``[0, N - margin)`` in both block directions."""
    if margin < 0 or margin >= N:
        raise OperatorError(f"margin {margin} must lie in [0, {N})")
    return WindowSpec.leading(N - margin)


def _same_space(*ops: TruncatedOperator) -> None:
    first = ops[0]
    for op in ops[1:]:
        if (op.n, op.N) != (first.n, first.N):
            raise OperatorError(f"operators on different spaces: (n={first.n}, N={first.N}) vs (n={op.n}, N={op.N})")


# --------------------------------------------------------------------------
# construction


def _assemble(coeffs: np.ndarray, index: np.ndarray, n: int, N: int) -> np.ndarray:
    """Place ``coeffs[index[i, j]]`` at block ``(i, j)``."""
    blocks = coeffs[index]  # (N, N, n, n)
    return blocks.transpose(0, 2, 1, 3).reshape(N * n, N * n)


def toeplitz_trunc(s: MatrixSymbol, N: int) -> TruncatedOperator:
    """Section of ``T_s``: block ``(i, j)`` is ``s^(i - j)``."""
    if N < 1:
        raise OperatorError("truncation length must be positive")
    n = s.n
    coeffs = s.window(-(N - 1), N - 1)
    i, j = np.indices((N, N))
    return TruncatedOperator(n, N, _assemble(coeffs, i - j + N - 1, n, N), "toeplitz")


def hankel_trunc(s: MatrixSymbol, N: int) -> TruncatedOperator:
    """Section of ``H_s = P J (s .)``: block ``(i, j)`` is ``s^(-i - j - 1)``.

    The flip ``J f(w) = conj(w) f(conj(w))`` sends ``w^m`` to ``w^(-m-1)``,
    which is where the index ``-i-j-1`` comes from.
    """
    if N < 1:
        raise OperatorError("truncation length must be positive")
    n = s.n
    coeffs = s.window(-(2 * N - 1), -1)  # coeffs[t] is degree t - (2N-1)
    i, j = np.indices((N, N))
    return TruncatedOperator(n, N, _assemble(coeffs, (2 * N - 1) - i - j - 1, n, N), "hankel")


def identity_op(n: int, N: int) -> TruncatedOperator:
    return TruncatedOperator(n, N, np.eye(n * N, dtype=complex), "identity")


def zero_op(n: int, N: int) -> TruncatedOperator:
    return TruncatedOperator(n, N, np.zeros((n * N, n * N), dtype=complex), "zero")


def shift_op(n: int, N: int) -> TruncatedOperator:
    """Section of multiplication by ``w``."""
    return TruncatedOperator(n, N, np.eye(n * N, k=-n, dtype=complex), "shift")


def from_dense(data, n: int, provenance: str = "dense") -> TruncatedOperator:
    data = np.asarray(data, dtype=complex)
    if data.shape[0] % n:
        raise OperatorError(f"dimension {data.shape[0]} is not a multiple of n={n}")
    return TruncatedOperator(n, data.shape[0] // n, data, provenance)


# --------------------------------------------------------------------------
# algebra


def compose(X: TruncatedOperator, Y: TruncatedOperator) -> TruncatedOperator:
    _same_space(X, Y)
    return TruncatedOperator(X.n, X.N, X.data @ Y.data, "composite")


def adjoint(X: TruncatedOperator) -> TruncatedOperator:
    return TruncatedOperator(X.n, X.N, X.data.conj().T, f"adjoint({X.provenance})")


def add(X: TruncatedOperator, Y: TruncatedOperator) -> TruncatedOperator:
    _same_space(X, Y)
    return TruncatedOperator(X.n, X.N, X.data + Y.data, "composite")


def sub(X: TruncatedOperator, Y: TruncatedOperator) -> TruncatedOperator:
    _same_space(X, Y)
    return TruncatedOperator(X.n, X.N, X.data - Y.data, "composite")


def scale(X: TruncatedOperator, c: complex) -> TruncatedOperator:
    return TruncatedOperator(X.n, X.N, c * X.data, X.provenance)


def product(ops: Sequence[TruncatedOperator]) -> TruncatedOperator:
    out = ops[0]
    for op in ops[1:]:
        out = compose(out, op)
    return out


def apply(X: TruncatedOperator, v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.shape[0] != X.dim:
        raise OperatorError(f"vector of length {v.shape[0]} for operator of dimension {X.dim}")
    return X.data @ v


def block_diag_const(A, N: int) -> TruncatedOperator:
    """Section of multiplication by the constant matrix ``A``."""
    A = np.asarray(A, dtype=complex)
    return TruncatedOperator(A.shape[0], N, np.kron(np.eye(N), A), "constant")


# --------------------------------------------------------------------------
# norms and rank


@dataclass(frozen=True)
class NormEstimate:
    """Spectral norm with certified bounds ``lower <= ||X|| <= upper``."""

    value: float
    lower: float
    upper: float
    method: str
    iterations: int = 0
    converged: bool = True


def _as_array(X) -> np.ndarray:
    return X.data if isinstance(X, TruncatedOperator) else np.asarray(X, dtype=complex)


def power_norm(X, tol: float = 1e-12, max_iter: int = 5000, seed: int = 0) -> NormEstimate:
    """Power iteration on ``X^H X``.

    The lower bound ``||X v||`` is certified for every unit ``v``; the upper
    bound is the smaller of the Frobenius norm and ``sqrt(||X||_1 ||X||_inf)``.
    """
    M = _as_array(X)
    upper = min(float(np.linalg.norm(M)), math.sqrt(float(np.linalg.norm(M, 1) * np.linalg.norm(M, np.inf))))
    if not np.any(M):
        return NormEstimate(0.0, 0.0, 0.0, "power", 0, True)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1]) + 1j * rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(1, max_iter + 1):
        u = M @ v
        lower = float(np.linalg.norm(u))
        g = M.conj().T @ u
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            return NormEstimate(lower, lower, upper, "power", it, True)
        v = g / gn
        if abs(lower - est) <= tol * max(lower, 1e-300):
            est = lower
            return NormEstimate(est, est, max(upper, est), "power", it, True)
        est = lower
    return NormEstimate(est, est, max(upper, est), "power", max_iter, False)


def lanczos_norm(X, tol: float = 1e-13) -> NormEstimate:
    """Largest singular value by ARPACK Lanczos; the lower bound is ``||X v||`` for the returned ``v``."""
    M = _as_array(X)
    upper = min(float(np.linalg.norm(M)), math.sqrt(float(np.linalg.norm(M, 1) * np.linalg.norm(M, np.inf))))
    if not np.any(M):
        return NormEstimate(0.0, 0.0, 0.0, "lanczos", 0, True)
    v0 = np.random.default_rng(0).standard_normal(min(M.shape)).astype(M.dtype)
    try:
        _, s, vh = scipy.sparse.linalg.svds(M, k=1, tol=tol, v0=v0)
    except scipy.sparse.linalg.ArpackNoConvergence:
        return power_norm(M)
    v = vh[0].conj() if M.shape[0] >= M.shape[1] else None
    lower = float(np.linalg.norm(M @ v)) if v is not None else float(s[0])
    return NormEstimate(float(s[0]), min(lower, float(s[0])), max(upper, float(s[0])), "lanczos", 0, True)


def op_norm(X) -> float:
    """Largest singular value: full SVD up to dimension 1024, Lanczos iteration beyond."""
    M = _as_array(X)
    if M.size == 0:
        return 0.0
    if max(M.shape) <= SVD_DIM_LIMIT:
        return float(np.linalg.norm(M, 2))
    est = lanczos_norm(M)
    if not est.converged:
        raise ArithmeticError(
            f"norm iteration did not converge: bounds [{est.lower:.6g}, {est.upper:.6g}]"
        )
    return est.value


def frob_norm(X) -> float:
    return float(np.linalg.norm(_as_array(X)))


def trace_of(X) -> complex:
    return complex(np.trace(_as_array(X)))


def singular_values(X) -> np.ndarray:
    return np.linalg.svd(_as_array(X), compute_uv=False)


def num_rank(X, tol: float | None = None) -> int:
    """Number of singular values above ``tol`` (default ``1e-9 * sigma_max``)."""
    sv = singular_values(X)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    thresh = RANK_RTOL * sv[0] if tol is None else tol
    return int(np.sum(sv > thresh))


# --------------------------------------------------------------------------
# rank-one sums


def rank_one(u, v) -> np.ndarray:
    """Matrix of ``u (x) v``: ``f -> <f, v> u``."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    return np.outer(u, v.conj())


def rank_one_sum(pairs: Iterable[tuple], n: int = 1) -> TruncatedOperator:
    """``sum_i u_i (x) v_i`` as an operator section with block size ``n``."""
    pairs = list(pairs)
    if not pairs:
        raise OperatorError("rank_one_sum needs at least one pair")
    length = len(pairs[0][0])
    U = np.empty((length, len(pairs)), dtype=complex)
    V = np.empty((length, len(pairs)), dtype=complex)
    for idx, (u, v) in enumerate(pairs):
        if len(u) != length or len(v) != length:
            raise OperatorError("all vectors in a rank-one sum must have the same length")
        U[:, idx] = u
        V[:, idx] = v
    if length % n:
        raise OperatorError(f"vector length {length} is not a multiple of n={n}")
    return TruncatedOperator(n, length // n, U @ V.conj().T, "rank-one-sum")


def constants_projection(n: int, N: int) -> TruncatedOperator:
    """Projection onto the constant functions: ``sum_i e_i (x) e_i``."""
    e = np.eye(n * N, dtype=complex)[:, :n]
    return rank_one_sum([(e[:, i], e[:, i]) for i in range(n)], n)


# --------------------------------------------------------------------------
# windows and structure


def window_of(X: TruncatedOperator, W: WindowSpec) -> np.ndarray:
    W.check(X.N)
    r, c = W.slices(X.n)
    return X.data[r, c]


def window_residual(X: TruncatedOperator, Y: TruncatedOperator, W: WindowSpec) -> float:
    """Largest entry modulus of ``X - Y`` on the window."""
    _same_space(X, Y)
    diff = window_of(X, W) - window_of(Y, W)
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def _structure_blocks(X: TruncatedOperator, W: WindowSpec):
    W.check(X.N)
    if W.rows[1] >= X.N or W.cols[1] >= X.N:
        raise EdgeWindowError(
            f"window {W} touches the truncation edge N={X.N}; structure tests need one spare block"
        )
    return X.blocks()


def is_toeplitz_window(X: TruncatedOperator, W: WindowSpec) -> float:
    """Largest block deviation of ``S^* X S - X`` on the window (``S`` the shift)."""
    B = _structure_blocks(X, W)
    r0, r1 = W.rows
    c0, c1 = W.cols
    diff = B[r0 + 1 : r1 + 1, c0 + 1 : c1 + 1] - B[r0:r1, c0:c1]
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def is_hankel_window(X: TruncatedOperator, W: WindowSpec) -> float:
    """Largest block deviation of ``X S - S^* X`` on the window."""
    B = _structure_blocks(X, W)
    r0, r1 = W.rows
    c0, c1 = W.cols
    diff = B[r0:r1, c0 + 1 : c1 + 1] - B[r0 + 1 : r1 + 1, c0:c1]
    return float(np.max(np.abs(diff))) if diff.size else 0.0


# --------------------------------------------------------------------------
# CSV dump


def dump_csv(X: TruncatedOperator, path: str | Path) -> None:
    """Row-major CSV with interleaved real and imaginary parts, one header line."""
    flat = np.empty((X.dim, 2 * X.dim))
    flat[:, 0::2] = X.data.real
    flat[:, 1::2] = X.data.imag
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={X.n} N={X.N} provenance={X.provenance}\n")
        np.savetxt(fh, flat, delimiter=",", fmt="%.17g")


def load_csv(path: str | Path) -> TruncatedOperator:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise OperatorError("missing '# n=... N=... provenance=...' header")
        fields = dict(item.split("=", 1) for item in header[1:].split())
        flat = np.loadtxt(fh, delimiter=",", ndmin=2)
    data = flat[:, 0::2] + 1j * flat[:, 1::2]
    return TruncatedOperator(int(fields["n"]), int(fields["N"]), data, fields.get("provenance", "dense"))
