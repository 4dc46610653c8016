"""Mobius calculus on operator sections: the maps Delta_z, Omega_z and identity checks.

Every identity here holds exactly for the true operators.  Sections of
products agree with products of sections only away from the truncation edge,
so checks are evaluated on an enlarged internal section and compared on a
leading window.  The enlargement covers both the polynomial spread of the
symbols and the geometric decay ``|z|^k`` of the Mobius factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from . import operators as ops
from . import symbols as sym
from .operators import TruncatedOperator, WindowSpec
from .symbols import MatrixSymbol

IDENTITY_TOL = 1e-10
KERNEL_EPS = 1e-17


def kernel_pad(z: complex, eps: float = KERNEL_EPS) -> int:
    """Degrees needed before ``|z|^k`` drops below ``eps``."""
    r = abs(z)
    if r == 0.0:
        return 0
    return int(math.ceil(math.log(eps) / math.log(r)))


def kernel_tail_bound(z: complex, N: int) -> float:
    """``1 - ||k_z truncated at N||^2 = |z|^(2N)``."""
    return abs(z) ** (2 * N)


@dataclass(frozen=True, eq=False)
class MobiusFrame:
    """Sections of the Mobius-related operators at one disk point.

    ``phi`` is ``T_{phi_z I}``, ``phi_bar`` is ``T_{phi_{conj z} I}``,
    ``hankel_conj`` is ``H`` of the conjugate of ``phi_z I``,
    ``hankel_conj_bar`` the same at ``conj(z)``, and ``C``/``C_bar`` are the
    rank-``n`` projections ``sum_i k_z e_i (x) k_z e_i`` (resp. at ``conj(z)``).
    """

    z: complex
    N: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "z", sym.as_complex_point(self.z))
        if self.N < 1 or self.n < 1:
            raise ops.OperatorError("frame needs positive N and n")

    @property
    def zbar(self) -> complex:
        return complex(np.conj(self.z))

    @cached_property
    def phi(self) -> TruncatedOperator:
        return ops.toeplitz_trunc(sym.mobius_phi(self.z, self.n), self.N)

    @cached_property
    def phi_bar(self) -> TruncatedOperator:
        return ops.toeplitz_trunc(sym.mobius_phi(self.zbar, self.n), self.N)

    @cached_property
    def hankel_conj(self) -> TruncatedOperator:
        return ops.hankel_trunc(sym.star(sym.mobius_phi(self.z, self.n)), self.N)

    @cached_property
    def hankel_conj_bar(self) -> TruncatedOperator:
        return ops.hankel_trunc(sym.star(sym.mobius_phi(self.zbar, self.n)), self.N)

    def kernel_vectors(self, conjugate: bool = False) -> np.ndarray:
        """Columns ``k_z e_i`` (or ``k_{conj z} e_i``); shape ``(N n, n)``."""
        return self._kz_bar if conjugate else self._kz

    @cached_property
    def _kz(self) -> np.ndarray:
        return _kernel_columns(self.z, self.N, self.n)

    @cached_property
    def _kz_bar(self) -> np.ndarray:
        return _kernel_columns(self.zbar, self.N, self.n)

    @cached_property
    def C(self) -> TruncatedOperator:
        K = self._kz
        return TruncatedOperator(self.n, self.N, K @ K.conj().T, "rank-one-sum")

    @cached_property
    def C_bar(self) -> TruncatedOperator:
        K = self._kz_bar
        return TruncatedOperator(self.n, self.N, K @ K.conj().T, "rank-one-sum")

    @property
    def tail_bound(self) -> float:
        return kernel_tail_bound(self.z, self.N)


def _kernel_columns(z: complex, N: int, n: int) -> np.ndarray:
    k = sym.kernel_kz(z, N)
    return np.kron(k[:, None], np.eye(n, dtype=complex))


def _check(X: TruncatedOperator, frame: MobiusFrame) -> None:
    if (X.n, X.N) != (frame.n, frame.N):
        raise ops.OperatorError(
            f"operator (n={X.n}, N={X.N}) does not match frame (n={frame.n}, N={frame.N})"
        )


def delta_z(X: TruncatedOperator, frame: MobiusFrame) -> TruncatedOperator:
    """``X - T_{phi_z}^* X T_{phi_z}``."""
    _check(X, frame)
    T = frame.phi.data
    return TruncatedOperator(X.n, X.N, X.data - T.conj().T @ X.data @ T, "delta")


def omega_z(X: TruncatedOperator, frame: MobiusFrame) -> TruncatedOperator:
    """``X T_{phi_z} - T_{phi_{conj z}}^* X``."""
    _check(X, frame)
    return TruncatedOperator(
        X.n, X.N, X.data @ frame.phi.data - frame.phi_bar.data.conj().T @ X.data, "omega"
    )


def bar_frame(frame: MobiusFrame) -> MobiusFrame:
    return MobiusFrame(frame.zbar, frame.N, frame.n)


# --------------------------------------------------------------------------
# identity registry


class Context:
    """Cached sections of ``T`` and ``H`` for the symbols of one check."""

    def __init__(self, symbols: Mapping[str, MatrixSymbol], frame: MobiusFrame):
        self.symbols = dict(symbols)
        self.frame = frame
        self.N = frame.N
        self.n = frame.n
        self._cache: dict = {}

    def sym(self, name: str) -> MatrixSymbol:
        try:
            return self.symbols[name]
        except KeyError:
            raise KeyError(f"identity needs symbol {name!r}") from None

    def T(self, s: MatrixSymbol | str) -> TruncatedOperator:
        s = self.sym(s) if isinstance(s, str) else s
        key = ("T", id(s))
        if key not in self._cache:
            self._cache[key] = (ops.toeplitz_trunc(s, self.N), s)
        return self._cache[key][0]

    def H(self, s: MatrixSymbol | str) -> TruncatedOperator:
        s = self.sym(s) if isinstance(s, str) else s
        key = ("H", id(s))
        if key not in self._cache:
            self._cache[key] = (ops.hankel_trunc(s, self.N), s)
        return self._cache[key][0]

    @property
    def I(self) -> TruncatedOperator:
        return ops.identity_op(self.n, self.N)

    def rank_one(self, xs: np.ndarray, ys: np.ndarray) -> TruncatedOperator:
        return TruncatedOperator(self.n, self.N, xs @ ys.conj().T, "rank-one-sum")


Builder = Callable[[Context], list[tuple[TruncatedOperator, TruncatedOperator]]]


@dataclass(frozen=True)
class IdentitySpec:
    """A named operator identity: a builder returning (lhs, rhs) pairs."""

    name: str
    symbols: tuple[str, ...]
    description: str
    builder: Builder
    kind: str = "operator"  # "operator" compares windows, "scalar" compares numbers
    degree_factor: int = 2  # how many symbol spreads may stack in one product


REGISTRY: dict[str, IdentitySpec] = {}


def register(spec: IdentitySpec) -> IdentitySpec:
    REGISTRY[spec.name] = spec
    return spec


def _t1(c: Context):
    a, b = c.sym("a"), c.sym("b")
    return [(c.T(sym.mul(a, b)), c.T(a) @ c.T(b) + c.H(sym.tilde(a)) @ c.H(b))]


def _h1(c: Context):
    a, b = c.sym("a"), c.sym("b")
    return [(c.H(sym.mul(a, b)), c.H(a) @ c.T(b) + c.T(sym.tilde(a)) @ c.H(b))]


def _t2(c: Context):
    a, b = c.sym("a"), sym.plus_part(c.sym("b"))
    return [(c.T(sym.mul(a, b)), c.T(a) @ c.T(b))]


def _h2(c: Context):
    a, b = c.sym("a"), sym.plus_part(c.sym("b"))
    return [(c.H(sym.mul(a, b)), c.H(a) @ c.T(b))]


def _aa(c: Context):
    f = c.frame
    Ta = c.T("a")
    Ts = f.phi.H
    return [(Ts @ Ta, Ta @ Ts + Ts @ Ta @ f.C)]


def _bb(c: Context):
    f = c.frame
    Ta = c.T("a")
    return [(Ta @ f.phi, f.phi @ Ta + f.C @ Ta @ f.phi)]


def _ccc(c: Context):
    f = c.frame
    Ha = c.H("a")
    Ts = f.phi.H
    Tb = f.phi_bar
    return [(Ha @ Ts, Tb @ Ha - Tb @ Ha @ f.C + f.C_bar @ Ha @ Ts)]


def _mobius(c: Context):
    f = c.frame
    I = c.I
    Hc = f.hankel_conj
    K, Kb = f.kernel_vectors(), f.kernel_vectors(conjugate=True)
    return [
        (f.C, I - f.phi @ f.phi.H),
        (f.C, Hc.H @ Hc),
        (Hc, c.rank_one(Kb, K)),
        (I - f.phi.H @ f.phi, ops.zero_op(c.n, c.N)),
    ]


def _key1(c: Context):
    f = c.frame
    Ha, Hb = c.H("a"), c.H("b")
    X = Ha @ c.T("b")
    xs = Ha.data @ f.kernel_vectors()
    ys = Hb.data.conj().T @ f.kernel_vectors(conjugate=True)
    return [
        (omega_z(X, f), c.rank_one(xs, ys)),
        (omega_z(X, f), Ha @ f.hankel_conj_bar @ Hb),
    ]


def _key2(c: Context):
    f = c.frame
    a, b = c.sym("a"), c.sym("b")
    X = c.T(b) @ c.H(a)
    xs = c.H(sym.tilde(b)).data @ f.kernel_vectors()
    ys = c.H(a).data.conj().T @ f.kernel_vectors(conjugate=True)
    return [(omega_z(X, f), -c.rank_one(xs, ys))]


def _relation(c: Context):
    f = c.frame
    fb = bar_frame(f)
    X = c.T("a") @ c.H("b")
    Y = c.H("c") @ c.T("d")
    oY = omega_z(Y, f)
    oX = omega_z(X, fb)
    rhs = X @ f.C_bar @ Y - X @ f.phi_bar @ oY + oX @ oY + oX @ f.phi_bar.H @ Y
    return [(delta_z(X @ Y, f), rhs)]


def _omega_adjoint(c: Context):
    f = c.frame
    X = c.H("a") @ c.T("b")
    return [(omega_z(X.H, f), -(omega_z(X, bar_frame(f)).H))]


def _trace(c: Context):
    f = c.frame
    xs = c.H("a").data @ f.kernel_vectors()
    ys = c.H("b").data.conj().T @ f.kernel_vectors(conjugate=True)
    lhs, rhs = gram_trace_check(list(xs.T), list(ys.T))
    return [(lhs, rhs)]


for _spec in (
    IdentitySpec("t1", ("a", "b"), "T_ab = T_a T_b + H_{a~} H_b", _t1),
    IdentitySpec("h1", ("a", "b"), "H_ab = H_a T_b + T_{a~} H_b", _h1),
    IdentitySpec("t2", ("a", "b"), "T_ab = T_a T_b for analytic b", _t2),
    IdentitySpec("h2", ("a", "b"), "H_ab = H_a T_b for analytic b", _h2),
    IdentitySpec("aa", ("a",), "T_phi* T_a = T_a T_phi* + T_phi* T_a C_z", _aa),
    IdentitySpec("bb", ("a",), "T_a T_phi = T_phi T_a + C_z T_a T_phi", _bb),
    IdentitySpec(
        "ccc", ("a",),
        "H_a T_phi* = T_phibar H_a - T_phibar H_a C_z + C_zbar H_a T_phi*", _ccc,
    ),
    IdentitySpec(
        "mobius", (),
        "C_z = I - T_phi T_phi* = H* H over conj(phi_z), kernel form, T_phi isometric", _mobius,
    ),
    IdentitySpec("key1", ("a", "b"), "Omega_z(H_a T_b) = sum H_a k_z e_i (x) H_b* k_zbar e_i", _key1),
    IdentitySpec("key2", ("a", "b"), "Omega_z(T_b H_a) = -sum H_{b~} k_z e_i (x) H_a* k_zbar e_i", _key2),
    IdentitySpec(
        "relation", ("a", "b", "c", "d"),
        "Delta_z(XY) via C_zbar, Omega_z(Y) and Omega_zbar(X)", _relation, degree_factor=4,
    ),
    IdentitySpec("omega_adjoint", ("a", "b"), "Omega_z(X*) = -Omega_zbar(X)*", _omega_adjoint),
    IdentitySpec("trace", ("a", "b"), "||sum x_i (x) y_i||_F^2 = trace(W_x W_y)", _trace, kind="scalar"),
):
    register(_spec)

ACCEPTANCE_IDENTITIES = ("t1", "h1", "t2", "h2", "aa", "bb", "ccc", "mobius", "key1", "key2", "relation", "trace")


# --------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class IdentityReport:
    name: str
    z: complex
    N: int
    N_internal: int
    window: tuple[int, int]
    residual: float
    tol: float
    seed: int | None = None
    parts: tuple[float, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tol)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def symbol_spread(s: MatrixSymbol) -> int:
    """Largest absolute degree of a Laurent symbol (0 for tails: handled by padding)."""
    lo, hi = s.support_bounds()
    if lo is None or hi is None:
        return 0
    if hi < lo:
        return 0
    return max(abs(lo), abs(hi))


def internal_size(N: int, z: complex, symbols: Mapping[str, MatrixSymbol], factor: int = 2,
                  extra: int = 0) -> int:
    """Section length used internally so that the leading ``N`` blocks are edge-free."""
    spread = sum(symbol_spread(s) for s in symbols.values())
    return N + kernel_pad(z) + factor * spread + extra


def verify_identity(
    name: str,
    symbols: Mapping[str, MatrixSymbol],
    z=0.0,
    N: int = 64,
    margin: int = 16,
    tol: float = IDENTITY_TOL,
    seed: int | None = None,
    pad: int | None = None,
) -> IdentityReport:
    """Evaluate one registered identity and report its window residual.

    The comparison window is the leading ``N - margin`` blocks; operators are
    built at an internal length that adds ``pad`` blocks (default: enough for
    the symbol degrees and for ``|z|^k`` to fall below double precision).
    Symbols with unbounded tails should be paired with an explicit ``pad``.
    """
    if name not in REGISTRY:
        raise KeyError(f"unknown identity {name!r}; known: {sorted(REGISTRY)}")
    spec = REGISTRY[name]
    z = sym.as_complex_point(z)
    ns = {s.n for s in symbols.values()}
    if len(ns) > 1:
        raise ops.OperatorError(f"symbols of different block sizes {sorted(ns)}")
    n = ns.pop() if ns else 1
    used = {k: symbols[k] for k in spec.symbols}
    N_int = internal_size(N, z, used, spec.degree_factor) if pad is None else N + pad
    frame = MobiusFrame(z, N_int, n)
    ctx = Context(used, frame)
    W = ops.interior_window(N, margin)
    parts = []
    for lhs, rhs in spec.builder(ctx):
        if spec.kind == "scalar":
            parts.append(abs(lhs - rhs) / max(1.0, abs(lhs)))
        else:
            parts.append(ops.window_residual(lhs, rhs, W))
    return IdentityReport(name, z, N, N_int, (0, N - margin), max(parts), tol, seed, tuple(parts))


def gram_trace_check(xs: Sequence, ys: Sequence) -> tuple[float, float]:
    """Frobenius norm squared of ``sum x_i (x) y_i`` and ``trace(W_x W_y)``."""
    if len(xs) != len(ys):
        raise ValueError("xs and ys must have the same length")
    if not len(xs):
        return 0.0, 0.0
    X = np.column_stack([np.asarray(x, dtype=complex) for x in xs])
    Y = np.column_stack([np.asarray(y, dtype=complex) for y in ys])
    lhs = float(np.linalg.norm(X @ Y.conj().T) ** 2)
    Wx = X.conj().T @ X  # W_x[i, j] = <x_j, x_i>
    Wy = Y.conj().T @ Y
    rhs = float(np.real(np.trace(Wx @ Wy)))
    return lhs, rhs


def rank_bound_check(word, env: Mapping[str, MatrixSymbol], z=0.0, N: int = 64, margin: int = 16,
                     tol: float | None = None) -> tuple[int, int]:
    """Numerical rank of ``Delta_z`` (pure Toeplitz word) or ``Omega_z`` (odd word) on a window.

    Returns ``(observed, bound)`` with bound ``(number of atoms) * n``.  The
    default threshold is relative to the word itself rather than to its image,
    since the image may vanish identically and then consist of rounding noise.
    """
    from . import wordalg

    word = wordalg.as_word(word)
    z = sym.as_complex_point(z)
    h = word.h_count
    if h == 0:
        mapper = delta_z
    elif h % 2 == 1:
        mapper = omega_z
    else:
        raise wordalg.ParityError("rank bounds apply to pure Toeplitz words or odd words")
    n = {s.n for s in env.values()}.pop()
    spread = wordalg.word_spread(word, env)
    N_int = N + kernel_pad(z) + 2 * spread
    frame = MobiusFrame(z, N_int, n)
    X = wordalg.evaluate(wordalg.WordSum.of(word), env, N_int)
    Y = mapper(X, frame)
    W = ops.interior_window(N, margin)
    if tol is None:
        tol = ops.RANK_RTOL * ops.op_norm(ops.window_of(X, W))
    observed = ops.num_rank(ops.window_of(Y, W), tol)
    return observed, len(word.atoms) * n
