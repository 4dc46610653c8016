import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from haplitz import operators as ops
from haplitz import symbols as sym

from strategies import laurent_symbols

W32 = ops.interior_window(32, 8)


def test_toeplitz_examples():
    assert np.array_equal(ops.toeplitz_trunc(sym.identity(2), 5).data, np.eye(10))
    np.testing.assert_array_equal(ops.toeplitz_trunc(sym.monomial(1), 3).data, np.eye(3, k=-1))
    z = 0.3 + 0.4j
    T = ops.toeplitz_trunc(sym.mobius_phi(z, 2), 8)
    assert np.allclose(T.block(0, 0), -z * np.eye(2))
    for m in range(1, 8):
        assert np.allclose(T.block(m, 0), (1 - abs(z) ** 2) * np.conj(z) ** (m - 1) * np.eye(2))


def test_hankel_examples():
    rng = np.random.default_rng(0)
    analytic = sym.random_laurent(rng, 2, 3, 0, 3)
    assert not np.any(ops.hankel_trunc(analytic, 6).data)
    H = ops.hankel_trunc(sym.monomial(-1), 3).data
    np.testing.assert_array_equal(H, np.diag([1, 0, 0]))
    H2 = ops.hankel_trunc(sym.monomial(-2), 3).data
    np.testing.assert_array_equal(H2, [[0, 1, 0], [1, 0, 0], [0, 0, 0]])


def test_hankel_entry_rule_matches_PJ_on_monomials(rng):
    """Apply ``f -> P J (s f)`` to monomials directly on coefficient sequences."""
    s = sym.random_laurent(rng, 2, 4)
    N = 6
    H = ops.hankel_trunc(s, N)
    for j in range(N):
        for e in range(2):
            # s * w^j e has coefficient s^(k - j) e at degree k; J maps degree k to -k-1
            col = np.zeros((N, 2), dtype=complex)
            for i in range(N):
                col[i] = s.coeff(-i - 1 - j)[:, e]
            np.testing.assert_array_equal(H.data[:, 2 * j + e], col.ravel())


def test_compose_adjoint_algebra(rng):
    X = ops.from_dense(rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12)), 2)
    I = ops.identity_op(2, 6)
    assert np.array_equal(ops.compose(X, I).data, X.data)
    assert np.array_equal(ops.adjoint(ops.adjoint(X)).data, X.data)
    assert np.allclose((X + X - 2 * X).data, 0)
    with pytest.raises(ops.OperatorError):
        ops.compose(X, ops.identity_op(2, 5))


@given(laurent_symbols())
def test_truncation_adjoints(s):
    N = 10
    assert np.array_equal(ops.adjoint(ops.toeplitz_trunc(s, N)).data, ops.toeplitz_trunc(sym.star(s), N).data)
    assert np.array_equal(ops.adjoint(ops.hankel_trunc(s, N)).data,
                          ops.hankel_trunc(sym.star(sym.tilde(s)), N).data)
    assert np.array_equal(ops.hankel_trunc(s, N).data, ops.hankel_trunc(sym.minus_part(s), N).data)


@given(st.integers(1, 2), st.data())
def test_corner_agreement_t1_h1(n, data):
    a = data.draw(laurent_symbols(n=n, max_degree=4))
    b = data.draw(laurent_symbols(n=n, max_degree=4))
    N, d = 40, 4
    W = ops.WindowSpec((0, N - 2 * d), (0, N - 2 * d))
    T, H = ops.toeplitz_trunc, ops.hankel_trunc
    lhs = T(a, N) @ T(b, N)
    rhs = T(sym.mul(a, b), N) - H(sym.tilde(a), N) @ H(b, N)
    assert ops.window_residual(lhs, rhs, W) <= 1e-10
    lhs = H(sym.mul(a, b), N)
    rhs = H(a, N) @ T(b, N) + T(sym.tilde(a), N) @ H(b, N)
    assert ops.window_residual(lhs, rhs, W) <= 1e-10


def test_norms():
    I = ops.identity_op(2, 4)
    assert ops.op_norm(I) == pytest.approx(1.0)
    assert ops.frob_norm(I) == pytest.approx(np.sqrt(8))
    assert ops.trace_of(I) == 8
    u = np.arange(1, 9) + 1j
    v = np.ones(8) - 2j
    R = ops.rank_one_sum([(u, v)])
    assert ops.op_norm(R) == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))


def test_power_iteration_brackets_svd(rng):
    A = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    est = ops.power_norm(ops.from_dense(A, 1), tol=1e-12)
    exact = np.linalg.norm(A, 2)
    assert est.converged
    assert est.lower <= exact + 1e-12 and exact <= est.upper + 1e-12
    assert abs(est.value - exact) <= 1e-8


def test_large_operators_use_iterative_norm(rng):
    X = ops.toeplitz_trunc(sym.random_laurent(rng, 2, 3), 600)  # dimension 1200 > SVD limit
    exact = np.linalg.norm(X.data, 2)
    assert ops.op_norm(X) == pytest.approx(exact, rel=1e-8)


def test_rank_one_sums_and_projection():
    e0 = np.eye(6)[0]
    P = ops.rank_one_sum([(e0, e0)])
    assert np.array_equal(P.data, np.diag([1.0, 0, 0, 0, 0, 0]))
    C = ops.constants_projection(2, 3)
    assert np.array_equal(C.data, np.diag([1.0, 1, 0, 0, 0, 0]))
    assert np.array_equal(ops.rank_one_sum([(np.eye(6)[i], np.eye(6)[i]) for i in range(2)], n=2).data, C.data)
    with pytest.raises(ops.OperatorError):
        ops.rank_one_sum([(np.ones(4), np.ones(5))])


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_rank_of_rank_one_sums(m, seed):
    r = np.random.default_rng(seed)
    pairs = [(r.standard_normal(20) + 1j * r.standard_normal(20), r.standard_normal(20)) for _ in range(m)]
    assert ops.num_rank(ops.rank_one_sum(pairs)) <= m


def test_structure_tests(rng):
    s = sym.random_laurent(rng, 2, 3)
    assert ops.is_toeplitz_window(ops.toeplitz_trunc(s, 32), W32) <= 1e-12
    assert ops.is_hankel_window(ops.hankel_trunc(s, 32), W32) <= 1e-12
    # H_wbar T_wbar = 1 (x) w: the single unit entry sits off the anti-diagonal
    X = ops.hankel_trunc(sym.monomial(-1), 32) @ ops.toeplitz_trunc(sym.monomial(-1), 32)
    assert np.array_equal(X.data[:2, :2], [[0, 1], [0, 0]])
    assert ops.is_hankel_window(X, ops.WindowSpec((0, 4), (0, 4))) >= 1.0
    with pytest.raises(ops.EdgeWindowError):
        ops.is_hankel_window(X, ops.WindowSpec((0, 32), (0, 4)))


def test_csv_roundtrip(tmp_path, rng):
    X = ops.hankel_trunc(sym.random_laurent(rng, 2, 2), 5)
    p = tmp_path / "h.csv"
    ops.dump_csv(X, p)
    assert p.read_text().splitlines()[0].startswith("# n=2 N=5 provenance=")
    Y = ops.load_csv(p)
    assert np.array_equal(X.data, Y.data) and Y.n == 2 and Y.N == 5


def test_dimension_cap():
    with pytest.raises(ops.OperatorError):
        ops.toeplitz_trunc(sym.identity(3), 2000)


def test_lanczos_bounds(rng):
    A = rng.standard_normal((300, 300)) + 1j * rng.standard_normal((300, 300))
    est = ops.lanczos_norm(A)
    exact = np.linalg.norm(A, 2)
    assert est.lower <= exact * (1 + 1e-14) and exact <= est.upper * (1 + 1e-14)
    assert est.value == pytest.approx(exact, rel=1e-10)
