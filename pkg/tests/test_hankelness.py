import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from haplitz import hankelness as hk
from haplitz import operators as ops
from haplitz import symbols as sym

from strategies import laurent_symbols

WBAR = sym.monomial(-1)
DIAG_PHI = sym.laurent({-1: np.diag([1.0, 0.0]), 1: np.diag([0.0, 1.0])})
DIAG_PSI = sym.laurent({1: np.diag([1.0, 0.0]), -1: np.diag([0.0, 1.0])})


def product_defect(phi, psi, N=40, margin=8):
    P = ops.hankel_trunc(phi, N) @ ops.toeplitz_trunc(psi, N)
    return ops.is_hankel_window(P, ops.interior_window(N, margin))


# ---------------------------------------------------------------- box matrix


def test_box_matrix_invariants():
    B = hk.BoxMatrix(np.array([[1, 1j], [0, -1]]), 1.0)
    assert B.n == 2 and not B.A.flags.writeable
    with pytest.raises(ValueError):
        hk.BoxMatrix(np.array([[1.1]]), 1.0)
    with pytest.raises(ValueError):
        hk.BoxMatrix(np.eye(2), 0.0)


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_project_box_is_radial(seed, d):
    r = np.random.default_rng(seed)
    A = 5 * (r.standard_normal((3, 3)) + 1j * r.standard_normal((3, 3)))
    P = hk.project_box(A, d)
    assert np.max(np.abs(P)) <= d * (1 + 1e-14)
    assert np.allclose(np.angle(P), np.angle(A))


# ---------------------------------------------------------------- feasibility


@given(laurent_symbols(n=2, analytic=True), laurent_symbols(n=2))
def test_analytic_phi_gives_zero(phi, psi):
    res = hk.find_feasible_A(phi, psi)
    assert isinstance(res, hk.Feasible)
    assert np.array_equal(res.A.A, np.zeros((2, 2)))


@given(laurent_symbols(n=2), laurent_symbols(n=2, analytic=True))
def test_analytic_psi_gives_identity(phi, psi):
    res = hk.find_feasible_A(phi, psi)
    assert isinstance(res, hk.Feasible)
    if np.any(sym.minus_part(phi).block):
        assert np.allclose(res.A.A, np.eye(2))


def test_degenerate_inputs_note():
    res = hk.find_feasible_A(sym.identity(2), sym.identity(2))
    assert res.route == "degenerate" and "vanish" in res.note


def test_diagonal_pair_is_hankel():
    res = hk.find_feasible_A(DIAG_PHI, DIAG_PSI)
    assert isinstance(res, hk.Feasible)
    assert np.allclose(res.A.A, np.diag([1.0, 0.0]), atol=1e-12)
    resid, defect = hk.product_window_check(DIAG_PHI, DIAG_PSI, res.A.A)
    assert resid <= 1e-12 and defect <= 1e-12
    assert ops.frob_norm(ops.hankel_trunc(DIAG_PHI, 20) @ ops.toeplitz_trunc(DIAG_PSI, 20)) <= 1e-14


def test_scalar_wbar_is_infeasible():
    res = hk.find_feasible_A(WBAR, WBAR)
    assert isinstance(res, hk.Infeasible) and res.verdict == "NOT-HANKEL"
    # |1 - a|^2 + |a|^2 is minimised at a = 1/2
    assert res.attained == pytest.approx(0.5, abs=1e-10)
    assert 0 < res.margin <= 0.5 + 1e-12
    assert res.margin == pytest.approx(0.5, abs=1e-6)
    assert product_defect(WBAR, WBAR) == pytest.approx(1.0)


def cvx_minimum(X, Y, d):
    n = X.shape[1]
    A = cp.Variable((n, n), complex=True)
    obj = cp.sum_squares(X @ (np.eye(n) - A)) + cp.sum_squares(A @ Y)
    prob = cp.Problem(cp.Minimize(obj), [cp.abs(A) <= d])
    prob.solve(solver=cp.CLARABEL)
    return prob.value


@pytest.mark.parametrize("seed", range(4))
def test_infeasibility_margin_against_convex_oracle(seed):
    rng = np.random.default_rng(seed)
    phi = sym.random_laurent(rng, 2, 2)
    psi = sym.random_laurent(rng, 2, 2)
    d = 1.5
    res = hk.find_feasible_A(phi, psi, d)
    assert isinstance(res, hk.Infeasible)
    cap = max(hk.negative_cap(phi, None)[0], hk.negative_cap(psi, None)[0])
    oracle = cvx_minimum(hk.stack_X(phi, cap), hk.stack_Y(psi, cap), d)
    assert res.margin <= oracle * (1 + 1e-6) + 1e-9
    assert res.attained == pytest.approx(oracle, rel=1e-5, abs=1e-8)
    assert product_defect(phi, psi) > 1e-3


def test_infeasible_margins_pin_positive_defects():
    rng = np.random.default_rng(5)
    for _ in range(5):
        phi, psi = sym.random_laurent(rng, 2, 2), sym.random_laurent(rng, 2, 2)
        res = hk.find_feasible_A(phi, psi, 4.0)
        assert isinstance(res, hk.Infeasible) and res.margin > 0
        assert product_defect(phi, psi) > 1e-3


@pytest.mark.parametrize("n", [1, 2, 3])
def test_completeness_on_structured_instances(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(50 // 3 + 1):
        phi, psi = hk.random_huw_instance(rng, n)
        res = hk.find_feasible_A(phi, psi, float(2 ** (2 * n)))
        assert isinstance(res, hk.Feasible), res
        assert np.max(np.abs(res.A.A)) <= 2 ** (2 * n) + 1e-12
        resid, defect = hk.product_window_check(phi, psi, res.A.A)
        assert resid <= 1e-8 and defect <= 1e-8


def test_tail_symbols_report_truncated_mass():
    phi = sym.blaschke_conj(0.5)
    res = hk.find_feasible_A(phi, sym.identity(1), degree_cap=20)
    assert isinstance(res, hk.Feasible)
    assert 0 < res.truncated_mass <= 1e-5


# ---------------------------------------------------------------- rank-one certificate


def null_family(rng, n, p, q, r):
    """Columns ``x`` (p x n) and ``y`` (q x n) of rank r with ``x y^H = 0``."""
    C = rng.standard_normal((r, n)) + 1j * rng.standard_normal((r, n))
    x = (rng.standard_normal((p, r)) + 1j * rng.standard_normal((p, r))) @ C
    N = np.linalg.svd(C)[2][r:].conj().T
    D = rng.standard_normal((n - r, q)) + 1j * rng.standard_normal((n - r, q))
    y = (N @ D).conj().T
    scales = 10.0 ** rng.uniform(-3, 3, n)
    return x * (1 / scales), y * scales


def check_certificate(cert, x, y, tol=1e-10):
    assert isinstance(cert, hk.XYCertificate), cert
    n = x.shape[1]
    A = cert.A.A
    assert np.max(np.abs(A)) <= 1 + 1e-12
    assert np.linalg.norm(x @ (np.eye(n) - A)) <= tol * max(1, np.linalg.norm(x)) * 10 * n
    assert np.linalg.norm(y @ A.conj().T) <= tol * max(1, np.linalg.norm(y)) * 10 * n
    assert sorted(cert.sigma) == list(range(n))


def test_all_y_vanish_gives_identity(rng):
    xs = list(rng.standard_normal((3, 4)))
    cert = hk.xy_certificate(xs, [np.zeros(5)] * 3)
    assert cert.route == "y-vanishes" and np.array_equal(cert.A.A, np.eye(3))


def test_all_x_vanish_gives_zero(rng):
    ys = list(rng.standard_normal((3, 4)))
    cert = hk.xy_certificate([np.zeros(5)] * 3, ys)
    assert cert.route == "x-vanishes" and np.array_equal(cert.A.A, np.zeros((3, 3)))


def test_opposite_pair(rng):
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    cert = hk.xy_certificate([v, -v], [u, u])
    check_certificate(cert, np.column_stack([v, -v]), np.column_stack([u, u]))


def test_nonzero_sum_is_rejected(rng):
    res = hk.xy_certificate([np.ones(3)], [np.ones(3)])
    assert isinstance(res, hk.Failure) and res.code == "nonzero_sum"
    assert res.frob_norm == pytest.approx(3.0)


def test_certificate_box_property_many_draws():
    rng = np.random.default_rng(2000)
    for _ in range(2000):
        n = int(rng.integers(2, 6))
        r = int(rng.integers(1, n))
        x, y = null_family(rng, n, int(rng.integers(1, 5)), int(rng.integers(1, 5)), r)
        check_certificate(hk.xy_certificate(list(x.T), list(y.T)), x, y)


# ---------------------------------------------------------------- basis extraction


def test_duplicate_vectors(rng):
    u = rng.standard_normal(4)
    ex = hk.bounded_basis_extraction([u, u])
    assert ex.rank == 1 and ex.B.shape == (1, 1)
    assert ex.B[0, 0] == pytest.approx(1.0)


def test_sum_is_reconstructed(rng):
    u, v = rng.standard_normal(5), rng.standard_normal(5)
    xs = [u, v, u + v]
    ex = hk.bounded_basis_extraction(xs)
    x = np.column_stack(xs)
    assert ex.rank == 2
    assert np.linalg.norm(x[:, ex.dependent] - x[:, ex.basis] @ ex.B) <= 1e-10


def test_extraction_errors(rng):
    with pytest.raises(hk.HankelnessError) as e:
        hk.bounded_basis_extraction([np.zeros(3), np.zeros(3)])
    assert e.value.code == "zero_family"
    with pytest.raises(hk.HankelnessError) as e:
        hk.bounded_basis_extraction(list(np.eye(3)))
    assert e.value.code == "full_rank"


def test_extraction_bound_on_rank_deficient_draws():
    rng = np.random.default_rng(77)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        r = int(rng.integers(1, n))
        C = rng.standard_normal((r, n)) * 10.0 ** rng.uniform(-2, 2, n)
        # near-cancellation: one column is almost the negated sum of others
        C[:, -1] = -C[:, :-1].sum(axis=1) * (1 - 1e-3 * rng.random())
        x = rng.standard_normal((n + 2, r)) @ C
        ex = hk.bounded_basis_extraction(list(x.T))
        assert np.max(np.abs(ex.B_raw)) <= 1 + 1e-12
        assert np.max(np.abs(ex.B)) <= 2 ** (2 * n)
        scale = np.linalg.norm(x)
        assert np.linalg.norm(x[:, ex.dependent] - x[:, ex.basis] @ ex.B) <= 1e-9 * scale


# ---------------------------------------------------------------- structured decomposition


def test_huw_analytic_phi_branch(rng):
    phi = sym.random_laurent(rng, 2, 3, 0, 3)
    psi = sym.random_laurent(rng, 2, 3)
    dec = hk.huw_decompose(phi, psi)
    assert dec.l == 0 and dec.U1 is None and dec.W1 is None
    assert np.all(dec.product_symbol().block == 0)
    resid, defect = hk.product_window_check(phi, psi, dec.A.A.A)
    assert resid <= 1e-10 and defect <= 1e-10


def test_huw_diagonal_pair():
    dec = hk.huw_decompose(DIAG_PHI, DIAG_PSI)
    assert dec.l == 1
    prod = dec.product_symbol()
    N = 24
    P = ops.hankel_trunc(DIAG_PHI, N) @ ops.toeplitz_trunc(DIAG_PSI, N)
    assert ops.window_residual(P, ops.hankel_trunc(prod, N), ops.interior_window(N, 4)) <= 1e-12


@pytest.mark.parametrize("seed", range(6))
def test_huw_roundtrip(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    phi, psi = hk.random_huw_instance(rng, n)
    dec = hk.huw_decompose(phi, psi)
    assert isinstance(dec, hk.HuwDecomposition)
    assert dec.condition == pytest.approx(1.0)
    for W in (dec.W1, dec.W2):
        if W is not None:
            assert W.support_bounds()[0] >= 0
    phi2, psi2 = dec.reassemble()
    assert sym.allclose(phi, phi2, -4, 4, atol=1e-10)
    assert sym.allclose(psi, psi2, -4, 4, atol=1e-10)
    N, m = 40, 10
    P = ops.hankel_trunc(phi, N) @ ops.toeplitz_trunc(psi, N)
    H = ops.hankel_trunc(dec.product_symbol(), N)
    assert ops.window_residual(P, H, ops.interior_window(N, m)) <= 1e-8


def test_huw_propagates_infeasible():
    assert isinstance(hk.huw_decompose(WBAR, WBAR), hk.Infeasible)


# ---------------------------------------------------------------- xy0


def test_xy0_identity(rng):
    zs = list(rng.standard_normal((3, 4)))
    ys = list(rng.standard_normal((3, 5)))
    assert hk.xy0_check(zs, ys, np.eye(3)) <= 1e-14


def test_xy0_two_by_two_expansion(rng):
    a, b, c, d = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    z1, z2, y1, y2 = (rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(4))
    A = np.array([[a, b], [c, d]])
    assert hk.xy0_check([z1, z2], [y1, y2], A) <= 1e-12
    # x1 = a z1 + c z2, x2 = b z1 + d z2; w1 = a* y1 + b* y2, w2 = c* y1 + d* y2
    x1, x2 = a * z1 + c * z2, b * z1 + d * z2
    w1 = np.conj(a) * y1 + np.conj(b) * y2
    w2 = np.conj(c) * y1 + np.conj(d) * y2
    lhs = np.outer(x1, y1.conj()) + np.outer(x2, y2.conj())
    rhs = np.outer(z1, w1.conj()) + np.outer(z2, w2.conj())
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_xy0_rectangular(rng):
    zs = list(rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6)))
    ys = list(rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4)))
    A = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    assert hk.xy0_check(zs, ys, A) <= 1e-12
    with pytest.raises(ValueError):
        hk.xy0_check(zs, ys, np.eye(2))
