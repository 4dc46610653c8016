import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from haplitz import mobius
from haplitz import operators as ops
from haplitz import symbols as sym

from strategies import disk_points

POINTS = [0.0, 0.5, 0.3 + 0.4j]
W = ops.interior_window(64, 16)


def frame(z, N=64, n=2):
    return mobius.MobiusFrame(z, N + mobius.kernel_pad(z) + 8, n)


def window_zero(X, Wn=W):
    return float(np.max(np.abs(ops.window_of(X, Wn))))


@pytest.mark.parametrize("z", POINTS)
def test_model_space_projection(z):
    f = frame(z)
    C = f.C
    assert np.allclose(C.data @ C.data, C.data, atol=1e-10)
    assert np.allclose(C.data, C.data.conj().T, atol=1e-12)
    I = ops.identity_op(2, f.N)
    defect = I - f.phi @ f.phi.H
    assert ops.window_residual(defect, C, W) <= 1e-10
    K = f.kernel_vectors()
    kz_bar = f.kernel_vectors(conjugate=True)
    H = ops.rank_one_sum([(kz_bar[:, i], K[:, i]) for i in range(2)], n=2)
    assert ops.window_residual(f.hankel_conj, H, W) <= 1e-10 + f.tail_bound


def test_mobius_at_origin_is_projection_onto_constants():
    f = mobius.MobiusFrame(0.0, 16, 3)
    assert np.array_equal(f.hankel_conj.data, ops.constants_projection(3, 16).data)


@pytest.mark.parametrize("z", POINTS)
def test_delta_examples(z, rng):
    f = frame(z)
    assert window_zero(mobius.delta_z(ops.identity_op(2, f.N), f)) <= 1e-10
    T = ops.toeplitz_trunc(sym.random_laurent(rng, 2, 3), f.N)
    assert window_zero(mobius.delta_z(T, f)) <= 1e-10


@pytest.mark.parametrize("z", POINTS)
def test_omega_kills_hankel_and_factors_products(z, rng):
    f = frame(z)
    a, b = sym.random_laurent(rng, 2, 3), sym.random_laurent(rng, 2, 3)
    Ha = ops.hankel_trunc(a, f.N)
    assert window_zero(mobius.omega_z(Ha, f)) <= 1e-10
    X = Ha @ ops.toeplitz_trunc(b, f.N)
    xs = Ha.data @ f.kernel_vectors()
    ys = ops.hankel_trunc(b, f.N).H.data @ f.kernel_vectors(conjugate=True)
    R = ops.rank_one_sum(list(zip(xs.T, ys.T)), n=2)
    assert ops.window_residual(mobius.omega_z(X, f), R, W) <= 1e-10


def test_origin_reduces_to_shift_forms(rng):
    f = mobius.MobiusFrame(0.0, 20, 2)
    X = ops.from_dense(rng.standard_normal((40, 40)), 2)
    S = ops.shift_op(2, 20)
    assert np.allclose(mobius.delta_z(X, f).data, (X - S.H @ X @ S).data)
    assert np.allclose(mobius.omega_z(X, f).data, (X @ S - S.H @ X).data)


@given(disk_points(0.9), st.integers(0, 2**32 - 1))
def test_omega_adjoint_relation(z, seed):
    r = np.random.default_rng(seed)
    f = frame(z, N=40)
    X = ops.from_dense(r.standard_normal((f.N * 2,) * 2) + 1j * r.standard_normal((f.N * 2,) * 2), 2)
    lhs = mobius.omega_z(X.H, f)
    rhs = -mobius.omega_z(X, mobius.bar_frame(f)).H
    Wn = ops.interior_window(40, 8)
    assert ops.window_residual(lhs, rhs, Wn) <= 1e-10 * max(1.0, ops.frob_norm(X))


@given(disk_points(0.95))
def test_kernel_tail_control(z):
    N = 64
    k = sym.kernel_kz(z, N)
    assert np.linalg.norm(k) ** 2 >= 1 - abs(z) ** (2 * N) - 1e-15


@pytest.mark.parametrize("name", sorted(mobius.REGISTRY))
@pytest.mark.parametrize("z", POINTS)
def test_every_registered_identity_passes(name, z):
    rng = np.random.default_rng(11)
    env = {k: sym.random_laurent(rng, 2, 3) for k in "abcd"}
    rep = mobius.verify_identity(name, env, z, N=64, margin=16, seed=11)
    assert rep.passed, (name, z, rep.residual)


def test_ccc_with_blaschke_tail():
    a = sym.truncate(sym.blaschke_conj(0.3, 2), -40, 40)
    rep = mobius.verify_identity("ccc", {"a": a}, 0.5, N=64, margin=16, tol=1e-8)
    assert rep.passed


def test_unknown_identity():
    with pytest.raises(KeyError):
        mobius.verify_identity("nope", {})


def test_gram_trace_examples(rng):
    e0 = np.eye(8)[0]
    assert mobius.gram_trace_check([e0], [e0]) == pytest.approx((1.0, 1.0))
    Q = np.linalg.qr(rng.standard_normal((16, 3)))[0]
    lhs, rhs = mobius.gram_trace_check(list(Q.T), list(Q.T))
    assert lhs == pytest.approx(3.0) and rhs == pytest.approx(3.0)
    xs = list(rng.standard_normal((4, 32)) + 1j * rng.standard_normal((4, 32)))
    ys = list(rng.standard_normal((4, 32)) + 1j * rng.standard_normal((4, 32)))
    lhs, rhs = mobius.gram_trace_check(xs, ys)
    assert abs(lhs - rhs) <= 1e-12 * lhs


@pytest.mark.parametrize("z", POINTS)
def test_rank_bounds(z, rng):
    env = {k: sym.random_laurent(rng, 2, 3) for k in "abc"}
    observed, bound = mobius.rank_bound_check("T(a)", env, z)
    assert observed <= 2 and bound == 2
    observed, _ = mobius.rank_bound_check("H(a)", env, z)
    assert observed == 0
    observed, bound = mobius.rank_bound_check("H(a)*T(b)", env, z)
    assert observed <= 2
    observed, bound = mobius.rank_bound_check("T(a)*T(b)*T(c)", env, z)
    assert observed <= bound == 6


def test_rank_bound_parity_error(rng):
    env = {k: sym.random_laurent(rng, 1, 2) for k in "ab"}
    from haplitz.wordalg import ParityError

    with pytest.raises(ParityError):
        mobius.rank_bound_check("H(a)*H(b)", env, 0.3)
