import numpy as np
import pytest

from haplitz import quadrature as q


def trig(w):
    return 2.0 + 3.0 * w**2 - 1j * np.conj(w) ** 3


def test_trapezoid_exact_on_trig_polynomials():
    vals = q.trapezoid_coefficients(trig, [-3, -1, 0, 2, 5], m=64)
    np.testing.assert_allclose(vals, [-1j, 0, 2, 3, 0], atol=1e-14)


def test_adaptive_returns_node_count_and_converges():
    f = lambda w: 1.0 / (1.0 - 0.5 * w)  # noqa: E731
    vals, m = q.adaptive_coefficients(f, [0, 1, 4], tol=1e-13)
    np.testing.assert_allclose(vals, [1, 0.5, 0.0625], atol=1e-13)
    assert m >= q.DEFAULT_NODES


def test_adaptive_raises_when_ceiling_too_low():
    step = lambda w: (np.imag(w) > 0).astype(complex)  # noqa: E731
    with pytest.raises(q.QuadratureNonConvergence) as info:
        q.adaptive_coefficients(step, [1], tol=1e-15, start=64, max_nodes=1024)
    assert info.value.nodes == 1024
    assert info.value.best.shape == (1,)


@pytest.mark.parametrize("z", [0.0, 0.5, 0.3 + 0.4j, -0.9j])
def test_poisson_reproduces_harmonic_functions(z):
    f = lambda w: np.stack([np.ones_like(w), np.conj(w), w**2 + np.conj(w) ** 3], axis=-1)  # noqa: E731
    val = q.poisson_integral(f, z, m=512)
    np.testing.assert_allclose(val, [1.0, np.conj(z), z**2 + np.conj(z) ** 3], atol=1e-12)


def test_substitution_helps_near_the_boundary():
    z = 0.97
    f = lambda w: np.abs(w - 1.0) ** 2  # = 2 - w - conj(w)  # noqa: E731
    val, _ = q.adaptive_poisson(f, z, tol=1e-12)
    assert val == pytest.approx(2 - 2 * z, abs=1e-10)


def test_poisson_weights_average_to_one():
    w = q.circle_nodes(256, 0.5)
    assert q.poisson_weights(0.4 - 0.2j, w).mean() == pytest.approx(1.0, abs=1e-14)
