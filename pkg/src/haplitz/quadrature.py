"""Periodic trapezoid quadrature on the unit circle.

Functions here take a callable ``f(w)`` evaluated at points ``w`` on the unit
circle and returning an array whose first axis runs over the points.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

DEFAULT_NODES = 2048
MAX_NODES = 2**22

CircleFunction = Callable[[np.ndarray], np.ndarray]


class QuadratureNonConvergence(RuntimeError):
    """Doubling reached the node ceiling without meeting the tolerance."""

    def __init__(self, message: str, best: np.ndarray, nodes: int, change: float):
        super().__init__(message)
        self.best = best
        self.nodes = nodes
        self.change = change


def circle_nodes(m: int, offset: float = 0.0) -> np.ndarray:
    """``m`` equispaced points ``exp(i(2*pi*j/m + offset*2*pi/m))``."""
    theta = 2.0 * np.pi * (np.arange(m) + offset) / m
    return np.exp(1j * theta)


def trapezoid_coefficients(f: CircleFunction, ks, m: int = DEFAULT_NODES) -> np.ndarray:
    """Approximate Fourier coefficients ``f^(k)`` with ``m`` trapezoid nodes.

    Returns an array of shape ``(len(ks),) + value_shape``.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
    vals = np.asarray(f(circle_nodes(m)), dtype=complex)
    spec = np.fft.fft(vals, axis=0) / m
    return spec[np.mod(ks, m)]


def _doubling(evaluate: Callable[[int], np.ndarray], tol: float, start: int, max_nodes: int):
    m = start
    prev = evaluate(m)
    change = np.inf
    while m < max_nodes:
        m *= 2
        cur = evaluate(m)
        change = float(np.max(np.abs(cur - prev))) if cur.size else 0.0
        if change <= tol:
            return cur, m, change
        prev = cur
    raise QuadratureNonConvergence(
        f"trapezoid doubling stalled at {m} nodes (last change {change:.3e})", prev, m, change
    )


def adaptive_coefficients(
    f: CircleFunction,
    ks,
    tol: float = 1e-12,
    start: int = DEFAULT_NODES,
    max_nodes: int = MAX_NODES,
) -> tuple[np.ndarray, int]:
    """Coefficients by node doubling until two successive passes agree within ``tol``.

    Returns ``(coefficients, nodes_used)``.
    """
    vals, m, _ = _doubling(lambda m: trapezoid_coefficients(f, ks, m), tol, start, max_nodes)
    return vals, m


def poisson_weights(z: complex, w: np.ndarray) -> np.ndarray:
    """Poisson kernel ``(1-|z|^2)/|w-z|^2`` at circle points ``w``."""
    return (1.0 - abs(z) ** 2) / np.abs(w - z) ** 2


def poisson_integral(f: CircleFunction, z: complex, m: int = DEFAULT_NODES, substitute: bool = False):
    """Harmonic extension of ``f`` at ``z`` by an ``m``-node trapezoid rule.

    With ``substitute=True`` the integrand is pulled back along the disk
    automorphism sending 0 to ``z``, which turns the Poisson average into a
    plain mean and clusters nodes near ``z/|z|``.  The node set is offset by
    half a step so that points like ``w = 1`` are never sampled.
    """
    w = circle_nodes(m, offset=0.5)
    if substitute:
        pts = (w + z) / (1.0 + np.conj(z) * w)
        vals = np.asarray(f(pts), dtype=complex)
        return vals.mean(axis=0)
    vals = np.asarray(f(w), dtype=complex)
    weights = poisson_weights(z, w).reshape((-1,) + (1,) * (vals.ndim - 1))
    return (vals * weights).mean(axis=0)


def adaptive_poisson(
    f: CircleFunction,
    z: complex,
    tol: float = 1e-10,
    start: int = DEFAULT_NODES,
    max_nodes: int = MAX_NODES,
    substitute: bool = True,
) -> tuple[np.ndarray, int]:
    """Poisson integral with node doubling; returns ``(value, nodes_used)``.

    The substitution clusters nodes near ``z/|z|`` and suits smooth ``f``.
    For ``f`` with jumps it reduces to counting nodes on an arc, which is
    only first-order accurate, so pass ``substitute=False`` there.
    """
    vals, m, _ = _doubling(
        lambda m: np.asarray(poisson_integral(f, z, m, substitute)), tol, start, max_nodes
    )
    return vals, m
