"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from haplitz import compactness as cm
from haplitz import hankelness as hk
from haplitz import mobius
from haplitz import operators as ops
from haplitz import symbols as sym
from haplitz import wordalg as wa

RESULTS: dict[int, str] = {}
POINTS = (0.0, 0.5, 0.3 + 0.4j)
DRAWS = 20
WBAR = sym.monomial(-1)


@contextmanager
def criterion(k: int, title: str):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        RESULTS[k] = f"criterion {k}: FAIL  {title} ({type(exc).__name__}: {str(exc).splitlines()[0][:120]})"
        raise
    else:
        RESULTS[k] = f"criterion {k}: PASS  {title} [{time.perf_counter() - t0:.1f}s]"
    finally:
        print(RESULTS[k])


def suite_draw(seed: int):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    deg = int(rng.integers(1, 5))
    env = {k: sym.random_laurent(rng, n, deg, -deg, deg, 1.0) for k in "abcd"}
    return n, env


def test_identity_suite():
    with criterion(1, "identity suite over 20 draws, residual <= 1e-10, runtime <= 60 s"):
        t0 = time.perf_counter()
        worst = 0.0
        for seed in range(DRAWS):
            _, env = suite_draw(seed)
            for z in POINTS:
                for name in mobius.ACCEPTANCE_IDENTITIES:
                    rep = mobius.verify_identity(name, env, z, N=64, margin=16, seed=seed)
                    assert rep.passed, (name, seed, z, rep.residual)
                    worst = max(worst, rep.residual)
        elapsed = time.perf_counter() - t0
        assert worst <= 1e-10
        assert elapsed <= 60.0, f"took {elapsed:.1f}s"


def test_hankel_verdicts():
    with criterion(2, "50 structured instances feasible, scalar wbar pair infeasible"):
        rng = np.random.default_rng(2)
        for i in range(50):
            n = 1 + i % 3
            phi, psi = hk.random_huw_instance(rng, n)
            res = hk.find_feasible_A(phi, psi, float(2 ** (2 * n)))
            assert isinstance(res, hk.Feasible), i
            resid, _ = hk.product_window_check(phi, psi, res.A.A)
            assert resid <= 1e-8, (i, resid)
        res = hk.find_feasible_A(WBAR, WBAR)
        assert isinstance(res, hk.Infeasible) and res.margin > 0
        N = 40
        P = ops.hankel_trunc(WBAR, N) @ ops.toeplitz_trunc(WBAR, N)
        assert ops.is_hankel_window(P, ops.interior_window(N, 8)) >= 0.5


def test_rank_bounds():
    with criterion(3, "rank bounds for Omega of H T and Delta of Toeplitz words"):
        for seed in range(DRAWS):
            n, env = suite_draw(seed)
            for z in POINTS:
                observed, _ = mobius.rank_bound_check("H(a)*T(b)", env, z)
                assert observed <= n, (seed, z, observed)
                for word in ("T(a)", "T(a)*T(b)", "T(a)*T(b)*T(c)"):
                    m = word.count("T")
                    observed, bound = mobius.rank_bound_check(word, env, z)
                    assert observed <= m * n == bound, (seed, z, word, observed)


def test_closed_form_curve():
    with criterion(4, "wbar pair: c1 = (1-r^2)^2 within 1e-8, Gamma1 = sqrt(1-r^2) within 1e-4"):
        for r in (0.5, 0.8, 0.95):
            assert abs(cm.c1_trace(WBAR, WBAR, r).value - (1 - r * r) ** 2) <= 1e-8
            assert abs(cm.gamma1(WBAR, WBAR, r, d=4.0).value - math.sqrt(1 - r * r)) <= 1e-4


def test_two_path_agreement():
    with criterion(5, "series trace vs truncated Frobenius^2 within 1e-6 at |z| <= 0.9"):
        symbols_ = (sym.laurent({-1: np.eye(2)}), sym.blaschke_conj(0.5))
        for phi in symbols_:
            for r in (0.0, 0.3, 0.6, 0.9):
                for theta in (0.0, 1.0, 2.5, 4.0):
                    z = sym.DiskPoint.polar(r, theta)
                    series, truncated = cm.trace_crosscheck(phi, z)
                    assert abs(series - truncated) <= 1e-6, (phi, z, series, truncated)


def test_separation(data_dir):
    with criterion(6, "finite-support pair decays below 1e-2 at r = 0.99; half-indicator floor"):
        phi = sym.load_symbol(data_dir / "small_wbar.json")
        grid = cm.SweepGrid((0.0, 1.0, 2.5, 4.5), (0.9, 0.93, 0.96, 0.99))
        rep = cm.radial_sweep(phi, phi, grid, which=["c1", "c2", "gamma2"], seed=6)
        assert not rep.failures
        for theta in grid.rays:
            curves = np.array([rep.series(theta, q)[1] for q in ("c1", "c2", "gamma2")])
            worst = curves.max(axis=0)
            assert worst[-1] <= 1e-2, (theta, worst[-1])
            assert np.all(np.diff(worst) < 0), (theta, worst)
        h = sym.half_indicator()
        rep = cm.radial_sweep(h, h, cm.SweepGrid((0.0,), (0.9, 0.95, 0.98, 0.99, 0.995)), which=["c1"])
        _, c1 = rep.series(0.0, "c1")
        assert np.all(c1 >= 0.0155), c1


def test_gamma_consistency():
    with criterion(7, "Gamma multi-start agreement within 1e-4; omega <= C Gamma1"):
        rng = np.random.default_rng(7)
        pairs = [(WBAR, WBAR)] + [(sym.random_laurent(rng, 2, 2), sym.random_laurent(rng, 2, 2))
                                  for _ in range(2)]
        for phi, psi in pairs:
            C = max(sym.sup_norm(phi), sym.sup_norm(psi))
            for z in (0.5, 0.3 + 0.4j, -0.8):
                g1 = cm.gamma1(phi, psi, z, starts=5, seed=1)
                g2 = cm.gamma2(phi, psi, z, starts=5, seed=1)
                assert g1.spread <= 1e-4 and g2.spread <= 1e-4, (z, g1.spread, g2.spread)
                assert cm.omega_norm(phi, psi, z) <= C * g1.value + 1e-9


def test_rewriter_certification():
    with criterion(8, "30 random words certify within 1e-10, parity preserved"):
        rng = np.random.default_rng(8)
        for _ in range(30):
            n = int(rng.integers(1, 3))
            env = {k: sym.random_laurent(rng, n, 3) for k in "abc"}
            w = wa.random_word(rng, int(rng.integers(1, 7)))
            nf, resid = wa.certify(wa.WordSum.of(w), env, N=32)
            assert resid <= 1e-10, (str(w), resid)
            for _, v in nf:
                assert wa.h_parity(v) == wa.h_parity(w)
                if wa.h_parity(w) == "even":
                    assert all(a.kind == "T" for a in v.atoms)


def test_embedding_fidelity():
    with criterion(9, "two embedded scalar pairs reproduce the scalar sum within 1e-10"):
        rng = np.random.default_rng(9)
        pairs = [(sym.random_laurent(rng, 1, 3), sym.random_laurent(rng, 1, 3)) for _ in range(2)]
        Phi, Psi = cm.embed_sum(pairs)
        N, m = 48, 8
        P = (ops.hankel_trunc(Phi, N) @ ops.toeplitz_trunc(Psi, N)).data.reshape(N, 2, N, 2)[:, 0, :, 0]
        S = sum((ops.hankel_trunc(f, N) @ ops.toeplitz_trunc(g, N)).data for f, g in pairs)
        k = N - m
        assert np.max(np.abs(P[:k, :k] - S[:k, :k])) <= 1e-10
