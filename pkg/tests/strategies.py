"""Hypothesis strategies shared by the property tests."""

import numpy as np
from hypothesis import strategies as st

from haplitz import symbols as sym


@st.composite
def laurent_symbols(draw, n=None, max_degree=3, analytic=False):
    n = draw(st.integers(1, 3)) if n is None else n
    lo = 0 if analytic else draw(st.integers(-max_degree, 0))
    hi = draw(st.integers(lo, max_degree))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return sym.random_laurent(rng, n, max_degree, lo, hi, 1.0)


@st.composite
def disk_points(draw, radius=0.95):
    r = draw(st.floats(0.0, radius))
    t = draw(st.floats(0.0, 2 * np.pi))
    return complex(r * np.cos(t), r * np.sin(t))


@st.composite
def matrices(draw, n):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
