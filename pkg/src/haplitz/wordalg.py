"""Formal words in block Toeplitz / Hankel atoms and their normal form.

Two rewrite rules, both exact operator identities, drive everything::

    H_a H_b  ->  T_{a~ b} - T_{a~} T_b
    H_a T_b  ->  H_{a b}  - T_{a~} H_b

Applying them until no Hankel atom is followed by another atom leaves every
word as a run of Toeplitz atoms with at most one trailing Hankel atom.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping

import numpy as np

from . import operators as ops
from . import symbols as sym
from .symbols import MatrixSymbol


class WordError(ValueError):
    pass


class ParityError(WordError):
    pass


class UnboundName(WordError):
    pass


class InsufficientTruncation(WordError):
    def __init__(self, N: int, required: int):
        super().__init__(f"N={N} is too small; at least {required} is required")
        self.N = N
        self.required = required


# --------------------------------------------------------------------------
# symbol expressions


class SymbolExpr:
    """Base of the unevaluated symbol calculus; instances are hashable trees."""

    def __mul__(self, other: "SymbolExpr") -> "SymbolExpr":
        return product(self, other)

    def tilde(self) -> "SymbolExpr":
        return tilde(self)

    def star(self) -> "SymbolExpr":
        return star(self)


@dataclass(frozen=True)
class Name(SymbolExpr):
    name: str
    tilde_: bool = False
    star_: bool = False

    def __str__(self):
        return self.name + ("~" if self.tilde_ else "") + ("*" if self.star_ else "")


@dataclass(frozen=True)
class Prod(SymbolExpr):
    factors: tuple[SymbolExpr, ...]

    def __str__(self):
        return ".".join(_wrap(f) for f in self.factors)


@dataclass(frozen=True)
class Tilde(SymbolExpr):
    """Tilde of a node that does not commute with it structurally (a part projection)."""

    arg: SymbolExpr

    def __str__(self):
        return f"({self.arg})~"


@dataclass(frozen=True)
class Star(SymbolExpr):
    arg: SymbolExpr

    def __str__(self):
        return f"({self.arg})*"


@dataclass(frozen=True)
class ConstMul(SymbolExpr):
    """``C . arg`` (side ``left``) or ``arg . C`` (side ``right``); ``C`` stored as nested tuples."""

    arg: SymbolExpr
    matrix: tuple[tuple[complex, ...], ...]
    side: str = "left"

    @staticmethod
    def of(arg: SymbolExpr, C, side: str = "left") -> "ConstMul":
        C = np.atleast_2d(np.asarray(C, dtype=complex))
        return ConstMul(arg, tuple(tuple(complex(x) for x in row) for row in C), side)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex)

    def __str__(self):
        c = "C" + str(np.array(self.matrix).shape)
        return f"{c}.{_wrap(self.arg)}" if self.side == "left" else f"{_wrap(self.arg)}.{c}"


@dataclass(frozen=True)
class Plus(SymbolExpr):
    arg: SymbolExpr

    def __str__(self):
        return f"({self.arg})+"


@dataclass(frozen=True)
class Minus(SymbolExpr):
    arg: SymbolExpr

    def __str__(self):
        return f"({self.arg})-"


def _wrap(e: SymbolExpr) -> str:
    return str(e)


def product(*factors: SymbolExpr) -> SymbolExpr:
    flat: list[SymbolExpr] = []
    for f in factors:
        flat.extend(f.factors if isinstance(f, Prod) else (f,))
    return flat[0] if len(flat) == 1 else Prod(tuple(flat))


def tilde(e: SymbolExpr) -> SymbolExpr:
    """Push ``~`` towards the leaves; it is multiplicative and order preserving."""
    if isinstance(e, Name):
        return Name(e.name, not e.tilde_, e.star_)
    if isinstance(e, Prod):
        return Prod(tuple(tilde(f) for f in e.factors))
    if isinstance(e, ConstMul):
        return ConstMul(tilde(e.arg), e.matrix, e.side)
    if isinstance(e, Star):
        return star(tilde(e.arg))
    if isinstance(e, Tilde):
        return e.arg
    return Tilde(e)


def star(e: SymbolExpr) -> SymbolExpr:
    """Push ``*`` towards the leaves; it reverses products and adjoints constants."""
    if isinstance(e, Name):
        return Name(e.name, e.tilde_, not e.star_)
    if isinstance(e, Prod):
        return Prod(tuple(star(f) for f in reversed(e.factors)))
    if isinstance(e, ConstMul):
        C = e.array.conj().T
        return ConstMul.of(star(e.arg), C, "right" if e.side == "left" else "left")
    if isinstance(e, Star):
        return e.arg
    if isinstance(e, Tilde):
        return tilde(star(e.arg))
    return Star(e)


def names_of(e: SymbolExpr) -> set[str]:
    if isinstance(e, Name):
        return {e.name}
    if isinstance(e, Prod):
        return set().union(*(names_of(f) for f in e.factors))
    return names_of(e.arg)


class Evaluator:
    """Evaluates expressions against an environment, sharing common subtrees."""

    def __init__(self, env: Mapping[str, MatrixSymbol], degree: int | None = None):
        self.env = env
        self.degree = degree
        self._cache: dict[SymbolExpr, MatrixSymbol] = {}

    def __call__(self, e: SymbolExpr) -> MatrixSymbol:
        hit = self._cache.get(e)
        if hit is None:
            hit = self._cache[e] = self._eval(e)
        return hit

    def _mul(self, a: MatrixSymbol, b: MatrixSymbol) -> MatrixSymbol:
        try:
            return sym.mul(a, b)
        except sym.SupportOverflow:
            if self.degree is None:
                raise
            return sym.mul(a, b, self.degree)

    def _eval(self, e: SymbolExpr) -> MatrixSymbol:
        if isinstance(e, Name):
            if e.name not in self.env:
                raise UnboundName(f"no symbol bound to {e.name!r}")
            s = self.env[e.name]
            if e.tilde_:
                s = sym.tilde(s)
            if e.star_:
                s = sym.star(s)
            return s
        if isinstance(e, Prod):
            return reduce(self._mul, (self(f) for f in e.factors))
        if isinstance(e, Tilde):
            return sym.tilde(self(e.arg))
        if isinstance(e, Star):
            return sym.star(self(e.arg))
        if isinstance(e, ConstMul):
            return sym.const_mul(self(e.arg), e.array, e.side)
        if isinstance(e, Plus):
            return sym.plus_part(self(e.arg))
        if isinstance(e, Minus):
            return sym.minus_part(self(e.arg))
        raise TypeError(f"not a symbol expression: {e!r}")


# --------------------------------------------------------------------------
# words


@dataclass(frozen=True)
class Atom:
    kind: str  # "T" or "H"
    expr: SymbolExpr

    def __post_init__(self):
        if self.kind not in ("T", "H"):
            raise WordError(f"atom kind must be T or H, not {self.kind!r}")

    def __str__(self):
        return f"{self.kind}({self.expr})"


def T(e) -> Atom:
    return Atom("T", Name(e) if isinstance(e, str) else e)


def H(e) -> Atom:
    return Atom("H", Name(e) if isinstance(e, str) else e)


@dataclass(frozen=True)
class OperatorWord:
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        if not self.atoms:
            raise WordError("empty word")

    @property
    def h_count(self) -> int:
        return sum(a.kind == "H" for a in self.atoms)

    @property
    def is_normal(self) -> bool:
        return all(a.kind == "T" for a in self.atoms[:-1])

    def __len__(self):
        return len(self.atoms)

    def __mul__(self, other: "OperatorWord") -> "OperatorWord":
        return OperatorWord(self.atoms + other.atoms)

    def __str__(self):
        return "*".join(str(a) for a in self.atoms)


@dataclass(frozen=True)
class WordSum:
    terms: tuple[tuple[complex, OperatorWord], ...]

    @staticmethod
    def of(*words) -> "WordSum":
        return WordSum(tuple((1 + 0j, as_word(w)) for w in words))

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: "WordSum") -> "WordSum":
        return WordSum(self.terms + other.terms)

    def scaled(self, c: complex) -> "WordSum":
        return WordSum(tuple((c * k, w) for k, w in self.terms))

    def collect(self, tol: float = 0.0) -> "WordSum":
        """Merge repeated words, drop vanishing coefficients, keep first-seen order."""
        acc: dict[OperatorWord, complex] = {}
        for c, w in self.terms:
            acc[w] = acc.get(w, 0j) + c
        return WordSum(tuple((c, w) for w, c in acc.items() if abs(c) > tol))

    def __str__(self):
        return pretty(self)


def as_word(w) -> OperatorWord:
    if isinstance(w, OperatorWord):
        return w
    if isinstance(w, Atom):
        return OperatorWord((w,))
    if isinstance(w, str):
        ws = parse(w)
        if len(ws) != 1 or ws.terms[0][0] != 1:
            raise WordError(f"{w!r} is not a single word")
        return ws.terms[0][1]
    return OperatorWord(tuple(w))


def as_word_sum(ws) -> WordSum:
    if isinstance(ws, WordSum):
        return ws
    if isinstance(ws, str):
        return parse(ws)
    return WordSum.of(ws)


def h_parity(word) -> str:
    return "odd" if as_word(word).h_count % 2 else "even"


# --------------------------------------------------------------------------
# rewriting


def _rewrite(word: OperatorWord, i: int) -> tuple[tuple[complex, OperatorWord], ...]:
    """Eliminate the Hankel atom at position ``i`` against its right neighbour."""
    head, (h, nxt), tail = word.atoms[:i], word.atoms[i : i + 2], word.atoms[i + 2 :]
    a, b = h.expr, nxt.expr
    at = tilde(a)
    if nxt.kind == "H":
        first = head + (Atom("T", product(at, b)),) + tail
        second = head + (Atom("T", at), Atom("T", b)) + tail
    else:
        first = head + (Atom("H", product(a, b)),) + tail
        second = head + (Atom("T", at), Atom("H", b)) + tail
    return ((1 + 0j, OperatorWord(first)), (-1 + 0j, OperatorWord(second)))


def _redexes(word: OperatorWord) -> list[int]:
    return [i for i, a in enumerate(word.atoms[:-1]) if a.kind == "H"]


STRATEGIES = ("leftmost", "rightmost", "random")


def normalize(ws, strategy: str = "leftmost", rng: np.random.Generator | None = None,
              collect: bool = True) -> WordSum:
    """Rewrite until every word is Toeplitz atoms followed by at most one Hankel atom.

    ``strategy`` picks which eligible Hankel atom is eliminated first; all
    choices give operator-equal results.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if strategy == "random" and rng is None:
        rng = np.random.default_rng(0)
    ws = as_word_sum(ws)
    done: list[tuple[complex, OperatorWord]] = []
    stack = list(reversed(ws.terms))
    while stack:
        c, w = stack.pop()
        red = _redexes(w)
        if not red:
            done.append((c, w))
            continue
        if strategy == "leftmost":
            i = red[0]
        elif strategy == "rightmost":
            i = red[-1]
        else:
            i = red[int(rng.integers(len(red)))]
        for k, nw in reversed(_rewrite(w, i)):
            stack.append((c * k, nw))
    out = WordSum(tuple(done))
    return out.collect() if collect else out


def is_normal(ws) -> bool:
    return all(w.is_normal for _, w in as_word_sum(ws))


# --------------------------------------------------------------------------
# numeric evaluation


def expr_spread(e: SymbolExpr, env: Mapping[str, MatrixSymbol]) -> int:
    """Largest |degree| an expression can carry, counting products additively."""
    if isinstance(e, Name):
        if e.name not in env:
            raise UnboundName(f"no symbol bound to {e.name!r}")
        lo, hi = env[e.name].support_bounds()
        if lo is None or hi is None:
            return 0
        return max(abs(lo), abs(hi), 0)
    if isinstance(e, Prod):
        return sum(expr_spread(f, env) for f in e.factors)
    return expr_spread(e.arg, env)


def word_spread(word, env: Mapping[str, MatrixSymbol]) -> int:
    return sum(expr_spread(a.expr, env) for a in as_word(word).atoms)


def required_padding(ws, env: Mapping[str, MatrixSymbol]) -> int:
    """Rows and columns near the truncation edge that a section of ``ws`` can get wrong."""
    ws = as_word_sum(ws)
    return max((word_spread(w, env) for _, w in ws), default=0)


def evaluate(ws, env: Mapping[str, MatrixSymbol], N: int, evaluator: Evaluator | None = None,
             window: int | None = None) -> ops.TruncatedOperator:
    """Dense ``N``-section of the word sum: each atom truncated, then multiplied.

    When ``window`` is given the section must keep a margin of
    ``required_padding`` beyond it, otherwise ``InsufficientTruncation`` is raised.
    """
    ws = as_word_sum(ws)
    if not ws.terms:
        raise WordError("empty word sum")
    n = {s.n for s in env.values()}
    if len(n) != 1:
        raise WordError("environment symbols must share one block size")
    n = n.pop()
    if window is not None:
        need = window + required_padding(ws, env)
        if N < need:
            raise InsufficientTruncation(N, need)
    ev = evaluator if evaluator is not None else Evaluator(env, degree=4 * N)
    mats: dict[Atom, ops.TruncatedOperator] = {}

    def atom_op(a: Atom) -> ops.TruncatedOperator:
        if a not in mats:
            s = ev(a.expr)
            mats[a] = ops.toeplitz_trunc(s, N) if a.kind == "T" else ops.hankel_trunc(s, N)
        return mats[a]

    total = np.zeros((N * n, N * n), dtype=complex)
    for c, w in ws:
        total += c * reduce(lambda x, y: x @ y, (atom_op(a).data for a in w.atoms))
    return ops.from_dense(total, n, provenance=f"word sum ({len(ws)} terms)")


def certify(ws, env: Mapping[str, MatrixSymbol], N: int = 32, strategy: str = "leftmost",
            rng: np.random.Generator | None = None) -> tuple[WordSum, float]:
    """Normalize ``ws`` and return the interior-window residual between both evaluations."""
    ws = as_word_sum(ws)
    nf = normalize(ws, strategy, rng)
    pad = required_padding(ws, env)
    M = N + 2 * pad
    ev = Evaluator(env, degree=4 * M)
    A = evaluate(ws, env, M, ev)
    if not nf.terms:
        B = ops.zero_op(A.n, M)
    else:
        B = evaluate(nf, env, M, ev)
    W = ops.WindowSpec((0, N), (0, N))
    return nf, ops.window_residual(A, B, W)


# --------------------------------------------------------------------------
# text form

_ATOM = re.compile(r"\s*([TH])\s*\(\s*([^()]*?)\s*\)\s*")
_FACTOR = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)([~*]*)$")


def _parse_factor(tok: str) -> Name:
    m = _FACTOR.match(tok.strip())
    if not m:
        raise WordError(f"bad symbol reference {tok!r}")
    name, marks = m.groups()
    return Name(name, marks.count("~") % 2 == 1, marks.count("*") % 2 == 1)


def _parse_word(text: str) -> OperatorWord:
    atoms = []
    for part in _split_top(text, "*"):
        m = _ATOM.fullmatch(part)
        if not m:
            raise WordError(f"bad atom {part.strip()!r}")
        kind, body = m.groups()
        if not body:
            raise WordError(f"empty atom {part.strip()!r}")
        atoms.append(Atom(kind, product(*(_parse_factor(f) for f in body.split(".")))))
    return OperatorWord(tuple(atoms))


def _split_top(text: str, sep: str) -> list[str]:
    """Split on ``sep`` outside parentheses (``*`` inside an atom is a marker)."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise WordError("unbalanced parentheses")
        if ch == sep and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise WordError("unbalanced parentheses")
    out.append("".join(cur))
    return out


_COEF = re.compile(r"\s*(?:\(([^()]*j)\)|(\d+(?:\.\d*)?(?:e[+-]?\d+)?))\s+(?=[TH])")


def parse(text: str) -> WordSum:
    """Parse ``T(a~)*H(b*)`` or a signed sum such as ``T(a~.b) - 2 T(a~)*T(b)``.

    Factors inside an atom may be joined by ``.``; ``~`` and ``*`` after a name
    apply tilde and star.
    """
    if not text.strip():
        raise WordError("empty input")
    pieces, cur, depth, sign = [], [], 0, 1.0
    for ch in text:
        depth += (ch == "(") - (ch == ")")
        if depth == 0 and ch in "+-" and not _in_exponent(cur):
            if "".join(cur).strip():
                pieces.append((sign, "".join(cur)))
            elif pieces:
                raise WordError("dangling sign")
            sign = 1.0 if ch == "+" else -1.0
            cur = []
            continue
        cur.append(ch)
    if not "".join(cur).strip():
        raise WordError("trailing sign")
    pieces.append((sign, "".join(cur)))
    terms = []
    for sgn, body in pieces:
        coef = 1 + 0j
        m = _COEF.match(body)
        if m:
            coef = complex(m.group(1) or m.group(2))
            body = body[m.end():]
        terms.append((sgn * coef, _parse_word(body)))
    return WordSum(tuple(terms))


def _in_exponent(cur: list[str]) -> bool:
    """True right after the ``e`` of a numeric coefficient such as ``1e-3``."""
    t = "".join(cur).strip()
    return bool(re.fullmatch(r"\(?[\d.]+e", t))


def pretty(ws) -> str:
    ws = as_word_sum(ws)
    if not ws.terms:
        return "0"
    parts = []
    for idx, (c, w) in enumerate(ws.terms):
        if c == 1:
            coef, sign = "", "+"
        elif c == -1:
            coef, sign = "", "-"
        else:
            re_, im = c.real, c.imag
            if im == 0:
                sign, coef = ("-" if re_ < 0 else "+"), f"{abs(re_):g} "
            else:
                sign, coef = "+", f"({c:g}) "
        if idx == 0:
            parts.append(("-" if sign == "-" else "") + coef + str(w))
        else:
            parts.append(f" {sign} {coef}{w}")
    return "".join(parts)


def random_word(rng: np.random.Generator, length: int, names: Iterable[str] = ("a", "b", "c"),
                p_hankel: float = 0.5, marks: bool = True) -> OperatorWord:
    names = list(names)
    atoms = []
    for _ in range(length):
        nm = names[int(rng.integers(len(names)))]
        e = Name(nm, bool(marks and rng.random() < 0.3), bool(marks and rng.random() < 0.3))
        atoms.append(Atom("H" if rng.random() < p_hankel else "T", e))
    return OperatorWord(tuple(atoms))
