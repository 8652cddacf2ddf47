"""Sparse multivariate polynomials with exact rational coefficients.

A :class:`Poly` lives in a ring given by an ordered tuple of variable names and
stores a map from exponent vectors to nonzero :class:`~fractions.Fraction`
coefficients.  Degrees may be weighted by positive integers (one weight per
variable); the zero polynomial has degree :data:`NEG_INF`.

Text form (canonical, exact, re-parseable)::

    >>> x2 = Poly.parse("1 - x^2", ("x",))
    >>> str(x2)
    '-1 * x^2 + 1'
    >>> Poly.parse(str(x2), ("x",)) == x2
    True
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import linalg
from .errors import DimensionMismatch, ParseError

NEG_INF = float("-inf")


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(value)


@dataclass(frozen=True)
class DegreeWeights:
    """Positive integer weight per variable."""

    a: tuple

    def __post_init__(self):
        a = tuple(int(v) for v in self.a)
        if any(v < 1 for v in a):
            raise ValueError(f"degree weights must be >= 1, got {a}")
        object.__setattr__(self, "a", a)

    def __len__(self):
        return len(self.a)

    def __iter__(self):
        return iter(self.a)

    def __getitem__(self, i):
        return self.a[i]

    @classmethod
    def ones(cls, d):
        return cls((1,) * d)


def _weights(w, d):
    if w is None:
        return (1,) * d
    w = tuple(w.a if isinstance(w, DegreeWeights) else w)
    if len(w) != d:
        raise DimensionMismatch(f"weights of length {len(w)} for {d} variables")
    return w


def monomial_degree(exp, w):
    return sum(e * a for e, a in zip(exp, w))


def monomials_upto(d, cap, weights=None):
    """Exponent vectors of weighted degree <= cap, in canonical basis order.

    The order is graded by weighted degree; within a degree, larger powers of
    the earlier variables come first (x^2, xy, y^2).
    """
    w = _weights(weights, d)
    if cap < 0:
        return []
    ranges = [range(cap // a + 1) for a in w]
    out = [e for e in itertools.product(*ranges) if monomial_degree(e, w) <= cap]
    out.sort(key=lambda e: (monomial_degree(e, w), tuple(-v for v in e)))
    return out


def _term_key(exp):
    # deglex: the maximum is the leading term
    return (sum(exp), exp)


class Poly:
    """Immutable sparse polynomial over named variables."""

    __slots__ = ("variables", "_terms", "_hash")

    def __init__(self, variables: Sequence[str], terms: Mapping | None = None):
        self.variables = tuple(variables)
        d = len(self.variables)
        clean = {}
        if terms:
            for exp, c in terms.items():
                exp = tuple(int(e) for e in exp)
                if len(exp) != d:
                    raise DimensionMismatch(
                        f"exponent {exp} does not match variables {self.variables}"
                    )
                if any(e < 0 for e in exp):
                    raise ValueError(f"negative exponent {exp}")
                c = as_fraction(c)
                if c:
                    clean[exp] = clean.get(exp, 0) + c
                    if not clean[exp]:
                        del clean[exp]
        self._terms = clean
        self._hash = None

    # -- construction ----------------------------------------------------
    @classmethod
    def zero(cls, variables):
        return cls(variables)

    @classmethod
    def const(cls, c, variables):
        return cls(variables, {(0,) * len(variables): c})

    @classmethod
    def var(cls, name, variables):
        variables = tuple(variables)
        if name not in variables:
            raise DimensionMismatch(f"{name!r} is not one of {variables}")
        exp = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {exp: 1})

    @classmethod
    def gens(cls, variables):
        variables = tuple(variables)
        return tuple(cls.var(v, variables) for v in variables)

    @classmethod
    def parse(cls, text, variables):
        """Parse a polynomial; ``lhs = rhs`` is read as ``lhs - rhs``."""
        text = str(text)
        if "=" in text:
            lhs, _, rhs = text.partition("=")
            if "=" in rhs:
                raise ParseError("more than one '=' in equation")
            return cls.parse(lhs, variables) - cls.parse(rhs, variables)
        return _Parser(text, tuple(variables)).parse()

    # -- basic protocol --------------------------------------------------
    @property
    def dimension(self):
        return len(self.variables)

    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        """Terms in canonical order (leading deglex term first)."""
        return sorted(self._terms.items(), key=lambda t: _term_key(t[0]), reverse=True)

    def sorted_terms(self, weights=None):
        w = _weights(weights, self.dimension)
        return sorted(
            self._terms.items(),
            key=lambda t: (monomial_degree(t[0], w), t[0]),
            reverse=True,
        )

    def coefficient(self, exp) -> Fraction:
        return self._terms.get(tuple(exp), Fraction(0))

    def is_zero(self):
        return not self._terms

    def is_constant(self):
        return all(not any(e) for e in self._terms)

    def constant_term(self):
        return self._terms.get((0,) * self.dimension, Fraction(0))

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.variables == other.variables and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self.is_constant() and self.constant_term() == other
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.variables, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self):
        return f"Poly({str(self)!r}, {self.variables})"

    def __str__(self):
        return self.to_string()

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.variables != self.variables:
                raise DimensionMismatch(
                    f"ring mismatch: {self.variables} vs {other.variables}"
                )
            return other
        if isinstance(other, (int, Fraction)):
            return Poly.const(other, self.variables)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        terms = dict(self._terms)
        for e, c in other._terms.items():
            s = terms.get(e, 0) + c
            if s:
                terms[e] = s
            else:
                terms.pop(e, None)
        return Poly._raw(self.variables, terms)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self.variables, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return Poly(self.variables)
            return Poly._raw(self.variables, {e: c * other for e, c in self._terms.items()})
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        terms = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = terms.get(e, 0) + c1 * c2
                if s:
                    terms[e] = s
                else:
                    del terms[e]
        return Poly._raw(self.variables, terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (1 / Fraction(other))
        return NotImplemented

    def __pow__(self, n):
        n = int(n)
        if n < 0:
            raise ValueError("negative power")
        result = Poly.const(1, self.variables)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    @classmethod
    def _raw(cls, variables, terms):
        p = cls.__new__(cls)
        p.variables = variables
        p._terms = terms
        p._hash = None
        return p

    def diff(self, var, times=1):
        """Partial derivative by a variable name (or index)."""
        i = var if isinstance(var, int) else self._index(var)
        out = self
        for _ in range(times):
            terms = {}
            for e, c in out._terms.items():
                if e[i]:
                    ne = e[:i] + (e[i] - 1,) + e[i + 1 :]
                    terms[ne] = c * e[i]
            out = Poly._raw(self.variables, terms)
        return out

    def _index(self, name):
        try:
            return self.variables.index(name)
        except ValueError:
            raise DimensionMismatch(f"{name!r} is not one of {self.variables}") from None

    # -- degrees ---------------------------------------------------------
    def degree(self, weights=None):
        if not self._terms:
            return NEG_INF
        w = _weights(weights, self.dimension)
        return max(monomial_degree(e, w) for e in self._terms)

    def degree_in(self, var):
        i = var if isinstance(var, int) else self._index(var)
        if not self._terms:
            return NEG_INF
        return max(e[i] for e in self._terms)

    def leading_term(self):
        if not self._terms:
            raise ValueError("zero polynomial has no leading term")
        e = max(self._terms, key=_term_key)
        return e, self._terms[e]

    # -- evaluation and substitution -------------------------------------
    def __call__(self, *point):
        if len(point) == 1 and isinstance(point[0], (list, tuple, np.ndarray)):
            point = point[0]
        return evaluate(self, point)

    def compose(self, generators: Sequence["Poly"]):
        """Substitute ``generators[i]`` for the i-th variable of ``self``."""
        if len(generators) != self.dimension:
            raise DimensionMismatch(
                f"{len(generators)} generators for {self.dimension} variables"
            )
        if not generators:
            raise DimensionMismatch("no generators")
        target = generators[0].variables
        for g in generators:
            if g.variables != target:
                raise DimensionMismatch("generators live in different rings")
        powers = [dict() for _ in generators]

        def power(i, k):
            cache = powers[i]
            if k not in cache:
                cache[k] = generators[i] ** k
            return cache[k]

        out = Poly(target)
        for e, c in self._terms.items():
            term = Poly.const(c, target)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            out = out + term
        return out

    def subs(self, mapping: Mapping[str, "Poly"], variables=None):
        """Substitute named variables; unmapped variables stay themselves.

        The result lives in ``variables`` (default: the ring of the mapped
        values, or ``self.variables`` when nothing is mapped).
        """
        if variables is None:
            vals = [v for v in mapping.values() if isinstance(v, Poly)]
            variables = vals[0].variables if vals else self.variables
        variables = tuple(variables)
        gens = []
        for name in self.variables:
            if name in mapping:
                v = mapping[name]
                gens.append(v if isinstance(v, Poly) else Poly.const(v, variables))
            else:
                gens.append(Poly.var(name, variables))
        return self.compose(gens)

    def in_ring(self, variables):
        """Re-express in another variable tuple (embedding or reordering)."""
        variables = tuple(variables)
        if variables == self.variables:
            return self
        index = {v: i for i, v in enumerate(variables)}
        terms = {}
        for e, c in self._terms.items():
            ne = [0] * len(variables)
            for name, k in zip(self.variables, e):
                if k:
                    if name not in index:
                        raise DimensionMismatch(f"variable {name!r} missing from {variables}")
                    ne[index[name]] = k
            terms[tuple(ne)] = c
        return Poly._raw(variables, terms)

    def rename(self, mapping: Mapping[str, str]):
        return Poly._raw(tuple(mapping.get(v, v) for v in self.variables), dict(self._terms))

    def lambdify(self):
        """Vectorised float evaluator: array of shape (n, d) -> (n,)."""
        exps = np.array(list(self._terms.keys()) or [(0,) * self.dimension], dtype=int)
        coefs = np.array([float(c) for c in self._terms.values()] or [0.0])
        maxdeg = exps.max(axis=0) if len(exps) else np.zeros(self.dimension, int)

        def f(points):
            pts = np.atleast_2d(np.asarray(points, dtype=float))
            n = pts.shape[0]
            out = np.zeros(n)
            tables = []
            for j in range(self.dimension):
                tab = np.ones((int(maxdeg[j]) + 1, n))
                for k in range(1, int(maxdeg[j]) + 1):
                    tab[k] = tab[k - 1] * pts[:, j]
                tables.append(tab)
            for e, c in zip(exps, coefs):
                term = np.full(n, c)
                for j, k in enumerate(e):
                    if k:
                        term = term * tables[j][k]
                out += term
            return out

        return f

    def content_normalized(self):
        """Primitive integer multiple with positive leading coefficient."""
        if not self._terms:
            return self
        from math import gcd, lcm

        den = 1
        for c in self._terms.values():
            den = lcm(den, c.denominator)
        num = 0
        for c in self._terms.values():
            num = gcd(num, (c * den).numerator)
        scale = Fraction(den, num)
        if self.leading_term()[1] < 0:
            scale = -scale
        return self * scale

    # -- text ------------------------------------------------------------
    def to_string(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in self.items():
            mono = "*".join(
                (v if k == 1 else f"{v}^{k}") for v, k in zip(self.variables, e) if k
            )
            mag = abs(c)
            cs = str(mag)
            text = f"{cs} * {mono}" if mono else cs
            if not parts:
                parts.append(("-" if c < 0 else "") + text)
            else:
                parts.append(("- " if c < 0 else "+ ") + text)
        return " ".join(parts)


@dataclass(frozen=True)
class RelationSet:
    """Polynomials that vanish identically on a model's carrier."""

    generators: tuple = ()

    def __post_init__(self):
        gens = tuple(self.generators)
        for g in gens:
            if not isinstance(g, Poly) or g.is_zero():
                raise ValueError("relation generators must be nonzero polynomials")
        object.__setattr__(self, "generators", gens)

    def __len__(self):
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)


# ---------------------------------------------------------------------------
# free functions mirroring the operation contracts


def weighted_degree(p: Poly, w) -> int | float:
    """Maximum weighted exponent sum over the monomials of ``p``."""
    return p.degree(w)


def evaluate(p: Poly, point):
    point = list(point)
    if len(point) != p.dimension:
        raise DimensionMismatch(f"point of length {len(point)} for {p.dimension} variables")
    exact = all(isinstance(v, (int, Fraction)) for v in point)
    if exact:
        point = [Fraction(v) for v in point]
        total = Fraction(0)
    else:
        point = [float(v) for v in point]
        total = 0.0
    for e, c in p._terms.items():
        term = c if exact else float(c)
        for v, k in zip(point, e):
            if k:
                term = term * v**k
        total += term
    return total


def divmod_poly(p: Poly, q: Poly):
    """Multivariate division by one divisor in deglex order: p = quot*q + rem."""
    if q.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    if p.variables != q.variables:
        raise DimensionMismatch(f"ring mismatch: {p.variables} vs {q.variables}")
    lead_e, lead_c = q.leading_term()
    rest = {e: c for e, c in q._terms.items() if e != lead_e}
    work = dict(p._terms)
    quot = {}
    rem = {}
    while work:
        e = max(work, key=_term_key)
        c = work.pop(e)
        if all(a >= b for a, b in zip(e, lead_e)):
            shift = tuple(a - b for a, b in zip(e, lead_e))
            f = c / lead_c
            quot[shift] = quot.get(shift, 0) + f
            for re_, rc in rest.items():
                ne = tuple(a + b for a, b in zip(re_, shift))
                s = work.get(ne, 0) - f * rc
                if s:
                    work[ne] = s
                else:
                    work.pop(ne, None)
        else:
            rem[e] = c
    return Poly(p.variables, quot), Poly._raw(p.variables, rem)


def exact_divide(p: Poly, q: Poly) -> Poly | None:
    """Return r with p == q*r, or None when q does not divide p."""
    quot, rem = divmod_poly(p, q)
    return quot if rem.is_zero() else None


def express_in(
    target: Poly,
    generators: Sequence,
    relations: RelationSet | Iterable[Poly] = (),
    degree_cap: int = 2,
    weights=None,
    image_variables: Sequence[str] | None = None,
    source_weights=None,
    working_degree: int | None = None,
    certificate: bool = False,
):
    """Write ``target`` as a polynomial G in the generators, modulo relations.

    ``generators`` is a list of ``(name, Poly)``; ``weights`` gives the weighted
    degree of each image variable and ``degree_cap`` bounds deg(G).  With no
    relations this is a linear solve on coefficients.  With one relation the
    membership test is exact (division by a single polynomial is a Groebner
    reduction).  With several relations the multiplier ideal is truncated at
    ``working_degree`` (default: deg(target) + max generator degree, raised to
    cover every candidate monomial of G).

    Returns G (a Poly in the image variables) or None.  With
    ``certificate=True`` returns ``(G, multipliers)`` such that
    ``target - G(generators) == sum(h * r)`` exactly.
    """
    gens = list(generators)
    if not gens:
        raise DimensionMismatch("express_in needs at least one generator")
    if degree_cap < 0:
        raise ValueError("degree_cap must be >= 0")
    names = tuple(image_variables or [n for n, _ in gens])
    polys = [g for _, g in gens]
    src = target.variables
    for g in polys:
        if g.variables != src:
            raise DimensionMismatch("generator ring differs from target ring")
    rels = list(relations.generators if isinstance(relations, RelationSet) else relations)
    for r in rels:
        if r.variables != src:
            raise DimensionMismatch("relation ring differs from target ring")
    k = len(polys)
    w_img = _weights(weights, k)
    w_src = _weights(source_weights, len(src))
    image_monos = monomials_upto(k, degree_cap, w_img)

    cache = {}

    def gen_power(exp):
        if exp not in cache:
            p = Poly.const(1, src)
            for g, e in zip(polys, exp):
                if e:
                    p = p * g**e
            cache[exp] = p
        return cache[exp]

    columns = [gen_power(e) for e in image_monos]

    if len(rels) == 1:
        rel = rels[0]
        reduced = [divmod_poly(c, rel)[1] for c in columns]
        t_red = divmod_poly(target, rel)[1]
        sol = _solve_columns(reduced, t_red)
        if sol is None:
            return None
        G = Poly(names, {e: c for e, c in zip(image_monos, sol)})
        if certificate:
            resid = target - G.compose(polys)
            h = exact_divide(resid, rel)
            assert h is not None
            return G, [h]
        return G

    if not rels:
        sol = _solve_columns(columns, target)
        if sol is None:
            return None
        G = Poly(names, {e: c for e, c in zip(image_monos, sol)})
        return (G, []) if certificate else G

    # several relations: truncated linear ideal-membership system
    if working_degree is None:
        gdeg = max(p.degree(w_src) for p in polys)
        working_degree = int(max(target.degree(w_src), 0) + max(gdeg, 0))
        for c in columns:
            working_degree = max(working_degree, int(max(c.degree(w_src), 0)))
    mult_cols = []
    mult_index = []
    for ri, r in enumerate(rels):
        rdeg = int(r.degree(w_src))
        for e in monomials_upto(len(src), working_degree - rdeg, w_src):
            mono = Poly(src, {e: 1})
            mult_cols.append(mono * r)
            mult_index.append((ri, e))
    sol = _solve_columns(columns + mult_cols, target)
    if sol is None:
        return None
    G = Poly(names, {e: c for e, c in zip(image_monos, sol[: len(columns)])})
    if certificate:
        hs = [dict() for _ in rels]
        for (ri, e), c in zip(mult_index, sol[len(columns):]):
            if c:
                hs[ri][e] = c
        return G, [Poly(src, h) for h in hs]
    return G


def _solve_columns(columns, target):
    """Solve sum_j x_j * columns[j] == target over monomial coefficients."""
    row_of = {}
    rows = []
    rhs = []

    def row(e):
        if e not in row_of:
            row_of[e] = len(rows)
            rows.append({})
            rhs.append(Fraction(0))
        return row_of[e]

    for j, col in enumerate(columns):
        for e, c in col._terms.items():
            rows[row(e)][j] = c
    for e, c in target._terms.items():
        rhs[row(e)] = c
    return linalg.solve(rows, rhs, len(columns))


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()]))"
)


class _Parser:
    def __init__(self, text, variables):
        self.variables = variables
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _split_ident(self, ident):
        if ident in self.variables:
            return [ident]
        names = sorted(self.variables, key=len, reverse=True)
        out = []
        rest = ident
        while rest:
            for n in names:
                if rest.startswith(n):
                    out.append(n)
                    rest = rest[len(n):]
                    break
            else:
                raise ParseError(f"unknown variable {ident!r}; ring is {self.variables}")
        return out

    def _tokenize(self, text):
        text = text.replace("−", "-")
        toks = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"cannot parse {text[pos:]!r}")
            pos = m.end()
            if m.group("num"):
                toks.append(("num", m.group("num")))
            elif m.group("id"):
                for n in self._split_ident(m.group("id")):
                    toks.append(("id", n))
            else:
                op = m.group("op")
                toks.append(("op", "^" if op == "**" else op))
        return toks

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def parse(self):
        if not self.tokens:
            raise ParseError("empty polynomial")
        p = self.expr()
        if self.pos != len(self.tokens):
            raise ParseError(f"trailing input at token {self.peek()}")
        return p

    def expr(self):
        p = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            _, op = self.take()
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def _starts_factor(self):
        kind, val = self.peek()
        return kind in ("num", "id") or (kind == "op" and val == "(")

    def term(self):
        p = self.unary()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                q = self.unary()
                if val == "*":
                    p = p * q
                else:
                    if not q.is_constant() or q.is_zero():
                        raise ParseError("division only by nonzero constants")
                    p = p * (1 / q.constant_term())
            elif self._starts_factor():
                p = p * self.unary()
            else:
                return p

    def unary(self):
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            p = self.unary()
            return -p if val == "-" else p
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            kind, val = self.peek()
            if kind == "num":
                self.take()
                n = val
            elif (kind, val) == ("op", "("):
                self.take()
                kind, n = self.take()
                if kind != "num" or self.take() != ("op", ")"):
                    raise ParseError("exponent must be a non-negative integer")
            else:
                raise ParseError("exponent must be a non-negative integer")
            if "." in n:
                raise ParseError("exponent must be an integer")
            return base ** int(n)
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return Poly.const(Fraction(val), self.variables)
        if kind == "id":
            return Poly.var(val, self.variables)
        if (kind, val) == ("op", "("):
            p = self.expr()
            if self.take() != ("op", ")"):
                raise ParseError("unbalanced parenthesis")
            return p
        raise ParseError(f"unexpected token {val!r}")
