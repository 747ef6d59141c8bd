"""Sparse multivariate polynomials over the simplex variables p0..pm.

A polynomial is a mapping from exponent tuples to float coefficients.
Exact zeros are dropped, so the mapping itself is the canonical form.
"""
from __future__ import annotations

import json
import math
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PolyaExhausted

EQ_TOL = 1e-12
POLYA_TOL = 1e-12


class Polynomial:
    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[tuple, float] | None = None):
        if nvars < 1:
            raise ValueError("a polynomial needs at least one variable")
        self.nvars = nvars
        clean = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars or min(exp) < 0:
                raise ValueError(f"bad exponent {exp} for {nvars} variables")
            c = float(c)
            if c != 0.0:
                clean[exp] = clean.get(exp, 0.0) + c
        self._terms = {e: c for e, c in sorted(clean.items()) if c != 0.0}

    # construction helpers
    @classmethod
    def const(cls, c: float, nvars: int) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, i: int, nvars: int) -> "Polynomial":
        exp = [0] * nvars
        exp[i] = 1
        return cls(nvars, {tuple(exp): 1.0})

    @classmethod
    def simplex_sum(cls, nvars: int) -> "Polynomial":
        """p0 + p1 + ... + pm, which equals 1 on the simplex."""
        return cls(nvars, {tuple(int(j == i) for j in range(nvars)): 1.0 for i in range(nvars)})

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=0)

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self._terms}) <= 1

    def scale(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def min_coef(self) -> float:
        return min(self._terms.values(), default=0.0)

    # arithmetic
    def _check(self, other):
        if isinstance(other, (int, float)):
            return Polynomial.const(other, self.nvars)
        if other.nvars != self.nvars:
            raise ValueError("variable count mismatch")
        return other

    def __add__(self, other):
        other = self._check(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scaled(other)
        other = self._check(other)
        out: dict = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def scaled(self, s: float) -> "Polynomial":
        return Polynomial(self.nvars, {e: c * s for e, c in self._terms.items()})

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        result = Polynomial.const(1.0, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def times_simplex_sum(self) -> "Polynomial":
        """Multiply by p0 + ... + pm via exponent shifts."""
        out: dict = {}
        for e, c in self._terms.items():
            for j in range(self.nvars):
                f = list(e)
                f[j] += 1
                f = tuple(f)
                out[f] = out.get(f, 0.0) + c
        return Polynomial(self.nvars, out)

    def chop(self, rel_tol: float) -> "Polynomial":
        """Drop coefficients with |c| <= rel_tol * max|c|."""
        cut = rel_tol * self.scale()
        return Polynomial(self.nvars, {e: c for e, c in self._terms.items() if abs(c) > cut})

    # evaluation
    def eval(self, point: Sequence[float]) -> float:
        point = [float(x) for x in point]
        if len(point) != self.nvars:
            raise ValueError(f"expected {self.nvars} coordinates")
        total = 0.0
        for e, c in self._terms.items():
            term = c
            for x, k in zip(point, e):
                if k:
                    term *= x ** k
            total += term
        return total

    def eval_many(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if not self._terms:
            return np.zeros(len(pts))
        exps = np.array(list(self._terms.keys()), dtype=float)
        coefs = np.array(list(self._terms.values()))
        mono = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)
        return mono @ coefs

    def canonical_eq(self, other: "Polynomial", tol: float = EQ_TOL) -> bool:
        if other.nvars != self.nvars:
            return False
        for e in set(self._terms) | set(other._terms):
            a = self._terms.get(e, 0.0)
            b = other._terms.get(e, 0.0)
            if abs(a - b) > tol * max(1.0, abs(a), abs(b)):
                return False
        return True

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self.nvars, tuple(self._terms.items())))

    # homogeneous forms
    def homogenize(self, d: int | None = None) -> "Polynomial":
        """Multiply each degree-i term by (p0+...+pm)^(d-i)."""
        deg = self.degree()
        if d is None:
            d = deg
        if d < deg:
            raise ValueError(f"cannot homogenize degree {deg} polynomial to degree {d}")
        by_degree: dict = {}
        for e, c in self._terms.items():
            by_degree.setdefault(sum(e), {})[e] = c
        # Horner in the simplex sum: ((q0*S + q1)*S + q2)...
        acc = Polynomial(self.nvars)
        for i in range(d + 1):
            if i:
                acc = acc.times_simplex_sum()
            if i in by_degree:
                acc = acc + Polynomial(self.nvars, by_degree[i])
        return acc

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    def to_list(self) -> list:
        return [{"exp": list(e), "coef": c} for e, c in self._terms.items()]

    @classmethod
    def from_json(cls, text, nvars: int | None = None) -> "Polynomial":
        data = json.loads(text) if isinstance(text, str) else text
        if nvars is None:
            if not data:
                raise ValueError("cannot infer variable count of an empty polynomial")
            nvars = len(data[0]["exp"])
        return cls(nvars, {tuple(t["exp"]): t["coef"] for t in data})

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self._terms!r})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in self._terms.items():
            mono = "*".join(f"p{i}^{k}" if k > 1 else f"p{i}" for i, k in enumerate(e) if k)
            parts.append(f"{c!r}*{mono}" if mono else repr(c))
        return " + ".join(parts)


def polya_raise(q: Polynomial, n_max: int = 128, tol: float = POLYA_TOL) -> tuple[Polynomial, int]:
    """Smallest n such that (p0+...+pm)^n * q has no negative coefficients.

    q must be homogeneous. Coefficients above -tol*scale count as
    non-negative and anything within tol*scale of zero is dropped.
    """
    if not q.is_homogeneous():
        raise ValueError("polya_raise needs a homogeneous polynomial")
    cur = q
    for n in range(n_max + 1):
        cut = tol * cur.scale()
        if cur.min_coef() >= -cut:
            return Polynomial(q.nvars, {e: c for e, c in cur.items() if c > cut}), n
        cur = cur.times_simplex_sum()
    raise PolyaExhausted(f"no non-negative representation within {n_max} multiplications")


def polya_exponent(q: Polynomial, n_max: int = 128) -> int:
    return polya_raise(q, n_max)[1]


def multinomial(exp: Iterable[int]) -> int:
    exp = list(exp)
    out = math.factorial(sum(exp))
    for e in exp:
        out //= math.factorial(e)
    return out
