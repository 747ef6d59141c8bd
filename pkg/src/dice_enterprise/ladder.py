"""Ladders: die laws of the form pi_i(p) = R_i p^{n_i} / C(p).

A ladder keeps the per-state outcome weights (the outcome map) next to
the coefficients, so every transformation carries the disaggregation
along with it. States are kept in descending lexicographic order of
their exponent vectors after `thin`; in the univariate case this puts
state i at exponent (d - i, i).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import CapExceeded, ConfigError, GridRootError, NormalizationError, PolyaExhausted
from .expr import RationalTarget
from .poly import Polynomial, polya_raise

NORM_TOL = 1e-9
CHOP_TOL = 1e-12


@dataclass(eq=False)
class Ladder:
    m: int
    R: np.ndarray
    exps: np.ndarray
    weights: np.ndarray
    C: Polynomial | None = None
    history: tuple = ()

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.exps = np.asarray(self.exps, dtype=np.int64).reshape(len(self.R), self.m + 1)
        if self.weights is None:
            self.weights = np.diag(self.R)
        self.weights = np.asarray(self.weights, dtype=float).reshape(len(self.R), -1)
        if len(self.R) == 0:
            raise ValueError("a ladder needs at least one state")
        if np.any(self.R <= 0):
            raise ValueError("ladder coefficients must be positive")
        degs = self.exps.sum(axis=1)
        if np.any(degs != degs[0]) or np.any(self.exps < 0):
            raise ValueError("all states must share one degree")

    @classmethod
    def from_terms(cls, terms, weights=None, m=None, C=None, history=("input",)):
        """Build from [(R, exponent), ...]. Default outcome map: one outcome per state."""
        terms = list(terms)
        if m is None:
            m = len(terms[0][1]) - 1
        R = [float(r) for r, _ in terms]
        exps = [tuple(e) for _, e in terms]
        return cls(m, R, exps, weights, C, tuple(history))

    @property
    def k(self) -> int:
        return len(self.R) - 1

    @property
    def size(self) -> int:
        return len(self.R)

    @property
    def v(self) -> int:
        return self.weights.shape[1] - 1

    @property
    def degree(self) -> int:
        return int(self.exps[0].sum())

    @property
    def augmentations(self) -> int:
        return sum(1 for h in self.history if h == "augment")

    def with_history(self, *ops):
        return Ladder(self.m, self.R, self.exps, self.weights, self.C, self.history + ops)

    def numerator(self) -> Polynomial:
        out: dict = {}
        for r, e in zip(self.R, self.exps):
            key = tuple(int(x) for x in e)
            out[key] = out.get(key, 0.0) + r
        return Polynomial(self.m + 1, out)

    def state_weights(self, point) -> np.ndarray:
        """R_i p^{n_i} for every state (unnormalized)."""
        pt = _as_point(point, self.m)
        return self.R * np.prod(pt[None, :] ** self.exps, axis=1)

    def distribution(self, point) -> np.ndarray:
        w = self.state_weights(point)
        return w / w.sum()

    def outcome_distribution(self, point) -> np.ndarray:
        pi = self.distribution(point)
        return pi @ (self.weights / self.R[:, None])

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "v": self.v,
            "d": self.degree,
            "states": [
                {"R": float(r), "exp": [int(x) for x in e], "weights": [float(w) for w in row]}
                for r, e, row in zip(self.R, self.exps, self.weights)
            ],
            "flags": {"fine": fine(self), "connected": connected(self),
                      "strictly_log_concave": strictly_log_concave(self) if self.m == 1 else None},
            "provenance": list(self.history),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_point(point, m):
    if np.isscalar(point):
        if m != 1:
            raise ValueError("a scalar point is only meaningful for a coin")
        point = (1.0 - float(point), float(point))
    pt = np.asarray(point, dtype=float)
    if pt.shape != (m + 1,):
        raise ValueError(f"expected a point with {m + 1} coordinates")
    return pt


@dataclass
class OutcomeMap:
    weights: np.ndarray

    def row(self, i):
        return self.weights[i]


def outcome_map(L: Ladder) -> OutcomeMap:
    return OutcomeMap(L.weights)


# structural operations

def increase_degree(L: Ladder) -> Ladder:
    """Multiply every state by p_j, j = 0..m. Child l = i*(m+1) + j."""
    m1 = L.m + 1
    R = np.repeat(L.R, m1)
    exps = np.repeat(L.exps, m1, axis=0) + np.tile(np.eye(m1, dtype=np.int64), (L.size, 1))
    weights = np.repeat(L.weights, m1, axis=0)
    return Ladder(L.m, R, exps, weights, L.C, L.history + ("increase_degree",))


def thin(L: Ladder) -> Ladder:
    """Merge states with equal exponents, summing R and outcome weights."""
    uniq, inv = np.unique(L.exps, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    R = np.zeros(len(uniq))
    np.add.at(R, inv, L.R)
    W = np.zeros((len(uniq), L.weights.shape[1]))
    np.add.at(W, inv, L.weights)
    order = np.arange(len(uniq))[::-1]  # np.unique sorts ascending
    return Ladder(L.m, R[order], uniq[order], W[order], L.C, L.history + ("thin",))


def augment(L: Ladder) -> Ladder:
    out = thin(increase_degree(L))
    return Ladder(L.m, out.R, out.exps, out.weights, out.C, L.history + ("augment",))


def fine(L: Ladder) -> bool:
    return len(np.unique(L.exps, axis=0)) == L.size


def _index(L: Ladder) -> dict:
    return {tuple(int(x) for x in e): i for i, e in enumerate(L.exps)}


def connected(L: Ladder) -> bool:
    """BFS over states, with an edge when exponents differ by at most 2 in L1."""
    if L.size == 1:
        return True
    index: dict = {}
    for i, e in enumerate(L.exps):
        index.setdefault(tuple(int(x) for x in e), []).append(i)
    m1 = L.m + 1
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        e = [int(x) for x in L.exps[i]]
        cands = list(index[tuple(e)])
        for a in range(m1):
            if e[a] == 0:
                continue
            for b in range(m1):
                if a == b:
                    continue
                f = list(e)
                f[a] -= 1
                f[b] += 1
                cands.extend(index.get(tuple(f), ()))
        for j in cands:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == L.size


def strictly_log_concave(L: Ladder) -> bool:
    """R_i^2 > R_{i-1} R_{i+1} on the interior; missing exponents count as 0."""
    if L.m != 1:
        raise ValueError("log-concavity is only defined for univariate ladders")
    if not fine(L):
        raise ValueError("log-concavity needs a fine ladder")
    n1 = L.exps[:, 1]
    lo, hi = int(n1.min()), int(n1.max())
    seq = np.zeros(hi - lo + 1)
    seq[n1 - lo] = L.R
    if len(seq) < 3:
        return True
    return bool(np.all(seq[1:-1] ** 2 > seq[:-2] * seq[2:]))


def ensure_connected_fine(L: Ladder, cap: int | None = None) -> Ladder:
    """Thin, then augment until connected. Never needs more than d augmentations."""
    out = thin(L)
    limit = out.degree if cap is None else cap
    for _ in range(limit + 1):
        if connected(out):
            return out
        out = augment(out)
    if connected(out):
        return out
    raise CapExceeded(f"ladder still disconnected after {limit} augmentations")


def ensure_logconcave(L: Ladder, cap: int = 4096) -> Ladder:
    out = L if fine(L) else thin(L)
    for _ in range(cap + 1):
        if strictly_log_concave(out):
            return out
        if _ == cap:
            break
        out = augment(out)
    raise CapExceeded(f"not strictly log-concave after {cap} augmentations")


def augment_times(L: Ladder, n: int) -> Ladder:
    for _ in range(n):
        L = augment(L)
    return L


def sample_outcome(L: Ladder, i: int, u: float) -> int:
    """Outcome j with probability weights[i][j]/R_i, by cumulative scan."""
    row = L.weights[i]
    cum = 0.0
    target = u * L.R[i]
    last = 0
    for j, w in enumerate(row):
        if w <= 0.0:
            continue
        last = j
        cum += w
        if target < cum:
            return j
    return last


# decomposition of a rational target into a ladder

@dataclass
class LadderPlan:
    ladder: Ladder
    degree: int
    flags: dict
    provenance: list = field(default_factory=list)
    target: RationalTarget | None = None

    def to_dict(self) -> dict:
        out = self.ladder.to_dict()
        out["plan_provenance"] = list(self.provenance)
        return out


def simplex_grid(m: int, g: int, max_points: int = 250_000) -> np.ndarray:
    """Points of the closed simplex with coordinates in (1/g)Z."""
    from math import comb
    while g > 1 and comb(g + m, m) > max_points:
        g -= 1
    pts = []
    for combo in combinations_with_replacement(range(m + 1), g):
        cnt = np.bincount(combo, minlength=m + 1)
        pts.append(cnt / g)
    return np.array(pts)


def _orient(d: Polynomial, e: Polynomial, m: int):
    centre = [1.0 / (m + 1)] * (m + 1)
    if e.eval(centre) < 0:
        return -d, -e
    return d, e


def decompose(target: RationalTarget, polya_max: int = 128, grid: int | None = 50,
              points=None) -> LadderPlan:
    """Rational target -> connected fine ladder.

    The denominator must be positive on the check points: by default a
    simplex grid with `grid` steps per side, or the given `points`.
    grid=None or 0 skips the check.
    """
    m = target.m
    nv = m + 1
    log = []
    entries = [_orient(d, e, m) for d, e in target.entries]
    for i, (d, e) in enumerate(entries):
        if e.is_zero():
            raise ConfigError(f"entry {i} has a zero denominator")
    d0 = max(max(d.degree(), e.degree()) for d, e in entries)
    homog = [(d.homogenize(d0), e.homogenize(d0)) for d, e in entries]
    log.append(f"homogenized to degree {d0}")

    # Polya exponent shared by all entries, so equal denominators stay equal
    n = 0
    for i, (d, e) in enumerate(homog):
        for name, q in (("numerator", d), ("denominator", e), ("complement", e - d)):
            if q.is_zero():
                continue
            try:
                n = max(n, polya_raise(q, polya_max)[1])
            except PolyaExhausted as exc:
                raise PolyaExhausted(f"entry {i} {name}: {exc}") from None
    log.append(f"polya exponent {n}")
    raised = []
    for d, e in homog:
        for _ in range(n):
            d, e = d.times_simplex_sum(), e.times_simplex_sum()
        raised.append((_clamp(d), _clamp(e)))

    classes: list = []
    member = []
    for _, e in raised:
        for ci, ce in enumerate(classes):
            if e.canonical_eq(ce):
                member.append(ci)
                break
        else:
            classes.append(e)
            member.append(len(classes) - 1)
    C = Polynomial.const(1.0, nv)
    for ce in classes:
        C = C * ce
    log.append(f"{len(classes)} distinct denominator(s)")

    G = []
    for (d, _), ci in zip(raised, member):
        g = d
        for cj, ce in enumerate(classes):
            if cj != ci:
                g = g * ce
        G.append(g)
    deg = C.degree()
    G = [g.homogenize(deg) if not g.is_zero() else g for g in G]

    total = Polynomial(nv)
    for g in G:
        total = total + g
    scale = max(C.scale(), 1.0)
    for e in set(dict(total.items())) | set(dict(C.items())):
        diff = abs(total.terms.get(e, 0.0) - C.terms.get(e, 0.0))
        if diff > NORM_TOL * scale:
            raise NormalizationError(f"entries do not sum to one (monomial {e}, gap {diff:.3g})")

    pts = np.asarray(points, dtype=float) if points is not None else (simplex_grid(m, grid) if grid else None)
    if pts is not None and len(pts):
        vals = C.eval_many(pts)
        bad = np.flatnonzero(vals <= 0)
        if len(bad):
            raise GridRootError(f"denominator vanishes on the simplex near {pts[bad[0]].tolist()}")

    terms, rows = [], []
    v1 = len(G)
    for i, g in enumerate(G):
        for e, c in _clamp(g).items():
            terms.append((c, e))
            row = np.zeros(v1)
            row[i] = c
            rows.append(row)
    if not terms:
        raise NormalizationError("target has no mass")
    raw = Ladder.from_terms(terms, np.array(rows), m=m, C=C, history=("decompose",))
    L = ensure_connected_fine(raw)
    log.append(f"{raw.size} raw states, {L.size} after thinning, {L.augmentations} augmentation(s) to connect")
    flags = {"fine": fine(L), "connected": connected(L),
             "strictly_log_concave": strictly_log_concave(L) if m == 1 else None}
    return LadderPlan(L, L.degree, flags, log, target)


def _clamp(q: Polynomial) -> Polynomial:
    cut = CHOP_TOL * q.scale()
    return Polynomial(q.nvars, {e: c for e, c in q.items() if c > cut})


def parse_ladder(text: str) -> Ladder:
    """Parse 'R:n0,n1,...; R:...' where R is a constant expression."""
    from .expr import evaluate, parse
    terms = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"ladder state {chunk!r} must look like R:n0,n1,...")
        r_text, e_text = chunk.split(":", 1)
        try:
            exp = tuple(int(x) for x in e_text.replace(" ", "").split(","))
        except ValueError:
            raise ConfigError(f"bad exponent list {e_text!r}") from None
        r = evaluate(parse(r_text, m=max(len(exp) - 1, 1), univariate=False), [0.0] * len(exp))
        terms.append((r, exp))
    if not terms:
        raise ConfigError("empty ladder")
    try:
        return Ladder.from_terms(terms)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
