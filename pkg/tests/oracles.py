"""Independent reference computations used by the tests.

None of these call into the package's numerics: they use exact
fractions, dense linear algebra or brute-force enumeration.
"""
from fractions import Fraction
from itertools import product

import numpy as np


def binom_row(n):
    row = [1]
    for _ in range(n):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    return row


def convolve(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += Fraction(x) * Fraction(y)
    return out


def augment_univariate(R, times):
    """Coefficients of (sum R_i x^i) * (1 + x)^times, exactly."""
    return convolve([Fraction(r) for r in R], binom_row(times))


def strictly_lc(seq):
    return all(seq[i] ** 2 > seq[i - 1] * seq[i + 1] for i in range(1, len(seq) - 1))


def first_lc_augmentation(R, cap=500):
    for t in range(cap + 1):
        if strictly_lc(augment_univariate(R, t)):
            return t
    return None


def monotone_thresholds(R):
    R = [float(r) for r in R]
    k = len(R) - 1
    up = [R[i + 1] / max(R[i], R[i + 1]) if i < k else 0.0 for i in range(k + 1)]
    down = [R[i - 1] / max(R[i - 1], R[i]) if i > 0 else 0.0 for i in range(k + 1)]
    return up, down


def exact_mean_N_monotone(R, p):
    """E[coupling time] of the bottom/top pair driven by shared (B, U).

    The pair chain lives on lo < hi; from each pair the uniform is split at
    the two thresholds, giving at most three cases per face.
    """
    up, down = monotone_thresholds(R)
    k = len(R) - 1
    pairs = [(a, b) for a in range(k + 1) for b in range(a + 1, k + 1)]
    pos = {s: i for i, s in enumerate(pairs)}
    n = len(pairs)
    A = np.eye(n)
    rhs = np.ones(n)
    for (lo, hi), row in pos.items():
        for face, pf in ((1, p), (0, 1 - p)):
            if pf == 0:
                continue
            thr = up if face == 1 else down
            step = 1 if face == 1 else -1
            cuts = sorted({0.0, thr[lo], thr[hi], 1.0})
            for u0, u1 in zip(cuts, cuts[1:]):
                if u1 <= u0:
                    continue
                u = 0.5 * (u0 + u1)
                nlo = lo + step if u <= thr[lo] else lo
                nhi = hi + step if u <= thr[hi] else hi
                w = pf * (u1 - u0)
                if nlo != nhi:
                    A[row, pos[(nlo, nhi)]] -= w
    return float(np.linalg.solve(A, rhs)[pos[(0, k)]])


def stationary_lstsq(P):
    n = len(P)
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


def brute_neighbors(exps, b, i):
    e_b = np.zeros(exps.shape[1], dtype=int)
    e_b[b] = 1
    return [j for j in range(len(exps)) if j != i and np.abs(exps[i] - exps[j] + e_b).sum() == 1]


class BitsExhausted(Exception):
    pass


def dyadic_cell_masses(sampler, mu, depth):
    """Probability mass of each outcome among inputs that terminate within `depth` bits.

    Walks the binary tree of bit prefixes, calling `sampler(mu, next_bit)`
    with a bit source that raises once the prefix runs out.
    """
    masses = [Fraction(0)] * len(mu)
    unresolved = Fraction(0)
    stack = [()]
    while stack:
        prefix = stack.pop()
        it = iter(prefix)

        def next_bit():
            try:
                return next(it)
            except StopIteration:
                raise BitsExhausted from None

        try:
            out = sampler(mu, next_bit)
            masses[out] += Fraction(1, 2 ** len(prefix))
        except BitsExhausted:
            if len(prefix) == depth:
                unresolved += Fraction(1, 2 ** len(prefix))
            else:
                stack.append(prefix + (0,))
                stack.append(prefix + (1,))
    return masses, unresolved


def all_sequences(faces, length):
    return product(range(faces), repeat=length)
