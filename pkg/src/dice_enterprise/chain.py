"""Reversible proposal-free Markov chains on a ladder.

From state i, rolling face b moves to some j in N_b(i), the states whose
exponent is n_i + e_b - e_a for a face a != b. The transition weights V
are chosen greedily so that every state keeps as little self-loop mass
as the structure allows, while detailed balance holds for pi.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .ladder import Ladder

W_TOL = 1e-12


@dataclass
class NeighborIndex:
    """neighbors[b][i] lists N_b(i) in ascending state order."""
    neighbors: list
    S: np.ndarray  # S[b, i] = sum of R_j over N_b(i)


def build_neighbors(L: Ladder) -> NeighborIndex:
    m1 = L.m + 1
    index = {}
    for i, e in enumerate(L.exps):
        key = tuple(int(x) for x in e)
        if key in index:
            raise ValueError("neighbor structure needs a fine ladder")
        index[key] = i
    nb = [[[] for _ in range(L.size)] for _ in range(m1)]
    for i, e in enumerate(L.exps):
        base = [int(x) for x in e]
        for b in range(m1):
            for a in range(m1):
                if a == b or base[a] == 0:
                    continue
                f = list(base)
                f[b] += 1
                f[a] -= 1
                j = index.get(tuple(f))
                if j is not None:
                    nb[b][i].append(j)
            nb[b][i].sort()
    S = np.array([[sum(L.R[j] for j in nb[b][i]) for i in range(L.size)] for b in range(m1)])
    return NeighborIndex([[tuple(x) for x in row] for row in nb], S)


def reverse_face(L: Ladder, i: int, j: int) -> int:
    """The face c with i in N_c(j), given j in N_b(i)."""
    return int(np.argmax(L.exps[i] - L.exps[j]))


@dataclass(eq=False)
class TransitionKernel:
    ladder: Ladder
    index: NeighborIndex
    V: dict  # (i, j) -> weight; the move i -> j happens with prob V[i, j] * p_b

    @property
    def size(self):
        return self.ladder.size

    @property
    def m(self):
        return self.ladder.m

    def face_of(self, i, j) -> int:
        return int(np.argmax(self.ladder.exps[j] - self.ladder.exps[i]))

    def dense_V(self) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for (i, j), w in self.V.items():
            out[i, j] = w
        return out

    def min_positive(self) -> float:
        return min(w for w in self.V.values() if w > 0)

    def thresholds(self):
        """Per-face padded cumulative thresholds and targets.

        cum[b][i, l] is the running sum of V over N_b(i) and the last
        column is +inf pointing back to i, so the next state from i on
        (b, u) is targets[b][i, (u > cum[b][i]).sum()].
        """
        width = max((len(n) for row in self.index.neighbors for n in row), default=0) + 1
        cums, tgts = [], []
        for b in range(self.m + 1):
            cum = np.full((self.size, width), np.inf)
            tgt = np.tile(np.arange(self.size)[:, None], (1, width))
            for i in range(self.size):
                acc = 0.0
                for l, j in enumerate(self.index.neighbors[b][i]):
                    acc += self.V[i, j]
                    cum[i, l] = acc
                    tgt[i, l] = j
            cums.append(cum)
            tgts.append(tgt)
        return cums, tgts

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "states": self.size,
            "V": [[i, j, w] for (i, j), w in sorted(self.V.items())],
            "neighbors": [[list(n) for n in row] for row in self.index.neighbors],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_kernel(L: Ladder) -> TransitionKernel:
    """Greedy construction: repeatedly fix the face/state with the largest S.

    Ties are broken lexicographically on (b, i). After the rows of the
    chosen (b, i) are set, each affected reverse pair (c, j) has its S
    rescaled by the mass it still has available.
    """
    idx = build_neighbors(L)
    m1 = L.m + 1
    R = L.R
    rem = [[set(n) for n in row] for row in idx.neighbors]
    W = np.zeros((m1, L.size))
    S = idx.S.copy()
    version = np.zeros((m1, L.size), dtype=np.int64)
    heap = [(-S[b, i], b, i, 0) for b in range(m1) for i in range(L.size) if rem[b][i]]
    heapq.heapify(heap)
    V: dict = {}
    while heap:
        _, b, i, ver = heapq.heappop(heap)
        if ver != version[b, i] or not rem[b][i]:
            continue
        s = S[b, i]
        for j in sorted(rem[b][i]):
            V[i, j] = R[j] / s
            W[b, i] += R[j] / s
            c = reverse_face(L, i, j)
            V[j, i] = R[i] / s
            rem[c][j].discard(i)
            W[c, j] += R[i] / s
            if W[c, j] > 1 + W_TOL:
                raise AssertionError(f"weight {W[c, j]} exceeds 1 at face {c}, state {j}")
            version[c, j] += 1
            if rem[c][j]:
                slack = 1.0 - W[c, j]
                if slack <= 0:
                    raise AssertionError(f"no slack left at face {c}, state {j}")
                S[c, j] = sum(R[h] for h in rem[c][j]) / slack
                heapq.heappush(heap, (-S[c, j], c, j, version[c, j]))
            else:
                S[c, j] = 0.0
        if W[b, i] > 1 + W_TOL:
            raise AssertionError(f"weight {W[b, i]} exceeds 1 at face {b}, state {i}")
        rem[b][i] = set()
        S[b, i] = 0.0
        version[b, i] += 1
    return TransitionKernel(L, idx, V)


def suboptimal_kernel(L: Ladder) -> TransitionKernel:
    """V[i, j] = R_j / max(S_b(i), S_c(j)); reversible but wasteful."""
    idx = build_neighbors(L)
    V = {}
    for b, row in enumerate(idx.neighbors):
        for i, nbs in enumerate(row):
            for j in nbs:
                c = reverse_face(L, i, j)
                V[i, j] = L.R[j] / max(idx.S[b, i], idx.S[c, j])
    return TransitionKernel(L, idx, V)


def evaluate_P(K: TransitionKernel, point) -> np.ndarray:
    from .ladder import _as_point
    pt = _as_point(point, K.m)
    P = np.zeros((K.size, K.size))
    for (i, j), w in K.V.items():
        P[i, j] = w * pt[K.face_of(i, j)]
    P[np.diag_indices(K.size)] = 1.0 - P.sum(axis=1)
    return P


def detailed_balance_gap(K: TransitionKernel, point) -> float:
    """Largest |pi_i P_ij - pi_j P_ji| with pi normalized."""
    pi = K.ladder.distribution(point)
    flow = pi[:, None] * evaluate_P(K, point)
    return float(np.max(np.abs(flow - flow.T)))


def check_detailed_balance(K: TransitionKernel, point, tol: float = 1e-12) -> bool:
    return detailed_balance_gap(K, point) <= tol


def stationary(P: np.ndarray, iters: int = 200_000, tol: float = 1e-15) -> np.ndarray:
    """Stationary vector by power iteration on the lazy chain (P + I)/2."""
    n = len(P)
    Q = 0.5 * (P + np.eye(n))
    x = np.full(n, 1.0 / n)
    for _ in range(iters):
        y = x @ Q
        if np.max(np.abs(y - x)) < tol:
            return y / y.sum()
        x = y
    return x / x.sum()


def _fmt(w: float) -> str:
    fr = Fraction(w).limit_denominator(1000)
    if abs(float(fr) - w) < 1e-12:
        return str(fr)
    sq = Fraction(w * w).limit_denominator(1000)
    if abs(float(sq) - w * w) < 1e-12 and sq.denominator != 1 and sq.numerator == 1:
        return f"1/sqrt({sq.denominator})"
    return f"{w:.6g}"


def pretty_matrix(K: TransitionKernel) -> str:
    """Off-diagonal entries as 'V*p_b'; the diagonal is implied by row sums."""
    cells = [["." if i == j else "0" for j in range(K.size)] for i in range(K.size)]
    for (i, j), w in K.V.items():
        cells[i][j] = f"{_fmt(w)}*p{K.face_of(i, j)}"
    width = max(len(c) for row in cells for c in row)
    return "\n".join(" ".join(c.rjust(width) for c in row) for row in cells)
