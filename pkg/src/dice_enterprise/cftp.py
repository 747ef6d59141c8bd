"""Coupling from the past driven by die rolls.

Each backward step t = -1, -2, ... uses one die roll B_t and one uniform
U_t, stored and reused on every later window, so the number of rolls N
equals the final window length T.

`cftp_general` keeps the composed map F_T = phi_{-1} o ... o phi_{-T}
over all states; extending the window by one step is F_{T+1} =
F_T[phi_{-(T+1)}(.)], which is the same output as replaying every chain
from -T but costs O(k) per step. `cftp_monotone` replays only the chains
started at the bottom and top states, as is valid for univariate ladders.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .chain import TransitionKernel
from .errors import ConfigError, IterationCapExceeded

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

DEFAULT_CAP = 10**7


class UpdateFn:
    """phi(i, b, u): scan N_b(i) in ascending order, move to the first j with u <= cum."""

    def __init__(self, K: TransitionKernel):
        self.kernel = K
        self.cum, self.targets = K.thresholds()
        self.size = K.size

    def __call__(self, i: int, b: int, u: float) -> int:
        return update_general(self.kernel, i, b, u)

    def step_all(self, b: int, u: float) -> np.ndarray:
        cum = self.cum[b]
        col = np.sum(u > cum, axis=1)
        return self.targets[b][np.arange(self.size), col]


def update_general(K: TransitionKernel, i: int, b: int, u: float) -> int:
    cum = 0.0
    for j in K.index.neighbors[b][i]:
        cum += K.V[i, j]
        if u <= cum:
            return j
    return i


class MonotoneUpdate:
    """Univariate update: B=0 steps down, B=1 steps up, with ratio-of-maxima thresholds."""

    def __init__(self, R):
        R = np.asarray(R, dtype=float)
        self.R = R
        k = len(R) - 1
        self.k = k
        self.up = np.zeros(k + 1)
        self.down = np.zeros(k + 1)
        if k:
            self.up[:-1] = R[1:] / np.maximum(R[:-1], R[1:])
            self.down[1:] = R[:-1] / np.maximum(R[:-1], R[1:])

    def __call__(self, i: int, b: int, u: float) -> int:
        return update_monotone(self, i, b, u)


def update_monotone(M: MonotoneUpdate, i: int, b: int, u: float) -> int:
    if b == 0:
        if i > 0 and u <= M.down[i]:
            return i - 1
        return i
    if i < M.k and u <= M.up[i]:
        return i + 1
    return i


@njit(cache=True)
def _replay_monotone(B, U, T, up, down, k):
    # B[t], U[t] belong to time -(t+1); replay from -T forward to 0
    lo = 0
    hi = k
    for t in range(T - 1, -1, -1):
        u = U[t]
        if B[t] == 1:
            if lo < k and u <= up[lo]:
                lo += 1
            if hi < k and u <= up[hi]:
                hi += 1
        else:
            if lo > 0 and u <= down[lo]:
                lo -= 1
            if hi > 0 and u <= down[hi]:
                hi -= 1
    return lo, hi


def replay_monotone_trace(M: MonotoneUpdate, B, U, T):
    """Forward (lo, hi) pairs from time -T to 0; used for the sandwich check."""
    lo, hi = 0, M.k
    path = [(lo, hi)]
    for t in range(T - 1, -1, -1):
        lo = update_monotone(M, lo, int(B[t]), float(U[t]))
        hi = update_monotone(M, hi, int(B[t]), float(U[t]))
        path.append((lo, hi))
    return path


@dataclass
class CftpRun:
    state: int
    T: int
    B: np.ndarray
    U: np.ndarray
    rolls: int  # die rolls spent on B
    die_rolls: int  # all rolls, including any used for uniforms
    uniforms: int
    trace: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.rolls


class _Store:
    def __init__(self):
        self.B = np.zeros(256, dtype=np.int8)
        self.U = np.zeros(256)
        self.n = 0

    def extend_to(self, T, die, uniform):
        while self.n < T:
            if self.n == len(self.B):
                self.B = np.concatenate([self.B, np.zeros_like(self.B)])
                self.U = np.concatenate([self.U, np.zeros_like(self.U)])
            self.B[self.n] = die.draw()
            self.U[self.n] = uniform()
            self.n += 1


def _finish(state, T, store, die, rolls0, uniform, u0, trace):
    return CftpRun(int(state), T, store.B[:T].copy(), store.U[:T].copy(), T,
                   die.rolls - rolls0, uniform.count - u0, trace or [])


def cftp_general(K: TransitionKernel, die, uniform, cap: int = DEFAULT_CAP,
                 doubling: bool = False, trace: bool = False) -> CftpRun:
    if die.faces != K.m + 1:
        raise ConfigError(f"die has {die.faces} faces, ladder needs {K.m + 1}")
    upd = UpdateFn(K)
    rolls0, u0 = die.rolls, uniform.count
    store = _Store()
    F = np.arange(K.size)
    rows = []
    if K.size == 1:
        return _finish(0, 0, store, die, rolls0, uniform, u0, rows)
    T = 0
    while True:
        newT = 2 * T if doubling and T else T + 1
        if newT > cap:
            raise IterationCapExceeded(f"no coalescence within {cap} steps")
        store.extend_to(newT, die, uniform)
        # compose the new, older block: G maps a state at time -newT to time -T
        G = np.arange(K.size)
        for t in range(newT - 1, T - 1, -1):
            G = upd.step_all(int(store.B[t]), float(store.U[t]))[G]
        F = F[G]
        T = newT
        if trace:
            rows.append((T, int(store.B[T - 1]), float(store.U[T - 1]), F.tolist()))
        if F.min() == F.max():
            return _finish(F[0], T, store, die, rolls0, uniform, u0, rows)


def cftp_monotone(K_or_R, die, uniform, cap: int = DEFAULT_CAP,
                  doubling: bool = False, trace: bool = False) -> CftpRun:
    R = K_or_R.ladder.R if isinstance(K_or_R, TransitionKernel) else K_or_R
    if die.faces != 2:
        raise ConfigError("the monotone sampler needs a two-faced die")
    M = MonotoneUpdate(R)
    rolls0, u0 = die.rolls, uniform.count
    store = _Store()
    rows = []
    if M.k == 0:
        return _finish(0, 0, store, die, rolls0, uniform, u0, rows)
    T = 0
    while True:
        T = 2 * T if doubling and T else T + 1
        if T > cap:
            raise IterationCapExceeded(f"no coalescence within {cap} steps")
        store.extend_to(T, die, uniform)
        lo, hi = _replay_monotone(store.B, store.U, T, M.up, M.down, M.k)
        if trace:
            rows.append((T, int(store.B[T - 1]), float(store.U[T - 1]), [int(lo), int(hi)]))
        if lo == hi:
            return _finish(lo, T, store, die, rolls0, uniform, u0, rows)


def replay(K: TransitionKernel, B, U) -> list:
    """Run every chain from -T to 0 on stored randomness and return the end states."""
    upd = UpdateFn(K)
    states = list(range(K.size))
    for t in range(len(B) - 1, -1, -1):
        states = [upd(s, int(B[t]), float(U[t])) for s in states]
    return states


def write_trace(run: CftpRun, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "B", "U", "states"])
        for T, b, u, states in run.trace:
            w.writerow([T, b, repr(u), " ".join(map(str, states))])


def naive_rejection(L, die, uniform, max_attempts: int = 10**9, early_stop: bool = True):
    """Pick a state uniformly, roll its monomial pattern, accept with prob R_i / max R.

    The pattern for exponent n is n_0 zeros, then n_1 ones, and so on. With
    early_stop an attempt ends at the first mismatching roll, otherwise all
    d rolls are made. Returns (state, rolls, attempts).
    """
    patterns = [np.repeat(np.arange(L.m + 1), e) for e in L.exps]
    rmax = L.R.max()
    rolls0 = die.rolls
    for attempt in range(1, max_attempts + 1):
        i = min(int(uniform() * L.size), L.size - 1)
        ok = True
        for face in patterns[i]:
            if die.draw() != face:
                ok = False
                if early_stop:
                    break
        if ok and uniform() * rmax < L.R[i]:
            return i, die.rolls - rolls0, attempt
    raise IterationCapExceeded(f"no acceptance in {max_attempts} attempts")
