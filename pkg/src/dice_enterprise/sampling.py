"""Randomness sources: the black-box die, fair bits and uniforms."""
from __future__ import annotations

import enum
import shlex
import subprocess
from bisect import bisect_right
from fractions import Fraction

import numpy as np

from .errors import ConfigError, NonterminationError

SUM_TOL = 1e-12
BUFFER = 4096


class DieSource:
    """A die with faces 0..m. Subclasses implement `_roll`; `rolls` counts draws."""

    def __init__(self, faces: int):
        self.faces = faces
        self.rolls = 0

    def draw(self) -> int:
        self.rolls += 1
        return self._roll()

    def _roll(self) -> int:
        raise NotImplementedError


class SimulatedDie(DieSource):
    def __init__(self, p, seed=None):
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or len(p) < 2:
            raise ConfigError("a die needs at least two faces")
        if np.any(p < 0) or abs(p.sum() - 1.0) > SUM_TOL:
            raise ConfigError(f"die probabilities must be non-negative and sum to 1, got {p.tolist()}")
        super().__init__(len(p))
        self.p = p
        self._cum = np.cumsum(p)
        self._cum[-1] = 1.0
        self._rng = np.random.default_rng(seed)
        self._buf = np.empty(0, dtype=np.int64)
        self._pos = 0

    def _roll(self) -> int:
        if self._pos >= len(self._buf):
            u = self._rng.random(BUFFER)
            self._buf = np.searchsorted(self._cum, u, side="right")
            self._pos = 0
        out = int(self._buf[self._pos])
        self._pos += 1
        return out


class CallableDie(DieSource):
    """Wraps a zero-argument callable returning a face."""

    def __init__(self, fn, faces: int):
        super().__init__(faces)
        self._fn = fn

    def _roll(self) -> int:
        face = int(self._fn())
        if not 0 <= face < self.faces:
            raise ConfigError(f"die returned face {face}, outside 0..{self.faces - 1}")
        return face


class CommandDie(DieSource):
    """An external program printing one face index per line."""

    def __init__(self, command: str, faces: int):
        super().__init__(faces)
        self.command = command
        try:
            self._proc = subprocess.Popen(shlex.split(command), stdout=subprocess.PIPE, text=True)
        except OSError as exc:
            raise ConfigError(f"cannot start die program: {exc}") from None

    def _roll(self) -> int:
        line = self._proc.stdout.readline()
        if not line:
            raise ConfigError("die program ended")
        try:
            face = int(line.strip())
        except ValueError:
            raise ConfigError(f"die program printed {line.strip()!r}") from None
        if not 0 <= face < self.faces:
            raise ConfigError(f"die program returned face {face}")
        return face

    def close(self):
        self._proc.kill()
        self._proc.wait()


def parse_die_spec(spec: str, faces: int | None = None, seed=None) -> DieSource:
    """'sim:0.2,0.3,0.5' or 'cmd:<program>'."""
    kind, _, rest = spec.partition(":")
    if kind == "sim":
        try:
            p = [float(x) for x in rest.split(",")]
        except ValueError:
            raise ConfigError(f"bad die probabilities {rest!r}") from None
        die = SimulatedDie(p, seed)
        if faces is not None and die.faces != faces:
            raise ConfigError(f"die has {die.faces} faces, the target needs {faces}")
        return die
    if kind == "cmd":
        if faces is None:
            raise ConfigError("the face count is needed for a command die")
        return CommandDie(rest, faces)
    raise ConfigError(f"unknown die spec {spec!r}")


def fair_bit(die: DieSource, max_pairs: int = 10**6) -> int:
    """Roll pairs until they differ; 0 if the first is smaller."""
    for _ in range(max_pairs):
        x1 = die.draw()
        x2 = die.draw()
        if x1 != x2:
            return 0 if x1 < x2 else 1
    raise NonterminationError(f"no differing pair in {max_pairs} tries; is the die degenerate?")


def categorical_from_bits(mu, next_bit) -> int:
    """Sample from mu with fair bits by nesting dyadic intervals.

    After l bits we hold [a/2^l, (a+1)/2^l). We stop as soon as it lies
    inside one cell [c_i, c_{i+1}) of the cumulative sums. Bits are only
    drawn while needed, so a point mass uses none.
    """
    cum = [Fraction(0)]
    for w in mu:
        if w < 0:
            raise ValueError("negative probability")
        cum.append(cum[-1] + Fraction(float(w)))
    if abs(float(cum[-1]) - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    cum[-1] = Fraction(1)
    a, scale = 0, 1
    while True:
        lo = Fraction(a, scale)
        hi = Fraction(a + 1, scale)
        i = bisect_right(cum, lo) - 1
        if hi <= cum[i + 1]:
            return i
        a = 2 * a + int(next_bit())
        scale *= 2


class UniformSource:
    def __init__(self):
        self.count = 0

    def __call__(self) -> float:
        self.count += 1
        return self._next()


class PrngUniform(UniformSource):
    def __init__(self, seed=None):
        super().__init__()
        self._rng = np.random.default_rng(seed)
        self._buf = np.empty(0)
        self._pos = 0

    def _next(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._rng.random(BUFFER)
            self._pos = 0
        out = float(self._buf[self._pos])
        self._pos += 1
        return out


def bits_to_uniform(bits) -> float:
    out = 0.0
    w = 0.5
    for b in bits:
        out += w * b
        w *= 0.5
    return out


class DieUniform(UniformSource):
    """Uniforms assembled from 53 fair bits extracted from the die."""

    def __init__(self, die: DieSource, bits: int = 53):
        super().__init__()
        self.die = die
        self.bits = bits

    def bit(self) -> int:
        return fair_bit(self.die)

    def _next(self) -> float:
        return bits_to_uniform(self.bit() for _ in range(self.bits))


class RandomnessMode(enum.Enum):
    PRNG = "prng"
    DIE_DERIVED = "die"


def make_uniform_source(mode: RandomnessMode, die: DieSource | None = None, seed=None) -> UniformSource:
    if mode is RandomnessMode.PRNG:
        return PrngUniform(seed)
    if die is None:
        raise ConfigError("die-derived randomness needs a die")
    return DieUniform(die)
