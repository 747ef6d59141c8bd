"""End-to-end dice enterprise: expressions in, perfect samples of f(p) out."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cftp
from .chain import TransitionKernel, build_kernel
from .errors import ConfigError, NotApplicable
from .expr import ExprAst, const, parse, substitute, to_rational_target
from .ladder import (Ladder, LadderPlan, augment_times, decompose, ensure_connected_fine,
                     ensure_logconcave, sample_outcome, strictly_log_concave)
from .sampling import (DieSource, DieUniform, PrngUniform, RandomnessMode, categorical_from_bits,
                       make_uniform_source)


@dataclass(eq=False)
class DiceEnterprise:
    ladder: Ladder
    kernel: TransitionKernel
    monotone: bool
    plan: LadderPlan | None = None
    notes: list = field(default_factory=list)

    @property
    def m(self):
        return self.ladder.m

    @property
    def v(self):
        return self.ladder.v

    def run_once(self, die, uniform, cap=cftp.DEFAULT_CAP, doubling=False, trace=False):
        if self.monotone:
            return cftp.cftp_monotone(self.ladder.R, die, uniform, cap, doubling, trace)
        return cftp.cftp_general(self.kernel, die, uniform, cap, doubling, trace)

    def describe(self) -> dict:
        out = self.ladder.to_dict()
        out["sampler"] = "monotone" if self.monotone else "general"
        out["notes"] = list(self.notes)
        if self.plan is not None:
            out["plan_provenance"] = list(self.plan.provenance)
        return out


def _finalize(L: Ladder, auto_logconcave: bool, augment: int, logconcave_cap: int,
              plan=None, notes=None) -> DiceEnterprise:
    notes = list(notes or [])
    L = ensure_connected_fine(L)
    if auto_logconcave and L.m == 1:
        before = L.augmentations
        L = ensure_logconcave(L, logconcave_cap)
        notes.append(f"log-concave after {L.augmentations - before} extra augmentation(s)")
    if augment:
        L = augment_times(L, augment)
        notes.append(f"{augment} requested augmentation(s)")
    K = build_kernel(L)
    return DiceEnterprise(L, K, L.m == 1, plan, notes)


def build(exprs, m: int = 1, v: int | None = None, *, complement: str | None = None,
          auto_logconcave: bool | None = None, augment: int = 0, polya_max: int = 128,
          grid: int | None = 50, logconcave_cap: int = 4096, univariate: bool | None = None,
          points=None) -> DiceEnterprise:
    """Compile expressions (strings or ASTs) into a sampler.

    For a coin, auto_logconcave defaults to on so the monotone bounds apply.
    """
    if isinstance(exprs, str):
        exprs = [t for t in exprs.split(";") if t.strip()]
    asts = [e if isinstance(e, ExprAst) else parse(e, m, univariate) for e in exprs]
    target = to_rational_target(asts, m, v, complement, univariate)
    plan = decompose(target, polya_max, grid, points)
    if auto_logconcave is None:
        auto_logconcave = m == 1
    return _finalize(plan.ladder, auto_logconcave, augment, logconcave_cap, plan, plan.provenance)


def from_ladder(L: Ladder, auto_logconcave: bool = False, augment: int = 0,
                logconcave_cap: int = 4096) -> DiceEnterprise:
    return _finalize(L, auto_logconcave, augment, logconcave_cap)


@dataclass
class SampleReport:
    outcomes: np.ndarray
    states: np.ndarray
    N: np.ndarray  # die rolls used for B, per sample
    die_rolls: np.ndarray  # all die rolls, per sample
    uniforms: np.ndarray  # uniforms consumed, per sample

    @property
    def mean_N(self):
        return float(np.mean(self.N))

    @property
    def sd_N(self):
        return float(np.std(self.N, ddof=1)) if len(self.N) > 1 else 0.0

    def frequencies(self, v: int) -> np.ndarray:
        return np.bincount(self.outcomes, minlength=v + 1) / len(self.outcomes)

    def summary(self, v: int) -> dict:
        return {
            "samples": int(len(self.outcomes)),
            "frequencies": self.frequencies(v).tolist(),
            "mean_N": self.mean_N,
            "sd_N": self.sd_N,
            "mean_die_rolls": float(np.mean(self.die_rolls)),
            "mean_uniforms": float(np.mean(self.uniforms)),
        }


def sample(E: DiceEnterprise, die: DieSource, n: int, seed=None,
           mode: RandomnessMode = RandomnessMode.PRNG, cap: int = cftp.DEFAULT_CAP,
           doubling: bool = False, uniform=None) -> SampleReport:
    if die.faces != E.m + 1:
        raise ConfigError(f"die has {die.faces} faces, the target needs {E.m + 1}")
    if uniform is None:
        uniform = make_uniform_source(mode, die, seed)
    outs, states, Ns, rolls, unis = [], [], [], [], []
    for _ in range(n):
        r0, u0 = die.rolls, uniform.count
        run = E.run_once(die, uniform, cap, doubling)
        if isinstance(uniform, DieUniform):
            row = E.ladder.weights[run.state] / E.ladder.R[run.state]
            out = categorical_from_bits(row, uniform.bit)
        else:
            out = sample_outcome(E.ladder, run.state, uniform())
        outs.append(out)
        states.append(run.state)
        Ns.append(run.N)
        rolls.append(die.rolls - r0)
        unis.append(uniform.count - u0)
    return SampleReport(np.array(outs, dtype=np.int64), np.array(states, dtype=np.int64),
                        np.array(Ns), np.array(rolls), np.array(unis))


# coins as a die

class CoinsDie(DieSource):
    """Pick coin i uniformly, toss it; face i on heads, face m on tails.

    With heads probabilities p_i the die has p~_i = p_i / m for i < m.
    """

    def __init__(self, coins, seed=None):
        super().__init__(len(coins) + 1)
        self.coins = list(coins)
        self._pick = PrngUniform(seed)

    def _roll(self) -> int:
        m = len(self.coins)
        i = min(int(self._pick() * m), m - 1)
        return i if self.coins[i].draw() == 1 else m


def coins_to_die_adapter(coins, seed=None) -> CoinsDie:
    return CoinsDie(coins, seed)


def coin_die_probabilities(p_coins) -> list[float]:
    m = len(p_coins)
    out = [p / m for p in p_coins]
    return out + [1.0 - sum(out)]


def coin_substitution(node: ExprAst, m: int) -> ExprAst:
    """Rewrite an expression in coin probabilities into die variables, p_i = m * p~_i."""
    mapping = {i: ExprAst("mul", None, (const(m), ExprAst("var", i))) for i in range(m)}
    return substitute(node, mapping)


def build_from_coins(exprs, n_coins: int, **kw) -> DiceEnterprise:
    """Expressions in p0..p{n_coins-1} (coin heads probabilities) sampled through CoinsDie."""
    if isinstance(exprs, str):
        exprs = [t for t in exprs.split(";") if t.strip()]
    asts = [coin_substitution(parse(e, n_coins, univariate=False), n_coins) for e in exprs]
    kw.setdefault("auto_logconcave", False)
    g = kw.pop("grid", 50) or 0
    if "points" not in kw and g:
        kw["points"] = coin_grid(n_coins, min(g, 12))
    return build(asts, m=n_coins, univariate=False, grid=None, **kw)


def coin_grid(n_coins: int, g: int) -> np.ndarray:
    """Die points reachable from coins with heads probabilities in {1/g, ..., (g-1)/g}."""
    axes = np.linspace(0, 1, g + 1)[1:-1]
    mesh = np.stack(np.meshgrid(*([axes] * n_coins), indexing="ij"), axis=-1).reshape(-1, n_coins)
    return np.array([coin_die_probabilities(row) for row in mesh])


def bernoulli_race(n_coins: int) -> list[str]:
    total = "+".join(f"p{i}" for i in range(n_coins))
    return [f"p{i}/({total})" for i in range(n_coins)]


# bounds on the running time

@dataclass
class BoundsReport:
    pairs: int
    rho: float | None = None
    mean_bound: float | None = None  # pairs * rho / (1 - rho)
    mean_bound_shifted: float | None = None  # pairs / (1 - rho)
    exact_mean_p0: float | None = None
    exact_mean_p1: float | None = None
    general_bound: float | None = None
    uniform_bound: float | None = None
    notes: list = field(default_factory=list)

    def tail_bound(self, n: int) -> float:
        """pairs * rho^n, exponent counted from n."""
        if self.rho is None:
            raise NotApplicable("tail bound needs a strictly log-concave coin ladder")
        return self.pairs * self.rho ** n

    def tail_bound_shifted(self, n: int) -> float:
        """pairs * rho^(n-1), which accounts for the first step."""
        if self.rho is None:
            raise NotApplicable("tail bound needs a strictly log-concave coin ladder")
        return self.pairs * self.rho ** (n - 1)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("pairs", "rho", "mean_bound", "mean_bound_shifted",
                                              "exact_mean_p0", "exact_mean_p1", "general_bound",
                                              "uniform_bound", "notes")}


def monotone_P(R, p: float):
    """Up and down move probabilities of the monotone chain."""
    M = cftp.MonotoneUpdate(R)
    return p * M.up, (1 - p) * M.down


def rho(R, p: float) -> float:
    """max over adjacent pairs (i, i+1) of the one-step expected distance."""
    up, down = monotone_P(R, p)
    k = len(R) - 1
    best = 0.0
    for i in range(k):
        nxt_up = up[i + 1] if i + 1 < k else 0.0
        prev_down = down[i] if i > 0 else 0.0
        val = 1.0 - (up[i] - nxt_up) - (down[i + 1] - prev_down)
        best = max(best, val)
    return best


def exact_mean_extremes(R) -> tuple[float, float]:
    """E[N] at p = 0 and at p = 1 for the monotone sampler."""
    R = np.asarray(R, dtype=float)
    mx = np.maximum(R[:-1], R[1:])
    return float(np.sum(mx / R[:-1])), float(np.sum(mx / R[1:]))


def bounds(E: DiceEnterprise, p=None) -> BoundsReport:
    L = E.ladder
    rep = BoundsReport(pairs=L.size - 1)
    D = L.degree
    if E.monotone:
        M = cftp.MonotoneUpdate(L.R)
        a = float(min(x for x in np.concatenate([M.up, M.down]) if x > 0)) if L.size > 1 else 1.0
        rep.exact_mean_p0, rep.exact_mean_p1 = exact_mean_extremes(L.R) if L.size > 1 else (0.0, 0.0)
        if strictly_log_concave(L):
            if p is not None:
                pp = float(p if np.isscalar(p) else p[1])
                rep.rho = rho(L.R, pp)
            else:
                rep.rho = max(rho(L.R, x) for x in np.linspace(0.001, 0.999, 999))
                rep.notes.append("rho maximized over a grid of p")
            if rep.rho < 1:
                rep.mean_bound = rep.pairs * rep.rho / (1 - rep.rho)
                rep.mean_bound_shifted = rep.pairs / (1 - rep.rho)
        else:
            rep.notes.append("ladder is not strictly log-concave: monotone bounds not applicable")
    else:
        a = E.kernel.min_positive() if E.kernel.V else 1.0
    faces = [b for b in range(L.m + 1) if np.any(L.exps[:, b] == D)]
    if not faces:
        rep.notes.append("no pure-power state: general bound not applicable")
        return rep
    if p is not None:
        pt = np.array([1 - p, p]) if np.isscalar(p) else np.asarray(p, dtype=float)
        vals = [_geom_bound(a * pt[b], D) for b in faces if pt[b] > 0]
        rep.general_bound = min(vals) if vals else None
    if len(faces) == L.m + 1:
        rep.uniform_bound = _geom_bound(a / (L.m + 1), D)
    rep.notes.append(f"general bound uses a={a:.6g}, exponent {D}")
    return rep


def _geom_bound(x: float, D: int) -> float:
    if x >= 1:
        return float(D)
    try:
        return (x ** (-D) - 1) / (1 - x)
    except OverflowError:
        return math.inf
