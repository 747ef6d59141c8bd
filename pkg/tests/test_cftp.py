import csv

import numpy as np
import pytest
from scipy.stats import chi2_contingency, chisquare

from dice_enterprise.cftp import (MonotoneUpdate, UpdateFn, cftp_general, cftp_monotone, naive_rejection, replay,
                                  replay_monotone_trace, update_general, update_monotone, write_trace)
from dice_enterprise.chain import build_kernel, evaluate_P
from dice_enterprise.enterprise import build
from dice_enterprise.errors import ConfigError, IterationCapExceeded
from dice_enterprise.ladder import Ladder
from dice_enterprise.sampling import PrngUniform, SimulatedDie

from conftest import TOY, tri6_ladder, uni_ladder

ALPHA = 0.01


def toy():
    return build(TOY, complement="first", auto_logconcave=False)


def draws(fn, n):
    return np.array([fn().state for _ in range(n)])


def test_update_general_examples(tri6):
    K = build_kernel(tri6)
    assert update_general(K, 3, 1, 0.05) == 2
    assert update_general(K, 3, 1, 0.5) == 3
    assert update_general(K, 3, 1, 0.4) == 5
    assert update_general(K, 0, 0, 0.01) == 0
    upd = UpdateFn(K)
    for i in range(6):
        for b in range(3):
            for u in (0.0, 0.05, 0.3, 0.5, 0.7, 0.999):
                assert upd.step_all(b, u)[i] == upd(i, b, u)


def test_update_monotone_examples():
    M = MonotoneUpdate([1, 2, 1])
    assert update_monotone(M, 0, 0, 0.0) == 0
    assert update_monotone(M, 1, 1, 0.4) == 2
    assert update_monotone(M, 1, 1, 0.6) == 1
    assert update_monotone(M, 2, 0, 0.9) == 1
    assert update_monotone(M, 2, 1, 0.0) == 2


def _interval_law(thresholds, i, targets):
    """Probability of each target from the lengths of the threshold intervals."""
    law = {}
    prev = 0.0
    for cum, j in zip(thresholds[i], targets[i]):
        hi = min(cum, 1.0)
        if hi > prev:
            law[int(j)] = law.get(int(j), 0.0) + hi - prev
            prev = hi
    if prev < 1.0:
        law[i] = law.get(i, 0.0) + 1.0 - prev
    return law


@pytest.mark.parametrize("which", ["tri6", "toy", "uni"])
def test_update_law_matches_P(which):
    L = {"tri6": tri6_ladder(), "toy": toy().ladder, "uni": uni_ladder([1, 4, 2, 6])}[which]
    K = build_kernel(L)
    cums, tgts = K.thresholds()
    rng = np.random.default_rng(0)
    pt = rng.dirichlet(np.ones(L.m + 1))
    P = evaluate_P(K, pt)
    for i in range(L.size):
        row = np.zeros(L.size)
        for b in range(L.m + 1):
            for j, w in _interval_law(cums[b], i, tgts[b]).items():
                row[j] += pt[b] * w
        assert row == pytest.approx(P[i], abs=1e-14)


def test_monotone_no_crossing():
    for R in ([1, 2, 1], [1, 5, 2, 7, 0.5], [3, 3, 2, 2 + 2**0.5, 2**0.5]):
        M = MonotoneUpdate(R)
        cuts = sorted({0.0, 1.0, *M.up.tolist(), *M.down.tolist()})
        reps = [0.5 * (a + b) for a, b in zip(cuts, cuts[1:])] + cuts
        for b in (0, 1):
            for u in reps:
                moved = [update_monotone(M, i, b, u) for i in range(M.k + 1)]
                assert all(x <= y for x, y in zip(moved, moved[1:]))


def test_monotone_replay_matches_python():
    from dice_enterprise.cftp import _replay_monotone
    rng = np.random.default_rng(1)
    M = MonotoneUpdate([1, 3, 4, 3, 1])
    B = rng.integers(0, 2, 200).astype(np.int8)
    U = rng.random(200)
    for T in (1, 5, 50, 200):
        lo, hi = _replay_monotone(B, U, T, M.up, M.down, M.k)
        assert (lo, hi) == replay_monotone_trace(M, B, U, T)[-1]


def test_single_state():
    L = Ladder.from_terms([(1.0, (2, 0))])
    E = build_kernel(L)
    run = cftp_general(E, SimulatedDie([0.5, 0.5]), PrngUniform(0))
    assert run.state == 0 and run.N == 0
    run = cftp_monotone([1.0], SimulatedDie([0.5, 0.5]), PrngUniform(0))
    assert run.state == 0 and run.N == 0


def test_logistic_at_one():
    from dice_enterprise.enterprise import sample
    E = build(["1/(1+p)", "p/(1+p)"], complement=None)
    rep = sample(E, SimulatedDie([0, 1], seed=3), 4000, seed=4)
    assert np.all(rep.states == E.ladder.size - 1)
    assert abs(rep.frequencies(1)[1] - 0.5) < 4 * np.sqrt(0.25 / 4000)


def test_tri6_general_law():
    K = build_kernel(tri6_ladder())
    pt = (0.2, 0.3, 0.5)
    die, uni = SimulatedDie(pt, seed=105), PrngUniform(106)
    n = 10**4
    got = np.bincount(draws(lambda: cftp_general(K, die, uni), n), minlength=6)
    pi = tri6_ladder().distribution(pt)
    assert chisquare(got, pi * n).pvalue > ALPHA


def test_toy_monotone():
    E = toy()
    die, uni = SimulatedDie([0.5, 0.5], seed=8), PrngUniform(9)
    n = 10**4
    runs = [cftp_monotone(E.ladder.R, die, uni) for _ in range(n)]
    states = np.array([r.state for r in runs])
    pi = E.ladder.distribution(0.5)
    assert chisquare(np.bincount(states, minlength=5), pi * n).pvalue > ALPHA
    mean_N = np.mean([r.N for r in runs[:1000]])
    assert abs(mean_N - 10.6) <= 2


def test_deterministic_tails():
    die, uni = SimulatedDie([1, 0]), PrngUniform(0)
    assert all(cftp_monotone([1, 2, 1], die, uni).state == 0 for _ in range(50))


def test_monotone_agrees_with_general():
    E = toy()
    n = 5000
    die, uni = SimulatedDie([0.7, 0.3], seed=10), PrngUniform(11)
    a = np.bincount(draws(lambda: cftp_general(E.kernel, die, uni), n), minlength=5)
    b = np.bincount(draws(lambda: cftp_monotone(E.ladder.R, die, uni), n), minlength=5)
    assert chi2_contingency(np.array([a, b]))[1] > ALPHA


def test_doubling_law():
    E = toy()
    die, uni = SimulatedDie([0.5, 0.5], seed=12), PrngUniform(13)
    n = 5000
    got = np.bincount(draws(lambda: cftp_monotone(E.ladder.R, die, uni, doubling=True), n), minlength=5)
    assert chisquare(got, E.ladder.distribution(0.5) * n).pvalue > ALPHA
    got = np.bincount(draws(lambda: cftp_general(E.kernel, die, uni, doubling=True), n), minlength=5)
    assert chisquare(got, E.ladder.distribution(0.5) * n).pvalue > ALPHA


def test_randomness_reuse():
    E = toy()
    die, uni = SimulatedDie([0.4, 0.6], seed=14), PrngUniform(15)
    for _ in range(50):
        run = cftp_general(E.kernel, die, uni)
        assert run.N == run.T == len(run.B) == run.rolls
        assert replay(E.kernel, run.B, run.U) == [run.state] * E.ladder.size
        mono = cftp_monotone(E.ladder.R, die, uni)
        ends = set(replay(E.kernel, mono.B, mono.U))
        assert ends == {mono.state}


def test_sandwich():
    E = toy()
    M = MonotoneUpdate(E.ladder.R)
    die, uni = SimulatedDie([0.5, 0.5], seed=16), PrngUniform(17)
    for _ in range(100):
        run = cftp_monotone(E.ladder.R, die, uni)
        for T in range(1, run.T + 1):
            assert all(lo <= hi for lo, hi in replay_monotone_trace(M, run.B, run.U, T))


def test_counters_and_cap():
    E = toy()
    die, uni = SimulatedDie([0.5, 0.5], seed=18), PrngUniform(19)
    r0 = die.rolls
    run = cftp_monotone(E.ladder.R, die, uni)
    assert die.rolls - r0 == run.N and run.uniforms == run.N
    with pytest.raises(IterationCapExceeded):
        # five states cannot coalesce in two steps
        cftp_general(E.kernel, SimulatedDie([0.5, 0.5]), PrngUniform(0), cap=2)
    with pytest.raises(ConfigError):
        cftp_general(E.kernel, SimulatedDie([0.2, 0.3, 0.5]), PrngUniform(0))


def test_trace(tmp_path):
    E = toy()
    run = cftp_general(E.kernel, SimulatedDie([0.5, 0.5], seed=1), PrngUniform(2), trace=True)
    path = tmp_path / "trace.csv"
    write_trace(run, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["T", "B", "U", "states"]
    assert len(rows) == run.T + 1
    assert set(rows[-1][3].split()) == {str(run.state)}


def test_naive_single_state():
    L = Ladder.from_terms([(1.0, (2, 1))])
    die = SimulatedDie([0.5, 0.5], seed=3)
    state, rolls, attempts = naive_rejection(L, die, PrngUniform(4), early_stop=False)
    assert state == 0 and rolls == 3 * attempts


def test_naive_matches_cftp():
    E = toy()
    n = 10**4
    die, uni = SimulatedDie([0.5, 0.5], seed=20), PrngUniform(21)
    a = np.bincount([naive_rejection(E.ladder, die, uni)[0] for _ in range(n)], minlength=5)
    b = np.bincount(draws(lambda: cftp_monotone(E.ladder.R, die, uni), n), minlength=5)
    assert chi2_contingency(np.array([a, b]))[1] > ALPHA


@pytest.mark.slow
def test_naive_blocks_cost():
    # every pattern has probability 2^-20 at p=1/2, so attempts are geometric with mean 2^20
    L = Ladder.from_terms([(1, (20, 0)), (1, (10, 10)), (1, (0, 20))])
    die, uni = SimulatedDie([0.5, 0.5], seed=22), PrngUniform(23)
    attempts = [naive_rejection(L, die, uni)[2] for _ in range(10)]
    assert 0.3 * 2**20 < np.mean(attempts) < 2.5 * 2**20
