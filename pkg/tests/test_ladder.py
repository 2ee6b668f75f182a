"""Exact-in-law cut-set sampler for nearest-neighbour chains."""
import numpy as np
import pytest
from conftest import with_retry

from cutwalk.cuts import detect_cutpoints
from cutwalk.generators import birth_death_lamperti, plus_one_minus_two
from cutwalk.hitting import bd_escape_probability, bd_exact_race
from cutwalk.ladder import BDScale, LadderSampler
from cutwalk.process import simulate


def test_scale_race_matches_gamblers_ruin():
    spec = birth_death_lamperti(2.0)
    sc = BDScale(spec, 1, 500)
    for start, v, w in [(11, 10, 40), (3, 2, 300), (200, 150, 501)]:
        assert sc.race(start, v, w) == pytest.approx(bd_exact_race(spec, start, v, w), rel=1e-10)


def test_scale_never_hit_is_limit_of_races():
    spec = birth_death_lamperti(1.0, 2.0)
    # the analytic tail beyond 4 * top must agree with exact summation further out
    short = BDScale(spec, 1, 1000).never_hit(101, 100)
    long = BDScale(spec, 1, 100_000).never_hit(101, 100)
    assert short == pytest.approx(long, rel=1e-4)
    assert bd_exact_race(spec, 101, 100, 100_000) > short


def test_scale_recurrent_chain():
    sc = BDScale(birth_death_lamperti(1.0), 1, 100)
    assert not sc.transient
    assert sc.never_hit(10, 5) == 0.0


def test_scale_argument_checks():
    with pytest.raises(TypeError):
        BDScale(plus_one_minus_two(3.0), 1, 10)
    with pytest.raises(ValueError):
        BDScale(birth_death_lamperti(2.0), 0, 10)  # below x_floor - 1
    with pytest.raises(ValueError):
        BDScale(birth_death_lamperti(2.0), 5, 5)


def test_sample_shapes_and_strong_subset():
    L = LadderSampler(birth_death_lamperti(2.0), 256)
    levels, low, g, cut, strong = L.sample(3, 0)
    assert levels[0] == L.start and levels[-1] == 256
    assert low.shape == cut.shape == strong.shape == levels.shape
    assert np.all(cut[strong])
    assert np.all(low <= levels)
    assert L.start - 1 <= g <= L.top


def test_sample_reproducible():
    L = LadderSampler(birth_death_lamperti(2.0), 128)
    a = L.sample(9, 4)
    b = L.sample(9, 4)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


def test_cut_marginals_match_exact():
    spec = birth_death_lamperti(2.0)
    L = LadderSampler(spec, 200)
    R = 3000

    def check(seed):
        cuts = np.array([L.sample(seed, r)[3] for r in range(R)])
        for v in (5, 20, 80):
            p = L.cut_probability(v)
            assert p == pytest.approx(bd_escape_probability(spec, v + 1, v), rel=1e-4)
            f = cuts[:, v - L.s0].mean()
            assert abs(f - p) <= 3 * np.sqrt(p * (1 - p) / R)
    with_retry(check)


def test_ladder_matches_direct_simulation_at_low_levels():
    # a = 3 runs away fast, so a 5e4-step path has settled its low cut set
    spec = birth_death_lamperti(3.0)
    L = LadderSampler(spec, 64)
    R = 1500

    def check(seed):
        lad = np.array([L.sample(seed, r)[3][[4 - L.s0, 8 - L.s0]] for r in range(R)])
        direct = np.zeros((R, 2), bool)
        for r in range(R):
            rep = detect_cutpoints(simulate(spec, 2, 50_000, seed, replica=r))
            vals = set(rep.cut_values.astype(int).tolist())
            direct[r] = [4 in vals, 8 in vals]
        for i in range(2):
            p1, p2 = lad[:, i].mean(), direct[:, i].mean()
            se = np.sqrt((p1 * (1 - p1) + p2 * (1 - p2)) / R)
            assert abs(p1 - p2) <= 3 * se
    with_retry(check)


def test_block_stats_consistent_with_marginals():
    spec = birth_death_lamperti(2.0)
    L = LadderSampler(spec, 2**9)
    hit, mx, ncut = L.block_stats(17, 2000, 4, 8)
    assert hit.shape == mx.shape == ncut.shape == (2000, 5)
    assert np.array_equal(hit, ncut >= 1)
    # mean count per block equals the sum of exact marginals over [x, 2x]
    for i, j in enumerate(range(4, 9)):
        x = 2**j
        exact = sum(L.cut_probability(v) for v in range(x, 2 * x + 1))
        se = ncut[:, i].std(ddof=1) / np.sqrt(2000)
        assert abs(ncut[:, i].mean() - exact) <= 4 * se


def test_block_stats_range_checks():
    L = LadderSampler(birth_death_lamperti(2.0), 2**9)
    with pytest.raises(ValueError):
        L.block_stats(1, 10, 4, 9)


def test_critical_chain_blocks_become_rare():
    L = LadderSampler(birth_death_lamperti(1.0, 2.0), 2**13, first_level=2**5)
    hit, _, _ = L.block_stats(5, 2000, 6, 12)
    pe = hit.mean(0)
    assert pe[-1] < pe[0]
