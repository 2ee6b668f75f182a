"""Races, exact ruin probabilities and never-return estimators."""
import io

import numpy as np
import pytest
from conftest import RETRY_SEEDS, with_retry

from cutwalk.generators import birth_death_lamperti, plus_one_minus_two, ssrw_vector
from cutwalk.hitting import (EscapeEstimate, bd_escape_probability, bd_exact_race,
                             first_passage, mc_escape_forever, mc_race,
                             targeted_entry_probability, write_hit_csv)


def _ruin_by_linear_solve(spec, start, a, b):
    """P_start(hit b before a) from the harmonic equations, no products involved."""
    n = b - a - 1
    lv = np.arange(a + 1, b, dtype=np.float64)
    p = spec.up_probability(lv)
    A = np.eye(n)
    rhs = np.zeros(n)
    for i in range(n):
        if i + 1 < n:
            A[i, i + 1] -= p[i]
        else:
            rhs[i] += p[i]
        if i - 1 >= 0:
            A[i, i - 1] -= 1 - p[i]
    h = np.linalg.solve(A, rhs)
    return h[start - a - 1]


def test_first_passage_examples():
    assert first_passage([0, 1, 2, 3, 4, 5, 6, 7], 0, 5) == (0, 6)
    assert first_passage([3, 4, 2, 6], 1, 3) == (2, 1)
    assert first_passage([3, 4, 5], 0, 10) == (0, None)
    assert first_passage([3, 4, 5], 1, 2) == (None, 1)


def test_first_passage_rejects_bad_n():
    with pytest.raises(ValueError):
        first_passage([0, 1, 2], 5, 1)


def test_symmetric_ruin_is_linear():
    spec = birth_death_lamperti(0.0, x_floor=1)
    assert bd_exact_race(spec, 5, 0, 10) == pytest.approx(0.5, abs=1e-12)
    for m in range(1, 20):
        assert bd_exact_race(spec, m, 0, 20) == pytest.approx(m / 20, abs=1e-12)


def test_start_at_upper_target_is_certain():
    spec = birth_death_lamperti(2.0)
    assert bd_exact_race(spec, 30, 10, 30) == 1.0


@pytest.mark.parametrize("a,c", [(2.0, None), (1.0, 2.0), (0.5, None), (2.0, 1.0)])
def test_exact_race_matches_linear_solve(a, c):
    spec = birth_death_lamperti(a, c)
    for start, lo, hi in [(11, 10, 40), (25, 10, 40), (3, 2, 9), (100, 50, 200)]:
        assert bd_exact_race(spec, start, lo, hi) == pytest.approx(
            _ruin_by_linear_solve(spec, start, lo, hi), rel=1e-9)


def test_exact_race_limit_is_escape_probability():
    spec = birth_death_lamperti(2.0)
    esc = bd_escape_probability(spec, 11, 10)
    far = bd_exact_race(spec, 11, 10, 200_000)
    assert far == pytest.approx(esc, rel=1e-3)
    assert far >= esc
    # a = 2: P_{x+1}(never hit x) = 1/(x+1) exactly-ish up to O(1/x^2)
    assert 10 * esc == pytest.approx(1.0, rel=0.15)


def test_exact_race_rejects_degenerate_p():
    spec2 = birth_death_lamperti(2.0, x_floor=1)  # p(1) = 1
    with pytest.raises(ValueError):
        bd_exact_race(spec2, 2, 0, 5)
    with pytest.raises(ValueError):
        bd_exact_race(birth_death_lamperti(2.0), 5, 6, 10)


def test_exact_race_needs_birth_death():
    with pytest.raises(TypeError):
        bd_exact_race(plus_one_minus_two(3.0), 5, 2, 10)


def test_mc_race_agrees_with_exact():
    spec = birth_death_lamperti(2.0)

    def check(seed):
        est = mc_race(spec, 21, 20, 60, 20_000, seed)
        ref = bd_exact_race(spec, 21, 20, 80)
        assert est.truncations == 0
        assert est.replicas == 20_000
        assert abs(est.estimate - ref) <= 3 * est.se
    with_retry(check)


def test_mc_race_monotone_in_y_for_equal_seeds():
    # the same replica streams race to a farther target: escapes can only drop
    spec = birth_death_lamperti(2.0)
    prev = 1.0
    for y in (5, 10, 20, 40, 80):
        est = mc_race(spec, 11, 10, y, 4000, RETRY_SEEDS[0])
        assert est.estimate <= prev
        prev = est.estimate


def test_mc_race_start_validation():
    spec = birth_death_lamperti(2.0)
    with pytest.raises(ValueError):
        mc_race(spec, 10, 10, 5, 10, 1)
    with pytest.raises(ValueError):
        mc_race(spec, 16, 10, 5, 10, 1)
    with pytest.raises(ValueError):
        mc_race(spec, 11, 10, 0, 10, 1)
    with pytest.raises(ValueError):
        mc_race(spec, 11, 10, 5, 0, 1)


def test_targeted_entry_equals_race_for_nearest_neighbour():
    spec = birth_death_lamperti(2.0)
    a = mc_race(spec, 11, 10, 30, 3000, 5)
    b = targeted_entry_probability(spec, 11, 10, 30, 3000, 5)
    assert a.escapes == b.escapes


def test_targeted_entry_bounded_by_race_for_jumps():
    spec = plus_one_minus_two(3.0)
    a = mc_race(spec, 11, 10, 30, 3000, 5)
    b = targeted_entry_probability(spec, 11, 10, 30, 3000, 5)
    assert b.escapes <= a.escapes
    with pytest.raises(TypeError):
        targeted_entry_probability(ssrw_vector(3), 11, 10, 30, 10, 5)


def test_escape_race_reference_and_bias():
    spec = birth_death_lamperti(2.0)
    est = mc_escape_forever(spec, 21, 20, 20_000, 7, y_cap_mult=3.0)
    assert est.reference == pytest.approx(bd_exact_race(spec, 21, 20, 80))
    assert est.bias_bound is not None and est.bias_bound >= 0
    assert est.extra["never_return"] == pytest.approx(bd_escape_probability(spec, 21, 20))
    assert est.escapes + est.returns + est.truncations == est.replicas


def test_skeleton_matches_never_return_series():
    spec = birth_death_lamperti(1.0, 2.0)

    def check(seed):
        est = mc_escape_forever(spec, 101, 100, 40_000, seed, method="skeleton")
        assert abs(est.estimate - est.reference) <= 3 * est.se
    with_retry(check)


def test_skeleton_vs_long_race():
    # the race to a far cap overestimates never-return by at most bias_bound
    spec = birth_death_lamperti(2.0)
    sk = mc_escape_forever(spec, 11, 10, 20_000, 3, method="skeleton")
    ra = mc_escape_forever(spec, 11, 10, 20_000, 4, y_cap_mult=50.0)
    gap = ra.estimate - sk.estimate
    assert abs(gap - ra.bias_bound) <= 3 * np.hypot(sk.se, ra.se)


def test_skeleton_rejects_non_integer_and_jump_chains():
    with pytest.raises(ValueError):
        mc_escape_forever(birth_death_lamperti(2.0), 10.5, 10, 10, 1, method="skeleton")
    with pytest.raises(TypeError):
        mc_escape_forever(plus_one_minus_two(3.0), 11, 10, 10, 1, method="skeleton")
    with pytest.raises(ValueError):
        mc_escape_forever(birth_death_lamperti(2.0), 11, 10, 10, 1, method="bogus")


def test_recurrent_chain_never_escapes():
    assert bd_escape_probability(birth_death_lamperti(0.5), 11, 10) == 0.0


def test_binomial_interval_switch():
    big = EscapeEstimate.from_counts(500, 500, 0)
    assert big.method == "normal"
    assert big.half_width == pytest.approx(1.959963984540054 * np.sqrt(0.25 / 1000))
    small = EscapeEstimate.from_counts(3, 997, 0)
    assert small.method == "wilson"
    lo, hi = small.interval
    assert 0 <= lo < small.estimate < hi <= 1
    zero = EscapeEstimate.from_counts(0, 50, 0)
    assert zero.half_width > 0
    with pytest.raises(ValueError):
        EscapeEstimate.from_counts(0, 0, 0)


def test_hit_csv_header():
    buf = io.StringIO()
    write_hit_csv([(10, 30, EscapeEstimate.from_counts(3, 7, 0))], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,y,estimate,ci,escapes,returns,truncations"
    assert lines[1].split(",")[4:] == ["3", "7", "0"]
