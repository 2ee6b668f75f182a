import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

import oracles
from cutwalk import generators as G
from cutwalk.cuts import (CANDIDATE, CONFIRMED, ax_spacing, count_disjoint_cut_intervals,
                          detect_Ax_events, detect_cut_annuli, detect_cut_intervals,
                          detect_cut_times, detect_cutpoints, detect_separating_set,
                          is_cut_interval)
from cutwalk.process import simulate
from cutwalk.trajectory import ScalarTrajectory, VectorTrajectory

# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------

int_paths = st.lists(st.integers(0, 6), min_size=1, max_size=40).map(
    lambda v: np.asarray(v, dtype=float))
walk_paths = st.lists(st.sampled_from([-1, 1, 1, 2, -2, 0]), min_size=0, max_size=200).map(
    lambda s: np.maximum(np.cumsum([3] + s), 0).astype(float))
real_paths = st.lists(st.floats(0, 8, allow_nan=False), min_size=1, max_size=30).map(np.asarray)
SPECS = [G.birth_death_lamperti(2.0), G.birth_death_lamperti(1.0, 2.0),
         G.birth_death_lamperti(0.0), G.plus_one_minus_two(4.0), G.ssrw_norm(3),
         G.ssrw_norm(1), G.constant_step(1.0)]
generated = st.builds(lambda spec, seed, n, x0: simulate(spec, x0, n, seed),
                      st.sampled_from(SPECS), st.integers(0, 2**64 - 1),
                      st.integers(0, 3000), st.integers(0, 20))


# ---------------------------------------------------------------------------
# documented examples
# ---------------------------------------------------------------------------

def test_staircase_has_cutpoints_but_no_strong_ones():
    K = 30
    path = np.repeat(np.arange(K + 1), 2).astype(float)
    rep = detect_cutpoints(path, W=5)
    assert rep.cut_values.tolist() == list(range(K + 1))
    assert rep.cut_n0.tolist() == [2 * v + 1 for v in range(K + 1)]
    assert rep.n_strong == 0
    assert detect_cut_intervals(path, 1, 1) == []


def test_increasing_path():
    N = 100
    path = np.arange(N + 1, dtype=float)
    rep = detect_cutpoints(path, W=10)
    assert rep.cut_values.tolist() == list(range(N + 1))
    assert rep.cut_strong.all()
    assert rep.statuses().tolist() == [CONFIRMED] * 91 + [CANDIDATE] * 10
    times, conf = detect_cut_times(path, W=10)
    assert times.tolist() == list(range(N))
    iv = detect_cut_intervals(path, 3, 2, W=10)
    assert len(iv) == 1 and (iv[0].l, iv[0].r) == (0.0, float(N)) and iv[0].k_obs == N - 1


def test_default_window_is_50B():
    path = ScalarTrajectory(np.arange(101, dtype=float), jump_bound=1.0)
    assert detect_cutpoints(path).W == 50.0
    assert detect_cutpoints(2.0 * np.arange(10)).W == 100.0


def test_separating_even_path():
    N = 25
    S = detect_separating_set(2.0 * np.arange(N + 1), W=0)
    assert S.candidate_measure == pytest.approx(2 * N)
    assert S.intervals() == [(0.0, 2.0 * N)]


def test_constant_path_has_no_cut_times():
    assert detect_cut_times(np.full(10, 4.0))[0].size == 0


def test_single_point_path():
    rep = detect_cutpoints([3.0], W=0)
    assert rep.cut_values.tolist() == [3.0] and rep.n_cut_times == 0


def test_cut_times_exclude_horizon():
    times, _ = detect_cut_times(np.array([0.0, 1.0]), W=0)
    assert times.tolist() == [0]


def test_json_and_csv():
    rep = detect_cutpoints([0.0, 1.0, 1.0, 2.0], W=1)
    assert rep.to_csv().splitlines() == ["x,n0,strong,status", "0,0,1,CONFIRMED",
                                         "1,2,0,CONFIRMED", "2,3,1,CANDIDATE"]
    import json
    js = json.loads(rep.to_json())
    assert js["cutpoints"][0] == {"x": 0.0, "n0": 0, "status": CONFIRMED}


def test_straight_line_annuli_tile_the_ray():
    N = 40
    vt = VectorTrajectory(np.column_stack([np.arange(N + 1.0), np.zeros(N + 1)]))
    ann = detect_cut_annuli(vt, 2, 2, W=0, disjoint=True)
    assert len(ann) >= N // 3
    for a, b in zip(ann, ann[1:]):
        assert a.r == b.l
    for a in ann:
        assert a.r - a.l >= 2 and a.visits >= 2


def test_equal_norms_disqualify_annulus():
    # two consecutive visits on the same circle inside (l, r)
    pts = np.array([[0, 0], [1, 0], [2, 0], [0, 2], [3, 0], [4, 0], [5, 0], [6, 0]], float)
    vt = VectorTrajectory(pts)
    for a in detect_cut_annuli(vt, 0.5, 1, W=0):
        assert not (a.l < 2 < a.r)


def test_ax_examples():
    path = np.arange(40, dtype=float)
    res = detect_Ax_events(path, 0.5, 4, n=0, x_grid=[10.0], W=0)
    assert res.flagged.tolist() == [True]
    back = np.concatenate([np.arange(20.0), [11.0], np.arange(12.0, 40.0)])
    assert detect_Ax_events(back, 0.5, 4, x_grid=[10.0], W=0).flagged.tolist() == [False]
    with pytest.raises(ValueError):
        detect_Ax_events(path + 5, 0.5, 4, n=0, x_grid=[5.0])
    with pytest.raises(ValueError):
        detect_Ax_events(path, 0.5, 4, n=3, x_grid=[3.0], jump_bound=1.0)
    with pytest.raises(ValueError):
        detect_Ax_events(path, 0.5, 2, x_grid=[10.0], h=1, k=1)
    assert ax_spacing(4, 0.5) == 4.0 and ax_spacing(1, 0.25) == 1.0


def test_ax_default_grid():
    res = detect_Ax_events(np.arange(60, dtype=float), 0.5, 3, n=0, W=0)
    assert res.x[0] == 3.0 and np.allclose(np.diff(res.x), 3.0)


@pytest.mark.parametrize("h,k", [(0, 1), (-1, 1), (1, -1), (1, 1.5)])
def test_bad_hk(h, k):
    with pytest.raises(ValueError):
        detect_cut_intervals([0.0, 1.0], h, k)


# ---------------------------------------------------------------------------
# oracle agreement
# ---------------------------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(int_paths, st.integers(1, 3), st.integers(0, 3))
def test_oracle_integer_paths(x, h, k):
    assert oracles.compare_one(x, float(h), k) == 0


@settings(max_examples=200, deadline=None)
@given(real_paths)
def test_oracle_real_paths(x):
    # intervals oracle is integer-only; check the four other detectors
    assert oracles.compare_one(x, 1.0, 0) & 0b01111 == 0


def test_exhaustive_small():
    checked, nbad, *_ = oracles.exhaustive(7, np.arange(4.0), 1.0, 1)
    assert checked == sum(4 ** L for L in range(1, 8)) and nbad == 0


def test_bd_million_steps_intervals_against_independent_count():
    t = simulate(G.birth_death_lamperti(2.0), 0, 10**6, seed=606)
    x = t.positions
    # independent recomputation: strong flags from numpy accumulations
    pm = np.concatenate([[-np.inf], np.maximum.accumulate(x)[:-1]])
    sm = np.concatenate([np.minimum.accumulate(x[::-1])[::-1][1:], [np.inf]])
    strong = (pm < x) & (x < sm)
    obstacles = np.unique(np.concatenate([[0.0, x.max()], x[~strong]]))
    vals = np.sort(x[strong])
    expected = 0
    for a, b in zip(obstacles[:-1], obstacles[1:]):
        c = np.searchsorted(vals, b, "left") - np.searchsorted(vals, a, "right")
        expected += (b - a >= 3) and (c >= 2)
    assert len(detect_cut_intervals(t, 3, 2)) == expected


# ---------------------------------------------------------------------------
# invariants of the cut structures
# ---------------------------------------------------------------------------

def _prefix_suffix(x):
    pm = np.concatenate([[-np.inf], np.maximum.accumulate(x)[:-1]])
    sm = np.concatenate([np.minimum.accumulate(x[::-1])[::-1][1:], [np.inf]])
    return pm, sm


def _upward_skip_free(x):
    d = np.diff(x)
    return bool(np.all(x == np.round(x)) and np.all(d <= 1))


def check_report_invariants(x, W=None):
    rep = detect_cutpoints(x, W)
    # Cs subset of C; values increase with their times
    assert np.all(np.diff(rep.cut_values) > 0) and np.all(np.diff(rep.cut_n0) > 0)
    # (i) #C >= #T -- for integer paths whose up-steps are at most 1, where the
    # running maximum at a cut time is attained at that time
    if _upward_skip_free(x):
        assert rep.n_cutpoints >= rep.n_cut_times
    S = rep.separating
    # strong cutpoints lie in the closure of S and below its supremum (iv)
    for v in rep.strong_values:
        assert S.contains(v) or any(a <= v <= b for a, b in zip(S.lo, S.hi))
    if rep.n_strong:
        assert rep.strong_values.max() <= S.supremum
    # (ii) every window meeting the confirmed part of S above X_0 is witnessed
    times = set(rep.cut_times.tolist())
    pm, sm = _prefix_suffix(x)
    hi_conf = rep.top - rep.W
    for n0 in range(x.size):
        a, b = max(pm[n0], x[0]), min(sm[n0], hi_conf)
        if a < b:
            assert n0 in times or (n0 - 1) in times
    # CONFIRMED implies CANDIDATE conditions (bracketing)
    assert rep.cut_confirmed.sum() <= rep.n_cutpoints
    return rep


def test_cut_times_without_cutpoints_when_jumps_skip_levels():
    # zigzag upwards: every odd time is a cut time, yet no visited value is a
    # cutpoint, so #C >= #T needs upward skip-free paths
    x = np.array([0.25, 0.0, 1.0, 0.5, 2.0, 1.5, 3.0, 2.5, 4.0, 3.5])
    rep = detect_cutpoints(x, W=0)
    assert rep.cut_times.tolist() == [1, 3, 5, 7]
    assert rep.n_cutpoints == 0


@settings(max_examples=150, deadline=None)
@given(generated)
def test_cut_invariants_generated(traj):
    check_report_invariants(traj.positions)


@settings(max_examples=150, deadline=None)
@given(st.one_of(int_paths, walk_paths, real_paths), st.floats(0, 5))
def test_cut_invariants_arbitrary(x, W):
    check_report_invariants(x, W)


@settings(max_examples=60, deadline=None)
@given(generated, st.floats(0, 30), st.floats(0, 30))
def test_bracketing_monotone_in_W(traj, w1, w2):
    lo, hi = sorted((w1, w2))
    a = detect_cutpoints(traj, lo)
    b = detect_cutpoints(traj, hi)
    assert np.all(b.cut_confirmed <= a.cut_confirmed)
    ca, na = count_disjoint_cut_intervals(traj, 1, 1, [10.0, 100.0, 1e4], lo)
    cb, nb = count_disjoint_cut_intervals(traj, 1, 1, [10.0, 100.0, 1e4], hi)
    assert np.all(ca <= na) and np.all(cb <= ca) and np.array_equal(na, nb)
    assert b.separating.confirmed_measure <= a.separating.confirmed_measure + 1e-9


@settings(max_examples=80, deadline=None)
@given(generated, st.floats(0.5, 3), st.integers(0, 3))
def test_intervals_are_cut_intervals(traj, h, k):
    for disjoint in (False, True):
        ivs = detect_cut_intervals(traj, h, k, disjoint=disjoint)
        for c in ivs:
            assert is_cut_interval(traj, c.l, c.r, h, k) and c.k_obs >= k
        for a, b in zip(ivs, ivs[1:]):
            assert a.r <= b.l


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SPECS[:5]), st.integers(0, 2**64 - 1), st.integers(0, 20),
       st.sampled_from([(0.5, 3, 1.0, 1), (0.4, 5, 1.5, 1), (0.5, 5, 2.0, 2)]))
def test_ax_implies_cut_interval(spec, seed, n, params):
    eps, ell, h, k = params
    traj = simulate(spec, 0, 4000, seed)
    B = spec.jump_bound
    assume(ell * eps > max(h, B * k))
    res = detect_Ax_events(traj, eps, ell, n=n, W=0, jump_bound=B, h=h, k=k)
    for x, f in zip(res.x, res.flagged):
        if f:
            assert is_cut_interval(traj, x, x + ell * eps, h, k)
            assert oracles.bf_ax(traj.positions, n, x, eps, ell)
    # and the oracle agrees on every level
    for x, f in zip(res.x, res.flagged):
        assert f == oracles.bf_ax(traj.positions, n, x, eps, ell)


VSPECS = [G.elliptic_walk(2, 1.0, 2.0), G.elliptic_walk(3, 2.0, 1.0), G.ssrw_vector(3),
          G.ssrw_vector(2)]


def _refined(norms, c):
    inside = np.flatnonzero((norms > c.l) & (norms < c.r))
    if inside.size == 0:
        return True
    return (np.all(np.diff(inside) == 1) and np.all(np.diff(norms[inside]) > 0)
            and np.all(norms[:inside[0]] <= c.l) and np.all(norms[inside[-1] + 1:] >= c.r))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(VSPECS), st.integers(0, 2**64 - 1), st.integers(1, 3000),
       st.floats(0.5, 3), st.integers(0, 3))
def test_annulus_interval_correspondence(spec, seed, n, h, k):
    vt = simulate(spec, 0, n, seed)
    norms = vt.norms()
    ann = detect_cut_annuli(vt, h, k)
    ivs = [c for c in detect_cut_intervals(norms, h, k) if _refined(norms.positions, c)]
    assert [(a.l, a.r, a.status) for a in ann] == [(c.l, c.r, c.status) for c in ivs]
    for a in ann:
        if a.entry_time is not None:
            assert a.visits >= k


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**64 - 1))
def test_elliptic_annuli_match_norm_oracle(seed):
    vt = simulate(G.elliptic_walk(2, 1.0, 2.0), 0, 300, seed)
    x = vt.norms().positions
    cut, strong = oracles.bf_cut_flags(x)
    ours = {(a.l, a.r) for a in detect_cut_annuli(vt, 1.0, 2, W=0)}
    for l, r in ours:
        inside = (x > l) & (x < r)
        assert inside.sum() >= 2 and strong[inside].all()
