"""O(N) compiled cores of the cut-structure detectors.

All functions take a float64 path ``x`` of length ``N + 1`` and write into
caller-provided buffers so that they can be driven allocation-free from an
enumeration loop.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def prefix_suffix(x, pm_prev, sm_next):
    """pm_prev[n] = max(x[:n]) (-inf at 0); sm_next[n] = min(x[n+1:]) (+inf at N)."""
    n1 = x.shape[0]
    m = -np.inf
    for n in range(n1):
        pm_prev[n] = m
        if x[n] > m:
            m = x[n]
    s = np.inf
    for n in range(n1 - 1, -1, -1):
        sm_next[n] = s
        if x[n] < s:
            s = x[n]


@njit(cache=True)
def cut_flags(x, pm_prev, sm_next, cut, strong, ctime):
    """Flag cutpoint times, strong-cutpoint times and cut times."""
    n1 = x.shape[0]
    for n in range(n1):
        v = x[n]
        after = v < sm_next[n]
        cut[n] = after and v >= pm_prev[n]
        strong[n] = after and v > pm_prev[n]
        if n < n1 - 1:
            pm = pm_prev[n] if pm_prev[n] > v else v
            ctime[n] = pm < sm_next[n]
        else:
            ctime[n] = False


@njit(cache=True)
def separating_intervals(pm_prev, sm_next, lo_out, hi_out, src_out):
    """Merge the windows (pm_prev[n], sm_next[n]) into disjoint open intervals.

    Windows are already sorted by both endpoints.  Windows that only touch
    (new.lo == cur.hi) stay separate: the shared endpoint is not separating.
    ``src_out[i]`` is the first time whose window opened interval ``i``.
    Returns the number of intervals written.
    """
    n1 = pm_prev.shape[0]
    k = 0
    for n in range(n1):
        a = pm_prev[n]
        b = sm_next[n]
        if not a < b:
            continue
        if k > 0 and a < hi_out[k - 1]:
            if b > hi_out[k - 1]:
                hi_out[k - 1] = b
        else:
            lo_out[k] = a
            hi_out[k] = b
            src_out[k] = n
            k += 1
    return k


@njit(cache=True)
def cut_gaps(x, strong, top, l_out, r_out, cnt_out, first_out):
    """Maximal intervals of [0, top] whose interior visits are all strong cutpoints.

    Boundaries are 0, every visited value that is not a strong cutpoint, and
    ``top``.  ``cnt_out`` gets the number of strong values strictly inside and
    ``first_out`` the index (into the sorted strong values) of the first one.
    Returns ``(number of gaps, sorted strong values)``.
    """
    n1 = x.shape[0]
    nb = 0
    for n in range(n1):
        if not strong[n]:
            nb += 1
    bad = np.empty(nb)
    sv = np.empty(n1 - nb)
    i = 0
    j = 0
    for n in range(n1):
        if strong[n]:
            sv[j] = x[n]
            j += 1
        else:
            bad[i] = x[n]
            i += 1
    bad.sort()
    sv.sort()
    g = 0
    left = 0.0
    p = 0  # pointer into sorted strong values
    for t in range(nb + 1):
        right = bad[t] if t < nb else top
        if right > left:
            while p < sv.shape[0] and sv[p] <= left:
                p += 1
            q = p
            while q < sv.shape[0] and sv[q] < right:
                q += 1
            l_out[g] = left
            r_out[g] = right
            cnt_out[g] = q - p
            first_out[g] = p
            g += 1
            p = q
            left = right
    return g, sv


@njit(cache=True)
def greedy_pieces(sv, gl, gr, cnt, first, h, k, l_out, r_out, c_out):
    """Greedy decomposition of each gap into disjoint (h, k) pieces.

    Within a gap ``(gl, gr)`` with interior strong values ``sv[first:first+cnt]``
    a piece starts at ``cur``.  If ``cur + h`` already holds ``k`` points
    strictly inside, the piece is ``[cur, cur + h]``; otherwise it must
    contain the ``k``-th point ``e`` and ends halfway between ``e`` and the
    next point (or the gap end).  ``c_out`` counts points strictly inside.
    Returns the number of pieces.
    """
    m = 0
    for g in range(gl.shape[0]):
        cur = gl[g]
        right = gr[g]
        p = first[g]
        end = first[g] + cnt[g]
        while True:
            while p < end and sv[p] <= cur:
                p += 1
            e = cur + h
            while e - cur < h:  # keep r - l >= h exact in floating point
                e = np.nextafter(e, np.inf)
            if e > right:
                break
            if k > 0:
                if p + k - 1 >= end:
                    break
                kth = sv[p + k - 1]
                if kth >= e:
                    nxt = sv[p + k] if p + k < end else right
                    e = 0.5 * (kth + nxt)
            q = p
            while q < end and sv[q] < e:
                q += 1
            l_out[m] = cur
            r_out[m] = e
            c_out[m] = q - p
            m += 1
            cur = e
            p = q
    return m
