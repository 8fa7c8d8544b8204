"""JIT-compiled scan kernels.

Same contracts as numpy_backend; see that module for the full docstrings.
Both backends evaluate entropies with the identical expression
log2(m) - (a*log2(a) + b*log2(b)) / m so their outputs match bitwise on
the same input.
"""

import math

from numba import njit


@njit(cache=True, nogil=True)
def _ent2(a, b):
    if a <= 0 or b <= 0:
        return 0.0
    m = a + b
    return math.log2(m) - (a * math.log2(a) + b * math.log2(b)) / m


@njit(cache=True, nogil=True)
def best_split_scan(values, labels, min_leaf):
    """First-maximal information-gain boundary over a sorted column.

    values: float64, ascending; labels: int64 0/1 aligned with values.
    Returns (gain, cut_index) where cut_index is the left-part size, or
    (-1.0, -1) when no boundary satisfies min_leaf on both sides.
    """
    n = values.shape[0]
    total1 = 0
    for i in range(n):
        total1 += labels[i]
    total0 = n - total1
    h_total = _ent2(total0, total1)
    best_gain = -1.0
    best_idx = -1
    left1 = 0
    for i in range(1, n):
        left1 += labels[i - 1]
        if values[i] == values[i - 1]:
            continue
        if i < min_leaf or n - i < min_leaf:
            continue
        l1 = left1
        l0 = i - l1
        e = (i * _ent2(l0, l1) + (n - i) * _ent2(total0 - l0, total1 - l1)) / n
        g = h_total - e
        if g > best_gain:
            best_gain = g
            best_idx = i
    if best_idx < 0:
        return -1.0, -1
    return best_gain, best_idx


@njit(cache=True, nogil=True)
def mdl_boundary_scan(values, labels):
    """First-minimal weighted-entropy boundary point over a sorted column.

    Candidate boundaries sit between runs of equal values; a boundary is
    skipped when both adjacent runs are pure and share one class.
    Returns (cut_index, left_count_class0, left_count_class1), or
    (-1, 0, 0) when there is no candidate.
    """
    n = values.shape[0]
    total1 = 0
    for i in range(n):
        total1 += labels[i]
    total0 = n - total1
    best_idx = -1
    best_e = math.inf
    best_l0 = 0
    best_l1 = 0
    run_start = 0
    prev_pure = -2
    left0 = 0
    left1 = 0
    for i in range(1, n + 1):
        if i < n and values[i] == values[i - 1]:
            continue
        # run [run_start, i) closed; find its purity (-1 mixed, else class)
        first = labels[run_start]
        pure = first
        for j in range(run_start + 1, i):
            if labels[j] != first:
                pure = -1
                break
        if run_start > 0 and not (prev_pure >= 0 and prev_pure == pure):
            nl = run_start
            e = (nl * _ent2(left0, left1) + (n - nl) * _ent2(total0 - left0, total1 - left1)) / n
            if e < best_e:
                best_e = e
                best_idx = nl
                best_l0 = left0
                best_l1 = left1
        run1 = 0
        for j in range(run_start, i):
            run1 += labels[j]
        left1 += run1
        left0 += (i - run_start) - run1
        prev_pure = pure
        run_start = i
    return best_idx, best_l0, best_l1
