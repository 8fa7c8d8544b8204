"""Vectorized pure-numpy scan kernels.

These are the fallback twins of the numba backend.  Inputs are a feature
column sorted ascending plus the class labels in the same order; outputs
identify one boundary index, counting from the left, so a cut index c
means "left part = first c samples".  Midpoint thresholds are computed by
the callers from the two values around the cut.
"""

import numpy as np


def _ent_pair(a, b):
    """Entropy in bits of two-class count arrays; zero-count pairs give 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m = a + b
    both = (a > 0) & (b > 0)
    sa = np.where(a > 0, a, 1.0)
    sb = np.where(b > 0, b, 1.0)
    sm = np.where(m > 0, m, 1.0)
    h = np.log2(sm) - (sa * np.log2(sa) + sb * np.log2(sb)) / sm
    return np.where(both, h, 0.0)


def best_split_scan(values, labels, min_leaf):
    """First-maximal information-gain boundary over a sorted column.

    values: float64 ascending; labels: int64 0/1.  Returns (gain, cut_index)
    with cut_index the left-part size, or (-1.0, -1) when no boundary keeps
    min_leaf samples on both sides.
    """
    n = values.shape[0]
    if n < 2:
        return -1.0, -1
    total1 = int(labels.sum())
    total0 = n - total1
    h_total = float(_ent_pair(total0, total1))
    i = np.arange(1, n, dtype=np.int64)
    valid = values[1:] != values[:-1]
    valid &= (i >= min_leaf) & (n - i >= min_leaf)
    if not valid.any():
        return -1.0, -1
    l1 = np.cumsum(labels)[:-1]
    l0 = i - l1
    e = (i * _ent_pair(l0, l1) + (n - i) * _ent_pair(total0 - l0, total1 - l1)) / n
    g = np.where(valid, h_total - e, -np.inf)
    j = int(np.argmax(g))
    return float(g[j]), int(i[j])


def mdl_boundary_scan(values, labels):
    """First-minimal weighted-entropy boundary point over a sorted column.

    Candidate boundaries sit between runs of equal values; a boundary is
    skipped when both adjacent runs are pure and share one class.  Returns
    (cut_index, left_count_class0, left_count_class1) or (-1, 0, 0).
    """
    n = values.shape[0]
    if n < 2:
        return -1, 0, 0
    cuts = np.flatnonzero(values[1:] != values[:-1]) + 1
    if cuts.size == 0:
        return -1, 0, 0
    starts = np.concatenate((np.zeros(1, dtype=np.int64), cuts))
    ends = np.concatenate((cuts, np.array([n], dtype=np.int64)))
    cum = np.concatenate((np.zeros(1, dtype=np.int64), np.cumsum(labels)))
    run1 = cum[ends] - cum[starts]
    runlen = ends - starts
    pure = np.where(run1 == 0, 0, np.where(run1 == runlen, 1, -1))
    valid = ~((pure[:-1] >= 0) & (pure[:-1] == pure[1:]))
    if not valid.any():
        return -1, 0, 0
    total1 = int(cum[-1])
    total0 = n - total1
    l1 = cum[cuts]
    l0 = cuts - l1
    e = (cuts * _ent_pair(l0, l1) + (n - cuts) * _ent_pair(total0 - l0, total1 - l1)) / n
    e = np.where(valid, e, np.inf)
    j = int(np.argmin(e))
    return int(cuts[j]), int(l0[j]), int(l1[j])
