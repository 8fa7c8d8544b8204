"""Brute-force reference implementations used as oracles.

Everything here is deliberately slow and written with plain Python lists
and Counters, independent of the package internals, so a disagreement
points at a real defect rather than a shared bug.
"""

import math
from collections import Counter


def ref_entropy(labels) -> float:
    """Shannon entropy in bits of a label list."""
    n = len(labels)
    if n == 0:
        return 0.0
    counts = Counter(labels)
    if len(counts) == 1:
        return 0.0
    acc = 0.0
    for c in counts.values():
        acc += c * math.log2(c)
    return math.log2(n) - acc / n


def _split_entropy(labels, i) -> float:
    n = len(labels)
    left = labels[:i]
    right = labels[i:]
    return (len(left) * ref_entropy(left) + len(right) * ref_entropy(right)) / n


def ref_best_split(values_sorted, labels_sorted, min_leaf):
    """First-maximal information-gain boundary; mirrors the kernel contract."""
    vs = list(values_sorted)
    ys = list(labels_sorted)
    n = len(vs)
    base = ref_entropy(ys)
    best_gain = -1.0
    best_idx = -1
    for i in range(1, n):
        if vs[i] == vs[i - 1]:
            continue
        if i < min_leaf or n - i < min_leaf:
            continue
        g = base - _split_entropy(ys, i)
        if g > best_gain:
            best_gain = g
            best_idx = i
    if best_idx < 0:
        return -1.0, -1
    return best_gain, best_idx


def _is_boundary(vs, ys, i) -> bool:
    """True when position i separates adjacent distinct values that do not
    both sit in single-class blocks of the same class."""
    if vs[i] == vs[i - 1]:
        return False
    lo = i - 1
    while lo > 0 and vs[lo - 1] == vs[i - 1]:
        lo -= 1
    hi = i + 1
    while hi < len(vs) and vs[hi] == vs[i]:
        hi += 1
    left_classes = set(ys[lo:i])
    right_classes = set(ys[i:hi])
    return not (len(left_classes) == 1 and left_classes == right_classes)


def ref_mdl_cuts(values, labels):
    """Recursive entropy discretization with the MDL stopping criterion."""
    pairs = sorted(zip(values, labels), key=lambda p: p[0])
    vs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    out = []
    _ref_mdl(vs, ys, out)
    out.sort()
    return out


def _ref_mdl(vs, ys, out):
    n = len(vs)
    if n < 2:
        return
    best = None
    for i in range(1, n):
        if not _is_boundary(vs, ys, i):
            continue
        e = _split_entropy(ys, i)
        if best is None or e < best[0]:
            best = (e, i)
    if best is None:
        return
    e, i = best
    left = ys[:i]
    right = ys[i:]
    ent_s = ref_entropy(ys)
    gain = ent_s - e
    k = len(set(ys))
    k1 = len(set(left))
    k2 = len(set(right))
    delta = math.log2(3**k - 2) - (
        k * ent_s - k1 * ref_entropy(left) - k2 * ref_entropy(right)
    )
    if gain <= math.log2(n - 1) / n + delta / n:
        return
    out.append((vs[i - 1] + vs[i]) / 2.0)
    _ref_mdl(vs[:i], left, out)
    _ref_mdl(vs[i:], right, out)


def ref_apply_cuts(values, cuts):
    """Bin index per value: the count of cuts strictly below the value."""
    return [sum(1 for c in cuts if c < v) for v in values]


def ref_info_gain(binned, labels) -> float:
    n = len(labels)
    cond = 0.0
    for b in set(binned):
        sub = [labels[i] for i in range(n) if binned[i] == b]
        cond += len(sub) * ref_entropy(sub) / n
    return ref_entropy(labels) - cond


def ref_gain_ratio(binned, labels) -> float:
    hx = ref_entropy(binned)
    if hx == 0.0:
        return 0.0
    return ref_info_gain(binned, labels) / hx


def ref_sym_uncertainty(binned, labels) -> float:
    denom = ref_entropy(binned) + ref_entropy(labels)
    if denom == 0.0:
        return 0.0
    return 2.0 * ref_info_gain(binned, labels) / denom


def ref_chi_square(binned, labels) -> float:
    n = len(labels)
    cell = Counter(zip(binned, labels))
    row_totals = Counter(binned)
    col_totals = Counter(labels)
    total = 0.0
    for r in sorted(row_totals):
        for c in sorted(col_totals):
            expected = row_totals[r] * col_totals[c] / n
            if expected == 0:
                continue
            observed = cell[(r, c)]
            total += (observed - expected) ** 2 / expected
    return total


def ref_fisher(values, labels) -> float:
    pos = [v for v, y in zip(values, labels) if y == 1]
    neg = [v for v, y in zip(values, labels) if y == 0]
    mu_p = sum(pos) / len(pos)
    mu_n = sum(neg) / len(neg)
    var_p = sum((v - mu_p) ** 2 for v in pos) / len(pos)
    var_n = sum((v - mu_n) ** 2 for v in neg) / len(neg)
    denom = math.sqrt(var_p) + math.sqrt(var_n)
    return abs(mu_p - mu_n) / max(denom, 1e-12)


def ref_score(values, labels, method) -> float:
    """Score one raw feature column the way the pipeline does end to end."""
    if method == "fisher":
        return ref_fisher(values, labels)
    cuts = ref_mdl_cuts(values, labels)
    binned = ref_apply_cuts(values, cuts)
    if method == "info_gain":
        return ref_info_gain(binned, labels)
    if method == "gain_ratio":
        return ref_gain_ratio(binned, labels)
    if method == "sym_uncertainty":
        return ref_sym_uncertainty(binned, labels)
    if method == "chi_square":
        return ref_chi_square(binned, labels)
    raise ValueError(method)


def ref_mdl_boundary(values_sorted, labels_sorted):
    """First-minimal weighted-entropy boundary; mirrors the kernel contract."""
    vs = list(values_sorted)
    ys = list(labels_sorted)
    best = None
    for i in range(1, len(vs)):
        if not _is_boundary(vs, ys, i):
            continue
        e = _split_entropy(ys, i)
        if best is None or e < best[0]:
            best = (e, i)
    if best is None:
        return -1, 0, 0
    i = best[1]
    left = ys[:i]
    ones = sum(1 for y in left if y == 1)
    return i, len(left) - ones, ones
