"""Filter-style feature scoring and top-k ranking.

Five methods: fisher (Golub signal-to-noise on raw counts), info_gain,
gain_ratio, sym_uncertainty, chi_square.  The four discrete methods run on
bins produced by recursive entropy discretization with the MDL stopping
rule; fisher reads the raw counts directly.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroCounts, BadK, EmptyCorpus, LengthMismatch, SingleClassError
from .kernels import mdl_boundary_scan

FISHER = "fisher"
INFO_GAIN = "info_gain"
GAIN_RATIO = "gain_ratio"
SYM_UNCERTAINTY = "sym_uncertainty"
CHI_SQUARE = "chi_square"

# canonical names plus the short CLI spellings
METHOD_ALIASES = {
    FISHER: FISHER,
    INFO_GAIN: INFO_GAIN,
    GAIN_RATIO: GAIN_RATIO,
    SYM_UNCERTAINTY: SYM_UNCERTAINTY,
    CHI_SQUARE: CHI_SQUARE,
    "ig": INFO_GAIN,
    "gr": GAIN_RATIO,
    "su": SYM_UNCERTAINTY,
    "chi": CHI_SQUARE,
}

METHODS = (FISHER, INFO_GAIN, GAIN_RATIO, SYM_UNCERTAINTY, CHI_SQUARE)

# denominators are floored rather than allowed to blow up to infinity so
# every score stays finite and serializable
DENOM_FLOOR = 1e-12

RANKING_FORMAT = "opmal.ranking"
RANKING_VERSION = 1


def canonical_method(name: str) -> str:
    try:
        return METHOD_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown ranking method {name!r}") from None


def entropy(class_counts) -> float:
    """Shannon entropy in bits of a count distribution; 0*log0 = 0."""
    total = 0
    acc = 0.0
    positive = 0
    for c in class_counts:
        if c < 0:
            raise ValueError(f"negative count {c!r}")
        if c > 0:
            positive += 1
            total += c
            acc += c * math.log2(c)
    if total == 0:
        raise AllZeroCounts("entropy of an all-zero count distribution")
    if positive == 1:
        # exact zero; log2(n) - n*log2(n)/n leaves a rounding residue that
        # would defeat == 0.0 guards downstream
        return 0.0
    return math.log2(total) - acc / total


def _ent_or_zero(counts) -> float:
    """Entropy with empty distributions reading as 0 (internal conditional sums)."""
    if not any(c > 0 for c in counts):
        return 0.0
    return entropy(counts)


def _as_column(values, labels):
    v = np.asarray(values, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if v.ndim != 1 or y.ndim != 1 or v.shape[0] != y.shape[0]:
        raise LengthMismatch(f"feature column has {v.shape[0]} values for {y.shape[0]} labels")
    return v, y


def discretize_mdl(values, labels):
    """Cut points for one feature by recursive entropy splitting.

    Candidate cuts are midpoints between adjacent distinct sorted values
    that form a class boundary; a cut is kept while the MDL criterion
    holds.  Returns a sorted list of floats; constant features give [].
    """
    v, y = _as_column(values, labels)
    if v.size == 0:
        return []
    order = np.argsort(v, kind="stable")
    cuts = []
    _mdl_split(v[order], y[order], cuts)
    cuts.sort()
    return cuts


def _mdl_split(vs, ys, out):
    n = vs.shape[0]
    if n < 2:
        return
    idx, l0, l1 = mdl_boundary_scan(vs, ys)
    if idx < 0:
        return
    t1 = int(ys.sum())
    t0 = n - t1
    r0, r1 = t0 - l0, t1 - l1
    ent_s = _ent_or_zero((t0, t1))
    ent_1 = _ent_or_zero((l0, l1))
    ent_2 = _ent_or_zero((r0, r1))
    gain = ent_s - (idx * ent_1 + (n - idx) * ent_2) / n
    k = (t0 > 0) + (t1 > 0)
    k1 = (l0 > 0) + (l1 > 0)
    k2 = (r0 > 0) + (r1 > 0)
    delta = math.log2(3**k - 2) - (k * ent_s - k1 * ent_1 - k2 * ent_2)
    if gain <= math.log2(n - 1) / n + delta / n:
        return
    out.append(float((vs[idx - 1] + vs[idx]) / 2.0))
    _mdl_split(vs[:idx], ys[:idx], out)
    _mdl_split(vs[idx:], ys[idx:], out)


def apply_cuts(values, cuts):
    """Bin ids for values under a cut list; value <= cut goes left."""
    v = np.asarray(values, dtype=np.float64)
    if not cuts:
        return np.zeros(v.shape[0], dtype=np.int64)
    return np.searchsorted(np.asarray(cuts, dtype=np.float64), v, side="left").astype(np.int64)


def contingency_table(binned, labels):
    """Bins x classes count table; rows are bin ids 0..max, columns (benign, malware)."""
    b = np.asarray(binned, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if b.shape != y.shape:
        raise LengthMismatch(f"{b.shape[0]} bins for {y.shape[0]} labels")
    if b.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if b.min() < 0:
        raise ValueError("bin ids must be nonnegative")
    if y.min() < 0 or y.max() > 1:
        raise ValueError("labels must be 0 or 1")
    rows = int(b.max()) + 1
    return np.bincount(b * 2 + y, minlength=2 * rows).reshape(rows, 2)


def info_gain_from_table(table) -> float:
    t = np.asarray(table, dtype=np.int64)
    n = int(t.sum())
    if n == 0:
        raise AllZeroCounts("information gain of an empty table")
    h_class = _ent_or_zero(t.sum(axis=0))
    cond = 0.0
    for row in t:
        m = int(row.sum())
        if m > 0:
            cond += m * _ent_or_zero(row)
    return h_class - cond / n


def info_gain(binned, labels) -> float:
    return info_gain_from_table(contingency_table(binned, labels))


def gain_ratio_from_table(table) -> float:
    t = np.asarray(table, dtype=np.int64)
    h_x = _ent_or_zero(t.sum(axis=1))
    if h_x == 0.0:
        # single-bin feature carries no information; defined as 0 rather
        # than a division blow-up
        return 0.0
    return info_gain_from_table(t) / max(h_x, DENOM_FLOOR)


def gain_ratio(binned, labels) -> float:
    return gain_ratio_from_table(contingency_table(binned, labels))


def sym_uncertainty_from_table(table) -> float:
    t = np.asarray(table, dtype=np.int64)
    h_x = _ent_or_zero(t.sum(axis=1))
    h_c = _ent_or_zero(t.sum(axis=0))
    denom = h_x + h_c
    if denom == 0.0:
        return 0.0
    return 2.0 * info_gain_from_table(t) / denom


def sym_uncertainty(binned, labels) -> float:
    return sym_uncertainty_from_table(contingency_table(binned, labels))


def chi_square_from_table(table) -> float:
    t = np.asarray(table, dtype=np.float64)
    n = t.sum()
    if n == 0:
        raise AllZeroCounts("chi-square of an empty table")
    rows = t.sum(axis=1)
    cols = t.sum(axis=0)
    expected = np.outer(rows, cols) / n
    mask = expected > 0
    diff = t[mask] - expected[mask]
    return float((diff * diff / expected[mask]).sum())


def chi_square(binned, labels) -> float:
    return chi_square_from_table(contingency_table(binned, labels))


def fisher_score(values, labels) -> float:
    """Golub signal-to-noise |mean_m - mean_b| / (std_m + std_b) on raw counts.

    Population standard deviations; the denominator is floored so
    zero-variance features score finitely.
    """
    v, y = _as_column(values, labels)
    m = v[y == 1]
    b = v[y == 0]
    if m.size == 0 or b.size == 0:
        raise SingleClassError("fisher score needs both classes present")
    denom = float(m.std() + b.std())
    return abs(float(m.mean()) - float(b.mean())) / max(denom, DENOM_FLOOR)


def score_feature(values, labels, method: str) -> float:
    method = canonical_method(method)
    if method == FISHER:
        return fisher_score(values, labels)
    v, y = _as_column(values, labels)
    bins = apply_cuts(v, discretize_mdl(v, y))
    if method == INFO_GAIN:
        return info_gain(bins, y)
    if method == GAIN_RATIO:
        return gain_ratio(bins, y)
    if method == SYM_UNCERTAINTY:
        return sym_uncertainty(bins, y)
    return chi_square(bins, y)


@dataclass(frozen=True)
class RankedFeature:
    rank: int
    opcode: str
    score: float


@dataclass
class FeatureRanking:
    method: str
    k: int
    entries: list

    @property
    def opcodes(self):
        return tuple(e.opcode for e in self.entries)


def rank_top_k(matrix, method: str, k: int = 20) -> FeatureRanking:
    """Score every vocabulary opcode, sort descending, return the top k.

    Ties break lexicographically by opcode; k larger than the vocabulary
    returns everything.
    """
    method = canonical_method(method)
    if k < 1:
        raise BadK(f"top-k must be positive, got {k}")
    if len(matrix) == 0:
        raise EmptyCorpus("cannot rank features of an empty matrix")
    y = np.asarray(matrix.labels01(), dtype=np.int64)
    if y.min() == y.max():
        raise SingleClassError("feature ranking needs both classes present")
    scored = []
    for op in matrix.vocabulary.opcodes:
        values = np.asarray(matrix.column(op), dtype=np.float64)
        scored.append((op, score_feature(values, y, method)))
    scored.sort(key=lambda t: (-t[1], t[0]))
    top = scored[: min(k, len(scored))]
    entries = [RankedFeature(i + 1, op, float(s)) for i, (op, s) in enumerate(top)]
    return FeatureRanking(method=method, k=k, entries=entries)


def ranking_to_dict(ranking: FeatureRanking, vocab_sha256: str = None) -> dict:
    return {
        "format": RANKING_FORMAT,
        "version": RANKING_VERSION,
        "method": ranking.method,
        "k": ranking.k,
        "vocab_sha256": vocab_sha256,
        "ranking": [
            {"rank": e.rank, "opcode": e.opcode, "score": e.score} for e in ranking.entries
        ],
    }


def ranking_from_dict(d: dict) -> FeatureRanking:
    entries = [RankedFeature(r["rank"], r["opcode"], r["score"]) for r in d["ranking"]]
    return FeatureRanking(method=d["method"], k=d["k"], entries=entries)


def render_ranking(d: dict) -> str:
    """One-method table: rank, opcode, score."""
    lines = [f"method: {d['method']}   k: {d['k']}", "rank  opcode            score"]
    for row in d["ranking"]:
        lines.append(f"{row['rank']:>4}  {row['opcode']:<16}  {row['score']:.6f}")
    return "\n".join(lines) + "\n"


def render_comparison(dicts) -> str:
    """Side-by-side top-k table, one column per method."""
    methods = [d["method"] for d in dicts]
    depth = max((len(d["ranking"]) for d in dicts), default=0)
    width = 16
    header = "rank  " + "  ".join(f"{m:<{width}}" for m in methods)
    lines = [header, "-" * len(header)]
    for i in range(depth):
        cells = []
        for d in dicts:
            rows = d["ranking"]
            cells.append(f"{rows[i]['opcode'] if i < len(rows) else '':<{width}}")
        lines.append(f"{i + 1:>4}  " + "  ".join(cells))
    return "\n".join(lines) + "\n"
