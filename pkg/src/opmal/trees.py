"""Tree learners over opcode-count features.

Five trainers share one growth engine: a decision stump, a gain-ratio tree
with pessimistic pruning, a random tree (per-node feature subsets), a
reduced-error-pruned tree, and a bagged forest of random trees.  All splits
are numeric with midpoint thresholds; left means value <= threshold.
Training is a pure function of (matrix, features, config, seed).
"""

import json
import logging
import math
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus import BENIGN, MALWARE
from .errors import EmptyTrainingSet, MalformedModelFile, ModelSchemaMismatch
from .kernels import best_split_scan
from .util import atomic_write_text, derive_seed, dump_json_line

log = logging.getLogger(__name__)

MODEL_FORMAT = "opmal.model"
MODEL_VERSION = 1

STUMP = "stump"
C45 = "c45"
RTREE = "rtree"
REPTREE = "reptree"
FOREST = "forest"
LEARNERS = (STUMP, C45, RTREE, REPTREE, FOREST)

# selection rules for the growth engine
_RULE_IG = "ig"
_RULE_GR = "gr"

_DENOM_FLOOR = 1e-12


@dataclass
class Node:
    dist: tuple  # (benign_count, malware_count) of training samples here
    feature: str = None
    threshold: float = None
    left: "Node" = None
    right: "Node" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def label_tag(self) -> str:
        # tie goes to malware: a miss is costlier than a false alarm
        return MALWARE if self.dist[1] >= self.dist[0] else BENIGN

    @property
    def malware_fraction(self) -> float:
        total = self.dist[0] + self.dist[1]
        return self.dist[1] / total if total else 1.0


@dataclass
class TreeModel:
    kind: str
    root: Node
    selected_features: tuple
    vocab_sha256: str
    config: dict
    seed: int = None
    pruning_skipped: bool = False


@dataclass
class ForestModel:
    kind: str
    trees: list
    seed: int
    trees_count: int
    feature_subset_size: int
    selected_features: tuple
    vocab_sha256: str
    config: dict


def _ent2(a, b) -> float:
    if a <= 0 or b <= 0:
        return 0.0
    m = a + b
    return math.log2(m) - (a * math.log2(a) + b * math.log2(b)) / m


def _matrix_arrays(matrix, features):
    X = np.empty((len(matrix), len(features)), dtype=np.float64)
    for j, op in enumerate(features):
        X[:, j] = matrix.column(op)
    y = np.asarray(matrix.labels01(), dtype=np.int64)
    return X, y


def _eval_feature(X, y, rows, j, min_leaf):
    """Best boundary on one column; (gain, threshold, split_info) or None."""
    col = X[rows, j]
    order = np.argsort(col, kind="stable")
    vs = np.ascontiguousarray(col[order])
    ys = np.ascontiguousarray(y[rows][order])
    gain, cut = best_split_scan(vs, ys, min_leaf)
    if cut < 0 or gain <= 0.0:
        return None
    threshold = float((vs[cut - 1] + vs[cut]) / 2.0)
    return gain, threshold, _ent2(cut, len(ys) - cut)


def _select_from(cands, names, rule):
    """Pick a split from (j, gain, threshold, split_info) candidates.

    "ig" takes maximal gain; "gr" keeps candidates with above-average gain
    and takes maximal gain ratio.  Ties break by feature name, then by the
    smaller threshold.
    """
    if not cands:
        return None
    if rule == _RULE_IG:
        best = min(cands, key=lambda c: (-c[1], names[c[0]], c[2]))
        return best[0], best[2]
    avg = sum(c[1] for c in cands) / len(cands)
    short = [c for c in cands if c[1] >= avg - 1e-12]
    best = min(short, key=lambda c: (-(c[1] / max(c[3], _DENOM_FLOOR)), names[c[0]], c[2]))
    return best[0], best[2]


class _Grower:
    """Recursive growth with optional per-node random feature subsets."""

    def __init__(self, X, y, names, min_leaf, rule, depth_limit=None, subset_size=None, seed=None):
        self.X = X
        self.y = y
        self.names = names
        self.min_leaf = min_leaf
        self.rule = rule
        self.depth_limit = depth_limit
        self.subset_size = subset_size
        self.seed = seed
        self.node_seq = 0

    def grow(self, rows, depth=0) -> Node:
        node_id = self.node_seq
        self.node_seq += 1
        yv = self.y[rows]
        m = int(yv.sum())
        node = Node(dist=(rows.size - m, m))
        if m == 0 or m == rows.size:
            return node
        if self.depth_limit is not None and depth >= self.depth_limit:
            return node
        chosen = self._select(rows, node_id)
        if chosen is None:
            return node
        j, threshold = chosen
        left_mask = self.X[rows, j] <= threshold
        node.feature = self.names[j]
        node.threshold = threshold
        node.left = self.grow(rows[left_mask], depth + 1)
        node.right = self.grow(rows[~left_mask], depth + 1)
        return node

    def _select(self, rows, node_id):
        p = len(self.names)
        if self.subset_size is None or self.subset_size >= p:
            cands = []
            for j in range(p):
                r = _eval_feature(self.X, self.y, rows, j, self.min_leaf)
                if r is not None:
                    cands.append((j, *r))
            return _select_from(cands, self.names, self.rule)
        # random subset: evaluate subset_size features in permutation order,
        # then keep extending one at a time until some feature shows
        # positive gain or every feature has been tried
        rng = np.random.default_rng(derive_seed(self.seed, "node", node_id))
        perm = rng.permutation(p)
        cands = []
        for pos in range(p):
            if pos >= self.subset_size and cands:
                break
            r = _eval_feature(self.X, self.y, rows, int(perm[pos]), self.min_leaf)
            if r is not None:
                cands.append((int(perm[pos]), *r))
        return _select_from(cands, self.names, self.rule)


def _ensure_stack(depth_bound: int) -> None:
    # growth, pruning, and serialization all recurse to tree depth, which is
    # bounded by the sample count for a spindly tree
    limit = 2 * depth_bound + 2000
    if sys.getrecursionlimit() < limit:
        sys.setrecursionlimit(limit)


def _prepare(matrix, features):
    if len(matrix) == 0:
        raise EmptyTrainingSet("no samples to train on")
    feats = tuple(features) if features is not None else tuple(matrix.vocabulary.opcodes)
    X, y = _matrix_arrays(matrix, feats)
    _ensure_stack(len(y))
    return feats, X, y


def train_stump(matrix, features=None, min_leaf=1) -> TreeModel:
    """Depth-1 tree on the single best information-gain split."""
    feats, X, y = _prepare(matrix, features)
    grower = _Grower(X, y, feats, min_leaf, _RULE_IG, depth_limit=1)
    root = grower.grow(np.arange(len(y)))
    return TreeModel(
        kind=STUMP,
        root=root,
        selected_features=feats,
        vocab_sha256=matrix.vocabulary.digest,
        config={"min_leaf": min_leaf},
    )


def _wilson_upper(err, n, z) -> float:
    """Upper confidence bound on an error rate from err errors in n trials."""
    f = err / n
    z2 = z * z
    return (f + z2 / (2 * n) + z * math.sqrt(f * (1 - f) / n + z2 / (4 * n * n))) / (1 + z2 / n)


def _pessimistic_prune(node: Node, z: float) -> float:
    """Collapse subtrees whose leaf error estimate is no worse; returns the
    estimated error count of the pruned subtree."""
    n = node.dist[0] + node.dist[1]
    leaf_est = n * _wilson_upper(n - max(node.dist), n, z) if n else 0.0
    if node.is_leaf:
        return leaf_est
    sub_est = _pessimistic_prune(node.left, z) + _pessimistic_prune(node.right, z)
    if leaf_est <= sub_est:
        node.feature = None
        node.threshold = None
        node.left = None
        node.right = None
        return leaf_est
    return sub_est


def train_c45(matrix, features=None, min_leaf=2, cf=0.25) -> TreeModel:
    """Gain-ratio tree: candidates with above-average gain compete on gain
    ratio; pessimistic pruning at confidence cf (cf=None grows unpruned)."""
    if cf is not None and not 0 <= cf < 1:
        raise ValueError(f"cf must be in [0, 1), got {cf}")
    feats, X, y = _prepare(matrix, features)
    grower = _Grower(X, y, feats, min_leaf, _RULE_GR)
    root = grower.grow(np.arange(len(y)))
    if cf is not None and cf > 0:
        _pessimistic_prune(root, statistics.NormalDist().inv_cdf(1 - cf))
    return TreeModel(
        kind=C45,
        root=root,
        selected_features=feats,
        vocab_sha256=matrix.vocabulary.digest,
        config={"min_leaf": min_leaf, "cf": cf},
    )


def default_subset_size(p: int) -> int:
    return max(1, math.isqrt(p))


def train_random_tree(matrix, features=None, subset_size=None, seed=0, min_leaf=1) -> TreeModel:
    """Unpruned gain-ratio tree considering a per-node random feature subset."""
    feats, X, y = _prepare(matrix, features)
    k = subset_size if subset_size else default_subset_size(len(feats))
    grower = _Grower(X, y, feats, min_leaf, _RULE_GR, subset_size=k, seed=seed)
    root = grower.grow(np.arange(len(y)))
    return TreeModel(
        kind=RTREE,
        root=root,
        selected_features=feats,
        vocab_sha256=matrix.vocabulary.digest,
        config={"min_leaf": min_leaf, "subset_size": k},
        seed=seed,
    )


def _stratified_holdout(y, fraction, seed):
    """(grow_rows, holdout_rows); per class, round(n_c * fraction) held out."""
    held = np.zeros(len(y), dtype=bool)
    for cls in (0, 1):
        cls_rows = np.flatnonzero(y == cls)
        h = round(cls_rows.size * fraction)
        if h == 0:
            continue
        rng = np.random.default_rng(derive_seed(seed, "holdout", cls))
        held[rng.permutation(cls_rows)[:h]] = True
    return np.flatnonzero(~held), np.flatnonzero(held)


def _rep_prune(node: Node, X, y, rows, col_of) -> int:
    """Reduced-error pruning; returns the holdout error of the kept subtree."""
    yv = y[rows]
    m = int(yv.sum())
    leaf_err = (rows.size - m) if node.label_tag == MALWARE else m
    if node.is_leaf:
        return leaf_err
    left_mask = X[rows, col_of[node.feature]] <= node.threshold
    sub_err = _rep_prune(node.left, X, y, rows[left_mask], col_of) + _rep_prune(
        node.right, X, y, rows[~left_mask], col_of
    )
    if leaf_err <= sub_err:
        node.feature = None
        node.threshold = None
        node.left = None
        node.right = None
        return leaf_err
    return sub_err


def train_reptree(matrix, features=None, prune_fraction=1 / 3, seed=0, min_leaf=1) -> TreeModel:
    """Information-gain tree grown on (1 - prune_fraction) of the data, then
    reduced-error pruned against the held-out remainder.

    A holdout too small to exist falls back to an unpruned tree on the full
    data, flagged in the model rather than raised.
    """
    if not 0 <= prune_fraction < 1:
        raise ValueError(f"prune_fraction must be in [0, 1), got {prune_fraction}")
    feats, X, y = _prepare(matrix, features)
    grow_rows, hold_rows = _stratified_holdout(y, prune_fraction, seed)
    skipped = hold_rows.size == 0 or grow_rows.size == 0
    if skipped:
        log.warning("too few samples for reduced-error pruning; growing unpruned")
        grow_rows = np.arange(len(y))
    grower = _Grower(X, y, feats, min_leaf, _RULE_IG)
    root = grower.grow(grow_rows)
    if not skipped:
        col_of = {name: j for j, name in enumerate(feats)}
        _rep_prune(root, X, y, hold_rows, col_of)
    return TreeModel(
        kind=REPTREE,
        root=root,
        selected_features=feats,
        vocab_sha256=matrix.vocabulary.digest,
        config={"min_leaf": min_leaf, "prune_fraction": prune_fraction},
        seed=seed,
        pruning_skipped=skipped,
    )


def bootstrap_indices(n: int, rng) -> np.ndarray:
    """n row indices drawn with replacement."""
    return rng.integers(0, n, n)


def train_forest(
    matrix,
    features=None,
    trees=100,
    subset_size=None,
    seed=0,
    min_leaf=1,
    bootstrap=True,
    jobs=None,
) -> ForestModel:
    """Bagged random trees; majority vote with ties predicting malware."""
    if trees < 1:
        raise ValueError(f"forest needs at least one tree, got {trees}")
    feats, X, y = _prepare(matrix, features)
    k = subset_size if subset_size else default_subset_size(len(feats))
    n = len(y)

    def one_tree(t: int) -> TreeModel:
        if bootstrap:
            rng = np.random.default_rng(derive_seed(seed, "bootstrap", t))
            rows = bootstrap_indices(n, rng)
        else:
            rows = np.arange(n)
        grower = _Grower(
            X, y, feats, min_leaf, _RULE_GR, subset_size=k, seed=derive_seed(seed, "tree", t)
        )
        root = grower.grow(rows)
        return TreeModel(
            kind=RTREE,
            root=root,
            selected_features=feats,
            vocab_sha256=matrix.vocabulary.digest,
            config={"min_leaf": min_leaf, "subset_size": k},
            seed=derive_seed(seed, "tree", t),
        )

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            members = list(pool.map(one_tree, range(trees)))
    else:
        members = [one_tree(t) for t in range(trees)]
    return ForestModel(
        kind=FOREST,
        trees=members,
        seed=seed,
        trees_count=trees,
        feature_subset_size=k,
        selected_features=feats,
        vocab_sha256=matrix.vocabulary.digest,
        config={"trees": trees, "subset_size": k, "min_leaf": min_leaf, "bootstrap": bootstrap},
    )


def train(learner, matrix, features=None, seed=0, jobs=None, **config):
    """Dispatch to one trainer by name, applying per-learner defaults."""
    if learner not in LEARNERS:
        raise ValueError(f"unknown learner {learner!r}")
    min_leaf = config.pop("min_leaf", None)
    cf = config.pop("cf", 0.25)
    prune_fraction = config.pop("prune_fraction", 1 / 3)
    trees = config.pop("trees", 100)
    subset_size = config.pop("subset_size", None)
    bootstrap = config.pop("bootstrap", True)
    if config:
        raise TypeError(f"unknown config keys {sorted(config)}")
    if learner == STUMP:
        return train_stump(matrix, features, min_leaf=min_leaf or 1)
    if learner == C45:
        return train_c45(matrix, features, min_leaf=min_leaf or 2, cf=cf)
    if learner == RTREE:
        return train_random_tree(
            matrix, features, subset_size=subset_size, seed=seed, min_leaf=min_leaf or 1
        )
    if learner == REPTREE:
        return train_reptree(
            matrix, features, prune_fraction=prune_fraction, seed=seed, min_leaf=min_leaf or 1
        )
    return train_forest(
        matrix,
        features,
        trees=trees,
        subset_size=subset_size,
        seed=seed,
        min_leaf=min_leaf or 1,
        bootstrap=bootstrap,
        jobs=jobs,
    )


def _route(node: Node, counts) -> Node:
    while not node.is_leaf:
        node = node.left if counts.get(node.feature, 0) <= node.threshold else node.right
    return node


def predict(model, sample):
    """(label tag, malware score) for one sample or bare counts mapping.

    Opcodes the model never saw read as count 0.
    """
    counts = sample.counts if hasattr(sample, "counts") else sample
    if isinstance(model, ForestModel):
        votes = sum(1 for t in model.trees if _route(t.root, counts).label_tag == MALWARE)
        score = votes / model.trees_count
        return (MALWARE if score >= 0.5 else BENIGN), score
    leaf = _route(model.root, counts)
    return leaf.label_tag, leaf.malware_fraction


def predict_matrix(model, matrix, strict=False):
    """Predictions for every sample; strict mode insists the matrix was
    vectorized against the model's vocabulary."""
    if strict and matrix.vocabulary.digest != model.vocab_sha256:
        raise ModelSchemaMismatch(
            f"matrix vocabulary {matrix.vocabulary.digest[:12]} does not match "
            f"model vocabulary {model.vocab_sha256[:12]}"
        )
    return [predict(model, s) for s in matrix.samples]


def _flatten(root: Node):
    nodes = []

    def rec(node):
        nid = len(nodes)
        entry = {
            "id": nid,
            "kind": "leaf" if node.is_leaf else "split",
            "feature": node.feature,
            "threshold": node.threshold,
            "left": None,
            "right": None,
            "dist": [node.dist[0], node.dist[1]],
        }
        nodes.append(entry)
        if not node.is_leaf:
            entry["left"] = rec(node.left)
            entry["right"] = rec(node.right)
        return nid

    rec(root)
    return nodes


def model_text(model) -> str:
    is_forest = isinstance(model, ForestModel)
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "seed": model.seed,
        "vocab_sha256": model.vocab_sha256,
        "selected_features": list(model.selected_features),
        "config": model.config,
    }
    if is_forest:
        header["trees_count"] = model.trees_count
        header["feature_subset_size"] = model.feature_subset_size
    else:
        header["pruning_skipped"] = model.pruning_skipped
    lines = [dump_json_line(header)]
    members = model.trees if is_forest else [model]
    for t, member in enumerate(members):
        for entry in _flatten(member.root):
            lines.append(dump_json_line({"tree": t, **entry}))
    return "\n".join(lines) + "\n"


def save_model(model, path: str) -> None:
    atomic_write_text(path, model_text(model))


def _bad(reason):
    return MalformedModelFile(reason)


def _build_tree(records, tree_idx):
    by_id = {}
    for rec in records:
        if rec["id"] in by_id:
            raise _bad(f"tree {tree_idx}: duplicate node id {rec['id']}")
        by_id[rec["id"]] = rec

    def build(nid, seen):
        if nid not in by_id:
            raise _bad(f"tree {tree_idx}: missing node {nid}; file truncated?")
        if nid in seen:
            raise _bad(f"tree {tree_idx}: node cycle at {nid}")
        seen.add(nid)
        rec = by_id[nid]
        dist = rec.get("dist")
        if not (isinstance(dist, list) and len(dist) == 2):
            raise _bad(f"tree {tree_idx}: node {nid} has a bad distribution")
        node = Node(dist=(int(dist[0]), int(dist[1])))
        if rec.get("kind") == "split":
            if not isinstance(rec.get("feature"), str) or not isinstance(
                rec.get("threshold"), (int, float)
            ):
                raise _bad(f"tree {tree_idx}: node {nid} has a bad split rule")
            node.feature = rec["feature"]
            node.threshold = float(rec["threshold"])
            node.left = build(rec["left"], seen)
            node.right = build(rec["right"], seen)
        elif rec.get("kind") != "leaf":
            raise _bad(f"tree {tree_idx}: node {nid} has unknown kind {rec.get('kind')!r}")
        return node

    if 0 not in by_id:
        raise _bad(f"tree {tree_idx}: no root node")
    root = build(0, set())
    if len(by_id) != _count(root):
        raise _bad(f"tree {tree_idx}: unreachable nodes present")
    return root


def _count(node):
    return 1 if node.is_leaf else 1 + _count(node.left) + _count(node.right)


def load_model(path: str):
    """Inverse of save_model; any schema violation raises MalformedModelFile."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise _bad("empty model file")
    try:
        header = json.loads(lines[0])
    except ValueError as e:
        raise _bad(f"bad header JSON: {e}") from None
    if not isinstance(header, dict):
        raise _bad("header is not an object")
    if header.get("format") != MODEL_FORMAT:
        raise _bad(f"bad format tag {header.get('format')!r}")
    if header.get("version") != MODEL_VERSION:
        raise _bad(f"unsupported model version {header.get('version')!r}, expected {MODEL_VERSION}")
    kind = header.get("kind")
    if kind not in LEARNERS:
        raise _bad(f"unknown model kind {kind!r}")
    per_tree = {}
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except ValueError as e:
            raise _bad(f"line {lineno}: bad node JSON: {e}") from None
        if not isinstance(rec, dict) or not isinstance(rec.get("tree"), int):
            raise _bad(f"line {lineno}: bad node record")
        per_tree.setdefault(rec["tree"], []).append(rec)
    feats = tuple(header.get("selected_features") or ())
    vocab = header.get("vocab_sha256")
    config = header.get("config") or {}
    _ensure_stack(sum(len(v) for v in per_tree.values()))
    if kind == FOREST:
        count = header.get("trees_count")
        if not isinstance(count, int) or count < 1 or sorted(per_tree) != list(range(count)):
            raise _bad(f"forest claims {count} trees, found {sorted(per_tree)}")
        members = [
            TreeModel(
                kind=RTREE,
                root=_build_tree(per_tree[t], t),
                selected_features=feats,
                vocab_sha256=vocab,
                config={k: config.get(k) for k in ("min_leaf", "subset_size")},
                seed=derive_seed(header.get("seed", 0), "tree", t)
                if header.get("seed") is not None
                else None,
            )
            for t in range(count)
        ]
        return ForestModel(
            kind=FOREST,
            trees=members,
            seed=header.get("seed"),
            trees_count=count,
            feature_subset_size=header.get("feature_subset_size"),
            selected_features=feats,
            vocab_sha256=vocab,
            config=config,
        )
    if sorted(per_tree) != [0]:
        raise _bad(f"single-tree model carries tree ids {sorted(per_tree)}")
    return TreeModel(
        kind=kind,
        root=_build_tree(per_tree[0], 0),
        selected_features=feats,
        vocab_sha256=vocab,
        config=config,
        seed=header.get("seed"),
        pruning_skipped=bool(header.get("pruning_skipped", False)),
    )
