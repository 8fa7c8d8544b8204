"""Stratified k-fold cross-validation and confusion metrics.

Malware is the positive class throughout.  Fold confusion counts are
pooled, then the ratios are computed once from the pooled counts.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import MALWARE
from .errors import BadK, LengthMismatch
from .ranking import rank_top_k
from .trees import predict, train
from .util import derive_seed

log = logging.getLogger(__name__)

CV_FORMAT = "opmal.cv_report"
CV_VERSION = 1

SELECTION_FULL = "full-matrix"
SELECTION_PER_FOLD = "per-fold"


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: tuple  # per-sample fold index in [0, k)

    def fold_rows(self, fold: int):
        return [i for i, f in enumerate(self.assignment) if f == fold]

    def rest_rows(self, fold: int):
        return [i for i, f in enumerate(self.assignment) if f != fold]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


@dataclass
class MetricsReport:
    tpr: float
    tnr: float
    fpr: float
    fnr: float
    accuracy: float
    counts: ConfusionCounts
    classifier: str = None
    method: str = None


def stratified_folds(labels, k: int, seed: int) -> FoldAssignment:
    """Deal each class's shuffled samples round-robin across k folds.

    The dealing start rotates between classes so overall fold sizes differ
    by at most one sample.
    """
    labels = list(labels)
    n = len(labels)
    if k < 2 or k > n:
        raise BadK(f"k must be in [2, {n}], got {k}")
    classes = sorted(set(labels), key=str)
    assignment = [0] * n
    offset = 0
    for cls in classes:
        rows = [i for i, t in enumerate(labels) if t == cls]
        if len(rows) < k:
            log.warning("class %s has %d samples for %d folds; some folds lack it", cls, len(rows), k)
        rng = np.random.default_rng(derive_seed(seed, "folds", str(cls)))
        for j, pi in enumerate(rng.permutation(len(rows))):
            assignment[rows[pi]] = (offset + j) % k
        offset = (offset + len(rows)) % k
    return FoldAssignment(k=k, assignment=tuple(assignment))


def _as01(value) -> int:
    tag = getattr(value, "tag", value)
    if tag in (1, True, MALWARE):
        return 1
    if tag in (0, False, "benign"):
        return 0
    raise ValueError(f"unrecognized class value {value!r}")


def confusion(predictions, truth) -> ConfusionCounts:
    predictions = list(predictions)
    truth = list(truth)
    if len(predictions) != len(truth):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(truth)} truth labels")
    tp = fn = fp = tn = 0
    for p, t in zip(predictions, truth):
        p1, t1 = _as01(p), _as01(t)
        if t1:
            if p1:
                tp += 1
            else:
                fn += 1
        elif p1:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fn=fn, fp=fp, tn=tn)


def metrics(counts: ConfusionCounts, classifier: str = None, method: str = None) -> MetricsReport:
    """Ratios from pooled counts; an empty class marks its ratios None."""
    tm = counts.tp + counts.fn
    tb = counts.fp + counts.tn
    total = tm + tb
    return MetricsReport(
        tpr=counts.tp / tm if tm else None,
        fnr=counts.fn / tm if tm else None,
        tnr=counts.tn / tb if tb else None,
        fpr=counts.fp / tb if tb else None,
        accuracy=(counts.tp + counts.tn) / total if total else None,
        counts=counts,
        classifier=classifier,
        method=method,
    )


def cross_validate(
    matrix,
    ranking,
    learner: str,
    learner_config: dict = None,
    k: int = 10,
    seed: int = 0,
    per_fold_selection: bool = False,
    jobs: int = None,
) -> MetricsReport:
    """Pooled k-fold metrics for one learner over one feature ranking.

    By default the ranking computed on the full matrix restricts features
    for every fold, mirroring selection-before-validation pipelines even
    though it leaks selection information; per_fold_selection=True re-ranks
    on each fold's training part instead.
    """
    tags = [s.label.tag for s in matrix.samples]
    folds = stratified_folds(tags, k, seed)
    learner_config = dict(learner_config or {})
    tp = fn = fp = tn = 0
    for f in range(k):
        train_rows = folds.rest_rows(f)
        test_rows = folds.fold_rows(f)
        fold_matrix = matrix.restricted(train_rows)
        if per_fold_selection:
            feats = rank_top_k(fold_matrix, ranking.method, ranking.k).opcodes
        else:
            feats = ranking.opcodes
        model = train(
            learner,
            fold_matrix,
            feats,
            seed=derive_seed(seed, "fold", f),
            jobs=jobs,
            **learner_config,
        )
        preds = [predict(model, matrix.samples[i])[0] for i in test_rows]
        c = confusion(preds, [tags[i] for i in test_rows])
        tp += c.tp
        fn += c.fn
        fp += c.fp
        tn += c.tn
    return metrics(
        ConfusionCounts(tp=tp, fn=fn, fp=fp, tn=tn), classifier=learner, method=ranking.method
    )


def cv_report_dict(
    report: MetricsReport,
    matrix,
    ranking,
    k: int,
    seed: int,
    per_fold_selection: bool,
    learner_config: dict,
) -> dict:
    malware = sum(1 for s in matrix.samples if s.label.is_malware)
    return {
        "format": CV_FORMAT,
        "version": CV_VERSION,
        "classifier": report.classifier,
        "method": report.method,
        "k": k,
        "seed": seed,
        "selection": SELECTION_PER_FOLD if per_fold_selection else SELECTION_FULL,
        "top_k": ranking.k,
        "features": None if per_fold_selection else ranking.opcodes,
        "learner_config": {key: learner_config[key] for key in sorted(learner_config)},
        "vocab_sha256": matrix.vocabulary.digest,
        "samples": {"total": len(matrix), "malware": malware, "benign": len(matrix) - malware},
        "counts": {
            "tp": report.counts.tp,
            "fn": report.counts.fn,
            "fp": report.counts.fp,
            "tn": report.counts.tn,
        },
        "metrics": {
            "tpr": report.tpr,
            "fnr": report.fnr,
            "fpr": report.fpr,
            "tnr": report.tnr,
            "accuracy": report.accuracy,
        },
    }


def _pct(v) -> str:
    return "n/a" if v is None else f"{100 * v:.2f}%"


def render_cv(dicts) -> str:
    """Ratio table, one row per report: TPR, FNR, FPR, TNR, accuracy."""
    if isinstance(dicts, dict):
        dicts = [dicts]
    name_w = max(10, *(len(str(d["classifier"])) for d in dicts)) if dicts else 10
    header = (
        f"{'classifier':<{name_w}}  {'method':<15}  {'TPR':>8}  {'FNR':>8}  "
        f"{'FPR':>8}  {'TNR':>8}  {'accuracy':>8}"
    )
    lines = [header, "-" * len(header)]
    for d in dicts:
        m = d["metrics"]
        lines.append(
            f"{str(d['classifier']):<{name_w}}  {str(d['method']):<15}  {_pct(m['tpr']):>8}  "
            f"{_pct(m['fnr']):>8}  {_pct(m['fpr']):>8}  {_pct(m['tnr']):>8}  "
            f"{_pct(m['accuracy']):>8}"
        )
    return "\n".join(lines) + "\n"
