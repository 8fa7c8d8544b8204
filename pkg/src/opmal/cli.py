"""Command-line pipeline: extract, curate, rank, train, cv, predict, report.

Each stage reads and writes files so the pipeline can be scripted and
cached step by step.  Logs go to stderr; data products go to files or
stdout; file writes are atomic.  Exit codes: 0 success, 1 input or data
error, 2 usage error.

An optional key=value config file supplies defaults for any long flag
(without the leading dashes); command-line flags override it.  The file is
./opmal.cfg, or the path in the OPMAL_CONFIG environment variable.
"""

import argparse
import json
import logging
import os
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

from . import corpus, curation, evaluation, ingest, ranking, trees
from .errors import EmptyCorpus, OpmalError, UnrecognizedDialect
from .util import atomic_write_text, dump_json_line

log = logging.getLogger("opmal")

PREDICTIONS_FORMAT = "opmal.predictions"
PREDICTIONS_VERSION = 1

DIALECT_CHOICES = ("auto", "kaggle", "objdump")
_DIALECT_MAP = {"kaggle": ingest.KAGGLE_ASM, "objdump": ingest.OBJDUMP}
METHOD_CHOICES = ("fisher", "ig", "gr", "su", "chi")


class UsageError(Exception):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_intervals(text: str):
    try:
        widths = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValueError(f"expected a comma-separated list of integers, got {text!r}") from None
    return widths


# hard defaults; 0 means "pick automatically" for subset, min_leaf, and jobs
DEFAULTS = {
    "manifest": None,
    "matrix": None,
    "vocab": None,
    "out": None,
    "model": None,
    "dialect": "auto",
    "size_cap": curation.DEFAULT_SIZE_CAP,
    "weight_threshold": curation.DEFAULT_WEIGHT_THRESHOLD,
    "intervals": ",".join(str(w) for w in curation.DEFAULT_INTERVAL_WIDTHS),
    "method": "fisher",
    "top_k": 20,
    "learner": trees.FOREST,
    "trees": 100,
    "subset": 0,
    "min_leaf": 0,
    "cf": 0.25,
    "prune_fraction": 1 / 3,
    "k": 10,
    "seed": 0,
    "per_fold_selection": False,
    "jobs": 0,
    "strict_vocab": False,
}

_CONVERTERS = {
    "size_cap": int,
    "weight_threshold": int,
    "top_k": int,
    "trees": int,
    "subset": int,
    "min_leaf": int,
    "k": int,
    "seed": int,
    "jobs": int,
    "cf": float,
    "prune_fraction": float,
    "per_fold_selection": _parse_bool,
    "strict_vocab": _parse_bool,
}


def _config_file_values() -> dict:
    path = os.environ.get("OPMAL_CONFIG") or "opmal.cfg"
    if not os.path.isfile(path):
        return {}
    values = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            key, sep, value = text.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
            values[key] = value.strip()
    return values


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the config file, then from hard defaults."""
    cfg = _config_file_values()
    for key, default in DEFAULTS.items():
        if not hasattr(args, key) or getattr(args, key) is not None:
            continue
        if key in cfg:
            convert = _CONVERTERS.get(key, str)
            try:
                setattr(args, key, convert(cfg[key]))
            except ValueError as e:
                raise UsageError(f"config option {key}: {e}") from None
        else:
            setattr(args, key, default)
    return args


def _validate(args) -> None:
    checks = (
        ("dialect", lambda v: v in DIALECT_CHOICES, f"one of {DIALECT_CHOICES}"),
        ("method", lambda v: v in METHOD_CHOICES, f"one of {METHOD_CHOICES}"),
        ("learner", lambda v: v in trees.LEARNERS, f"one of {trees.LEARNERS}"),
        ("size_cap", lambda v: v > 0, "positive"),
        ("weight_threshold", lambda v: v > 0, "positive"),
        ("top_k", lambda v: v >= 1, "at least 1"),
        ("trees", lambda v: v >= 1, "at least 1"),
        ("subset", lambda v: v >= 0, "nonnegative (0 = automatic)"),
        ("min_leaf", lambda v: v >= 0, "nonnegative (0 = learner default)"),
        ("cf", lambda v: 0 <= v < 1, "in [0, 1)"),
        ("prune_fraction", lambda v: 0 <= v < 1, "in [0, 1)"),
        ("k", lambda v: v >= 2, "at least 2"),
        ("jobs", lambda v: v >= 0, "nonnegative (0 = processor count)"),
    )
    for key, ok, requirement in checks:
        if hasattr(args, key) and not ok(getattr(args, key)):
            raise UsageError(f"--{key.replace('_', '-')} must be {requirement}, got {getattr(args, key)}")


def _require(args, *keys) -> None:
    for key in keys:
        if getattr(args, key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required for this command")


def _jobs(args) -> int:
    return args.jobs if args.jobs else (os.cpu_count() or 1)


def _pmap(fn, items, jobs: int):
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _write_product(text: str, out_path) -> None:
    if out_path:
        atomic_write_text(out_path, text)
    else:
        sys.stdout.write(text)


def cmd_extract(args) -> int:
    _require(args, "manifest", "out")
    rows = corpus.read_manifest(args.manifest)
    if not rows:
        raise EmptyCorpus(f"manifest {args.manifest} lists no files")
    cfg = curation.CurationConfig(size_cap_bytes=args.size_cap)
    files = [((raw, resolved), os.path.getsize(resolved), label) for raw, resolved, label in rows]
    retained, removed_by_size = curation.filter_size_cap(files, cfg)

    def work(item):
        (raw, resolved), _size, label = item
        content = ingest.read_listing(resolved)
        if args.dialect == "auto":
            try:
                dialect = ingest.detect_dialect(content[:65536].split("\n")[:80])
            except UnrecognizedDialect as e:
                raise UnrecognizedDialect(f"{resolved}: {e}") from None
        else:
            dialect = _DIALECT_MAP[args.dialect]
        seq = ingest.parse_file(content, raw, dialect)
        return raw, label, Counter(seq.opcodes), seq.skipped_count

    results = _pmap(work, retained, _jobs(args))
    vocab = corpus.vocabulary_from_counts(counts for _, _, counts, _ in results)
    samples = []
    skipped_lines = 0
    for raw, label, counts, skipped in results:
        sample, _dropped = corpus.sample_from_counts(counts, vocab, label, raw)
        samples.append(sample)
        skipped_lines += skipped
    matrix = corpus.FeatureMatrix(vocab, samples)
    extra = {
        "removed_by_size": removed_by_size,
        "size_cap_bytes": args.size_cap,
        "skipped_lines": skipped_lines,
    }
    corpus.save_matrix(matrix, args.out, extra)
    if args.vocab:
        corpus.save_vocabulary(vocab, args.vocab)
    log.info(
        "extracted %d samples over %d opcodes (%d oversized benign skipped)",
        len(matrix),
        len(vocab),
        removed_by_size,
    )
    return 0


def cmd_curate(args) -> int:
    _require(args, "matrix", "out")
    matrix, header = corpus.load_matrix(args.matrix, with_header=True)
    try:
        cfg = curation.CurationConfig(
            size_cap_bytes=header.get("size_cap_bytes") or curation.DEFAULT_SIZE_CAP,
            weight_threshold=args.weight_threshold,
            interval_widths=_parse_intervals(args.intervals),
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    retained, report = curation.curate(
        matrix.samples, cfg, removed_by_size=header.get("removed_by_size", 0)
    )
    extra = {key: header[key] for key in ("removed_by_size", "size_cap_bytes") if key in header}
    corpus.save_matrix(corpus.FeatureMatrix(matrix.vocabulary, retained), args.out, extra)
    report_path = args.out + ".report.json"
    atomic_write_text(report_path, dump_json_line(curation.report_to_dict(report)) + "\n")
    log.info(
        "curation kept %d malware + %d benign of %d; report at %s",
        report.retained_malware,
        report.retained_benign,
        report.input_samples,
        report_path,
    )
    return 0


def cmd_rank(args) -> int:
    _require(args, "matrix")
    matrix = corpus.load_matrix(args.matrix)
    result = ranking.rank_top_k(matrix, args.method, args.top_k)
    doc = ranking.ranking_to_dict(result, vocab_sha256=matrix.vocabulary.digest)
    _write_product(dump_json_line(doc) + "\n", args.out)
    log.info("ranked %d features by %s", len(result.entries), result.method)
    return 0


def _learner_config(args) -> dict:
    return {
        "trees": args.trees,
        "subset_size": args.subset or None,
        "min_leaf": args.min_leaf or None,
        "cf": args.cf,
        "prune_fraction": args.prune_fraction,
    }


def cmd_train(args) -> int:
    _require(args, "matrix", "model")
    matrix = corpus.load_matrix(args.matrix)
    result = ranking.rank_top_k(matrix, args.method, args.top_k)
    model = trees.train(
        args.learner,
        matrix,
        result.opcodes,
        seed=args.seed,
        jobs=_jobs(args),
        **_learner_config(args),
    )
    trees.save_model(model, args.model)
    log.info("trained %s on %d samples x %d features", args.learner, len(matrix), len(result.opcodes))
    return 0


def cmd_cv(args) -> int:
    _require(args, "matrix")
    matrix = corpus.load_matrix(args.matrix)
    method = ranking.canonical_method(args.method)
    if args.per_fold_selection:
        rank_obj = ranking.FeatureRanking(method=method, k=args.top_k, entries=[])
    else:
        rank_obj = ranking.rank_top_k(matrix, method, args.top_k)
    config = _learner_config(args)
    report = evaluation.cross_validate(
        matrix,
        rank_obj,
        args.learner,
        config,
        k=args.k,
        seed=args.seed,
        per_fold_selection=args.per_fold_selection,
        jobs=_jobs(args),
    )
    doc = evaluation.cv_report_dict(
        report, matrix, rank_obj, args.k, args.seed, args.per_fold_selection, config
    )
    _write_product(dump_json_line(doc) + "\n", args.out)
    log.info(
        "%s/%s %d-fold accuracy: %s",
        args.learner,
        method,
        args.k,
        "n/a" if report.accuracy is None else f"{report.accuracy:.4f}",
    )
    return 0


def cmd_predict(args) -> int:
    _require(args, "model", "matrix")
    model = trees.load_model(args.model)
    matrix = corpus.load_matrix(args.matrix)
    preds = trees.predict_matrix(model, matrix, strict=args.strict_vocab)
    lines = [
        dump_json_line(
            {
                "format": PREDICTIONS_FORMAT,
                "version": PREDICTIONS_VERSION,
                "model_kind": model.kind,
                "model_vocab_sha256": model.vocab_sha256,
            }
        )
    ]
    for sample, (tag, score) in zip(matrix.samples, preds):
        lines.append(dump_json_line({"id": sample.file_id, "label": tag, "score": score}))
    _write_product("\n".join(lines) + "\n", args.out)
    malware = sum(1 for tag, _ in preds if tag == corpus.MALWARE)
    log.info("predicted %d of %d samples malware", malware, len(preds))
    return 0


def cmd_report(args) -> int:
    docs = []
    for path in args.files:
        with open(path, "r", encoding="utf-8") as f:
            first_line = f.readline()
        try:
            doc = json.loads(first_line)
        except ValueError as e:
            raise OpmalError(f"{path}: not a report file: {e}") from None
        if not isinstance(doc, dict) or "format" not in doc:
            raise OpmalError(f"{path}: not a report file (no format field)")
        docs.append(doc)
    formats = {doc["format"] for doc in docs}
    if len(formats) > 1:
        raise UsageError(f"cannot mix report types in one invocation: {sorted(formats)}")
    fmt = formats.pop()
    if fmt == evaluation.CV_FORMAT:
        sys.stdout.write(evaluation.render_cv(docs))
    elif fmt == curation.CURATION_FORMAT:
        for doc in docs:
            sys.stdout.write(curation.render_curation(doc))
    elif fmt == ranking.RANKING_FORMAT:
        if len(docs) == 1:
            sys.stdout.write(ranking.render_ranking(docs[0]))
        else:
            sys.stdout.write(ranking.render_comparison(docs))
    else:
        raise OpmalError(f"no renderer for format {fmt!r}")
    return 0


def _add(parser, *flags):
    adders = {
        "manifest": lambda p: p.add_argument("--manifest", help="corpus manifest CSV (path,label,family)"),
        "dialect": lambda p: p.add_argument("--dialect", choices=DIALECT_CHOICES, help="listing dialect (default auto-detect per file)"),
        "matrix": lambda p: p.add_argument("--matrix", help="feature matrix file"),
        "vocab": lambda p: p.add_argument("--vocab", help="write the vocabulary file here"),
        "size_cap": lambda p: p.add_argument("--size-cap", type=int, help="drop benign listings above this many bytes"),
        "weight_threshold": lambda p: p.add_argument("--weight-threshold", type=int, help="keep samples with opcode weight strictly below this"),
        "intervals": lambda p: p.add_argument("--intervals", help="comma-separated interval widths, strictly decreasing"),
        "method": lambda p: p.add_argument("--method", choices=METHOD_CHOICES, help="feature scoring method"),
        "top_k": lambda p: p.add_argument("--top-k", type=int, help="number of features to keep"),
        "learner": lambda p: p.add_argument("--learner", choices=trees.LEARNERS, help="classifier to train"),
        "trees": lambda p: p.add_argument("--trees", type=int, help="forest size"),
        "subset": lambda p: p.add_argument("--subset", type=int, help="features per node for random trees (0 = sqrt of feature count)"),
        "min_leaf": lambda p: p.add_argument("--min-leaf", type=int, help="minimum samples per split side (0 = learner default)"),
        "cf": lambda p: p.add_argument("--cf", type=float, help="pessimistic pruning confidence"),
        "prune_fraction": lambda p: p.add_argument("--prune-fraction", type=float, help="holdout fraction for reduced-error pruning"),
        "k": lambda p: p.add_argument("--k", type=int, help="cross-validation folds"),
        "seed": lambda p: p.add_argument("--seed", type=int, help="master random seed"),
        "per_fold_selection": lambda p: p.add_argument("--per-fold-selection", action="store_true", default=None, help="re-rank features inside each training fold"),
        "jobs": lambda p: p.add_argument("--jobs", type=int, help="worker threads (0 = processor count)"),
        "out": lambda p: p.add_argument("--out", help="output file (some commands default to stdout)"),
        "model": lambda p: p.add_argument("--model", help="model file"),
        "strict_vocab": lambda p: p.add_argument("--strict-vocab", action="store_true", default=None, help="require the matrix vocabulary to match the model"),
    }
    for flag in flags:
        adders[flag](parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opmal",
        description="Opcode-frequency malware detection pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="parse listings into a feature matrix")
    _add(p, "manifest", "dialect", "size_cap", "vocab", "out", "jobs")

    p = sub.add_parser("curate", help="instance selection on a feature matrix")
    _add(p, "matrix", "weight_threshold", "intervals", "out")

    p = sub.add_parser("rank", help="score and rank features")
    _add(p, "matrix", "method", "top_k", "out")

    p = sub.add_parser("train", help="train one classifier on the top-k features")
    _add(p, "matrix", "method", "top_k", "learner", "trees", "subset", "min_leaf", "cf", "prune_fraction", "seed", "jobs", "model")

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    _add(p, "matrix", "method", "top_k", "learner", "trees", "subset", "min_leaf", "cf", "prune_fraction", "k", "seed", "per_fold_selection", "jobs", "out")

    p = sub.add_parser("predict", help="score samples with a trained model")
    _add(p, "model", "matrix", "strict_vocab", "out")

    p = sub.add_parser("report", help="render report files as tables")
    p.add_argument("files", nargs="+", help="report files (cv, curation, or ranking)")

    return parser


COMMANDS = {
    "extract": cmd_extract,
    "curate": cmd_curate,
    "rank": cmd_rank,
    "train": cmd_train,
    "cv": cmd_cv,
    "predict": cmd_predict,
    "report": cmd_report,
}


def run(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args = _resolve(args)
        _validate(args)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (OpmalError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(run(sys.argv[1:]))
