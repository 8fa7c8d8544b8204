"""Malware detection from opcode frequencies of disassembly listings.

The pipeline runs in stages, each usable from Python or via the ``opmal``
command: parse listings into opcode sequences (ingest), build a vocabulary
and sparse count matrix (corpus), select instances by opcode weight
(curation), rank features by filter scores (ranking), train decision-tree
classifiers on the top features (trees), and evaluate them with stratified
cross-validation (evaluation).
"""

from .corpus import (
    BENIGN,
    MALWARE,
    FeatureMatrix,
    Label,
    Sample,
    Vocabulary,
    build_vocabulary,
    load_matrix,
    load_vocabulary,
    read_manifest,
    save_matrix,
    save_vocabulary,
    vectorize,
)
from .curation import CurationConfig, CurationReport, curate
from .evaluation import confusion, cross_validate, metrics, stratified_folds
from .ingest import detect_dialect, parse_file, sniff_file, tokenize_line
from .ranking import FeatureRanking, rank_top_k
from .trees import load_model, predict, predict_matrix, save_model, train

__version__ = "0.1.0"

__all__ = [
    "BENIGN",
    "MALWARE",
    "CurationConfig",
    "CurationReport",
    "FeatureMatrix",
    "FeatureRanking",
    "Label",
    "Sample",
    "Vocabulary",
    "build_vocabulary",
    "confusion",
    "cross_validate",
    "curate",
    "detect_dialect",
    "load_matrix",
    "load_model",
    "load_vocabulary",
    "metrics",
    "parse_file",
    "predict",
    "predict_matrix",
    "rank_top_k",
    "read_manifest",
    "save_matrix",
    "save_model",
    "save_vocabulary",
    "sniff_file",
    "stratified_folds",
    "tokenize_line",
    "train",
    "vectorize",
]
