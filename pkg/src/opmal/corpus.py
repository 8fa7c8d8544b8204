"""Vocabulary construction, sample vectorization, and on-disk corpus formats.

On-disk formats (all UTF-8, newline-terminated, byte-stable across runs):

* Manifest: CSV with header ``path,label,family``; label is ``malware`` or
  ``benign``; family may be empty.
* Vocabulary: one mnemonic per line, lexicographically sorted.
* Feature matrix: JSON-lines.  The first line is a header object carrying
  a format-version field and the vocabulary digest (plus the vocabulary
  itself so a matrix file is self-contained); every following line is one
  sample record ``{"id","label","family","weight","counts"}`` with counts
  keys in lexicographic order.
"""

import csv
import json
import os
from collections import Counter
from dataclasses import dataclass, field

from .errors import BadManifest, MalformedMatrixFile
from .util import atomic_write_text, dump_json_line, sha256_hex

MALWARE = "malware"
BENIGN = "benign"

MATRIX_FORMAT = "opmal.matrix"
MATRIX_VERSION = 1


@dataclass(frozen=True)
class Label:
    """Class label; family is only meaningful for malware."""

    tag: str
    family: str = None

    def __post_init__(self):
        if self.tag not in (MALWARE, BENIGN):
            raise ValueError(f"bad label tag {self.tag!r}")
        if self.family is not None and self.tag != MALWARE:
            raise ValueError("family is only valid for malware labels")

    @property
    def is_malware(self) -> bool:
        return self.tag == MALWARE


class Vocabulary:
    """Sorted, deduplicated opcode universe with a token -> column index map."""

    def __init__(self, opcodes):
        ops = sorted(set(opcodes))
        self.opcodes = tuple(ops)
        self.index = {op: i for i, op in enumerate(ops)}

    def __len__(self):
        return len(self.opcodes)

    def __contains__(self, op):
        return op in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.opcodes == other.opcodes

    def file_text(self) -> str:
        """The vocabulary-file form: one mnemonic per line, sorted."""
        return "".join(op + "\n" for op in self.opcodes)

    @property
    def digest(self) -> str:
        """SHA-256 of the vocabulary-file bytes."""
        return sha256_hex(self.file_text().encode("utf-8"))


@dataclass
class Sample:
    """Labeled sparse opcode-count vector; weight is the total opcode count."""

    file_id: str
    label: Label
    counts: dict
    weight: int

    def __post_init__(self):
        if self.weight != sum(self.counts.values()):
            raise ValueError(
                f"sample {self.file_id}: weight {self.weight} != sum of counts"
            )


@dataclass
class FeatureMatrix:
    """Vocabulary plus samples in manifest order."""

    vocabulary: Vocabulary
    samples: list = field(default_factory=list)

    def __len__(self):
        return len(self.samples)

    def labels01(self):
        """Labels as 0 (benign) / 1 (malware) ints, in sample order."""
        return [1 if s.label.is_malware else 0 for s in self.samples]

    def column(self, opcode):
        """Dense count column for one opcode, in sample order."""
        return [s.counts.get(opcode, 0) for s in self.samples]

    def restricted(self, sample_indices):
        """New matrix over the same vocabulary with the given sample subset."""
        return FeatureMatrix(self.vocabulary, [self.samples[i] for i in sample_indices])


def build_vocabulary(sequences) -> Vocabulary:
    """Sorted union of tokens across opcode sequences."""
    tokens = set()
    for seq in sequences:
        tokens.update(seq.opcodes)
    return Vocabulary(tokens)


def vocabulary_from_counts(count_maps) -> Vocabulary:
    """Sorted union of the keys of per-file count maps."""
    tokens = set()
    for counts in count_maps:
        tokens.update(counts.keys())
    return Vocabulary(tokens)


def sample_from_counts(counts, vocab: Vocabulary, label: Label, file_id: str):
    """Build a Sample from a token-count map, dropping out-of-vocabulary tokens.

    Returns (sample, dropped) where dropped is the total count mass of
    tokens missing from the vocabulary.
    """
    kept = {}
    dropped = 0
    for tok, c in counts.items():
        if c <= 0:
            continue
        if tok in vocab.index:
            kept[tok] = int(c)
        else:
            dropped += int(c)
    return Sample(file_id=file_id, label=label, counts=kept, weight=sum(kept.values())), dropped


def vectorize(seq, vocab: Vocabulary, label: Label):
    """Count a sequence's tokens against a vocabulary.

    Returns (sample, dropped); tokens absent from the vocabulary are not
    stored but are tallied in the dropped diagnostic.
    """
    return sample_from_counts(Counter(seq.opcodes), vocab, label, seq.file_id)


def read_manifest(path: str):
    """Read manifest rows as (path_as_written, resolved_path, Label) triples.

    Relative paths resolve against the manifest's directory; the path as
    written serves as the stable sample id.
    """
    base = os.path.dirname(os.path.abspath(path))
    rows = []
    try:
        f = open(path, "r", encoding="utf-8", newline="")
    except OSError as e:
        raise BadManifest(f"cannot open manifest {path}: {e}") from e
    with f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["path", "label", "family"]:
            raise BadManifest(f"{path}: expected header 'path,label,family', got {header}")
        for i, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise BadManifest(f"{path}:{i}: expected 3 fields, got {len(row)}")
            p, tag, family = (c.strip() for c in row)
            if tag not in (MALWARE, BENIGN):
                raise BadManifest(f"{path}:{i}: bad label {tag!r}")
            if family and tag != MALWARE:
                raise BadManifest(f"{path}:{i}: family given for a benign file")
            full = p if os.path.isabs(p) else os.path.join(base, p)
            rows.append((p, full, Label(tag, family or None)))
    return rows


def save_vocabulary(vocab: Vocabulary, path: str) -> None:
    atomic_write_text(path, vocab.file_text())


def load_vocabulary(path: str) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as f:
        tokens = [ln.strip() for ln in f if ln.strip()]
    return Vocabulary(tokens)


def _sample_record(s: Sample) -> str:
    counts = {k: s.counts[k] for k in sorted(s.counts)}
    return dump_json_line(
        {
            "id": s.file_id,
            "label": s.label.tag,
            "family": s.label.family,
            "weight": s.weight,
            "counts": counts,
        }
    )


def matrix_text(m: FeatureMatrix, extra_header=None) -> str:
    """Serialize a matrix; two saves of the same matrix are byte-identical."""
    header = {
        "format": MATRIX_FORMAT,
        "version": MATRIX_VERSION,
        "vocab_sha256": m.vocabulary.digest,
        "vocab_size": len(m.vocabulary),
        "opcodes": list(m.vocabulary.opcodes),
    }
    if extra_header:
        header.update(extra_header)
    lines = [dump_json_line(header)]
    lines.extend(_sample_record(s) for s in m.samples)
    return "\n".join(lines) + "\n"


def save_matrix(m: FeatureMatrix, path: str, extra_header=None) -> None:
    atomic_write_text(path, matrix_text(m, extra_header))


def _require(cond, lineno, reason):
    if not cond:
        raise MalformedMatrixFile(lineno, reason)


def load_matrix(path: str, with_header: bool = False):
    """Load a matrix written by save_matrix, validating the schema.

    Any violation raises MalformedMatrixFile carrying the offending line
    number.  With with_header=True, returns (matrix, header_dict).
    """
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    _require(len(lines) >= 1, 1, "empty file, missing header")
    try:
        header = json.loads(lines[0])
    except ValueError as e:
        raise MalformedMatrixFile(1, f"bad header JSON: {e}") from None
    _require(isinstance(header, dict), 1, "header is not an object")
    _require(header.get("format") == MATRIX_FORMAT, 1, f"bad format tag {header.get('format')!r}")
    _require(header.get("version") == MATRIX_VERSION, 1, f"unsupported version {header.get('version')!r}")
    ops = header.get("opcodes")
    _require(isinstance(ops, list) and all(isinstance(o, str) for o in ops), 1, "bad opcodes list")
    vocab = Vocabulary(ops)
    _require(list(vocab.opcodes) == ops, 1, "opcodes not sorted and unique")
    _require(header.get("vocab_sha256") == vocab.digest, 1, "vocabulary digest mismatch")
    _require(header.get("vocab_size") == len(vocab), 1, "vocab_size mismatch")

    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except ValueError as e:
            raise MalformedMatrixFile(lineno, f"bad record JSON: {e}") from None
        _require(isinstance(rec, dict), lineno, "record is not an object")
        for key in ("id", "label", "family", "weight", "counts"):
            _require(key in rec, lineno, f"missing field {key!r}")
        _require(isinstance(rec["id"], str), lineno, "id must be a string")
        _require(rec["label"] in (MALWARE, BENIGN), lineno, f"bad label {rec['label']!r}")
        fam = rec["family"]
        _require(fam is None or isinstance(fam, str), lineno, "bad family")
        _require(not (fam and rec["label"] != MALWARE), lineno, "family on a benign record")
        counts = rec["counts"]
        _require(isinstance(counts, dict), lineno, "counts must be an object")
        for k, v in counts.items():
            _require(isinstance(v, int) and v > 0, lineno, f"bad count for {k!r}")
            _require(k in vocab.index, lineno, f"opcode {k!r} not in vocabulary")
        _require(
            isinstance(rec["weight"], int) and rec["weight"] == sum(counts.values()),
            lineno,
            "weight does not equal the sum of counts",
        )
        samples.append(
            Sample(
                file_id=rec["id"],
                label=Label(rec["label"], fam or None),
                counts=dict(counts),
                weight=rec["weight"],
            )
        )
    matrix = FeatureMatrix(vocab, samples)
    if with_header:
        return matrix, header
    return matrix
