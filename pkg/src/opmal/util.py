"""Small shared helpers: seed derivation, digests, atomic file writes."""

import hashlib
import json
import os
import tempfile


def derive_seed(seed: int, *parts) -> int:
    """Derive a sub-seed from a master seed and a purpose path.

    Stable across platforms and processes (hash randomization does not
    apply); the same (seed, parts) always yields the same value.
    """
    h = hashlib.sha256()
    h.update(str(int(seed)).encode("ascii"))
    for p in parts:
        h.update(b"/")
        h.update(str(p).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a temp file + rename so readers never see a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def dump_json_line(obj) -> str:
    """Single-line JSON with a stable byte representation."""
    return json.dumps(obj, ensure_ascii=True, separators=(",", ":"), allow_nan=False)
