"""Parse disassembly listings into opcode mnemonic sequences.

Two listing dialects are supported:

* ``kaggle_asm`` - IDA-style full listings where every line starts with a
  section-prefixed address token (``.text:00401000``), optionally followed
  by a raw byte column, then the instruction.
* ``objdump`` - GNU objdump -d output, ``address: hex-bytes mnemonic``
  with AT&T-suffixed mnemonics (``movl``, ``cmpl``).

Only instruction mnemonics are kept: data directives, labels, comments,
name definitions, and byte-continuation lines yield nothing.  One known
ambiguity: ``db``/``dd``/``dw`` are also valid hex byte pairs, so a data
line such as ``dd offset sub_401074`` reads the directive as part of the
byte column and surfaces the operand keyword (``offset``) as its token.
Mnemonic spellings are preserved per dialect (``movl`` is not folded into
``mov``).
Legal prefix tokens (``lock``, ``rep`` family) are emitted as their own
token followed by the prefixed instruction's mnemonic.
"""

import re
from dataclasses import dataclass, field

from .errors import UnrecognizedDialect

KAGGLE_ASM = "kaggle_asm"
OBJDUMP = "objdump"
DIALECTS = (KAGGLE_ASM, OBJDUMP)

# Assembler directives and name-defining keywords that disqualify a line.
# Data directives (db/dd/dw/...) are data, not opcodes; the rest introduce
# names, segments, or assembler state.
DATA_DIRECTIVES = frozenset(
    "db dd dw dq dt align extrn extern public assume proc endp segment ends"
    " struc equ unicode include end model org".split()
)

# Keywords that, as the token after the candidate, mark a name definition
# line such as "sub_401000 proc near" or "var_4 = dword ptr -4".
_NAME_DEFINING = frozenset(
    "proc endp equ db dd dw dq dt struc segment ends macro label =".split()
)

# Instruction prefixes emitted as their own token, with the prefixed
# mnemonic on the same line emitted as well.
PREFIX_TOKENS = frozenset(["lock", "rep", "repe", "repne", "repz", "repnz"])

_MNEMONIC_RE = re.compile(r"[a-z][a-z0-9._]*\Z")

# One match per listing line at most.  Group 1 holds the candidate mnemonic
# and, when present, the following whitespace-delimited token (needed for
# name-definition filtering and prefix double-emission).  The lookahead
# rejects label lines ("loc_40100A:") and glued punctuation.
_KAGGLE_RE = re.compile(
    r"^[^\s:]+:[0-9A-Fa-f]+"
    r"(?:[ \t]+(?:[0-9A-Fa-f]{2}|\?\?|\+))*"
    r"[ \t]+([A-Za-z][A-Za-z0-9._]*(?=[ \t\r\n]|$)(?:[ \t]+\S+)?)",
    re.M,
)
_OBJDUMP_RE = re.compile(
    r"^[ \t]*[0-9A-Fa-f]+:"
    r"(?:[ \t]+[0-9A-Fa-f]{2})*"
    r"[ \t]+([A-Za-z][A-Za-z0-9._]*(?=[ \t\r\n]|$)(?:[ \t]+\S+)?)",
    re.M,
)
_LINE_RES = {KAGGLE_ASM: _KAGGLE_RE, OBJDUMP: _OBJDUMP_RE}

# Dialect sniffing: kaggle location tokens have hex glued to the colon,
# objdump instruction lines have whitespace after "addr:" then a hex byte.
_KAGGLE_SNIFF = re.compile(r"[^\s:]+:[0-9A-Fa-f]{4,}(?:[ \t\r]|$)")
_OBJDUMP_SNIFF = re.compile(r"[ \t]*[0-9A-Fa-f]+:[ \t]+[0-9A-Fa-f]{2}(?:[ \t\r]|$)")


@dataclass
class OpcodeSequence:
    """Ordered opcode mnemonics extracted from one disassembly listing."""

    file_id: str
    opcodes: list = field(default_factory=list)
    line_count: int = 0
    skipped_count: int = 0


def detect_dialect(first_lines) -> str:
    """Classify a sample of listing lines as kaggle_asm or objdump.

    A dialect is chosen only when a strict majority of the non-empty lines
    matches its layout; otherwise the file is unrecognized and should be
    quarantined rather than silently dropped.
    """
    nonempty = [ln for ln in first_lines if ln.strip()]
    kaggle = sum(1 for ln in nonempty if _KAGGLE_SNIFF.match(ln))
    objdump = sum(1 for ln in nonempty if _OBJDUMP_SNIFF.match(ln))
    n = len(nonempty)
    if n and kaggle * 2 > n:
        return KAGGLE_ASM
    if n and objdump * 2 > n:
        return OBJDUMP
    raise UnrecognizedDialect(
        f"no dialect reached a majority over {n} non-empty lines "
        f"(kaggle_asm={kaggle}, objdump={objdump})"
    )


def _emit(group: str):
    """Turn one regex capture (candidate token + optional next token) into 0-2 mnemonics."""
    parts = group.split(None, 1)
    cand = parts[0].lower()
    if cand in DATA_DIRECTIVES:
        return ()
    nxt = parts[1].split(None, 1)[0].lower() if len(parts) > 1 else ""
    if nxt in _NAME_DEFINING:
        return ()
    if cand in PREFIX_TOKENS:
        if nxt and nxt not in DATA_DIRECTIVES and _MNEMONIC_RE.match(nxt):
            return (cand, nxt)
        return (cand,)
    return (cand,)


def tokenize_line(line: str, dialect: str):
    """Extract the mnemonic token(s) from one listing line.

    Returns an empty tuple for directives, data, labels, comments, and
    blank lines; a 1-tuple for a plain instruction; a 2-tuple for a
    prefixed instruction (prefix first).
    """
    if dialect not in _LINE_RES:
        raise ValueError(f"unknown dialect {dialect!r}")
    m = _LINE_RES[dialect].match(line)
    if not m:
        return ()
    return _emit(m.group(1))


def parse_file(content: str, file_id: str, dialect: str) -> OpcodeSequence:
    """Tokenize a whole listing, preserving instruction order.

    Line accounting: line_count is the number of newline-delimited lines
    (a final unterminated line counts as one); skipped_count is the number
    of lines that yielded no token.
    """
    if dialect not in _LINE_RES:
        raise ValueError(f"unknown dialect {dialect!r}")
    opcodes = []
    append = opcodes.append
    yielding = 0
    # Single multiline scan over the content; equivalent to tokenize_line
    # on every line but several times faster on large listings.  Listing
    # lines repeat heavily, so token extraction is memoized per capture.
    cache = {}
    cache_get = cache.get
    for group in _LINE_RES[dialect].findall(content):
        toks = cache_get(group)
        if toks is None:
            toks = cache[group] = _emit(group)
        if toks:
            yielding += 1
            append(toks[0])
            if len(toks) == 2:
                append(toks[1])
    line_count = content.count("\n")
    if content and not content.endswith("\n"):
        line_count += 1
    return OpcodeSequence(
        file_id=file_id,
        opcodes=opcodes,
        line_count=line_count,
        skipped_count=line_count - yielding,
    )


def read_listing(path: str) -> str:
    """Read a listing file as text, replacing undecodable bytes.

    Disassembly dumps routinely embed raw data regions, so decoding is
    lossy by design and never fatal.
    """
    with open(path, "rb") as f:
        raw = f.read()
    return raw.decode("utf-8", errors="replace")


def sniff_file(path: str, sample_lines: int = 80) -> str:
    """Detect the dialect of a listing file from its leading lines."""
    with open(path, "rb") as f:
        head = f.read(65536)
    text = head.decode("utf-8", errors="replace")
    lines = text.split("\n")
    if len(lines) > sample_lines:
        lines = lines[:sample_lines]
    return detect_dialect(lines)
