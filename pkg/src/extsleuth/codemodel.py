"""ECMAScript code model: call sites, string literals, obfuscation metrics.

Parsing runs in a Node.js helper (bundled acorn); everything downstream of
the raw AST facts — literal classification, base64 payload extraction,
obfuscation metrics, invisible-Unicode detection — is computed here so the
results are pure functions of the source text.
"""

from __future__ import annotations

import base64
import json
import logging
import math
import re
import string
import subprocess
from dataclasses import dataclass, field

from . import config
from .ingest import ExtensionArtifact

log = logging.getLogger(__name__)

PARSED = "parsed"
PARSE_FAILED = "parse-failed"

CLASS_URL = "url"
CLASS_BASE64 = "base64-candidate"
CLASS_PLAIN = "plain"

_ALNUM = frozenset(string.ascii_letters + string.digits)
_BASE64_ALPHABET = frozenset(string.ascii_letters + string.digits + "+/=")
_STRICT_BASE64 = re.compile(r"[A-Za-z0-9+/]*={0,2}")

_IDENTIFIER = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_JS_KEYWORDS = frozenset(
    """break case catch class const continue debugger default delete do else
    enum export extends false finally for function if implements import in
    instanceof interface let new null package private protected public return
    static super switch this throw true try typeof var void while with yield
    async await of undefined""".split()
)

# Code points that hide logic from human review. BOM is only suspicious when
# it appears past position 0.
INVISIBLE_CODEPOINTS = {
    0x200B: "zero-width-space",
    0x200C: "zero-width-non-joiner",
    0x200D: "zero-width-joiner",
    0x2060: "word-joiner",
}
BIDI_CODEPOINTS = dict.fromkeys(
    list(range(0x202A, 0x202F)) + list(range(0x2066, 0x206A)), "bidi-control"
)
BOM = 0xFEFF

_QUOTED_STRING = re.compile(
    r"'(?:[^'\\\n]|\\.)*'|\"(?:[^\"\\\n]|\\.)*\"|`(?:[^`\\]|\\.)*`"
)


@dataclass(frozen=True)
class Span:
    """Location of evidence inside a source text.

    line is 1-based, col 0-based; start is the absolute character offset, so
    text[start:start+length] recovers the evidence verbatim.
    """

    line: int
    col: int
    start: int
    length: int

    def slice(self, text: str) -> str:
        return text[self.start:self.start + self.length]


@dataclass
class CallSite:
    callee_path: str
    arg_literals: list[str]
    span: Span


@dataclass
class StringLiteralRecord:
    value: str
    span: Span
    classification: str = CLASS_PLAIN


@dataclass
class Base64Blob:
    span: Span
    decoded_size_bytes: int
    preview: bytes


@dataclass
class InvisibleChar:
    span: Span
    category: str
    codepoint: int


@dataclass
class DateComparison:
    """A </>-style comparison between a clock read and literal operands."""

    span: Span
    string_literals: list[str]
    number_literals: list[float]


@dataclass
class ObfuscationMetrics:
    non_alnum_ratio: float = 0.0
    avg_identifier_length: float = 0.0
    max_line_length: int = 0
    entropy_bits_per_char: float = 0.0
    minified: bool = False


@dataclass
class SourceUnit:
    path: str
    text: str
    parse_status: str = PARSE_FAILED
    call_sites: list[CallSite] = field(default_factory=list)
    string_literals: list[StringLiteralRecord] = field(default_factory=list)
    base64_blobs: list[Base64Blob] = field(default_factory=list)
    invisible_chars: list[InvisibleChar] = field(default_factory=list)
    date_comparisons: list[DateComparison] = field(default_factory=list)
    metrics: ObfuscationMetrics = field(default_factory=ObfuscationMetrics)

    @property
    def minified(self) -> bool:
        return self.metrics.minified

    @property
    def has_invisible_unicode(self) -> bool:
        return bool(self.invisible_chars)


@dataclass
class CodeModel:
    units: list[SourceUnit] = field(default_factory=list)

    def unit(self, path: str) -> SourceUnit | None:
        for u in self.units:
            if u.path == path:
                return u
        return None


def compute_obfuscation_metrics(text: str) -> ObfuscationMetrics:
    """Character-level obfuscation heuristics; empty text is all zeros."""
    if not text:
        return ObfuscationMetrics()
    total = len(text)
    non_alnum = sum(1 for c in text if c not in _ALNUM)
    whitespace = sum(1 for c in text if c.isspace())
    max_line = max(len(line) for line in text.split("\n"))
    identifiers = [
        m.group(0)
        for m in _IDENTIFIER.finditer(text)
        if len(m.group(0)) > 2 and m.group(0) not in _JS_KEYWORDS
    ]
    avg_ident = (
        sum(len(i) for i in identifiers) / len(identifiers) if identifiers else 0.0
    )
    minified = (
        max_line > config.MINIFIED_LINE_LENGTH
        and whitespace / total < config.MINIFIED_WHITESPACE_FRACTION
    )
    return ObfuscationMetrics(
        non_alnum_ratio=non_alnum / total,
        avg_identifier_length=avg_ident,
        max_line_length=max_line,
        entropy_bits_per_char=shannon_entropy(text.encode("utf-8")),
        minified=minified,
    )


def shannon_entropy(data: bytes) -> float:
    if not data:
        return 0.0
    counts = [0] * 256
    for b in data:
        counts[b] += 1
    total = len(data)
    return -sum(
        (c / total) * math.log2(c / total) for c in counts if c
    )


def detect_invisible_unicode(text: str) -> list[InvisibleChar]:
    """Scan for the documented zero-width / bidi / misplaced-BOM code points."""
    found = []
    line, col = 1, 0
    for idx, ch in enumerate(text):
        cp = ord(ch)
        category = None
        if cp in INVISIBLE_CODEPOINTS:
            category = INVISIBLE_CODEPOINTS[cp]
        elif cp in BIDI_CODEPOINTS:
            category = BIDI_CODEPOINTS[cp]
        elif cp == BOM and idx > 0:
            category = "byte-order-mark"
        if category:
            found.append(
                InvisibleChar(Span(line, col, idx, 1), category, cp)
            )
        if ch == "\n":
            line += 1
            col = 0
        else:
            col += 1
    return found


def classify_literal(value: str) -> str:
    if re.match(r"^https?://[^\s/]+", value):
        return CLASS_URL
    if len(value) >= config.BASE64_CANDIDATE_MIN_CHARS:
        in_alphabet = sum(1 for c in value if c in _BASE64_ALPHABET)
        if in_alphabet / len(value) >= config.BASE64_PURITY:
            return CLASS_BASE64
    return CLASS_PLAIN


def extract_base64_blobs(unit: SourceUnit) -> list[Base64Blob]:
    """Decode base64-candidate literals; non-canonical ones demote to plain."""
    blobs = []
    for record in unit.string_literals:
        if record.classification != CLASS_BASE64:
            continue
        decoded = _decode_canonical_base64(record.value)
        if decoded is None:
            record.classification = CLASS_PLAIN
            continue
        blobs.append(Base64Blob(record.span, len(decoded), decoded[:64]))
    return blobs


def _decode_canonical_base64(value: str) -> bytes | None:
    if len(value) % 4 != 0 or not _STRICT_BASE64.fullmatch(value):
        return None
    try:
        decoded = base64.b64decode(value, validate=True)
    except ValueError:
        return None
    if base64.b64encode(decoded).decode("ascii") != value:
        return None
    return decoded


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for idx, ch in enumerate(text):
        if ch == "\n":
            starts.append(idx + 1)
    return starts


def _offset_to_linecol(starts: list[int], offset: int) -> tuple[int, int]:
    import bisect

    line = bisect.bisect_right(starts, offset)
    return line, offset - starts[line - 1]


def scan_string_literals(text: str) -> list[StringLiteralRecord]:
    """Quoted-string fallback for parse-failed units; spans cover the quotes."""
    starts = _line_starts(text)
    records = []
    for m in _QUOTED_STRING.finditer(text):
        raw = m.group(0)
        line, col = _offset_to_linecol(starts, m.start())
        records.append(
            StringLiteralRecord(
                value=raw[1:-1],
                span=Span(line, col, m.start(), len(raw)),
                classification=classify_literal(raw[1:-1]),
            )
        )
    return records


def _resolve_aliases(callee: str, aliases: dict[str, str]) -> str:
    root, dot, rest = callee.partition(".")
    target = aliases.get(root)
    if target is None:
        return callee
    return target + dot + rest if rest else target


def _parse_with_node(units: list[dict]) -> list[dict] | None:
    payload = json.dumps({"units": units})
    try:
        proc = subprocess.run(
            [config.node_binary(), config.js_path("parse_units.js")],
            input=payload.encode("utf-8"),
            capture_output=True,
            timeout=60,
        )
    except (OSError, subprocess.TimeoutExpired, RuntimeError) as exc:
        log.warning("parse helper unavailable: %s", exc)
        return None
    if proc.returncode != 0:
        log.warning("parse helper failed: %s", proc.stderr.decode(errors="replace"))
        return None
    try:
        return json.loads(proc.stdout)["results"]
    except (ValueError, KeyError):
        log.warning("parse helper produced malformed output")
        return None


def build_source_unit(path: str, text: str, facts: dict | None) -> SourceUnit:
    """Assemble one SourceUnit from parser facts (or from text alone)."""
    unit = SourceUnit(path=path, text=text)
    unit.metrics = compute_obfuscation_metrics(text)
    unit.invisible_chars = detect_invisible_unicode(text)
    if facts is not None and facts.get("status") == PARSED:
        unit.parse_status = PARSED
        aliases = facts.get("aliases", {})
        for cs in facts.get("callSites", []):
            span = Span(cs["line"], cs["col"], cs["start"], cs["end"] - cs["start"])
            unit.call_sites.append(
                CallSite(
                    callee_path=_resolve_aliases(cs["callee"], aliases),
                    arg_literals=list(cs.get("args", [])),
                    span=span,
                )
            )
        for lit in facts.get("stringLiterals", []):
            span = Span(lit["line"], lit["col"], lit["start"], lit["end"] - lit["start"])
            unit.string_literals.append(
                StringLiteralRecord(
                    value=lit["value"],
                    span=span,
                    classification=classify_literal(lit["value"]),
                )
            )
        for cmp_ in facts.get("dateComparisons", []):
            span = Span(cmp_["line"], cmp_["col"], cmp_["start"], cmp_["end"] - cmp_["start"])
            unit.date_comparisons.append(
                DateComparison(
                    span=span,
                    string_literals=list(cmp_.get("strings", [])),
                    number_literals=[
                        n for n in cmp_.get("numbers", [])
                        if isinstance(n, (int, float))
                    ],
                )
            )
    else:
        unit.parse_status = PARSE_FAILED
        unit.string_literals = scan_string_literals(text)
    unit.base64_blobs = extract_base64_blobs(unit)
    return unit


def build_code_model(artifact: ExtensionArtifact) -> CodeModel:
    """Parse every code file of the artifact into SourceUnits."""
    code_files = artifact.code_files()
    if not code_files:
        return CodeModel()
    texts = {f.path: f.data.decode("utf-8", errors="replace") for f in code_files}
    results = _parse_with_node(
        [{"path": p, "text": t} for p, t in sorted(texts.items())]
    )
    facts_by_path = {r["path"]: r for r in results} if results else {}
    units = [
        build_source_unit(path, text, facts_by_path.get(path))
        for path, text in sorted(texts.items())
    ]
    return CodeModel(units=units)
