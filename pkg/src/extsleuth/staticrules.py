"""Static detection engine: library fingerprints, pattern heuristics, URL
classification, and privacy-policy consistency.

Rule evaluation is stateless; findings merge deterministically by
(path, span, ruleId) so repeated scans of one artifact are identical.
"""

from __future__ import annotations

import datetime
import hashlib
import ipaddress
import json
import re
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from . import config
from .codemodel import CodeModel, Span
from .ingest import ExtensionArtifact
from .sandbox.events import SandboxEvent

SEVERITIES = ("Info", "Low", "Medium", "High")
SEVERITY_ORDER = {name: idx for idx, name in enumerate(SEVERITIES)}

KNOWN_BENIGN = "known-benign"
EXFIL_INDICATOR = "exfil-indicator"
SUSPICIOUS_UNKNOWN = "suspicious-unknown"

PHASE_STATIC = "static"
PHASE_DYNAMIC = "dynamic"

# Rules whose hits mean data leaves the machine; used by the policy
# contradiction check and the prompt builder.
EXFIL_RULE_IDS = frozenset(
    {
        "discord-webhook-url",
        "url-exfil-indicator",
        "network-exfil",
        "cookie-exfiltration",
    }
)

_CHILD_PROCESS_CALLEES = frozenset(
    {
        "child_process.exec",
        "child_process.execSync",
        "child_process.execFile",
        "child_process.execFileSync",
        "child_process.spawn",
        "child_process.spawnSync",
        "child_process.fork",
    }
)

_DATE_STRING_FORMATS = ("%B %d, %Y", "%b %d, %Y", "%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y")

_NEGATION_WORDS = frozenset({"never", "not", "won't", "wont", "don't", "dont", "doesn't", "doesnt"})
_CLAIM_VERBS = frozenset(
    {
        "collect", "collects", "collected", "collecting",
        "share", "shares", "shared", "sharing",
        "transmit", "transmits", "transmitted", "transmitting",
        "send", "sends", "sent", "sending",
    }
)
_CLAIM_OBJECTS = frozenset({"data", "information", "cookies"})
_CLAIM_WINDOW = 6


class MalformedSignatureDb(Exception):
    pass


class MalformedUrl(Exception):
    pass


@dataclass
class Finding:
    id: str
    rule_id: str
    severity: str
    title: str
    detail: str
    evidence: str | None = None
    path: str | None = None
    span: Span | None = None
    phase: str = PHASE_STATIC

    def sort_key(self):
        return (-SEVERITY_ORDER[self.severity], self.path or "",
                self.span.start if self.span else -1, self.rule_id, self.id)


@dataclass
class SignatureEntry:
    library: str
    version_regex: re.Pattern
    vulnerable_below: str
    advisories: list[str] = field(default_factory=list)
    content_hashes: list[str] = field(default_factory=list)


@dataclass
class SignatureDb:
    entries: list[SignatureEntry] = field(default_factory=list)


@dataclass
class RuleConfig:
    """File-backed inputs plus the reference date for logic-bomb checks."""

    allowlist: list[str] = field(default_factory=list)
    indicators: list[str] = field(default_factory=list)
    signature_db: SignatureDb = field(default_factory=SignatureDb)
    reference_date_ms: int = config.DEFAULT_VIRTUAL_START_MS

    @classmethod
    def load_defaults(cls, allowlist_path: str | None = None,
                      indicators_path: str | None = None,
                      signatures_path: str | None = None,
                      reference_date_ms: int | None = None) -> "RuleConfig":
        return cls(
            allowlist=load_host_list(allowlist_path or config.data_path("allowlist.txt")),
            indicators=load_host_list(indicators_path or config.data_path("indicators.txt")),
            signature_db=load_signature_db(signatures_path or config.data_path("signatures.json")),
            reference_date_ms=(
                reference_date_ms if reference_date_ms is not None
                else config.DEFAULT_VIRTUAL_START_MS
            ),
        )


def load_host_list(path: str) -> list[str]:
    """Newline-delimited host suffixes; '#' starts a comment."""
    hosts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            entry = line.split("#", 1)[0].strip().lower()
            if entry:
                hosts.append(entry.lstrip("."))
    return hosts


def load_signature_db(path: str) -> SignatureDb:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedSignatureDb(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("entries"), list):
        raise MalformedSignatureDb(f"{path}: top-level 'entries' array required")
    entries = []
    for idx, item in enumerate(raw["entries"]):
        if not isinstance(item, dict):
            raise MalformedSignatureDb(f"{path}: entry {idx} is not an object")
        try:
            pattern = re.compile(item["versionRegex"])
        except (KeyError, re.error) as exc:
            raise MalformedSignatureDb(
                f"{path}: entry {idx} versionRegex invalid: {exc}"
            ) from exc
        if pattern.groups < 1:
            raise MalformedSignatureDb(
                f"{path}: entry {idx} versionRegex needs one capture group"
            )
        entries.append(
            SignatureEntry(
                library=str(item.get("library", f"entry-{idx}")),
                version_regex=pattern,
                vulnerable_below=str(item.get("vulnerableBelow", "0")),
                advisories=[str(a) for a in item.get("advisories", [])],
                content_hashes=[str(h).lower() for h in item.get("hashes", [])],
            )
        )
    return SignatureDb(entries=entries)


def version_tuple(version: str) -> tuple[int, ...]:
    parts = []
    for piece in version.split("."):
        digits = re.match(r"\d+", piece)
        parts.append(int(digits.group(0)) if digits else 0)
    return tuple(parts)


def version_less_than(a: str, b: str) -> bool:
    ta, tb = version_tuple(a), version_tuple(b)
    width = max(len(ta), len(tb))
    return ta + (0,) * (width - len(ta)) < tb + (0,) * (width - len(tb))


def classify_url(url: str, allowlist: list[str], indicators: list[str]) -> str:
    """Total classification of a well-formed URL into one DomainClass."""
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise MalformedUrl(url)
    host = (parts.hostname or "").lower()
    if not host:
        raise MalformedUrl(url)
    if _suffix_match(host, allowlist):
        return KNOWN_BENIGN
    if _is_discord_webhook(host, parts.path):
        return EXFIL_INDICATOR
    if _is_raw_ip(host):
        return EXFIL_INDICATOR
    if _suffix_match(host, indicators):
        return EXFIL_INDICATOR
    return SUSPICIOUS_UNKNOWN


def _suffix_match(host: str, suffixes: list[str]) -> bool:
    return any(host == s or host.endswith("." + s) for s in suffixes)


def _is_discord_webhook(host: str, path: str) -> bool:
    return host in ("discord.com", "discordapp.com", "ptb.discord.com",
                    "canary.discord.com") and path.startswith("/api/webhooks")


def _is_raw_ip(host: str) -> bool:
    try:
        ipaddress.ip_address(host.strip("[]"))
        return True
    except ValueError:
        return False


def is_webhook_url(url: str) -> bool:
    try:
        parts = urlsplit(url)
    except ValueError:
        return False
    return _is_discord_webhook((parts.hostname or "").lower(), parts.path)


def _evidence(text: str, span: Span) -> str:
    return span.slice(text)[: config.EVIDENCE_MAX_CHARS]


class _FindingBuilder:
    """Accumulates findings with stable, collision-free ids."""

    def __init__(self):
        self.findings: list[Finding] = []
        self._used_ids: set[str] = set()

    def add(self, rule_id: str, severity: str, title: str, detail: str,
            evidence: str | None = None, path: str | None = None,
            span: Span | None = None, phase: str = PHASE_STATIC):
        base = f"{rule_id}@{path}:{span.line}:{span.col}" if path and span else f"{rule_id}@artifact"
        fid = base
        bump = 1
        while fid in self._used_ids:
            bump += 1
            fid = f"{base}#{bump}"
        self._used_ids.add(fid)
        self.findings.append(
            Finding(id=fid, rule_id=rule_id, severity=severity, title=title,
                    detail=detail, evidence=evidence, path=path, span=span,
                    phase=phase)
        )


def scan_vulnerable_libraries(artifact: ExtensionArtifact, db: SignatureDb) -> list[Finding]:
    """Fingerprint bundled libraries by version regex or exact content hash."""
    out = _FindingBuilder()
    for entry_file in artifact.code_files():
        text = entry_file.data.decode("utf-8", errors="replace")
        digest = hashlib.sha256(entry_file.data).hexdigest()
        starts = None
        for sig in db.entries:
            if digest in sig.content_hashes:
                out.add(
                    "vulnerable-library",
                    "Medium" if sig.advisories else "Info",
                    f"Known vulnerable copy of {sig.library}",
                    f"File content hash matches a fingerprinted {sig.library} build "
                    f"({', '.join(sig.advisories) or 'no advisories'}).",
                    path=entry_file.path,
                )
                continue
            m = sig.version_regex.search(text)
            if not m:
                continue
            version = m.group(1)
            if not version_less_than(version, sig.vulnerable_below):
                continue
            if starts is None:
                starts = _build_line_starts(text)
            line, col = _locate(starts, m.start())
            span = Span(line, col, m.start(), len(m.group(0)))
            out.add(
                "vulnerable-library",
                "Medium" if sig.advisories else "Info",
                f"Vulnerable library {sig.library} {version}",
                f"{sig.library} {version} is below {sig.vulnerable_below} "
                f"({', '.join(sig.advisories) or 'no advisories'}).",
                evidence=_evidence(text, span),
                path=entry_file.path,
                span=span,
            )
    return sorted(out.findings, key=lambda f: f.sort_key())


def _build_line_starts(text: str) -> list[int]:
    starts = [0]
    for idx, ch in enumerate(text):
        if ch == "\n":
            starts.append(idx + 1)
    return starts


def _locate(starts: list[int], offset: int) -> tuple[int, int]:
    import bisect

    line = bisect.bisect_right(starts, offset)
    return line, offset - starts[line - 1]


def run_pattern_rules(artifact: ExtensionArtifact, model: CodeModel,
                      rules: RuleConfig) -> list[Finding]:
    """Apply the built-in heuristic rule table over the code model."""
    out = _FindingBuilder()
    saw_cookies_call: tuple[str, Span] | None = None
    saw_url_literal = False

    for unit in model.units:
        for record in unit.string_literals:
            if record.classification != "url":
                continue
            saw_url_literal = True
            _url_rules(out, unit, record, rules)
        for call in unit.call_sites:
            callee = call.callee_path
            if callee in ("eval", "Function"):
                out.add(
                    "eval-or-function-constructor", "Medium",
                    "Dynamic code generation",
                    f"Call to {callee} can execute strings as code.",
                    evidence=_evidence(unit.text, call.span),
                    path=unit.path, span=call.span,
                )
            if callee in _CHILD_PROCESS_CALLEES:
                powershell = any(
                    "powershell" in arg.lower() for arg in call.arg_literals
                )
                out.add(
                    "child-process-exec",
                    "High" if powershell else "Medium",
                    "Launches external process"
                    + (" (PowerShell)" if powershell else ""),
                    f"{callee} runs external commands from extension code.",
                    evidence=_evidence(unit.text, call.span),
                    path=unit.path, span=call.span,
                )
            if callee.startswith("chrome.cookies.") and saw_cookies_call is None:
                saw_cookies_call = (unit.path, call.span)
            if any(arg == "workbench.extensions.installExtension"
                   for arg in call.arg_literals):
                out.add(
                    "vscode-install-extension", "Medium",
                    "Extension installing another extension",
                    "Invokes the editor command that installs another extension.",
                    evidence=_evidence(unit.text, call.span),
                    path=unit.path, span=call.span,
                )
            if "declarativeNetRequest" in callee and any(
                "content-security-policy" in arg.lower() for arg in call.arg_literals
            ):
                out.add(
                    "csp-strip", "High",
                    "Strips Content-Security-Policy headers",
                    "Dynamic network rules remove Content-Security-Policy, "
                    "weakening page defenses.",
                    evidence=_evidence(unit.text, call.span),
                    path=unit.path, span=call.span,
                )
        for blob in unit.base64_blobs:
            if blob.decoded_size_bytes >= config.BASE64_BLOB_HIGH_BYTES:
                severity = "High"
            elif blob.decoded_size_bytes >= config.BASE64_BLOB_MEDIUM_BYTES:
                severity = "Medium"
            else:
                continue
            out.add(
                "base64-blob", severity,
                f"Embedded base64 payload ({blob.decoded_size_bytes // 1024}KB decoded)",
                "Large base64-encoded blob may carry an embedded binary payload.",
                evidence=_evidence(unit.text, blob.span),
                path=unit.path, span=blob.span,
            )
        if unit.invisible_chars:
            first = unit.invisible_chars[0]
            categories = sorted({c.category for c in unit.invisible_chars})
            out.add(
                "invisible-unicode", "High",
                "Invisible Unicode characters in source",
                f"{len(unit.invisible_chars)} hidden code point(s) "
                f"({', '.join(categories)}) can conceal logic from review.",
                evidence=_evidence(unit.text, first.span),
                path=unit.path, span=first.span,
            )
        for comparison in unit.date_comparisons:
            when = _future_literal_ms(comparison, rules.reference_date_ms)
            if when is None:
                continue
            out.add(
                "date-threshold-compare", "Medium",
                "Possible logic bomb",
                "Compares the current time against a literal future date "
                f"(~{_format_ms(when)}).",
                evidence=_evidence(unit.text, comparison.span),
                path=unit.path, span=comparison.span,
            )
        if unit.metrics.minified or unit.metrics.non_alnum_ratio > config.OBFUSCATION_RATIO_THRESHOLD:
            out.add(
                "obfuscation-elevated", "Info",
                "Obfuscation metrics elevated",
                f"minified={str(unit.metrics.minified).lower()} "
                f"nonAlnumRatio={unit.metrics.non_alnum_ratio:.2f}.",
                path=unit.path,
            )

    if saw_cookies_call is not None and saw_url_literal:
        path, span = saw_cookies_call
        unit = model.unit(path)
        out.add(
            "cookies-api-plus-network", "High",
            "Cookie access combined with network endpoints",
            "Code reads browser cookies and also carries hardcoded network "
            "destinations; together these enable credential exfiltration.",
            evidence=_evidence(unit.text, span) if unit else None,
            path=path, span=span,
        )
    for missing in artifact.manifest.missing_scripts:
        out.add(
            "manifest-missing-script", "Low",
            "Manifest references a missing script",
            f"Declared script {missing!r} is absent from the package.",
        )
    return sorted(out.findings, key=lambda f: f.sort_key())


def _url_rules(out: _FindingBuilder, unit, record, rules: RuleConfig):
    try:
        domain_class = classify_url(record.value, rules.allowlist, rules.indicators)
    except MalformedUrl:
        return
    evidence = _evidence(unit.text, record.span)
    if is_webhook_url(record.value):
        out.add(
            "discord-webhook-url", "High",
            "Discord webhook URL in code",
            "Chat-platform webhooks are a common covert exfiltration channel.",
            evidence=evidence, path=unit.path, span=record.span,
        )
    elif domain_class == EXFIL_INDICATOR:
        out.add(
            "url-exfil-indicator", "High",
            "Hardcoded exfiltration endpoint",
            f"URL host matches a known exfiltration indicator: {record.value}.",
            evidence=evidence, path=unit.path, span=record.span,
        )
    elif domain_class == SUSPICIOUS_UNKNOWN:
        out.add(
            "suspicious-url", "Medium",
            "Hardcoded URL to unrecognized domain",
            f"{record.value} is neither allowlisted nor a known indicator.",
            evidence=evidence, path=unit.path, span=record.span,
        )


def _future_literal_ms(comparison, reference_ms: int) -> int | None:
    candidates = []
    for value in comparison.number_literals:
        # Only values that plausibly encode an epoch: ms since ~1973, or
        # seconds since ~2001 scaled up.
        if value > 1e11:
            candidates.append(int(value))
        elif value > 1e9:
            candidates.append(int(value * 1000))
    for text_value in comparison.string_literals:
        parsed = _parse_date_string(text_value)
        if parsed is not None:
            candidates.append(parsed)
    future = [c for c in candidates if c > reference_ms]
    return max(future) if future else None


def _parse_date_string(value: str) -> int | None:
    value = value.strip()
    try:
        dt = datetime.datetime.fromisoformat(value)
    except ValueError:
        dt = None
    if dt is None:
        for fmt in _DATE_STRING_FORMATS:
            try:
                dt = datetime.datetime.strptime(value, fmt)
                break
            except ValueError:
                continue
    if dt is None:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=datetime.timezone.utc)
    return int(dt.timestamp() * 1000)


def _format_ms(ms: int) -> str:
    return datetime.datetime.fromtimestamp(ms / 1000, tz=datetime.timezone.utc).strftime(
        "%Y-%m-%d"
    )


def extract_negative_claims(policy_text: str) -> list[str]:
    """Sentences claiming data is never collected/shared/transmitted/sent."""
    claims = []
    for sentence in re.split(r"(?<=[.!?])\s+", policy_text):
        words = [w.strip(".,;:!?\"'()").lower() for w in sentence.split()]
        negations = [i for i, w in enumerate(words) if w in _NEGATION_WORDS]
        verbs = [i for i, w in enumerate(words) if w in _CLAIM_VERBS]
        objects_ = [i for i, w in enumerate(words) if w in _CLAIM_OBJECTS]
        if any(
            abs(ni - vi) <= _CLAIM_WINDOW and any(abs(vi - oi) <= _CLAIM_WINDOW for oi in objects_)
            for ni in negations
            for vi in verbs
        ):
            claims.append(sentence.strip())
    return claims


def check_policy_consistency(policy_text: str | None, findings: list[Finding],
                             events: list[SandboxEvent],
                             rules: RuleConfig) -> list[Finding]:
    """High contradiction finding when a no-collection claim coexists with
    observed or detected exfiltration."""
    if not policy_text:
        return []
    claims = extract_negative_claims(policy_text)
    if not claims:
        return []
    exfil_seen = any(
        f.severity == "High" and f.rule_id in EXFIL_RULE_IDS for f in findings
    ) or any(_is_exfil_event(e, rules) for e in events)
    if not exfil_seen:
        return []
    out = _FindingBuilder()
    for claim in claims:
        out.add(
            "policy-contradiction", "High",
            "Privacy policy contradicts observed behavior",
            "The policy promises no data collection, but exfiltration-class "
            "behavior was detected.",
            evidence=claim[: config.EVIDENCE_MAX_CHARS],
        )
    return out.findings


def _is_exfil_event(event: SandboxEvent, rules: RuleConfig) -> bool:
    if event.category != "network":
        return False
    url = event.args_summary.split(" ", 1)[0]
    try:
        return classify_url(url, rules.allowlist, rules.indicators) == EXFIL_INDICATOR
    except MalformedUrl:
        return False


def merge_findings(*groups: list[Finding]) -> list[Finding]:
    """Deterministic merged ordering with unique ids across groups."""
    merged: list[Finding] = []
    seen: set[str] = set()
    for group in groups:
        for f in sorted(group, key=lambda f: f.sort_key()):
            fid = f.id
            bump = 1
            while fid in seen:
                bump += 1
                fid = f"{f.id}#{bump}"
            if fid != f.id:
                f = Finding(id=fid, rule_id=f.rule_id, severity=f.severity,
                            title=f.title, detail=f.detail, evidence=f.evidence,
                            path=f.path, span=f.span, phase=f.phase)
            seen.add(fid)
            merged.append(f)
    return merged
