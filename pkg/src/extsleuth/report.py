"""Risk aggregation and reporting: dynamic-event findings, the deterministic
verdict, LLM prompt assembly within a context budget, model-output parsing,
and the serialized report with its on-disk cache.

The verdict is a pure function of the finding multiset; the model narrative
is advisory and never feeds back into it.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from . import config
from .codemodel import CodeModel, Span
from .ingest import ExtensionArtifact
from .sandbox.events import SandboxEvent
from .staticrules import (
    EXFIL_INDICATOR,
    Finding,
    MalformedUrl,
    RuleConfig,
    SEVERITY_ORDER,
    SUSPICIOUS_UNKNOWN,
    classify_url,
)

PHASE_DYNAMIC = "dynamic"

RISK_LEVELS = ("Low", "Medium", "High")
RISK_UNKNOWN = "Unknown"

_RISK_RE = re.compile(r"risk level\s*[:\-]\s*(high|medium|low)", re.IGNORECASE)

_COOKIE_READ_ACTIONS = ("chrome.cookies.getAll", "chrome.cookies.get", "document.cookie")

# Higher is more interesting when ranking events for the prompt.
_EVENT_INTEREST = {
    "network": 9, "process": 8, "extension-api": 7, "clipboard": 6,
    "eval": 5, "dom": 4, "filesystem": 3, "timer": 2, "lifecycle": 1,
}

# Events whose action marks them prompt-worthy regardless of category noise.
_LOW_VALUE_ACTIONS = {"timer-set", "timer-fired", "console.log", "console.debug"}

PROMPT_INSTRUCTION = (
    "Analyze the provided extension behavior and code for potential "
    "malicious intent. Explain what the extension is doing and why it may "
    "be dangerous. Rate the risk level as High, Medium, or Low, with "
    "reasoning."
)


class SchemaVersionMismatch(Exception):
    pass


@dataclass
class RiskVerdict:
    level: str
    score: int
    reasons: list[str] = field(default_factory=list)


@dataclass
class RiskReport:
    digest: str
    kind: str
    name: str
    version: str
    publisher: str
    description: str
    permissions: list[str]
    host_patterns: list[str]
    file_count: int
    total_size_bytes: int
    scenario_hash: str
    scenario: dict
    verdict: RiskVerdict
    findings: list[Finding]
    contradictions: list[str]
    event_count: int
    event_log_ref: str
    dynamic_outcome: str
    dynamic_detail: str = ""
    llm_narrative: str | None = None
    llm_risk_level: str | None = None
    llm_model: str | None = None
    approved: bool = False
    timings: dict = field(default_factory=dict)
    code_summary: list[dict] = field(default_factory=list)
    tool_version: str = config.TOOL_VERSION


# Per-file cap keeps reports compact for the dashboard.
MAX_CALL_SITES_IN_REPORT = 100


def summarize_code_model(model: CodeModel) -> list[dict]:
    """Per-unit summary embedded in the report so the dashboard renders the
    code analysis view without re-parsing anything."""
    out = []
    for unit in model.units:
        sites = [
            {
                "callee": c.callee_path,
                "line": c.span.line,
                "args": c.arg_literals[:3],
            }
            for c in unit.call_sites[:MAX_CALL_SITES_IN_REPORT]
        ]
        classes = {"url": 0, "base64-candidate": 0, "plain": 0}
        for record in unit.string_literals:
            classes[record.classification] = classes.get(record.classification, 0) + 1
        out.append(
            {
                "path": unit.path,
                "parseStatus": unit.parse_status,
                "flags": {
                    "minified": unit.metrics.minified,
                    "hasInvisibleUnicode": unit.has_invisible_unicode,
                },
                "metrics": {
                    "nonAlnumRatio": round(unit.metrics.non_alnum_ratio, 4),
                    "avgIdentifierLength": round(unit.metrics.avg_identifier_length, 2),
                    "maxLineLength": unit.metrics.max_line_length,
                    "entropyBitsPerChar": round(unit.metrics.entropy_bits_per_char, 4),
                },
                "callSites": sites,
                "callSiteCount": len(unit.call_sites),
                "stringLiterals": classes,
            }
        )
    return out


def derive_dynamic_findings(events: list[SandboxEvent],
                            rules: RuleConfig) -> list[Finding]:
    """Map sandbox event patterns onto severity-ranked findings."""
    findings: list[Finding] = []
    used: set[str] = set()

    def add(rule_id, severity, title, detail, evidence=None, key=None):
        fid = f"{rule_id}@dyn:{key}" if key else f"{rule_id}@dyn"
        bump = 1
        while fid in used:
            bump += 1
            fid = f"{rule_id}@dyn:{key}#{bump}"
        used.add(fid)
        findings.append(
            Finding(id=fid, rule_id=rule_id, severity=severity, title=title,
                    detail=detail,
                    evidence=evidence[: config.EVIDENCE_MAX_CHARS] if evidence else None,
                    phase=PHASE_DYNAMIC)
        )

    seen_urls: set[str] = set()
    seen_commands: set[str] = set()
    cookie_read_seq: int | None = None
    cookie_exfil_done = False
    eval_count = 0
    unimplemented = 0
    install_targets: set[str] = set()

    for event in events:
        if event.category == "network":
            url = event.args_summary.split(" ", 1)[0]
            if url not in seen_urls:
                seen_urls.add(url)
                add_url_finding(add, url, rules)
            if (
                event.action == "POST"
                and cookie_read_seq is not None
                and event.seq > cookie_read_seq
                and not cookie_exfil_done
            ):
                cookie_exfil_done = True
                add(
                    "cookie-exfiltration", "High",
                    "Possible cookie exfiltration",
                    "Cookies were read and later sent over the network in "
                    "the same run.",
                    evidence=event.args_summary,
                )
        elif event.category in ("extension-api", "dom"):
            if event.action in _COOKIE_READ_ACTIONS and cookie_read_seq is None:
                cookie_read_seq = event.seq
            if event.action == "workbench.extensions.installExtension":
                target = event.args_summary or "(unspecified)"
                if target not in install_targets:
                    install_targets.add(target)
                    add(
                        "install-extension-event", "Medium",
                        "Extension installing another extension",
                        f"The guest asked the editor to install {target}.",
                        evidence=event.args_summary or None,
                        key=target,
                    )
            if event.action == "unimplemented-api":
                unimplemented += 1
        elif event.category == "process":
            command = event.args_summary
            if command in seen_commands:
                continue
            seen_commands.add(command)
            powershell = "powershell" in command.lower()
            add(
                "process-exec",
                "High" if powershell else "Medium",
                "Attempted external process launch"
                + (" (PowerShell)" if powershell else ""),
                "The sandbox intercepted a command execution attempt; the "
                "command was recorded, not run.",
                evidence=command,
                key=str(len(seen_commands)),
            )
        elif event.category == "eval":
            eval_count += 1

    if eval_count:
        add(
            "dynamic-eval", "Medium",
            "Dynamic code evaluation at runtime",
            f"Guest code invoked eval/Function {eval_count} time(s) during "
            "execution.",
        )
    if unimplemented > config.UNIMPLEMENTED_API_STORM:
        add(
            "unimplemented-api-storm", "Info",
            "Heavy use of unemulated APIs",
            f"{unimplemented} calls hit APIs the sandbox does not emulate; "
            "coverage of this artifact is partial.",
        )
    return findings


def add_url_finding(add, url: str, rules: RuleConfig):
    try:
        domain_class = classify_url(url, rules.allowlist, rules.indicators)
    except MalformedUrl:
        return
    host = (urlsplit(url).hostname or url).lower()
    if domain_class == EXFIL_INDICATOR:
        add(
            "network-exfil", "High",
            f"Network request to exfiltration endpoint {host}",
            "The run contacted a destination matching known exfiltration "
            "indicators.",
            evidence=url,
            key=host,
        )
    elif domain_class == SUSPICIOUS_UNKNOWN:
        add(
            "network-unknown", "Medium",
            f"Network request to unrecognized domain {host}",
            "The run contacted a domain that is neither allowlisted nor a "
            "known indicator.",
            evidence=url,
            key=host,
        )


def aggregate_score(findings: list[Finding]) -> RiskVerdict:
    """Deterministic verdict: any High finding forces High; otherwise the
    weighted score decides."""
    score = sum(config.SEVERITY_WEIGHTS[f.severity] for f in findings)
    if any(f.severity == "High" for f in findings):
        level = "High"
    elif score >= config.MEDIUM_SCORE_THRESHOLD:
        level = "Medium"
    else:
        level = "Low"
    reasons = [
        f.id
        for f in sorted(findings, key=lambda f: (-SEVERITY_ORDER[f.severity], f.id))
    ]
    return RiskVerdict(level=level, score=score, reasons=reasons)


@dataclass
class PromptBudget:
    max_prompt_chars: int = config.MAX_PROMPT_CHARS
    excerpt_window_lines: int = config.EXCERPT_WINDOW_LINES


def build_llm_prompt(artifact: ExtensionArtifact, findings: list[Finding],
                     events: list[SandboxEvent], model: CodeModel | None,
                     policy_text: str | None,
                     budget: PromptBudget | None = None) -> str:
    """Assemble the model prompt in fixed section order, truncating the
    least important sections first to stay within the budget."""
    budget = budget or PromptBudget()
    manifest = artifact.manifest
    sections: list[tuple[str, str]] = []

    manifest_lines = [
        f"Name: {manifest.name} {manifest.version}".strip(),
        f"Kind: {artifact.kind}",
        f"Publisher: {manifest.publisher or '(none)'}",
        f"Description: {manifest.description or '(none)'}",
    ]
    if manifest.permissions:
        manifest_lines.append("Permissions: " + ", ".join(manifest.permissions))
    if manifest.host_patterns:
        manifest_lines.append("Host patterns: " + ", ".join(manifest.host_patterns))
    if manifest.lifecycle_scripts:
        manifest_lines.append(
            "Lifecycle scripts: "
            + "; ".join(f"{k}: {v}" for k, v in manifest.lifecycle_scripts.items())
        )
    sections.append(("MANIFEST", "\n".join(manifest_lines)))

    if findings:
        finding_lines = [
            f"- [{f.severity}] {f.title}: {f.detail}"
            + (f" (evidence: {f.evidence})" if f.evidence else "")
            for f in sorted(findings, key=lambda f: (-SEVERITY_ORDER[f.severity], f.id))
        ]
    else:
        finding_lines = ["no findings"]
    sections.append(("FINDINGS", "\n".join(finding_lines)))

    interesting = [
        e for e in events if e.action not in _LOW_VALUE_ACTIONS
    ]
    interesting.sort(key=lambda e: (-_EVENT_INTEREST.get(e.category, 0), e.seq))
    top = sorted(interesting[: config.MAX_PROMPT_EVENTS], key=lambda e: e.seq)
    if top:
        event_lines = [
            f"- t+{e.virtual_time_ms}ms {e.category}/{e.action}"
            + (" [blocked]" if e.blocked else "")
            + (f": {e.args_summary[:200]}" if e.args_summary else "")
            for e in top
        ]
    else:
        event_lines = ["no dynamic events (dynamic phase skipped or silent)"]
    sections.append(("SANDBOX EVENTS", "\n".join(event_lines)))

    excerpts = _collect_excerpts(findings, model, budget.excerpt_window_lines)
    if excerpts:
        sections.append(("CODE EXCERPTS", "\n\n".join(excerpts)))

    if policy_text:
        sections.append(("PRIVACY POLICY", policy_text))

    return _fit_to_budget(sections, budget.max_prompt_chars)


def _collect_excerpts(findings, model: CodeModel | None, window: int) -> list[str]:
    if model is None:
        return []
    out = []
    seen: set[tuple[str, int]] = set()
    for f in sorted(findings, key=lambda f: (-SEVERITY_ORDER[f.severity], f.id)):
        if f.severity not in ("High", "Medium") or not f.path or not f.span:
            continue
        unit = model.unit(f.path)
        if unit is None:
            continue
        lines = unit.text.split("\n")
        first = max(0, f.span.line - 1 - window // 2)
        last = min(len(lines), f.span.line - 1 + window // 2 + 1)
        key = (f.path, first)
        if key in seen:
            continue
        seen.add(key)
        body = "\n".join(lines[first:last])
        out.append(f"--- {f.path}:{first + 1}-{last} ({f.rule_id}) ---\n{body}")
    return out


def _fit_to_budget(sections: list[tuple[str, str]], max_chars: int) -> str:
    def render(parts):
        chunks = [PROMPT_INSTRUCTION]
        for title, body in parts:
            if body:
                chunks.append(f"## {title}\n{body}")
        return "\n\n".join(chunks) + "\n"

    parts = list(sections)
    text = render(parts)
    # Trim section bodies from the back (lowest priority) until we fit.
    while len(text) > max_chars and parts:
        title, body = parts[-1]
        overshoot = len(text) - max_chars
        if len(body) > overshoot + 16:
            parts[-1] = (title, body[: len(body) - overshoot - 16] + "\n[truncated]")
        else:
            parts.pop()
        text = render(parts)
    if len(text) > max_chars:
        text = text[: max_chars - 12] + "\n[truncated]"
    return text


def parse_model_output(text: str) -> tuple[str, str]:
    """Return (riskLevel, narrative); the last stated risk level wins."""
    matches = _RISK_RE.findall(text or "")
    level = matches[-1].capitalize() if matches else RISK_UNKNOWN
    return level, text or ""


# ---- serialization -----------------------------------------------------------

def _span_dict(span: Span) -> dict:
    return {"line": span.line, "col": span.col, "start": span.start,
            "length": span.length}


def _finding_dict(f: Finding) -> dict:
    out = {
        "id": f.id,
        "ruleId": f.rule_id,
        "severity": f.severity,
        "title": f.title,
        "detail": f.detail,
        "phase": f.phase,
    }
    if f.evidence is not None:
        out["evidence"] = f.evidence
    if f.path is not None:
        out["location"] = {"path": f.path}
        if f.span is not None:
            out["location"].update(_span_dict(f.span))
    return out


def _finding_from_dict(raw: dict) -> Finding:
    location = raw.get("location") or {}
    span = None
    if {"line", "col", "start", "length"} <= set(location):
        span = Span(location["line"], location["col"], location["start"],
                    location["length"])
    return Finding(
        id=raw["id"], rule_id=raw["ruleId"], severity=raw["severity"],
        title=raw["title"], detail=raw["detail"],
        evidence=raw.get("evidence"), path=location.get("path"),
        span=span, phase=raw.get("phase", "static"),
    )


def report_to_dict(report: RiskReport) -> dict:
    out = {
        "schema": config.REPORT_SCHEMA_VERSION,
        "toolVersion": report.tool_version,
        "artifact": {
            "digest": report.digest,
            "kind": report.kind,
            "name": report.name,
            "version": report.version,
            "publisher": report.publisher,
            "description": report.description,
            "permissions": report.permissions,
            "hostPatterns": report.host_patterns,
            "fileCount": report.file_count,
            "totalSizeBytes": report.total_size_bytes,
        },
        "scenarioHash": report.scenario_hash,
        "scenario": report.scenario,
        "verdict": {
            "level": report.verdict.level,
            "score": report.verdict.score,
            "reasons": report.verdict.reasons,
        },
        "findings": [_finding_dict(f) for f in report.findings],
        "contradictions": report.contradictions,
        "events": {"count": report.event_count, "ref": report.event_log_ref},
        "outcome": {"dynamic": report.dynamic_outcome,
                    "detail": report.dynamic_detail},
        "code": report.code_summary,
        "timings": report.timings,
    }
    if report.llm_narrative is not None:
        out["llm"] = {
            "model": report.llm_model or "",
            "riskLevel": report.llm_risk_level or RISK_UNKNOWN,
            "narrative": report.llm_narrative,
        }
    if report.approved:
        out["approved"] = True
    return out


def report_from_dict(raw: dict) -> RiskReport:
    if not isinstance(raw, dict) or "schema" not in raw:
        raise SchemaVersionMismatch("not a report document")
    if raw["schema"] > config.REPORT_SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"report schema {raw['schema']} is newer than supported "
            f"{config.REPORT_SCHEMA_VERSION}"
        )
    artifact = raw.get("artifact", {})
    verdict_raw = raw.get("verdict", {})
    llm = raw.get("llm")
    return RiskReport(
        digest=artifact.get("digest", ""),
        kind=artifact.get("kind", ""),
        name=artifact.get("name", ""),
        version=artifact.get("version", ""),
        publisher=artifact.get("publisher", ""),
        description=artifact.get("description", ""),
        permissions=list(artifact.get("permissions", [])),
        host_patterns=list(artifact.get("hostPatterns", [])),
        file_count=artifact.get("fileCount", 0),
        total_size_bytes=artifact.get("totalSizeBytes", 0),
        scenario_hash=raw.get("scenarioHash", ""),
        scenario=raw.get("scenario", {}),
        verdict=RiskVerdict(
            level=verdict_raw.get("level", "Low"),
            score=verdict_raw.get("score", 0),
            reasons=list(verdict_raw.get("reasons", [])),
        ),
        findings=[_finding_from_dict(f) for f in raw.get("findings", [])],
        contradictions=list(raw.get("contradictions", [])),
        event_count=raw.get("events", {}).get("count", 0),
        event_log_ref=raw.get("events", {}).get("ref", ""),
        dynamic_outcome=raw.get("outcome", {}).get("dynamic", "skipped"),
        dynamic_detail=raw.get("outcome", {}).get("detail", ""),
        llm_narrative=llm.get("narrative") if llm else None,
        llm_risk_level=llm.get("riskLevel") if llm else None,
        llm_model=llm.get("model") if llm else None,
        approved=bool(raw.get("approved", False)),
        timings=dict(raw.get("timings", {})),
        code_summary=list(raw.get("code", [])),
        tool_version=raw.get("toolVersion", ""),
    )


def serialize_report(report: RiskReport) -> bytes:
    """Canonical JSON bytes: sorted keys, compact separators."""
    return json.dumps(
        report_to_dict(report), sort_keys=True, separators=(",", ":"),
        ensure_ascii=False,
    ).encode("utf-8")


def deserialize_report(data: bytes) -> RiskReport:
    try:
        raw = json.loads(data.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise SchemaVersionMismatch(f"unreadable report: {exc}") from exc
    return report_from_dict(raw)


# ---- persistent store --------------------------------------------------------

class ReportStore:
    """Directory-backed cache of reports and event logs keyed by
    (artifact digest, scenario hash). Writes are atomic (tmp + rename)."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(os.path.join(root, "reports"), exist_ok=True)
        os.makedirs(os.path.join(root, "artifacts"), exist_ok=True)

    def _report_dir(self, digest: str) -> str:
        return os.path.join(self.root, "reports", digest)

    def report_path(self, digest: str, scenario_hash: str) -> str:
        return os.path.join(self._report_dir(digest),
                            f"{scenario_hash}.report.json")

    def events_path(self, digest: str, scenario_hash: str) -> str:
        return os.path.join(self._report_dir(digest), f"{scenario_hash}.events")

    def save(self, report: RiskReport, events_text: str):
        os.makedirs(self._report_dir(report.digest), exist_ok=True)
        self._atomic_write(
            self.report_path(report.digest, report.scenario_hash),
            serialize_report(report),
        )
        self._atomic_write(
            self.events_path(report.digest, report.scenario_hash),
            events_text.encode("utf-8"),
        )

    def cache_lookup(self, digest: str, scenario_hash: str):
        """Return (report, events_text) on a hit; (None, None) otherwise.
        Corrupt entries are evicted and treated as misses."""
        path = self.report_path(digest, scenario_hash)
        if not os.path.exists(path):
            return None, None
        try:
            with open(path, "rb") as fh:
                report = deserialize_report(fh.read())
            events_text = ""
            events_path = self.events_path(digest, scenario_hash)
            if os.path.exists(events_path):
                with open(events_path, encoding="utf-8") as fh:
                    events_text = fh.read()
            return report, events_text
        except (SchemaVersionMismatch, OSError):
            try:
                os.unlink(path)
            except OSError:
                pass
            return None, None

    def save_artifact(self, digest: str, data: bytes, hint_name: str = ""):
        self._atomic_write(
            os.path.join(self.root, "artifacts", f"{digest}.bin"), data
        )
        if hint_name:
            self._atomic_write(
                os.path.join(self.root, "artifacts", f"{digest}.name"),
                hint_name.encode("utf-8"),
            )

    def load_artifact(self, digest: str):
        path = os.path.join(self.root, "artifacts", f"{digest}.bin")
        if not os.path.exists(path):
            return None, ""
        with open(path, "rb") as fh:
            data = fh.read()
        name_path = os.path.join(self.root, "artifacts", f"{digest}.name")
        hint = ""
        if os.path.exists(name_path):
            with open(name_path, encoding="utf-8") as fh:
                hint = fh.read()
        return data, hint

    # -- learning-mode allowlist of analyst-approved digests ---------------

    def _approved_path(self) -> str:
        return os.path.join(self.root, "approved.txt")

    def approved_digests(self) -> set[str]:
        try:
            with open(self._approved_path(), encoding="utf-8") as fh:
                return {line.strip() for line in fh if line.strip()}
        except OSError:
            return set()

    def approve(self, digest: str):
        approved = self.approved_digests()
        approved.add(digest)
        self._atomic_write(
            self._approved_path(),
            ("\n".join(sorted(approved)) + "\n").encode("utf-8"),
        )

    @staticmethod
    def _atomic_write(path: str, data: bytes):
        directory = os.path.dirname(path)
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except OSError:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
