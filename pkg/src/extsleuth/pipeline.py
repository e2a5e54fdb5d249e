"""End-to-end analysis pipeline: ingest -> code model -> static rules ->
sandbox -> dynamic findings -> policy check -> verdict -> optional model
narrative -> serialized report.

Used by both the CLI and the HTTP service; one call analyzes one artifact
under one scenario.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from . import config
from .codemodel import CodeModel, build_code_model
from .ingest import ExtensionArtifact, ingest
from .report import (
    PromptBudget,
    ReportStore,
    RiskReport,
    aggregate_score,
    build_llm_prompt,
    derive_dynamic_findings,
    parse_model_output,
    summarize_code_model,
)
from .sandbox.events import parse_event_log
from .sandbox.runner import run_dynamic_analysis
from .sandbox.scenario import ScenarioConfig
from .staticrules import (
    Finding,
    RuleConfig,
    check_policy_consistency,
    merge_findings,
    run_pattern_rules,
    scan_vulnerable_libraries,
)

log = logging.getLogger(__name__)

OUTCOME_SKIPPED = "skipped"


@dataclass
class AnalysisOptions:
    kind: str | None = None
    scenario: ScenarioConfig | None = None
    rules: RuleConfig | None = None
    run_dynamic: bool = True
    llm_adapter: object | None = None
    skip_llm: bool = False
    network_policy: str | None = None
    allow_real_network: bool = False
    store: ReportStore | None = None
    use_cache: bool = True
    deterministic_timings: bool = False
    call_timeout_s: float = config.GUEST_CALL_TIMEOUT_S
    prompt_budget: PromptBudget = field(default_factory=PromptBudget)
    on_event_log: object | None = None


@dataclass
class AnalysisResult:
    report: RiskReport
    events_text: str
    cached: bool = False


def scenario_identity(scenario: ScenarioConfig, options: AnalysisOptions) -> str:
    """Cache key half: the scenario hash, salted with the knobs that change
    report content (model identity, phases skipped)."""
    import hashlib

    base = scenario.scenario_hash()
    extra = "|".join(
        (
            "dyn" if options.run_dynamic else "nodyn",
            getattr(options.llm_adapter, "descriptor", "none")
            if not options.skip_llm and options.llm_adapter is not None
            else "no-llm",
        )
    )
    return hashlib.sha256(f"{base}|{extra}".encode()).hexdigest()


def analyze_bytes(data: bytes, hint_name: str = "",
                  options: AnalysisOptions | None = None) -> AnalysisResult:
    options = options or AnalysisOptions()
    timings: dict[str, int] = {}
    total_start = time.monotonic()

    def mark(key: str, start: float):
        timings[key] = 0 if options.deterministic_timings else int(
            (time.monotonic() - start) * 1000
        )

    step = time.monotonic()
    artifact = ingest(data, hint_name, kind=options.kind)
    mark("ingestMs", step)

    scenario = options.scenario or ScenarioConfig.default_for_kind(artifact.kind)
    if options.network_policy:
        scenario.network_policy = options.network_policy
    scenario_hash = scenario_identity(scenario, options)

    if options.store is not None and options.use_cache:
        cached_report, cached_events = options.store.cache_lookup(
            artifact.digest, scenario_hash
        )
        if cached_report is not None:
            return AnalysisResult(cached_report, cached_events or "", cached=True)

    rules = options.rules or RuleConfig.load_defaults(
        reference_date_ms=scenario.virtual_start_ms
    )

    step = time.monotonic()
    model = build_code_model(artifact)
    library_findings = scan_vulnerable_libraries(artifact, rules.signature_db)
    pattern_findings = run_pattern_rules(artifact, model, rules)
    mark("staticMs", step)

    step = time.monotonic()
    events_text = ""
    events = []
    dynamic_findings: list[Finding] = []
    outcome, detail = OUTCOME_SKIPPED, ""
    if options.run_dynamic:
        event_log, outcome, detail, pattern_errors = run_dynamic_analysis(
            artifact, scenario,
            allow_real_network=options.allow_real_network,
            call_timeout_s=options.call_timeout_s,
            on_event_log=options.on_event_log,
        )
        events_text = event_log.serialize()
        events = event_log.snapshot()
        dynamic_findings = derive_dynamic_findings(events, rules)
        for note in pattern_errors:
            dynamic_findings.append(
                Finding(
                    id=f"malformed-match-pattern@dyn:{len(dynamic_findings)}",
                    rule_id="malformed-match-pattern", severity="Low",
                    title="Malformed content-script match pattern",
                    detail=note, phase="dynamic",
                )
            )
    mark("dynamicMs", step)

    findings = merge_findings(library_findings, pattern_findings, dynamic_findings)
    contradiction_findings = check_policy_consistency(
        artifact.privacy_policy_text, findings, events, rules
    )
    findings = merge_findings(findings, contradiction_findings)
    verdict = aggregate_score(findings)

    report = RiskReport(
        digest=artifact.digest,
        kind=artifact.kind,
        name=artifact.manifest.name,
        version=artifact.manifest.version,
        publisher=artifact.manifest.publisher,
        description=artifact.manifest.description,
        permissions=list(artifact.manifest.permissions),
        host_patterns=list(artifact.manifest.host_patterns),
        file_count=len(artifact.files),
        total_size_bytes=sum(f.size_bytes for f in artifact.files),
        scenario_hash=scenario_hash,
        scenario=scenario.canonical_dict(),
        verdict=verdict,
        findings=findings,
        contradictions=[f.id for f in contradiction_findings],
        event_count=len(events),
        event_log_ref=f"{scenario_hash}.events",
        dynamic_outcome=outcome,
        dynamic_detail=detail,
        code_summary=summarize_code_model(model),
    )

    step = time.monotonic()
    if options.llm_adapter is not None and not options.skip_llm:
        _attach_narrative(report, artifact, findings, events, model, options)
    mark("llmMs", step)

    if options.store is not None:
        report.approved = artifact.digest in options.store.approved_digests()

    timings["totalMs"] = 0 if options.deterministic_timings else int(
        (time.monotonic() - total_start) * 1000
    )
    report.timings = timings

    if options.store is not None:
        options.store.save(report, events_text)
        options.store.save_artifact(artifact.digest, data, hint_name)

    return AnalysisResult(report, events_text, cached=False)


def _attach_narrative(report: RiskReport, artifact: ExtensionArtifact,
                      findings: list[Finding], events, model: CodeModel,
                      options: AnalysisOptions):
    adapter = options.llm_adapter
    prompt = build_llm_prompt(
        artifact, findings, events, model, artifact.privacy_policy_text,
        options.prompt_budget,
    )
    try:
        output = adapter.invoke(prompt)
    except Exception as exc:
        log.warning("model adapter failed: %s", exc)
        return
    level, narrative = parse_model_output(output)
    report.llm_risk_level = level
    report.llm_narrative = narrative
    report.llm_model = getattr(adapter, "descriptor", "unknown")


def load_events(events_text: str):
    return parse_event_log(events_text)
