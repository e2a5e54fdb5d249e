import json

import pytest
from hypothesis import given, settings, strategies as st

from extsleuth import staticrules
from extsleuth.codemodel import build_code_model
from extsleuth.ingest import ExtensionArtifact, FileEntry, ManifestInfo, ingest
from extsleuth.sandbox.events import SandboxEvent
from extsleuth.staticrules import (
    EXFIL_INDICATOR,
    KNOWN_BENIGN,
    SUSPICIOUS_UNKNOWN,
    MalformedSignatureDb,
    MalformedUrl,
    RuleConfig,
    check_policy_consistency,
    classify_url,
    extract_negative_claims,
    load_signature_db,
    run_pattern_rules,
    scan_vulnerable_libraries,
    version_less_than,
)
from corpus import make_zip


RULES = RuleConfig.load_defaults()


def artifact_of(files: dict, kind="npm-package") -> ExtensionArtifact:
    return ExtensionArtifact(
        kind=kind,
        files=[FileEntry(p, c.encode() if isinstance(c, str) else c)
               for p, c in files.items()],
        manifest=ManifestInfo(),
    )


def findings_for(files: dict):
    artifact = artifact_of(files)
    model = build_code_model(artifact)
    return run_pattern_rules(artifact, model, RULES)


def rule_ids(findings):
    return {f.rule_id for f in findings}


class TestSignatureDb:
    def test_default_db_loads(self):
        assert len(RULES.signature_db.entries) >= 1

    def test_single_entry(self, tmp_path):
        path = tmp_path / "db.json"
        path.write_text(json.dumps({"entries": [
            {"library": "jQuery", "versionRegex": r"jQuery v(\d+\.\d+\.\d+)",
             "vulnerableBelow": "3.0.0", "advisories": ["CVE-X"], "hashes": []}
        ]}))
        db = load_signature_db(str(path))
        assert len(db.entries) == 1

    def test_bad_regex_rejected(self, tmp_path):
        path = tmp_path / "db.json"
        path.write_text(json.dumps({"entries": [
            {"library": "x", "versionRegex": "([", "vulnerableBelow": "1"}
        ]}))
        with pytest.raises(MalformedSignatureDb):
            load_signature_db(str(path))

    def test_regex_without_group_rejected(self, tmp_path):
        path = tmp_path / "db.json"
        path.write_text(json.dumps({"entries": [
            {"library": "x", "versionRegex": "jquery", "vulnerableBelow": "1"}
        ]}))
        with pytest.raises(MalformedSignatureDb):
            load_signature_db(str(path))

    def test_empty_entries_valid_and_silent(self, tmp_path):
        path = tmp_path / "db.json"
        path.write_text(json.dumps({"entries": []}))
        db = load_signature_db(str(path))
        artifact = artifact_of({"a.js": "jQuery v1.12.0"})
        assert scan_vulnerable_libraries(artifact, db) == []

    def test_version_compare(self):
        assert version_less_than("1.12.0", "3.0.0")
        assert not version_less_than("3.0.0", "3.0.0")
        assert not version_less_than("10.0.0", "9.9.9")

    def test_jquery_banner_flagged(self):
        artifact = artifact_of({"vendor.js": "/*! jQuery v1.12.0 */"})
        found = scan_vulnerable_libraries(artifact, RULES.signature_db)
        assert any(
            f.rule_id == "vulnerable-library" and f.severity == "Medium"
            and "1.12.0" in f.title
            for f in found
        )

    def test_version_at_or_above_threshold_silent(self, tmp_path):
        path = tmp_path / "db.json"
        path.write_text(json.dumps({"entries": [
            {"library": "jQuery", "versionRegex": r"jQuery v(\d+\.\d+\.\d+)",
             "vulnerableBelow": "1.0.0", "advisories": ["CVE-X"]}
        ]}))
        db = load_signature_db(str(path))
        artifact = artifact_of({"vendor.js": "/*! jQuery v1.12.0 */"})
        assert scan_vulnerable_libraries(artifact, db) == []

    def test_content_hash_match(self, tmp_path):
        import hashlib

        content = b"totally-custom-miner-build"
        path = tmp_path / "db.json"
        path.write_text(json.dumps({"entries": [
            {"library": "miner", "versionRegex": "(x)^", "vulnerableBelow": "0",
             "advisories": ["ADV-1"],
             "hashes": [hashlib.sha256(content).hexdigest()]}
        ]}))
        db = load_signature_db(str(path))
        artifact = artifact_of({"m.js": content})
        found = scan_vulnerable_libraries(artifact, db)
        assert len(found) == 1 and found[0].severity == "Medium"

    def test_no_code_files(self):
        artifact = artifact_of({"readme.txt": "hi"})
        assert scan_vulnerable_libraries(artifact, RULES.signature_db) == []


class TestClassifyUrl:
    def test_discord_webhook_is_exfil(self):
        assert classify_url("https://discord.com/api/webhooks/9/z",
                            RULES.allowlist, RULES.indicators) == EXFIL_INDICATOR

    def test_analytics_benign(self):
        assert classify_url("https://www.google-analytics.com/collect",
                            RULES.allowlist, RULES.indicators) == KNOWN_BENIGN

    def test_unknown_host(self):
        assert classify_url("https://asdf11.xyz/a.ps1",
                            RULES.allowlist, RULES.indicators) == SUSPICIOUS_UNKNOWN

    def test_indicator_list_hit(self):
        assert classify_url("https://api.cyberhavenext.pro/x",
                            RULES.allowlist, RULES.indicators) == EXFIL_INDICATOR

    def test_raw_ip_is_exfil(self):
        assert classify_url("http://203.0.113.7/drop",
                            RULES.allowlist, RULES.indicators) == EXFIL_INDICATOR

    def test_malformed(self):
        with pytest.raises(MalformedUrl):
            classify_url("notaurl", RULES.allowlist, RULES.indicators)

    @given(st.sampled_from([
        "https://discord.com/api/webhooks/1/t",
        "https://www.google-analytics.com/collect",
        "https://sub.asdf11.xyz/x",
        "http://10.0.0.1/",
        "https://github.com/user/repo",
    ]))
    def test_totality(self, url):
        assert classify_url(url, RULES.allowlist, RULES.indicators) in (
            KNOWN_BENIGN, EXFIL_INDICATOR, SUSPICIOUS_UNKNOWN
        )


class TestPatternRules:
    def test_powershell_exec_high(self):
        found = findings_for({
            "a.js": "const cp = require('child_process');"
                    "cp.exec('powershell -enc SQBFAFgA');"
        })
        hit = next(f for f in found if f.rule_id == "child-process-exec")
        assert hit.severity == "High"

    def test_plain_exec_medium(self):
        found = findings_for({
            "a.js": "require('child_process').exec('ls -la');"
        })
        hit = next(f for f in found if f.rule_id == "child-process-exec")
        assert hit.severity == "Medium"

    def test_install_extension_command(self):
        found = findings_for({
            "a.js": "vscode.commands.executeCommand("
                    "'workbench.extensions.installExtension', 'ms-vscode.prettier');"
        })
        hit = next(f for f in found if f.rule_id == "vscode-install-extension")
        assert hit.severity == "Medium"
        assert "installing another extension" in hit.title.lower()

    def test_csp_strip(self):
        found = findings_for({
            "a.js": "chrome.declarativeNetRequest.updateDynamicRules({addRules:"
                    "[{action:{responseHeaders:[{header:'Content-Security-Policy',"
                    "operation:'remove'}]}}]});"
        })
        assert "csp-strip" in rule_ids(found)

    def test_cookies_plus_network(self):
        found = findings_for({
            "a.js": "chrome.cookies.getAll({}, c => {});"
                    "const u = 'https://asdf11.xyz/up';"
        })
        assert "cookies-api-plus-network" in rule_ids(found)

    def test_cookies_without_urls_silent(self):
        found = findings_for({"a.js": "chrome.cookies.getAll({}, c => {});"})
        assert "cookies-api-plus-network" not in rule_ids(found)

    def test_eval_rule(self):
        found = findings_for({"a.js": "eval(atob('YWxlcnQoMSk='));"})
        assert "eval-or-function-constructor" in rule_ids(found)

    def test_date_threshold_future(self):
        found = findings_for({
            "a.js": "if (Date.now() > 1748736000000) { run(); }"
        })
        hit = next(f for f in found if f.rule_id == "date-threshold-compare")
        assert "logic bomb" in hit.title.lower()

    def test_date_threshold_past_silent(self):
        found = findings_for({
            "a.js": "if (Date.now() > 1500000000000) { run(); }"  # 2017
        })
        assert "date-threshold-compare" not in rule_ids(found)

    def test_empty_artifact(self):
        assert findings_for({}) == []

    def test_idempotent(self):
        files = {"a.js": "eval(x); fetch('https://asdf11.xyz/');"}
        artifact = artifact_of(files)
        model = build_code_model(artifact)
        first = run_pattern_rules(artifact, model, RULES)
        second = run_pattern_rules(artifact, model, RULES)
        assert [(f.id, f.severity) for f in first] == [
            (f.id, f.severity) for f in second
        ]

    def test_rule_coexistence(self):
        # adding more triggers never removes other rules' findings
        base = findings_for({"a.js": "eval(x);"})
        combined = findings_for({
            "a.js": "eval(x);",
            "b.js": "require('child_process').exec('powershell -e x');",
        })
        assert rule_ids(base) <= rule_ids(combined)

    def test_evidence_is_exact_substring(self):
        files = {
            "a.js": "const hook = 'https://discord.com/api/webhooks/5/tok';\n"
                    "eval(code);\n",
        }
        artifact = artifact_of(files)
        model = build_code_model(artifact)
        for finding in run_pattern_rules(artifact, model, RULES):
            if finding.evidence and finding.path and finding.span:
                unit = model.unit(finding.path)
                assert finding.span.slice(unit.text).startswith(finding.evidence) or \
                    finding.span.slice(unit.text)[:256] == finding.evidence
                assert finding.evidence in unit.text


class TestPolicyClaims:
    def test_negative_claim_extracted(self):
        claims = extract_negative_claims(
            "Welcome. We never collect personal data. Enjoy!"
        )
        assert claims == ["We never collect personal data."]

    def test_analytics_sentence_not_a_claim(self):
        # documented keyword matcher applied by hand: no negation near a verb
        assert extract_negative_claims("We use analytics.") == []

    def test_does_not_transmit_variant(self):
        claims = extract_negative_claims(
            "This tool does not transmit your information to anyone."
        )
        assert len(claims) == 1

    def test_contradiction_with_exfil_event(self):
        events = [SandboxEvent(
            seq=0, virtual_time_ms=0, category="network", action="POST",
            args_summary="https://cyberhavenext.pro/x payload=100B c_user=1",
        )]
        found = check_policy_consistency(
            "We never collect personal data.", [], events, RULES
        )
        assert len(found) == 1
        assert found[0].severity == "High"
        assert found[0].evidence == "We never collect personal data."

    def test_no_policy_no_findings(self):
        assert check_policy_consistency(None, [], [], RULES) == []

    def test_benign_traffic_no_contradiction(self):
        events = [SandboxEvent(
            seq=0, virtual_time_ms=0, category="network", action="GET",
            args_summary="https://www.google-analytics.com/collect payload=0B",
        )]
        found = check_policy_consistency("We use analytics.", [], events, RULES)
        assert found == []


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="abn .", max_size=80))
def test_claim_extraction_never_crashes(text):
    extract_negative_claims(text)
