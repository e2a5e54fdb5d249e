"""Pluggable local-model adapters.

The narrative model is replaceable: a deterministic mock for tests, an
external process speaking one-request/one-response text over stdio, or a
local HTTP endpoint. The analysis never blocks on adapter quality; parse
failures degrade to riskLevel Unknown.
"""

from __future__ import annotations

import subprocess
import shlex


class AdapterError(Exception):
    pass


class MockAdapter:
    """Deterministic in-process adapter for tests and offline runs."""

    def __init__(self, risk_level: str = "High"):
        self.risk_level = risk_level
        self.descriptor = f"mock:{risk_level.lower()}"

    def invoke(self, prompt: str, max_output_tokens: int = 512) -> str:
        finding_lines = sum(
            1 for line in prompt.splitlines() if line.startswith("- [")
        )
        return (
            "The reviewed package exhibits the behaviors listed in the "
            f"analysis context ({finding_lines} flagged items). Based on the "
            "provided static and dynamic evidence, the activity pattern is "
            "consistent with the findings above. "
            f"Risk level: {self.risk_level}."
        )


class StdioProcessAdapter:
    """Runs a local command, writes the prompt to stdin, reads stdout."""

    def __init__(self, command: str, timeout_s: float = 120.0):
        self.command = command
        self.timeout_s = timeout_s
        self.descriptor = f"stdio:{command}"

    def invoke(self, prompt: str, max_output_tokens: int = 512) -> str:
        argv = shlex.split(self.command)
        try:
            proc = subprocess.run(
                argv, input=prompt.encode("utf-8"),
                capture_output=True, timeout=self.timeout_s,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise AdapterError(f"model process failed: {exc}") from exc
        if proc.returncode != 0:
            raise AdapterError(
                f"model process exited {proc.returncode}: "
                f"{proc.stderr.decode(errors='replace')[:200]}"
            )
        return proc.stdout.decode("utf-8", errors="replace")


class HttpAdapter:
    """POSTs the prompt to a local endpoint; expects the completion as text
    (or JSON with a 'text'/'completion'/'response' field)."""

    def __init__(self, url: str, timeout_s: float = 120.0):
        self.url = url
        self.timeout_s = timeout_s
        self.descriptor = f"http:{url}"

    def invoke(self, prompt: str, max_output_tokens: int = 512) -> str:
        import json
        import urllib.request

        body = json.dumps(
            {"prompt": prompt, "maxOutputTokens": max_output_tokens}
        ).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                raw = resp.read().decode("utf-8", errors="replace")
        except OSError as exc:
            raise AdapterError(f"model endpoint failed: {exc}") from exc
        try:
            parsed = json.loads(raw)
            for key in ("text", "completion", "response"):
                if isinstance(parsed, dict) and isinstance(parsed.get(key), str):
                    return parsed[key]
        except ValueError:
            pass
        return raw


def adapter_from_spec(spec: str):
    """CLI/service adapter factory: 'mock[:level]', 'stdio:CMD', 'http:URL'."""
    if spec.startswith("mock"):
        _, _, level = spec.partition(":")
        return MockAdapter(risk_level=(level or "High").capitalize())
    if spec.startswith("stdio:"):
        return StdioProcessAdapter(spec[len("stdio:"):])
    if spec.startswith(("http://", "https://")):
        return HttpAdapter(spec)
    if spec.startswith("http:"):
        return HttpAdapter(spec[len("http:"):])
    raise AdapterError(f"unrecognized adapter spec {spec!r}")
