"""Scenario configuration: the analyst-controlled simulation parameters.

A scenario fully determines a sandbox run for a given artifact; its
canonical JSON hash is the cache key alongside the artifact digest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .. import config

POLICY_BLOCK = "block"
POLICY_STUB = "stub"
POLICY_RECORD = "record"
NETWORK_POLICIES = (POLICY_BLOCK, POLICY_STUB, POLICY_RECORD)

# Sensitive destinations worth simulating by default for browser extensions.
DEFAULT_NAVIGATIONS = (
    ("https://facebook.com/", 1000),
    ("https://login.microsoftonline.com/", 2000),
)

DEFAULT_COOKIE_JAR = {
    "facebook.com": [
        {"name": "c_user", "value": "100004217431"},
        {"name": "xs", "value": "46%3AbG9va3NsaWtlYXJlYWx0b2tlbg"},
    ],
    "login.microsoftonline.com": [
        {"name": "ESTSAUTH", "value": "AQABAAQardeWFkZUlPQVRva2Vu"},
    ],
    "example.com": [{"name": "session", "value": "s3ss10n-c00k13"}],
}

DEFAULT_CLIPBOARD = "sk-live-4eC39HqLyjWDarjtT1zdp7dc hunter2"


class ScenarioError(ValueError):
    """Invalid scenario request; message lists every violation."""


@dataclass(frozen=True)
class Navigation:
    url: str
    at_virtual_time_ms: int


@dataclass
class ScenarioConfig:
    virtual_start_ms: int = config.DEFAULT_VIRTUAL_START_MS
    fast_forward_threshold_ms: int = config.FAST_FORWARD_THRESHOLD_MS
    max_virtual_horizon_ms: int = config.MAX_VIRTUAL_HORIZON_MS
    max_tasks: int = config.MAX_TASKS
    navigations: list[Navigation] = field(default_factory=list)
    cookie_jar: dict[str, list[dict]] = field(default_factory=dict)
    clipboard_text: str = DEFAULT_CLIPBOARD
    network_policy: str = POLICY_STUB
    stub_responses: dict[str, dict] = field(default_factory=dict)
    dummy_storage: dict[str, object] = field(default_factory=dict)
    pseudo_real_time: bool = False

    def __post_init__(self):
        problems = []
        if self.fast_forward_threshold_ms <= 0:
            problems.append("fastForwardThresholdMs must be > 0")
        if self.max_virtual_horizon_ms <= 0:
            problems.append("maxVirtualHorizonMs must be > 0")
        if self.max_tasks <= 0:
            problems.append("maxTasks must be > 0")
        if self.network_policy not in NETWORK_POLICIES:
            problems.append(f"networkPolicy must be one of {NETWORK_POLICIES}")
        for nav in self.navigations:
            if not nav.url.startswith(("http://", "https://")):
                problems.append(f"navigation url must be http(s): {nav.url!r}")
            if nav.at_virtual_time_ms < 0:
                problems.append("navigation atVirtualTimeMs must be >= 0")
        if problems:
            raise ScenarioError("; ".join(problems))
        self.navigations = sorted(
            self.navigations, key=lambda n: (n.at_virtual_time_ms, n.url)
        )

    @classmethod
    def default_for_kind(cls, kind: str) -> "ScenarioConfig":
        scenario = cls()
        if kind == "chrome-extension":
            scenario.navigations = [
                Navigation(url, at) for url, at in DEFAULT_NAVIGATIONS
            ]
            scenario.cookie_jar = {
                host: [dict(c) for c in cookies]
                for host, cookies in DEFAULT_COOKIE_JAR.items()
            }
        return scenario

    def canonical_dict(self) -> dict:
        return {
            "virtualStartDate": self.virtual_start_ms,
            "fastForwardThresholdMs": self.fast_forward_threshold_ms,
            "maxVirtualHorizonMs": self.max_virtual_horizon_ms,
            "maxTasks": self.max_tasks,
            "navigations": [
                {"url": n.url, "atVirtualTimeMs": n.at_virtual_time_ms}
                for n in self.navigations
            ],
            "cookieJar": self.cookie_jar,
            "clipboardText": self.clipboard_text,
            "networkPolicy": self.network_policy,
            "stubResponses": self.stub_responses,
            "dummyStorage": self.dummy_storage,
            "pseudoRealTime": self.pseudo_real_time,
        }

    def scenario_hash(self) -> str:
        canonical = json.dumps(
            self.canonical_dict(), sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_scenario(raw: dict, kind: str) -> ScenarioConfig:
    """Build a ScenarioConfig from wire-shape JSON, filling kind defaults
    for fields the request omits."""
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    base = ScenarioConfig.default_for_kind(kind)
    known = {
        "virtualStartDate", "fastForwardThresholdMs", "maxVirtualHorizonMs",
        "maxTasks", "navigations", "cookieJar", "clipboardText",
        "networkPolicy", "stubResponses", "dummyStorage", "pseudoRealTime",
        "skipLlm",
    }
    unknown = set(raw) - known
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")

    def _int(name, default):
        value = raw.get(name, default)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ScenarioError(f"{name} must be a number")
        return int(value)

    navigations = base.navigations
    if "navigations" in raw:
        if not isinstance(raw["navigations"], list):
            raise ScenarioError("navigations must be an array")
        navigations = []
        for item in raw["navigations"]:
            if not isinstance(item, dict) or "url" not in item:
                raise ScenarioError("each navigation needs {url, atVirtualTimeMs}")
            navigations.append(
                Navigation(str(item["url"]), int(item.get("atVirtualTimeMs", 0)))
            )
    cookie_jar = raw.get("cookieJar", base.cookie_jar)
    if not isinstance(cookie_jar, dict):
        raise ScenarioError("cookieJar must be an object")
    stub_responses = raw.get("stubResponses", base.stub_responses)
    if not isinstance(stub_responses, dict):
        raise ScenarioError("stubResponses must be an object")
    dummy_storage = raw.get("dummyStorage", base.dummy_storage)
    if not isinstance(dummy_storage, dict):
        raise ScenarioError("dummyStorage must be an object")
    clipboard = raw.get("clipboardText", base.clipboard_text)
    if clipboard is not None and not isinstance(clipboard, str):
        raise ScenarioError("clipboardText must be a string")
    policy = raw.get("networkPolicy", base.network_policy)
    return ScenarioConfig(
        virtual_start_ms=_int("virtualStartDate", base.virtual_start_ms),
        fast_forward_threshold_ms=_int(
            "fastForwardThresholdMs", base.fast_forward_threshold_ms
        ),
        max_virtual_horizon_ms=_int("maxVirtualHorizonMs", base.max_virtual_horizon_ms),
        max_tasks=_int("maxTasks", base.max_tasks),
        navigations=navigations,
        cookie_jar=cookie_jar,
        clipboard_text=clipboard if clipboard is not None else "",
        network_policy=str(policy),
        stub_responses=stub_responses,
        dummy_storage=dummy_storage,
        pseudo_real_time=bool(raw.get("pseudoRealTime", False)),
    )
