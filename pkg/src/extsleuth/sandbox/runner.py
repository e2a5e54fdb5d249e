"""Dynamic analysis runner: builds instrumented environments, replays the
scenario, and owns every host-side hook the guest realms call back into.

All state for one run (clock, event log, virtual fs, storage overlay) is
confined to one SandboxEnv; the Node harness process holds only interpreter
realms and callback registries.
"""

from __future__ import annotations

import fnmatch
import json
import logging
import posixpath
import re

from .. import config
from ..chrono import FastForwardPolicy, TimeMachine, DRAINED
from ..ingest import ExtensionArtifact
from .engine import GuestError, HarnessLost, HarnessProcess
from .events import EventLog
from .match_patterns import MalformedMatchPattern, MatchPattern
from .scenario import POLICY_BLOCK, POLICY_RECORD, ScenarioConfig
from .vfs import VirtualFs

log = logging.getLogger(__name__)

OUTCOME_COMPLETED = "completed"
OUTCOME_BUDGET = "budget-exhausted"
OUTCOME_RUNTIME_ERROR = "runtime-error"

_NODE_SCRIPT_RE = re.compile(r"^node\s+(\S+)\s*$")
_PROCESS_EXIT_OK = "ProcessExit:0"


class SandboxEnv:
    """One isolated dynamic-analysis run."""

    def __init__(self, artifact: ExtensionArtifact, scenario: ScenarioConfig,
                 allow_real_network: bool = False,
                 call_timeout_s: float = config.GUEST_CALL_TIMEOUT_S):
        self.artifact = artifact
        self.scenario = scenario
        self.allow_real_network = allow_real_network
        self.log = EventLog()
        self.vfs = VirtualFs(artifact.files)
        self.clock = TimeMachine(
            start_ms=scenario.virtual_start_ms,
            policy=FastForwardPolicy(
                threshold_ms=scenario.fast_forward_threshold_ms,
                max_virtual_horizon_ms=scenario.max_virtual_horizon_ms,
                max_tasks=scenario.max_tasks,
                pseudo_real_time=scenario.pseudo_real_time,
            ),
            on_event=self._on_clock_event,
        )
        self._storage: dict[str, dict] = {}
        self._realm_order: list[str] = []
        self._realm_origin: dict[str, str] = {}
        self._background_realms: list[str] = []
        self.pattern_errors: list[str] = []
        self.top_level_errors: list[str] = []
        self.harness_lost: str | None = None
        self.extension_id = "".join(
            chr(ord("a") + int(c, 16)) for c in artifact.digest[:32]
        )
        self._harness = HarnessProcess(self._host_op, call_timeout_s=call_timeout_s)
        self._command(
            {
                "cmd": "init",
                "kind": artifact.kind,
                "manifest": json.dumps(self._manifest_view()),
                "seed": 0x5EED1234,
                "nowMs": self.clock.now(),
            }
        )

    # -- plumbing ---------------------------------------------------------

    def _manifest_view(self) -> dict:
        m = self.artifact.manifest
        return {
            "name": m.name,
            "version": m.version,
            "description": m.description,
            "permissions": m.permissions,
            "host_permissions": m.host_patterns,
        }

    def _command(self, cmd: dict) -> dict:
        cmd.setdefault("nowMs", self.clock.now())
        return self._harness.send_command(cmd)

    def _on_clock_event(self, category: str, action: str, args: str):
        self.log.append(self.clock.now(), category, action, args)

    def record_host_event(self, category: str, action: str, args_summary: str = "",
                          blocked: bool = False, origin: str = "") -> int:
        return self.log.append(
            self.clock.now(), category, action, args_summary,
            blocked=blocked, origin=origin,
        )

    def _origin(self, realm: str) -> str:
        return self._realm_origin.get(realm, "")

    def _make_realm(self, realm_id: str, profile: str, origin: str,
                    extras: dict | None = None):
        payload = {"cmd": "realm", "id": realm_id, "profile": profile,
                   "extras": dict(extras or {})}
        payload["extras"].setdefault("startMs", self.scenario.virtual_start_ms)
        payload["extras"].setdefault("extensionId", self.extension_id)
        self._command(payload)
        self._realm_order.append(realm_id)
        self._realm_origin[realm_id] = origin

    def _fire_callback(self, realm: str, cb: int, once: bool):
        response = self._command(
            {"cmd": "fire", "realm": realm, "cb": cb, "once": once}
        )
        if response.get("error"):
            raise GuestError(response["error"])

    def _make_js_callback(self, realm: str, cb: int, once: bool):
        def invoke():
            self._fire_callback(realm, cb, once)

        return invoke

    def _dispatch(self, realm: str, event: str, args: list) -> int:
        response = self._command(
            {
                "cmd": "dispatch",
                "realm": realm,
                "event": event,
                "argsJson": json.dumps(args),
            }
        )
        return int(response.get("listeners", 0))

    # -- host operation dispatch ------------------------------------------

    def _host_op(self, payload: dict) -> dict:
        op = payload.get("op", "")
        handler = getattr(self, f"_op_{op.replace('-', '_')}", None)
        if handler is None:
            log.warning("unknown host op %r", op)
            return {"error": f"unknown op {op}"}
        return handler(payload)

    def _op_event(self, p: dict) -> dict:
        seq = self.record_host_event(
            p.get("category", "extension-api"),
            p.get("action", ""),
            p.get("args", ""),
            blocked=bool(p.get("blocked")),
            origin=p.get("origin") or self._origin(p.get("realm", "")),
        )
        return {"seq": seq}

    def _op_now(self, p: dict) -> dict:
        return {"nowMs": self.clock.now()}

    def _op_schedule(self, p: dict) -> dict:
        realm = p.get("realm", "")
        interval = p.get("intervalMs")
        once = interval is None
        callback = self._make_js_callback(realm, int(p.get("cb", 0)), once)
        task_id = self.clock.schedule_timer(
            p.get("delayMs", 0), callback,
            interval_ms=interval,
            origin="setInterval" if interval is not None else "setTimeout",
        )
        return {"taskId": task_id}

    def _op_cancel(self, p: dict) -> dict:
        return {"cancelled": self.clock.cancel_timer(int(p.get("taskId", 0)))}

    def _op_alarm(self, p: dict) -> dict:
        realm = p.get("realm", "")
        name = p.get("name", "")
        if p.get("action") == "clear":
            return {"cleared": self.clock.clear_alarm(name)}
        self.record_host_event(
            "extension-api", "chrome.alarms.create",
            f"{name} delayMs={p.get('delayMs')} periodMs={p.get('periodMs')}",
            origin=self._origin(realm),
        )

        def on_alarm():
            self._dispatch(realm, "alarms.onAlarm", [{"name": name}])

        self.clock.register_alarm(
            name, on_alarm,
            delay_ms=p.get("delayMs"), period_ms=p.get("periodMs"),
        )
        return {}

    def _op_network(self, p: dict) -> dict:
        return self.handle_network(
            p.get("method", "GET"), p.get("url", ""),
            p.get("bodyPreview", ""), int(p.get("bodySize", 0)),
            realm=p.get("realm", ""),
        )

    def _op_fs(self, p: dict) -> dict:
        import base64 as b64

        action = p.get("action", "")
        path = p.get("path", "")
        origin = self._origin(p.get("realm", ""))
        if action == "read":
            data = self.vfs.read(path)
            self.record_host_event("filesystem", "read", path, origin=origin)
            if data is None:
                return {"error": "ENOENT: no such file or directory"}
            return {"dataB64": b64.b64encode(data).decode("ascii")}
        if action == "write":
            data = b64.b64decode(p.get("dataB64", ""))
            self.vfs.write(path, data)
            self.record_host_event(
                "filesystem", "write", f"{path} bytes={len(data)}", origin=origin
            )
            return {}
        if action == "exists":
            return {"exists": self.vfs.exists(path)}
        if action == "mkdir":
            self.vfs.mkdir(path)
            self.record_host_event("filesystem", "mkdir", path, origin=origin)
            return {}
        if action == "readdir":
            names = self.vfs.readdir(path)
            if names is None:
                return {"error": "ENOENT: not a directory"}
            return {"namesJson": json.dumps(names)}
        if action == "unlink":
            removed = self.vfs.unlink(path)
            self.record_host_event("filesystem", "unlink", path, origin=origin)
            return {"removed": removed}
        if action == "stat":
            if not self.vfs.exists(path):
                return {"error": "ENOENT: no such file or directory"}
            is_dir = self.vfs.is_dir(path)
            return {
                "isFile": not is_dir,
                "isDir": is_dir,
                "size": 0 if is_dir else (self.vfs.size(path) or 0),
            }
        return {"error": f"unknown fs action {action}"}

    def _op_cookies(self, p: dict) -> dict:
        origin = self._origin(p.get("realm", ""))
        action = p.get("action", "getAll")
        if action == "document":
            host = p.get("host", "")
            cookies = self._cookies_for_host(host)
            self.record_host_event(
                "dom", "document.cookie",
                f"host={host} -> {len(cookies)} cookies", origin=origin,
            )
            return {
                "cookieString": "; ".join(f"{c['name']}={c['value']}" for c in cookies)
            }
        details = json.loads(p.get("detailsJson", "{}")) or {}
        wanted_host = None
        if isinstance(details.get("domain"), str):
            wanted_host = details["domain"].lstrip(".")
        elif isinstance(details.get("url"), str):
            m = re.match(r"^[a-zA-Z][a-zA-Z0-9+.-]*://([^/:]+)", details["url"])
            wanted_host = m.group(1) if m else None
        cookies = []
        for host, jar in sorted(self.scenario.cookie_jar.items()):
            if wanted_host is not None:
                if wanted_host != host and not wanted_host.endswith("." + host) \
                        and not host.endswith("." + wanted_host):
                    continue
            for c in jar:
                if details.get("name") and c.get("name") != details["name"]:
                    continue
                cookies.append(self._cookie_record(host, c))
        self.record_host_event(
            "extension-api", f"chrome.cookies.{action}",
            f"{json.dumps(details, sort_keys=True)} -> {len(cookies)} cookies",
            origin=origin,
        )
        return {"cookiesJson": json.dumps(cookies)}

    def _cookies_for_host(self, host: str) -> list[dict]:
        host = (host or "").lower()
        out = []
        for jar_host, jar in sorted(self.scenario.cookie_jar.items()):
            base = jar_host.lstrip(".").lower()
            if host == base or host.endswith("." + base):
                out.extend(jar)
        return out

    @staticmethod
    def _cookie_record(host: str, c: dict) -> dict:
        return {
            "name": c.get("name", ""),
            "value": c.get("value", ""),
            "domain": host,
            "path": "/",
            "secure": False,
            "httpOnly": False,
            "session": True,
            "storeId": "0",
        }

    def _area(self, area: str) -> dict:
        if area not in self._storage:
            self._storage[area] = dict(self.scenario.dummy_storage)
        return self._storage[area]

    @staticmethod
    def _storage_action(area: str, action: str) -> str:
        if area in ("local", "sync", "session"):
            return f"chrome.storage.{area}.{action}"
        return f"vscode.storage.{area}.{action}"

    def _op_storageGet(self, p: dict) -> dict:
        area = p.get("area", "local")
        store = self._area(area)
        keys = json.loads(p.get("keysJson", "null"))
        if keys is None:
            values = dict(store)
        elif isinstance(keys, str):
            values = {keys: store[keys]} if keys in store else {}
        elif isinstance(keys, list):
            values = {k: store[k] for k in keys if k in store}
        elif isinstance(keys, dict):
            values = {k: store.get(k, default) for k, default in keys.items()}
        else:
            values = {}
        self.record_host_event(
            "extension-api", self._storage_action(area, "get"),
            f"{json.dumps(keys, sort_keys=True)} -> {json.dumps(values, sort_keys=True)}",
            origin=self._origin(p.get("realm", "")),
        )
        return {"valuesJson": json.dumps(values)}

    def _op_storageSet(self, p: dict) -> dict:
        area = p.get("area", "local")
        try:
            items = json.loads(p.get("itemsJson", "{}"))
        except ValueError:
            items = {}
        if isinstance(items, dict):
            self._area(area).update(items)
        self.record_host_event(
            "extension-api", self._storage_action(area, "set"),
            json.dumps(items, sort_keys=True),
            origin=self._origin(p.get("realm", "")),
        )
        return {}

    def _op_storageRemove(self, p: dict) -> dict:
        area = p.get("area", "local")
        keys = json.loads(p.get("keysJson", "null"))
        store = self._area(area)
        if keys is None:
            store.clear()
        else:
            for key in keys if isinstance(keys, list) else [keys]:
                store.pop(key, None)
        self.record_host_event(
            "extension-api", self._storage_action(area, "remove"),
            json.dumps(keys), origin=self._origin(p.get("realm", "")),
        )
        return {}

    def _op_clipboard(self, p: dict) -> dict:
        origin = self._origin(p.get("realm", ""))
        if p.get("action") == "write":
            self.record_host_event(
                "clipboard", "write", p.get("text", ""), origin=origin
            )
            return {}
        text = self.scenario.clipboard_text or ""
        self.record_host_event("clipboard", "read", text, origin=origin)
        return {"text": text}

    def _op_exec(self, p: dict) -> dict:
        command = p.get("command", "")
        self.record_host_event(
            "process", "exec", command, blocked=True,
            origin=self._origin(p.get("realm", "")),
        )
        return {}

    def _op_sendMessage(self, p: dict) -> dict:
        sender = p.get("realm", "")
        target = p.get("target", "all")
        payload_json = p.get("payloadJson", "null")
        self.record_host_event(
            "extension-api", "runtime.sendMessage", payload_json,
            origin=self._origin(sender),
        )

        def deliver():
            try:
                message = json.loads(payload_json)
            except ValueError:
                message = None
            args = [message, {"id": self.extension_id, "origin": self._origin(sender)}]
            delivered = 0
            for realm_id in list(self._realm_order):
                if realm_id == sender:
                    continue
                if target == "pages" and realm_id in self._background_realms:
                    continue
                delivered += self._dispatch(realm_id, "runtime.onMessage", args)
            if delivered == 0 and sender in self._realm_order:
                self._dispatch(sender, "runtime.onMessage", args)

        self.clock.schedule_timer(0, deliver, origin="setTimeout")
        return {}

    def _op_tabsQuery(self, p: dict) -> dict:
        tabs = [
            {
                "id": idx + 1,
                "url": nav.url,
                "active": idx == 0,
                "windowId": 1,
                "status": "complete",
            }
            for idx, nav in enumerate(self.scenario.navigations)
        ]
        self.record_host_event(
            "extension-api", "chrome.tabs.query",
            f"-> {len(tabs)} tabs", origin=self._origin(p.get("realm", "")),
        )
        return {"tabsJson": json.dumps(tabs)}

    def _op_dnr(self, p: dict) -> dict:
        self.record_host_event(
            "extension-api", "chrome.declarativeNetRequest.updateDynamicRules",
            p.get("rulesJson", ""), origin=self._origin(p.get("realm", "")),
        )
        return {}

    def _op_module(self, p: dict) -> dict:
        resolved = self.resolve_module(p.get("from", ""), p.get("request", ""))
        return resolved

    # -- module resolution --------------------------------------------------

    def resolve_module(self, from_path: str, request: str) -> dict:
        request = request.replace("\\", "/")
        if request.startswith(("./", "../", "/")):
            if request.startswith("/"):
                target = posixpath.normpath(request.lstrip("/"))
            else:
                base_dir = posixpath.dirname(from_path)
                target = posixpath.normpath(posixpath.join(base_dir, request))
            if target.startswith(".."):
                return {"type": "not-found"}
            return self._load_candidate(target)
        prefix = self.artifact.manifest.root_prefix
        for root in dict.fromkeys([prefix, ""]):
            base = f"{root}/node_modules/{request}" if root else f"node_modules/{request}"
            found = self._load_candidate(posixpath.normpath(base))
            if found["type"] != "not-found":
                return found
        return {"type": "not-found"}

    def _load_candidate(self, target: str) -> dict:
        files = {f.path: f for f in self.artifact.files}
        for candidate in (target, target + ".js", target + ".cjs", target + ".json"):
            entry = files.get(candidate)
            if entry is not None:
                kind = "json" if candidate.endswith(".json") else "code"
                return {
                    "type": kind,
                    "path": candidate,
                    "code": entry.data.decode("utf-8", errors="replace"),
                }
        package = files.get(f"{target}/package.json")
        if package is not None:
            try:
                main = json.loads(package.data.decode("utf-8", errors="replace")).get(
                    "main", "index.js"
                )
            except ValueError:
                main = "index.js"
            nested = posixpath.normpath(posixpath.join(target, str(main)))
            if nested != target:
                found = self._load_candidate(nested)
                if found["type"] != "not-found":
                    return found
        index = files.get(f"{target}/index.js")
        if index is not None:
            return {
                "type": "code",
                "path": f"{target}/index.js",
                "code": index.data.decode("utf-8", errors="replace"),
            }
        return {"type": "not-found"}

    # -- network ------------------------------------------------------------

    def handle_network(self, method: str, url: str, body_preview: str,
                       body_size: int, realm: str = "") -> dict:
        policy = self.scenario.network_policy
        blocked = policy == POLICY_BLOCK
        summary = f"{url} payload={body_size}B"
        if body_preview:
            summary += f" {body_preview}"
        self.record_host_event(
            "network", method.upper(), summary,
            blocked=blocked, origin=self._origin(realm),
        )
        if blocked:
            return {"error": "blocked-by-policy", "blocked": True}
        if policy == POLICY_RECORD and self.allow_real_network:
            return self._real_fetch(method, url, body_preview)
        return self._stub_response(url)

    def _stub_response(self, url: str) -> dict:
        for pattern in sorted(self.scenario.stub_responses):
            if fnmatch.fnmatchcase(url, pattern):
                stub = self.scenario.stub_responses[pattern] or {}
                return {
                    "status": int(stub.get("status", 200)),
                    "body": str(stub.get("body", "")),
                    "blocked": False,
                }
        return {"status": 200, "body": "", "blocked": False}

    def _real_fetch(self, method: str, url: str, body: str) -> dict:
        import urllib.request

        try:
            req = urllib.request.Request(
                url, data=body.encode() if body else None, method=method.upper()
            )
            with urllib.request.urlopen(req, timeout=10) as resp:
                return {
                    "status": resp.status,
                    "body": resp.read(1 << 20).decode("utf-8", errors="replace"),
                    "blocked": False,
                }
        except Exception as exc:
            return {"error": f"record-fetch-failed: {exc}", "blocked": False}

    # -- run phases -----------------------------------------------------------

    def _eval_error(self, error: str | None, origin: str):
        if not error:
            return
        if _PROCESS_EXIT_OK in error:
            return
        self.record_host_event(
            "lifecycle", "uncaught-error", error, origin=origin
        )
        self.top_level_errors.append(f"{origin}: {error}")

    def _eval_script(self, realm: str, path: str):
        entry = self.artifact.get(path)
        if entry is None:
            self.record_host_event("lifecycle", "missing-script", path)
            return
        code = entry.data.decode("utf-8", errors="replace")
        response = self._command(
            {"cmd": "eval", "realm": realm, "code": code, "filename": path}
        )
        self._eval_error(response.get("error"), path)

    def _require_entry(self, realm: str, path: str):
        response = self._command(
            {"cmd": "requireModule", "realm": realm, "path": path}
        )
        self._eval_error(response.get("error"), path)

    def simulate_navigation(self, url: str, tab_id: int):
        """Inject matching content scripts into fresh page realms."""
        self.record_host_event("lifecycle", "navigate", url)
        manifest = self.artifact.manifest
        files = {f.path: f for f in self.artifact.files}
        for cs_index, cs in enumerate(manifest.content_scripts):
            matched = False
            for pattern in cs.matches:
                try:
                    if MatchPattern(pattern).matches(url):
                        matched = True
                except MalformedMatchPattern:
                    note = f"malformed match pattern {pattern!r}"
                    if note not in self.pattern_errors:
                        self.pattern_errors.append(note)
            if not matched:
                continue
            for script in cs.scripts:
                script_path = self._content_script_path(script, files)
                if script_path is None:
                    self.record_host_event(
                        "lifecycle", "missing-script", script
                    )
                    continue
                realm_id = f"page{tab_id}.cs{cs_index}.{script_path}"
                host = re.match(r"^[a-zA-Z][a-zA-Z0-9+.-]*://([^/:]+)", url)
                self._make_realm(
                    realm_id, "page", script_path,
                    extras={"url": url, "host": host.group(1) if host else ""},
                )
                self.record_host_event(
                    "dom", "content-script-injected", url, origin=script_path
                )
                self._eval_script(realm_id, script_path)
        for bg_realm in self._background_realms:
            self._dispatch(
                bg_realm, "tabs.onUpdated",
                [tab_id, {"status": "complete", "url": url},
                 {"id": tab_id, "url": url, "status": "complete"}],
            )

    def _content_script_path(self, script: str, files: dict) -> str | None:
        prefix = self.artifact.manifest.root_prefix
        candidates = [script.lstrip("./")]
        if prefix:
            candidates.insert(0, f"{prefix}/{script.lstrip('./')}")
        for candidate in candidates:
            if candidate in files:
                return candidate
        return None

    def run(self) -> tuple[str, str]:
        """Execute the full dynamic phase; returns (outcome, detail)."""
        drain_outcome = DRAINED
        try:
            if self.artifact.kind == "chrome-extension":
                self._run_chrome()
            elif self.artifact.kind == "vscode-extension":
                self._run_vscode()
            else:
                self._run_npm()
            drain_outcome = self.clock.drain()
        except HarnessLost as exc:
            self.harness_lost = str(exc)
            self.record_host_event("lifecycle", "harness-lost", str(exc))
        finally:
            self._harness.close()
            self.log.close()
        if self.top_level_errors:
            return OUTCOME_RUNTIME_ERROR, self.top_level_errors[0]
        if self.harness_lost is not None:
            return OUTCOME_BUDGET, f"guest execution aborted: {self.harness_lost}"
        if drain_outcome != DRAINED:
            return OUTCOME_BUDGET, drain_outcome
        return OUTCOME_COMPLETED, ""

    def _run_chrome(self):
        manifest = self.artifact.manifest
        if manifest.background_scripts:
            self._make_realm("background", "background",
                             manifest.background_scripts[0])
            self._background_realms.append("background")
            for script in manifest.background_scripts:
                path = self._content_script_path(script,
                                                 {f.path: f for f in self.artifact.files})
                self.record_host_event(
                    "lifecycle", "background-start", script, origin=script
                )
                self._eval_script("background", path or script.lstrip("./"))
            self._dispatch("background", "runtime.onInstalled",
                           [{"reason": "install"}])
        for idx, nav in enumerate(self.scenario.navigations):
            target = self.scenario.virtual_start_ms + nav.at_virtual_time_ms
            if target > self.clock.now():
                self.clock.advance_clock(target - self.clock.now())
            self.simulate_navigation(nav.url, idx + 1)

    def _run_vscode(self):
        manifest = self.artifact.manifest
        self._make_realm("main", "vscode", manifest.main_entry or "")
        self._background_realms.append("main")
        if not manifest.main_entry or self.artifact.get(manifest.main_entry) is None:
            self.record_host_event(
                "lifecycle", "missing-script", manifest.main_entry or "(no main)"
            )
            return
        self.record_host_event(
            "lifecycle", "activate", manifest.main_entry,
            origin=manifest.main_entry,
        )
        self._require_entry("main", manifest.main_entry)
        response = self._command(
            {"cmd": "invoke", "realm": "main", "name": "activate"}
        )
        if response.get("missing"):
            self.record_host_event("lifecycle", "no-activate-export", "")
        else:
            self._eval_error(response.get("error"), manifest.main_entry)

    def _run_npm(self):
        manifest = self.artifact.manifest
        for hook, command in manifest.lifecycle_scripts.items():
            self.record_host_event(
                "lifecycle", f"lifecycle-script:{hook}", command
            )
            node_file = _NODE_SCRIPT_RE.match(command.strip())
            if node_file:
                resolved = self.resolve_module("", "./" + node_file.group(1).lstrip("./"))
                if resolved["type"] == "code":
                    realm_id = f"script:{hook}"
                    self._make_realm(realm_id, "node", resolved["path"],
                                     extras={"entry": resolved["path"]})
                    self._require_entry(realm_id, resolved["path"])
                else:
                    self.record_host_event(
                        "lifecycle", "missing-script", node_file.group(1)
                    )
            else:
                # Only an ECMAScript interpreter is embedded; shell commands
                # are recorded as the attempt, never executed.
                self.record_host_event(
                    "process", "shell", command, blocked=True
                )
        main = manifest.main_entry
        if main and self.artifact.get(main) is not None:
            self._make_realm("main", "node", main, extras={"entry": main})
            self.record_host_event("lifecycle", "import-main", main, origin=main)
            self._require_entry("main", main)


def run_dynamic_analysis(artifact: ExtensionArtifact, scenario: ScenarioConfig,
                         allow_real_network: bool = False,
                         call_timeout_s: float = config.GUEST_CALL_TIMEOUT_S,
                         on_event_log=None):
    """Build the environment, execute, and return (EventLog, outcome, detail,
    pattern_errors). on_event_log, when given, receives the live EventLog
    before execution starts (for incremental streaming)."""
    env = SandboxEnv(artifact, scenario, allow_real_network=allow_real_network,
                     call_timeout_s=call_timeout_s)
    if on_event_log is not None:
        on_event_log(env.log)
    outcome, detail = env.run()
    return env.log, outcome, detail, list(env.pattern_errors)
