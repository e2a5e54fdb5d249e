"""Tunable defaults for detectors, the scheduler, and the LLM prompt budget.

Everything here is configuration with documented defaults; the CLI and
service expose overrides for the file-backed pieces (signature DB,
allowlist, indicator list).
"""

from __future__ import annotations

import os
import shutil
from importlib import resources

TOOL_VERSION = "0.1.0"
REPORT_SCHEMA_VERSION = 1

# --- code model -------------------------------------------------------------

# String literals at least this long with >= BASE64_PURITY of their chars in
# the base64 alphabet are treated as embedded-payload candidates.
BASE64_CANDIDATE_MIN_CHARS = 1024
BASE64_PURITY = 0.95

# A line longer than this with almost no whitespace marks a unit as minified.
MINIFIED_LINE_LENGTH = 1000
MINIFIED_WHITESPACE_FRACTION = 0.05

# Obfuscation finding threshold; calibrate against a benign corpus before
# trusting it on real inputs.
OBFUSCATION_RATIO_THRESHOLD = 0.35

ARG_LITERAL_MAX_CHARS = 512
EVIDENCE_MAX_CHARS = 256

# --- static engine ----------------------------------------------------------

BASE64_BLOB_HIGH_BYTES = 100 * 1024
BASE64_BLOB_MEDIUM_BYTES = 10 * 1024

# --- sandbox / scheduler ----------------------------------------------------

# 2024-12-25T00:00:00Z; every run starts at a fixed virtual date unless the
# scenario overrides it.
DEFAULT_VIRTUAL_START_MS = 1735084800000

FAST_FORWARD_THRESHOLD_MS = 1000
MAX_VIRTUAL_HORIZON_MS = 90 * 24 * 60 * 60 * 1000  # 90 virtual days
MAX_TASKS = 10000

ARGS_SUMMARY_MAX_CHARS = 1024

# Wall-clock guard for a single guest evaluation or callback; a hang is
# treated as budget exhaustion, never as a real wait.
GUEST_CALL_TIMEOUT_S = 10.0

UNIMPLEMENTED_API_STORM = 50

# --- LLM prompt -------------------------------------------------------------

MAX_PROMPT_CHARS = 24000
EXCERPT_WINDOW_LINES = 20
MAX_PROMPT_EVENTS = 50

# --- risk scoring -----------------------------------------------------------

SEVERITY_WEIGHTS = {"High": 10, "Medium": 3, "Low": 1, "Info": 0}
MEDIUM_SCORE_THRESHOLD = 3

# --- service ----------------------------------------------------------------

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8717
STORE_ENV_VAR = "EXTSLEUTH_STORE"


def node_binary() -> str:
    """Locate the Node.js runtime used for parsing and the sandbox harness."""
    override = os.environ.get("EXTSLEUTH_NODE")
    if override:
        return override
    found = shutil.which("node")
    if not found:
        raise RuntimeError(
            "node executable not found; install Node.js >= 18 or set EXTSLEUTH_NODE"
        )
    return found


def js_path(name: str) -> str:
    """Absolute path of a bundled JS asset."""
    return str(resources.files("extsleuth").joinpath("js", name))


def data_path(name: str) -> str:
    """Absolute path of a bundled data file."""
    return str(resources.files("extsleuth").joinpath("data", name))
