"""Sandbox event model and the line-oriented log serialization.

The serialized form — one event per line, tab-separated fields in fixed
order — is the golden-test surface and the frame format of the service's
event stream.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .. import config

CATEGORIES = (
    "network",
    "filesystem",
    "process",
    "extension-api",
    "clipboard",
    "timer",
    "eval",
    "dom",
    "lifecycle",
)

TRUNCATION_MARKER = "\u2026"


@dataclass(frozen=True)
class SandboxEvent:
    seq: int
    virtual_time_ms: int
    category: str
    action: str
    args_summary: str = ""
    blocked: bool = False
    origin: str = ""

    def to_line(self) -> str:
        return "\t".join(
            (
                str(self.seq),
                str(self.virtual_time_ms),
                self.category,
                self.action,
                "true" if self.blocked else "false",
                _escape(self.origin) or "-",
                _escape(self.args_summary),
            )
        )

    @classmethod
    def from_line(cls, line: str) -> "SandboxEvent":
        parts = line.rstrip("\n").split("\t", 6)
        if len(parts) != 7:
            raise ValueError(f"malformed event line: {line!r}")
        seq, vt, category, action, blocked, origin, args = parts
        return cls(
            seq=int(seq),
            virtual_time_ms=int(vt),
            category=category,
            action=action,
            args_summary=_unescape(args),
            blocked=blocked == "true",
            origin="" if origin == "-" else _unescape(origin),
        )


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        if value[i] == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n"}.get(nxt, nxt))
            i += 2
        else:
            out.append(value[i])
            i += 1
    return "".join(out)


def truncate_summary(value: str, limit: int = config.ARGS_SUMMARY_MAX_CHARS) -> str:
    if len(value) <= limit:
        return value
    return value[: limit - 1] + TRUNCATION_MARKER


class EventLog:
    """Append-only event log, safe for one writer and many readers."""

    def __init__(self):
        self._events: list[SandboxEvent] = []
        self._lock = threading.Lock()
        self._changed = threading.Condition(self._lock)
        self._closed = False

    def append(self, virtual_time_ms: int, category: str, action: str,
               args_summary: str = "", blocked: bool = False,
               origin: str = "") -> int:
        if category not in CATEGORIES:
            raise ValueError(f"unknown event category {category!r}")
        with self._changed:
            seq = len(self._events)
            self._events.append(
                SandboxEvent(
                    seq=seq,
                    virtual_time_ms=int(virtual_time_ms),
                    category=category,
                    action=action,
                    args_summary=truncate_summary(args_summary),
                    blocked=blocked,
                    origin=origin,
                )
            )
            self._changed.notify_all()
            return seq

    def close(self):
        with self._changed:
            self._closed = True
            self._changed.notify_all()

    @property
    def closed(self) -> bool:
        with self._lock:
            return self._closed

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)

    def snapshot(self, after_seq: int = -1) -> list[SandboxEvent]:
        with self._lock:
            return self._events[after_seq + 1:]

    def wait_for_more(self, after_seq: int, timeout: float = 0.5) -> bool:
        """Block until events beyond after_seq exist or the log closes."""
        with self._changed:
            if len(self._events) > after_seq + 1 or self._closed:
                return len(self._events) > after_seq + 1
            self._changed.wait(timeout)
            return len(self._events) > after_seq + 1

    def serialize(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.snapshot())


def parse_event_log(text: str) -> list[SandboxEvent]:
    return [SandboxEvent.from_line(line) for line in text.splitlines() if line]
