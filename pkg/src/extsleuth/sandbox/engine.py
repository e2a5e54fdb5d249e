"""Node.js harness process management and the JSON-lines bridge protocol.

One harness process hosts all interpreter realms for a single analysis run.
Python is the protocol master: it sends one command at a time and answers
the host-operation requests the guest raises while that command runs. The
harness never receives a second command before responding to the first, so
neither side needs reentrant dispatch.

A wall-clock watchdog guards every command; a guest that hangs (infinite
loop) gets its process killed, surfacing as HarnessLost.
"""

from __future__ import annotations

import json
import logging
import subprocess
import threading
from typing import Callable

from .. import config

log = logging.getLogger(__name__)

HostHandler = Callable[[dict], dict]


class HarnessLost(BaseException):
    """The harness process died or was killed by the watchdog.

    Derives from BaseException so it escapes the scheduler's guest-error
    containment and aborts the run instead of being logged per task.
    """


class GuestError(Exception):
    """Guest code raised; contained and reported per call."""


class HarnessProcess:
    def __init__(self, host_handler: HostHandler,
                 call_timeout_s: float = config.GUEST_CALL_TIMEOUT_S):
        self._host_handler = host_handler
        self._timeout = call_timeout_s
        self._stderr_tail: list[str] = []
        self._proc = subprocess.Popen(
            [config.node_binary(), config.js_path("harness.js")],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._stderr_thread = threading.Thread(
            target=self._drain_stderr, daemon=True
        )
        self._stderr_thread.start()

    def _drain_stderr(self):
        try:
            for line in self._proc.stderr:
                self._stderr_tail.append(line.rstrip("\n"))
                del self._stderr_tail[:-50]
        except ValueError:
            pass

    @property
    def alive(self) -> bool:
        return self._proc.poll() is None

    def send_command(self, command: dict) -> dict:
        """Issue one command, servicing host ops until its response arrives."""
        if not self.alive:
            raise HarnessLost("harness process is not running")
        line = json.dumps(command)
        watchdog = threading.Timer(self._timeout, self._kill)
        watchdog.start()
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
            while True:
                raw = self._proc.stdout.readline()
                if raw == "":
                    raise HarnessLost(self._death_note())
                try:
                    message = json.loads(raw)
                except ValueError:
                    log.warning("harness noise: %r", raw[:200])
                    continue
                if "req" in message:
                    result = self._safe_host_call(message)
                    self._proc.stdin.write(
                        json.dumps({"res": result}) + "\n"
                    )
                    self._proc.stdin.flush()
                    continue
                if "ok" in message:
                    return message
                log.warning("harness sent unexpected message: %r", message)
        except BrokenPipeError as exc:
            raise HarnessLost(self._death_note()) from exc
        finally:
            watchdog.cancel()

    def _safe_host_call(self, message: dict) -> dict:
        try:
            return self._host_handler(message.get("payload", {})) or {}
        except Exception as exc:
            log.exception("host op failed: %s", message)
            return {"error": f"host-op-failure: {exc}"}

    def _death_note(self) -> str:
        tail = "; ".join(self._stderr_tail[-5:])
        return f"harness exited (rc={self._proc.poll()}) {tail}".strip()

    def _kill(self):
        log.warning("watchdog killing harness after %.1fs", self._timeout)
        try:
            self._proc.kill()
        except OSError:
            pass

    def close(self):
        if self.alive:
            try:
                self._proc.stdin.write(json.dumps({"cmd": "shutdown"}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError, OSError):
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        try:
            self._proc.stdin.close()
        except (ValueError, OSError):
            pass
