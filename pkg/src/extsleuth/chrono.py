"""Virtual clock and deterministic task scheduler.

Replaces timers, date reads, and alarms inside the sandbox. Draining jumps
the clock straight to each task's due time, so a 24-hour timer costs no
wall time while the guest still observes 24 virtual hours passing.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

from . import config

log = logging.getLogger(__name__)

DRAINED = "drained"
TASK_BUDGET = "task-budget"
HORIZON = "horizon"

ORIGIN_TIMEOUT = "setTimeout"
ORIGIN_INTERVAL = "setInterval"
ORIGIN_ALARM = "alarm"


class BackwardJump(Exception):
    """Virtual time only moves forward."""


@dataclass
class FastForwardPolicy:
    threshold_ms: int = config.FAST_FORWARD_THRESHOLD_MS
    max_virtual_horizon_ms: int = config.MAX_VIRTUAL_HORIZON_MS
    max_tasks: int = config.MAX_TASKS
    # When set, timers below threshold_ms wait the real delay (observation
    # mode); off by default to keep runs deterministic.
    pseudo_real_time: bool = False

    def __post_init__(self):
        if self.threshold_ms <= 0 or self.max_virtual_horizon_ms <= 0 or self.max_tasks <= 0:
            raise ValueError("policy budgets must be positive")


@dataclass
class ScheduledTask:
    id: int
    due_ms: int
    callback: Callable[[], None]
    creation_seq: int
    interval_ms: int | None = None
    origin: str = ORIGIN_TIMEOUT
    name: str | None = None
    cancelled: bool = field(default=False, compare=False)


EventSink = Callable[[str, str, str], None]


class TimeMachine:
    """Single-run virtual clock plus priority-queue scheduler.

    Confined to one analysis worker; all operations are synchronous from the
    guest's perspective. Ties at equal due time break by creation order.
    """

    def __init__(self, start_ms: int = config.DEFAULT_VIRTUAL_START_MS,
                 policy: FastForwardPolicy | None = None,
                 on_event: EventSink | None = None):
        self.start_ms = int(start_ms)
        self._now_ms = int(start_ms)
        self.policy = policy or FastForwardPolicy()
        self._on_event = on_event
        self._heap: list[tuple[int, int, int]] = []
        self._tasks: dict[int, ScheduledTask] = {}
        self._alarms: dict[str, int] = {}
        self._next_id = 1
        self._next_seq = 0
        self.fired_total = 0

    # -- clock -----------------------------------------------------------

    def now(self) -> int:
        return self._now_ms

    def set_virtual_date(self, epoch_ms: int) -> None:
        """Jump the clock forward, firing every task in the skipped span."""
        epoch_ms = int(epoch_ms)
        if epoch_ms < self._now_ms:
            raise BackwardJump(f"{epoch_ms} is before current {self._now_ms}")
        self.advance_clock(epoch_ms - self._now_ms)

    def advance_clock(self, delta_ms: int) -> int:
        """Advance by delta_ms, executing due tasks at their due times."""
        if delta_ms < 0:
            raise BackwardJump(f"negative delta {delta_ms}")
        target = self._now_ms + int(delta_ms)
        fired = 0
        while True:
            task = self._peek_due(target)
            if task is None:
                break
            if fired >= self.policy.max_tasks:
                self._emit("timer", "advance-budget",
                           f"stopped after {fired} task firings")
                break
            self._fire(task)
            fired += 1
        self._now_ms = max(self._now_ms, target)
        return fired

    # -- scheduling ------------------------------------------------------

    def schedule_timer(self, delay_ms: float, callback: Callable[[], None],
                       interval_ms: float | None = None,
                       origin: str = ORIGIN_TIMEOUT,
                       name: str | None = None) -> int:
        if delay_ms is None or isinstance(delay_ms, float) and math.isnan(delay_ms):
            delay_ms = 0
        delay_ms = max(0, int(delay_ms))
        if interval_ms is not None:
            # Repeating tasks keep a 1ms floor so re-enqueueing always moves
            # time forward.
            interval_ms = max(1, int(interval_ms))
        task = ScheduledTask(
            id=self._next_id,
            due_ms=self._now_ms + delay_ms,
            callback=callback,
            creation_seq=self._next_seq,
            interval_ms=interval_ms,
            origin=origin,
            name=name,
        )
        self._next_id += 1
        self._next_seq += 1
        self._tasks[task.id] = task
        heapq.heappush(self._heap, (task.due_ms, task.creation_seq, task.id))
        self._emit("timer", "timer-set",
                   f"Timer set for {delay_ms}ms (origin {origin})")
        return task.id

    def cancel_timer(self, task_id: int) -> bool:
        task = self._tasks.pop(task_id, None)
        if task is None:
            return False
        task.cancelled = True
        return True

    def register_alarm(self, name: str, callback: Callable[[], None],
                       delay_ms: float | None = None,
                       period_ms: float | None = None) -> int:
        """chrome.alarms semantics: re-creating a name replaces the alarm."""
        prior = self._alarms.get(name)
        if prior is not None:
            self.cancel_timer(prior)
        if delay_ms is None:
            delay_ms = period_ms if period_ms is not None else 0
        task_id = self.schedule_timer(
            delay_ms, callback, interval_ms=period_ms,
            origin=ORIGIN_ALARM, name=name,
        )
        self._alarms[name] = task_id
        return task_id

    def clear_alarm(self, name: str) -> bool:
        task_id = self._alarms.pop(name, None)
        return self.cancel_timer(task_id) if task_id is not None else False

    def pending_count(self) -> int:
        return len(self._tasks)

    # -- draining --------------------------------------------------------

    def drain(self) -> str:
        """Run the queue to exhaustion or to a policy budget."""
        fired = 0
        horizon_ms = self.start_ms + self.policy.max_virtual_horizon_ms
        while True:
            task = self._peek_due(None)
            if task is None:
                return DRAINED
            if fired >= self.policy.max_tasks:
                self._emit("timer", "task-budget",
                           f"stopped after {fired} task firings")
                return TASK_BUDGET
            if task.due_ms > horizon_ms:
                self._emit("timer", "horizon",
                           f"next task due {task.due_ms} beyond horizon {horizon_ms}")
                return HORIZON
            if self.policy.pseudo_real_time:
                wait_ms = task.due_ms - self._now_ms
                if 0 < wait_ms <= self.policy.threshold_ms:
                    time.sleep(wait_ms / 1000.0)
            self._fire(task)
            fired += 1

    # -- internals -------------------------------------------------------

    def _peek_due(self, target_ms: int | None) -> ScheduledTask | None:
        """Pop the next live task due at or before target (None = any)."""
        while self._heap:
            due, seq, task_id = self._heap[0]
            task = self._tasks.get(task_id)
            if task is None or task.cancelled or task.due_ms != due:
                heapq.heappop(self._heap)  # stale entry
                continue
            if target_ms is not None and due > target_ms:
                return None
            heapq.heappop(self._heap)
            return task
        return None

    def _fire(self, task: ScheduledTask) -> None:
        self._now_ms = max(self._now_ms, task.due_ms)
        self.fired_total += 1
        label = task.name or str(task.id)
        self._emit("timer", "timer-fired", f"task {label} (origin {task.origin})")
        try:
            task.callback()
        except Exception as exc:  # guest errors are data, not aborts
            log.debug("task %s raised", task.id, exc_info=True)
            self._emit("timer", "callback-error", f"task {label}: {exc}")
        if task.interval_ms is not None and not task.cancelled:
            task.due_ms += task.interval_ms
            heapq.heappush(self._heap, (task.due_ms, task.creation_seq, task.id))
        elif not task.cancelled:
            self._tasks.pop(task.id, None)

    def _emit(self, category: str, action: str, args: str) -> None:
        if self._on_event is not None:
            self._on_event(category, action, args)
