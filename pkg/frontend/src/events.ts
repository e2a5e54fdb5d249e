// Event-log line parsing and render batching. The line format is the
// service's streaming frame: seq \t virtualTimeMs \t category \t action \t
// blocked \t origin \t argsSummary (tab/newline/backslash escaped).

import type { SandboxEvent } from './types.js';

function unescapeField(value: string): string {
  let out = '';
  for (let i = 0; i < value.length; i++) {
    if (value[i] === '\\' && i + 1 < value.length) {
      const next = value[i + 1];
      out += next === 't' ? '\t' : next === 'n' ? '\n' : next;
      i += 1;
    } else {
      out += value[i];
    }
  }
  return out;
}

export function parseEventLine(line: string): SandboxEvent {
  const parts = line.split('\t');
  if (parts.length < 7) {
    throw new Error(`malformed event line: ${line.slice(0, 80)}`);
  }
  const [seq, vt, category, action, blocked, origin, ...rest] = parts;
  return {
    seq: Number(seq),
    virtualTimeMs: Number(vt),
    category,
    action,
    blocked: blocked === 'true',
    origin: origin === '-' ? '' : unescapeField(origin),
    argsSummary: unescapeField(rest.join('\t')),
  };
}

export function parseEventLog(text: string): SandboxEvent[] {
  return text
    .split('\n')
    .filter((line) => line.length > 0)
    .map(parseEventLine);
}

/**
 * Accumulates streamed events and releases them in batches so a ~1000-event
 * timeline renders without stalling the UI. flush() returns everything
 * pending; callers drive it from a timer or animation frame.
 */
export class TimelineBuffer {
  private pending: SandboxEvent[] = [];
  private lastSeq = -1;
  readonly all: SandboxEvent[] = [];

  push(event: SandboxEvent): boolean {
    if (event.seq <= this.lastSeq) return false; // duplicate frame
    this.lastSeq = event.seq;
    this.pending.push(event);
    this.all.push(event);
    return true;
  }

  pushLine(line: string): boolean {
    return this.push(parseEventLine(line));
  }

  get resumeAfter(): number {
    return this.lastSeq;
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  flush(): SandboxEvent[] {
    const batch = this.pending;
    this.pending = [];
    return batch;
  }
}

/** Incremental reader over a streaming fetch body; yields complete lines. */
export function lineSplitter(onLine: (line: string) => void): (chunk: string) => void {
  let carry = '';
  return (chunk: string) => {
    carry += chunk;
    for (;;) {
      const nl = carry.indexOf('\n');
      if (nl < 0) break;
      const line = carry.slice(0, nl);
      carry = carry.slice(nl + 1);
      if (line.length > 0) onLine(line);
    }
  };
}
