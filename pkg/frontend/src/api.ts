// HTTP client for the analysis service. All analysis facts come from these
// endpoints; the dashboard adds no detection logic of its own.

import type { AnalysisRecord, ScenarioRequest } from './types.js';
import { lineSplitter } from './events.js';

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function expectJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.error === 'string') detail = body.error;
    } catch {
      // keep statusText
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export interface EventStreamHandle {
  cancel(): void;
  done: Promise<void>;
}

export class ServiceClient {
  constructor(readonly baseUrl: string = '') {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<{ status: string; version: string }> {
    return expectJson(await fetch(this.url('/health')));
  }

  async submitArtifact(
    file: { name: string; data: Blob },
    scenario?: ScenarioRequest,
  ): Promise<AnalysisRecord> {
    const form = new FormData();
    form.append('artifact', file.data, file.name);
    if (scenario && Object.keys(scenario).length > 0) {
      form.append('scenario', JSON.stringify(scenario));
    }
    return expectJson(
      await fetch(this.url('/analyses'), { method: 'POST', body: form }),
    );
  }

  async getAnalysis(id: string): Promise<AnalysisRecord> {
    return expectJson(await fetch(this.url(`/analyses/${id}`)));
  }

  async rerun(id: string, scenario: ScenarioRequest): Promise<AnalysisRecord> {
    return expectJson(
      await fetch(this.url(`/analyses/${id}/rerun`), {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(scenario),
      }),
    );
  }

  async listFiles(id: string): Promise<string[]> {
    return expectJson(await fetch(this.url(`/analyses/${id}/files`)));
  }

  async getFileText(id: string, path: string): Promise<string> {
    const response = await fetch(
      this.url(`/analyses/${id}/files/${encodeURI(path)}`),
    );
    if (!response.ok) throw new ApiError(response.status, `no such file ${path}`);
    return await response.text();
  }

  async waitDone(id: string, timeoutMs = 120_000, pollMs = 300): Promise<AnalysisRecord> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const record = await this.getAnalysis(id);
      if (record.state === 'done' || record.state === 'failed') return record;
      if (Date.now() > deadline) throw new Error(`analysis ${id} timed out`);
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }

  /**
   * Streams event-log lines. Reconnects once on a dropped stream (resuming
   * from the last seq via the `after` query parameter); a second drop calls
   * onRetryNeeded and stops.
   */
  streamEvents(
    id: string,
    handlers: {
      onLine: (line: string) => void;
      onEnd?: () => void;
      onRetryNeeded?: (error: unknown) => void;
      after?: number;
      lastSeq?: () => number;
    },
  ): EventStreamHandle {
    const controller = new AbortController();
    let reconnected = false;

    const connect = async (after: number): Promise<void> => {
      const suffix = after >= 0 ? `?after=${after}` : '';
      const response = await fetch(
        this.url(`/analyses/${id}/events${suffix}`),
        { signal: controller.signal },
      );
      if (!response.ok || response.body === null) {
        throw new ApiError(response.status, 'event stream unavailable');
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      const split = lineSplitter(handlers.onLine);
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        split(decoder.decode(value, { stream: true }));
      }
    };

    const done = (async () => {
      let after = handlers.after ?? -1;
      for (;;) {
        try {
          await connect(after);
          handlers.onEnd?.();
          return;
        } catch (error) {
          if (controller.signal.aborted) return;
          if (reconnected) {
            handlers.onRetryNeeded?.(error);
            return;
          }
          reconnected = true;
          after = handlers.lastSeq ? handlers.lastSeq() : after;
        }
      }
    })();

    return { cancel: () => controller.abort(), done };
  }
}
