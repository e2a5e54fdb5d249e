// Scenario re-run form model. Validation mirrors the service rules so bad
// input is surfaced inline before any request is made.

import type { NavigationRequest, ScenarioRequest } from './types.js';

export interface ScenarioFormState {
  // datetime-local input value, e.g. "2025-06-02T00:00"
  virtualStartDate: string;
  navigations: { url: string; atVirtualTimeMs: string }[];
  clipboardText: string;
  networkPolicy: 'block' | 'stub' | 'record';
  skipLlm: boolean;
  maxTasks: string;
}

export const EMPTY_FORM: ScenarioFormState = {
  virtualStartDate: '',
  navigations: [],
  clipboardText: '',
  networkPolicy: 'stub',
  skipLlm: false,
  maxTasks: '',
};

export function formFromScenario(scenario: Record<string, unknown>): ScenarioFormState {
  const navigations = Array.isArray(scenario.navigations)
    ? (scenario.navigations as NavigationRequest[]).map((nav) => ({
        url: String(nav.url ?? ''),
        atVirtualTimeMs: String(nav.atVirtualTimeMs ?? 0),
      }))
    : [];
  const start = typeof scenario.virtualStartDate === 'number'
    ? epochToLocalInput(scenario.virtualStartDate)
    : '';
  return {
    virtualStartDate: start,
    navigations,
    clipboardText: typeof scenario.clipboardText === 'string' ? scenario.clipboardText : '',
    networkPolicy: (scenario.networkPolicy as ScenarioFormState['networkPolicy']) ?? 'stub',
    skipLlm: Boolean(scenario.skipLlm),
    maxTasks: typeof scenario.maxTasks === 'number' ? String(scenario.maxTasks) : '',
  };
}

export function epochToLocalInput(epochMs: number): string {
  // render as UTC so the round trip is locale-independent
  return new Date(epochMs).toISOString().slice(0, 16);
}

export function parseDateInput(value: string): number | null {
  if (!value) return null;
  const parsed = Date.parse(value.endsWith('Z') ? value : `${value}Z`);
  return Number.isNaN(parsed) ? null : parsed;
}

export function validateForm(form: ScenarioFormState): string[] {
  const problems: string[] = [];
  if (form.virtualStartDate && parseDateInput(form.virtualStartDate) === null) {
    problems.push('virtual start date is not a valid date');
  }
  form.navigations.forEach((nav, index) => {
    if (!/^https?:\/\//.test(nav.url)) {
      problems.push(`navigation ${index + 1}: url must start with http(s)://`);
    }
    const at = Number(nav.atVirtualTimeMs);
    if (!Number.isFinite(at) || at < 0) {
      problems.push(`navigation ${index + 1}: time offset must be >= 0 ms`);
    }
  });
  if (!['block', 'stub', 'record'].includes(form.networkPolicy)) {
    problems.push('network policy must be block, stub, or record');
  }
  if (form.maxTasks !== '') {
    const n = Number(form.maxTasks);
    if (!Number.isInteger(n) || n <= 0) {
      problems.push('maxTasks must be a positive integer');
    }
  }
  return problems;
}

/** Builds exactly the wire shape; untouched fields are omitted. */
export function toScenarioRequest(form: ScenarioFormState): ScenarioRequest {
  const request: ScenarioRequest = {};
  const start = parseDateInput(form.virtualStartDate);
  if (start !== null) request.virtualStartDate = start;
  if (form.navigations.length > 0) {
    request.navigations = form.navigations.map((nav) => ({
      url: nav.url,
      atVirtualTimeMs: Number(nav.atVirtualTimeMs) || 0,
    }));
  }
  if (form.clipboardText) request.clipboardText = form.clipboardText;
  request.networkPolicy = form.networkPolicy;
  if (form.skipLlm) request.skipLlm = true;
  if (form.maxTasks !== '') request.maxTasks = Number(form.maxTasks);
  return request;
}
