import { describe, expect, it } from 'vitest';

import {
  EMPTY_FORM,
  epochToLocalInput,
  formFromScenario,
  parseDateInput,
  toScenarioRequest,
  validateForm,
} from '../src/scenario.js';

describe('scenario form validation (mirrors server rules)', () => {
  it('accepts the empty form', () => {
    expect(validateForm({ ...EMPTY_FORM })).toEqual([]);
  });

  it('rejects invalid dates without building a request', () => {
    const errors = validateForm({ ...EMPTY_FORM, virtualStartDate: 'not-a-date' });
    expect(errors.length).toBe(1);
    expect(errors[0]).toContain('valid date');
  });

  it('rejects non-http navigation urls and negative offsets', () => {
    const errors = validateForm({
      ...EMPTY_FORM,
      navigations: [
        { url: 'ftp://x', atVirtualTimeMs: '0' },
        { url: 'https://ok.example/', atVirtualTimeMs: '-5' },
      ],
    });
    expect(errors.some((e) => e.includes('http(s)'))).toBe(true);
    expect(errors.some((e) => e.includes('>= 0'))).toBe(true);
  });

  it('rejects non-positive task budgets', () => {
    expect(validateForm({ ...EMPTY_FORM, maxTasks: '0' }).length).toBe(1);
    expect(validateForm({ ...EMPTY_FORM, maxTasks: '12' })).toEqual([]);
  });
});

describe('wire shape', () => {
  it('produces exactly the ScenarioRequest fields that were set', () => {
    const request = toScenarioRequest({
      virtualStartDate: '2025-06-02T00:00',
      navigations: [{ url: 'https://facebook.com/', atVirtualTimeMs: '1000' }],
      clipboardText: '',
      networkPolicy: 'stub',
      skipLlm: true,
      maxTasks: '50',
    });
    expect(request).toEqual({
      virtualStartDate: Date.parse('2025-06-02T00:00Z'),
      navigations: [{ url: 'https://facebook.com/', atVirtualTimeMs: 1000 }],
      networkPolicy: 'stub',
      skipLlm: true,
      maxTasks: 50,
    });
    expect('clipboardText' in request).toBe(false);
  });

  it('round-trips a report scenario into the form', () => {
    const form = formFromScenario({
      virtualStartDate: 1748822400000,
      navigations: [{ url: 'https://a.example/', atVirtualTimeMs: 10 }],
      networkPolicy: 'block',
      maxTasks: 3000,
    });
    expect(form.virtualStartDate).toBe('2025-06-02T00:00');
    expect(form.navigations).toEqual([
      { url: 'https://a.example/', atVirtualTimeMs: '10' },
    ]);
    expect(form.networkPolicy).toBe('block');
    const back = toScenarioRequest(form);
    expect(back.virtualStartDate).toBe(1748822400000);
    expect(back.maxTasks).toBe(3000);
  });

  it('date helpers are UTC-stable', () => {
    const epoch = 1735084800000;
    expect(parseDateInput(epochToLocalInput(epoch))).toBe(epoch);
  });
});
