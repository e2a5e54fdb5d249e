// Live round-trip against the analysis service: upload the logic-bomb
// fixture, confirm the payload is absent with the default clock, re-run
// with a post-gate virtual start date through the scenario form code path,
// and verify the payload events appear in the child analysis view.
//
// Requires python3 with the extsleuth package importable (pip install -e ..).

import { execFileSync, spawn, ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join, resolve } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ServiceClient } from '../src/api.js';
import { parseEventLog } from '../src/events.js';
import { EMPTY_FORM, toScenarioRequest, validateForm } from '../src/scenario.js';
import { renderComparison, renderTab } from '../src/tabs.js';
import type { AnalysisRecord, Report } from '../src/types.js';

const REPO_ROOT = resolve(__dirname, '..', '..');
const PORT = 8700 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let workDir = '';
const client = new ServiceClient(BASE);

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      await client.health();
      return;
    } catch {
      if (Date.now() > deadline) throw new Error('service never became healthy');
      await new Promise((r) => setTimeout(r, 200));
    }
  }
}

async function collectEvents(id: string): Promise<string> {
  const lines: string[] = [];
  const handle = client.streamEvents(id, { onLine: (l) => lines.push(l) });
  await handle.done;
  return lines.join('\n') + '\n';
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), 'extsleuth-ui-test-'));
  execFileSync('python3', ['tests/corpus.py', 'logic-bomb',
    join(workDir, 'bomb.zip')], { cwd: REPO_ROOT });
  server = spawn('python3', ['-m', 'extsleuth.cli', 'serve',
    '--port', String(PORT), '--store', join(workDir, 'store')], {
    cwd: REPO_ROOT,
    stdio: ['ignore', 'pipe', 'pipe'],
    env: { ...process.env, EXTSLEUTH_STORE: '' },
  });
  await waitForHealth();
}, 60_000);

afterAll(() => {
  server?.kill();
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

describe('scenario rerun round-trip against a live service', () => {
  it('produces the logic-bomb payload only in the post-gate child analysis',
    async () => {
      const data = readFileSync(join(workDir, 'bomb.zip'));
      const parentRecord = await client.submitArtifact(
        { name: 'bomb.zip', data: new Blob([data]) },
        { navigations: [], maxTasks: 3000, skipLlm: true },
      );
      const parent = await client.waitDone(parentRecord.id);
      expect(parent.state).toBe('done');
      expect(parent.report?.verdict.level).toBe('Medium');

      const parentEvents = await collectEvents(parent.id);
      expect(parentEvents).not.toContain('asdf11.xyz');

      // drive the re-run through the same form model the UI uses
      const form = {
        ...EMPTY_FORM,
        virtualStartDate: '2025-06-02T00:00',
        maxTasks: '3000',
        skipLlm: true,
      };
      expect(validateForm(form)).toEqual([]);
      const childRecord = await client.rerun(parent.id, {
        ...toScenarioRequest(form),
        navigations: [],
      });
      expect(childRecord.id).not.toBe(parent.id);

      const child = await client.waitDone(childRecord.id);
      expect(child.state).toBe('done');
      expect(child.parent).toBe(parent.id);

      const childEvents = parseEventLog(await collectEvents(child.id));
      const childView = renderTab('SandboxAnalysis', {
        record: child as AnalysisRecord,
        report: child.report as Report,
        events: childEvents,
        files: await client.listFiles(child.id),
      });
      expect(childView).toContain('asdf11.xyz');
      expect(childView).toContain('POST');

      const comparison = renderComparison(
        parent.report as Report, child.report as Report,
      );
      expect(comparison).toContain('New in re-run');
      expect(comparison).toContain('network-unknown');
    }, 120_000);

  it('rejects an invalid date field inline with no request', () => {
    const errors = validateForm({ ...EMPTY_FORM, virtualStartDate: 'garbage' });
    expect(errors.length).toBeGreaterThan(0);
  });

  it('serves stored artifact files to the viewer', async () => {
    const data = readFileSync(join(workDir, 'bomb.zip'));
    const record = await client.submitArtifact(
      { name: 'bomb.zip', data: new Blob([data]) },
      { navigations: [], maxTasks: 3000, skipLlm: true },
    );
    await client.waitDone(record.id);
    const files = await client.listFiles(record.id);
    expect(files).toContain('bg.js');
    const source = await client.getFileText(record.id, 'bg.js');
    expect(source).toContain('DETONATE_AFTER');
  }, 120_000);
});
