// Application shell: upload form, analysis view with the eight tabs, the
// scenario re-run sidebar, and the live event timeline.

import { ServiceClient } from './api.js';
import { TimelineBuffer, parseEventLog } from './events.js';
import {
  EMPTY_FORM,
  ScenarioFormState,
  formFromScenario,
  toScenarioRequest,
  validateForm,
} from './scenario.js';
import {
  TAB_LABELS,
  TAB_ORDER,
  TabContext,
  TabName,
  escapeHtml,
  renderComparison,
  renderTab,
  renderTimelineRows,
  verdictBadge,
} from './tabs.js';
import type { AnalysisRecord, Report, SandboxEvent } from './types.js';

const client = new ServiceClient('');

interface ViewState {
  record?: AnalysisRecord;
  events: SandboxEvent[];
  files: string[];
  activeTab: TabName;
  selectedFile?: string;
  fileContent?: string;
  form: ScenarioFormState;
  formErrors: string[];
  parentReport?: Report;
  streamFailed: boolean;
}

const state: ViewState = {
  events: [],
  files: [],
  activeTab: 'Overview',
  form: { ...EMPTY_FORM },
  formErrors: [],
  streamFailed: false,
};

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

// ---- router -----------------------------------------------------------------

function currentAnalysisId(): string | null {
  const match = /^#\/analysis\/([A-Za-z0-9]+)/.exec(location.hash);
  return match ? match[1] : null;
}

window.addEventListener('hashchange', () => {
  void route();
});

async function route(): Promise<void> {
  const id = currentAnalysisId();
  if (id) {
    await openAnalysis(id);
  } else {
    $('analysis-view').hidden = true;
    $('landing').hidden = false;
  }
}

// ---- upload ------------------------------------------------------------------

function bindUpload(): void {
  const form = $('upload-form') as HTMLFormElement;
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const input = $('artifact-input') as HTMLInputElement;
    const file = input.files?.[0];
    const status = $('upload-status');
    if (!file) {
      status.textContent = 'Choose a .crx, .vsix, .zip or .tgz artifact first.';
      return;
    }
    status.textContent = 'Uploading…';
    client
      .submitArtifact({ name: file.name, data: file })
      .then((record) => {
        status.textContent = record.cached
          ? 'Already analyzed — showing cached analysis.'
          : 'Submitted.';
        location.hash = `#/analysis/${record.id}`;
      })
      .catch((error) => {
        status.textContent = `Upload failed: ${error.message ?? error}`;
      });
  });
}

// ---- analysis view ------------------------------------------------------------

let streamHandle: { cancel(): void } | null = null;
let flushTimer: number | null = null;

async function openAnalysis(id: string): Promise<void> {
  $('landing').hidden = true;
  $('analysis-view').hidden = false;
  $('analysis-id').textContent = id;
  state.events = [];
  state.files = [];
  state.selectedFile = undefined;
  state.fileContent = undefined;
  state.parentReport = undefined;
  state.streamFailed = false;
  streamHandle?.cancel();

  let record = await client.getAnalysis(id);
  state.record = record;
  renderStateLine(record);

  if (record.state === 'queued' || record.state === 'running') {
    startLiveTimeline(id);
    record = await client.waitDone(id);
    state.record = record;
    renderStateLine(record);
  }
  if (record.state === 'failed') {
    $('tab-panel').innerHTML =
      `<p class="empty">Analysis failed: ${escapeHtml(record.error ?? 'unknown error')}</p>`;
    return;
  }
  if (streamHandle === null) {
    // done analyses replay the full log once
    const lines: string[] = [];
    const handle = client.streamEvents(id, {
      onLine: (line) => lines.push(line),
    });
    await handle.done;
    state.events = parseEventLog(lines.join('\n') + '\n');
  }
  state.files = await client.listFiles(id).catch(() => []);
  if (record.report) {
    state.form = formFromScenario(record.report.scenario);
    if (record.parent) {
      const parent = await client.getAnalysis(record.parent).catch(() => null);
      if (parent?.report) state.parentReport = parent.report;
    }
  }
  renderTabs();
  renderScenarioForm();
  renderComparisonPanel();
}

function renderStateLine(record: AnalysisRecord): void {
  const verdict = record.report ? verdictBadge(record.report.verdict.level) : '';
  $('analysis-state').innerHTML =
    `<span class="state state-${record.state}">${record.state}</span> ${verdict}` +
    (record.cached ? ' <span class="badge flag">cached</span>' : '');
}

function startLiveTimeline(id: string): void {
  const buffer = new TimelineBuffer();
  const body = () => document.getElementById('timeline-body');
  $('tab-panel').innerHTML = `
    <p>Analysis running — live event timeline:</p>
    <div class="timeline-wrap"><table class="list timeline">
      <thead><tr><th>Virtual time</th><th>Category</th><th>Action</th><th>Details</th><th>Origin</th></tr></thead>
      <tbody id="timeline-body"></tbody>
    </table></div>`;
  const startMs = 0;
  const flush = () => {
    const batch = buffer.flush();
    if (batch.length > 0) {
      const target = body();
      if (target) {
        target.insertAdjacentHTML('beforeend', renderTimelineRows(batch, startMs));
      }
      state.events.push(...batch);
    }
  };
  flushTimer = window.setInterval(flush, 120);
  streamHandle = client.streamEvents(id, {
    onLine: (line) => buffer.pushLine(line),
    lastSeq: () => buffer.resumeAfter,
    onEnd: () => {
      flush();
      if (flushTimer !== null) window.clearInterval(flushTimer);
      streamHandle = null;
    },
    onRetryNeeded: () => {
      if (flushTimer !== null) window.clearInterval(flushTimer);
      state.streamFailed = true;
      streamHandle = null;
      const target = body();
      if (target) {
        target.insertAdjacentHTML(
          'beforeend',
          `<tr><td colspan="5"><button id="retry-stream">Stream dropped — retry</button></td></tr>`,
        );
        document.getElementById('retry-stream')?.addEventListener('click', () => {
          startLiveTimeline(id);
        });
      }
    },
  });
}

// ---- tabs ---------------------------------------------------------------------

function renderTabs(): void {
  const bar = $('tab-bar');
  bar.innerHTML = TAB_ORDER.map(
    (tab) =>
      `<button class="tab${tab === state.activeTab ? ' active' : ''}" data-tab="${tab}">
        ${TAB_LABELS[tab]}
      </button>`,
  ).join('');
  bar.querySelectorAll('button[data-tab]').forEach((button) => {
    button.addEventListener('click', () => {
      state.activeTab = (button as HTMLElement).dataset.tab as TabName;
      renderTabs();
    });
  });
  renderActivePanel();
}

function renderActivePanel(): void {
  const record = state.record;
  if (!record?.report) return;
  const ctx: TabContext = {
    record,
    report: record.report,
    events: state.events,
    files: state.files,
    selectedFile: state.selectedFile,
    fileContent: state.fileContent,
  };
  const panel = $('tab-panel');
  panel.innerHTML = renderTab(state.activeTab, ctx);
  panel.querySelectorAll('a.file[data-file]').forEach((anchor) => {
    anchor.addEventListener('click', (event) => {
      event.preventDefault();
      const path = (anchor as HTMLElement).dataset.file!;
      void openFile(path);
    });
  });
}

async function openFile(path: string): Promise<void> {
  const record = state.record;
  if (!record) return;
  state.activeTab = 'Files';
  state.selectedFile = path;
  state.fileContent = await client
    .getFileText(record.id, path)
    .catch((error) => `(unable to load: ${error.message ?? error})`);
  renderTabs();
}

// ---- scenario re-runs ------------------------------------------------------------

function renderScenarioForm(): void {
  const container = $('scenario-form');
  const form = state.form;
  const navRows = form.navigations
    .map(
      (nav, index) => `
      <div class="nav-row" data-index="${index}">
        <input class="nav-url" value="${escapeHtml(nav.url)}" placeholder="https://site.example/">
        <input class="nav-at" value="${escapeHtml(nav.atVirtualTimeMs)}" size="8" placeholder="ms">
        <button type="button" class="nav-remove" data-index="${index}">×</button>
      </div>`,
    )
    .join('');
  container.innerHTML = `
    <h3>What-if scenario</h3>
    <label>Virtual start date (UTC)
      <input type="datetime-local" id="sc-start" value="${escapeHtml(form.virtualStartDate)}">
    </label>
    <label>Navigations</label>
    <div id="nav-rows">${navRows}</div>
    <button type="button" id="nav-add">+ navigation</button>
    <label>Clipboard text
      <input id="sc-clipboard" value="${escapeHtml(form.clipboardText)}">
    </label>
    <label>Network policy
      <select id="sc-policy">
        ${['block', 'stub', 'record']
          .map((p) => `<option value="${p}"${p === form.networkPolicy ? ' selected' : ''}>${p}</option>`)
          .join('')}
      </select>
    </label>
    <label>Task budget
      <input id="sc-maxtasks" value="${escapeHtml(form.maxTasks)}" placeholder="10000">
    </label>
    <label class="inline"><input type="checkbox" id="sc-skipllm"${form.skipLlm ? ' checked' : ''}>
      skip model narrative</label>
    <div id="scenario-errors" class="errors">${state.formErrors
      .map((e) => `<p>${escapeHtml(e)}</p>`)
      .join('')}</div>
    <button type="button" id="sc-rerun">Re-run analysis</button>
  `;
  container.querySelector('#nav-add')?.addEventListener('click', () => {
    captureForm();
    state.form.navigations.push({ url: '', atVirtualTimeMs: '0' });
    renderScenarioForm();
  });
  container.querySelectorAll('.nav-remove').forEach((button) => {
    button.addEventListener('click', () => {
      captureForm();
      state.form.navigations.splice(Number((button as HTMLElement).dataset.index), 1);
      renderScenarioForm();
    });
  });
  container.querySelector('#sc-rerun')?.addEventListener('click', () => {
    void submitRerun();
  });
}

function captureForm(): void {
  const value = (id: string) => ($(id) as HTMLInputElement).value;
  state.form.virtualStartDate = value('sc-start');
  state.form.clipboardText = value('sc-clipboard');
  state.form.networkPolicy = (
    $('sc-policy') as HTMLSelectElement
  ).value as ScenarioFormState['networkPolicy'];
  state.form.maxTasks = value('sc-maxtasks');
  state.form.skipLlm = ($('sc-skipllm') as HTMLInputElement).checked;
  state.form.navigations = Array.from(
    document.querySelectorAll('#nav-rows .nav-row'),
  ).map((row) => ({
    url: (row.querySelector('.nav-url') as HTMLInputElement).value,
    atVirtualTimeMs: (row.querySelector('.nav-at') as HTMLInputElement).value,
  }));
}

async function submitRerun(): Promise<void> {
  const record = state.record;
  if (!record) return;
  captureForm();
  state.formErrors = validateForm(state.form);
  if (state.formErrors.length > 0) {
    renderScenarioForm(); // inline errors, no request
    return;
  }
  try {
    const child = await client.rerun(record.id, toScenarioRequest(state.form));
    location.hash = `#/analysis/${child.id}`;
  } catch (error) {
    state.formErrors = [String((error as Error).message ?? error)];
    renderScenarioForm();
  }
}

function renderComparisonPanel(): void {
  const container = $('comparison');
  const child = state.record?.report;
  if (state.parentReport && child) {
    container.hidden = false;
    container.innerHTML = `<h3>Compared with parent analysis</h3>`
      + renderComparison(state.parentReport, child);
  } else {
    container.hidden = true;
    container.innerHTML = '';
  }
}

// ---- boot ------------------------------------------------------------------------

function boot(): void {
  bindUpload();
  client
    .health()
    .then((h) => {
      $('health').textContent = `service ok · v${h.version}`;
    })
    .catch(() => {
      $('health').textContent = 'service unreachable';
    });
  void route();
}

document.addEventListener('DOMContentLoaded', boot);
