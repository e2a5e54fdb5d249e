// The eight analysis tabs. Every renderer is a pure function from service
// data to an HTML string: same report in, same markup out. No analysis
// logic lives here — values are displayed, never derived.

import type {
  AnalysisRecord,
  Finding,
  Report,
  SandboxEvent,
  Severity,
} from './types.js';
import { describeHostPattern, describePermission } from './permissions.js';
import { diffFindings } from './diff.js';

export const TAB_ORDER = [
  'Overview',
  'Vulnerabilities',
  'Permissions',
  'Files',
  'CodeAnalysis',
  'StaticAnalysis',
  'SandboxAnalysis',
  'LlmAnalysis',
] as const;

export type TabName = (typeof TAB_ORDER)[number];

export const TAB_LABELS: Record<TabName, string> = {
  Overview: 'Overview',
  Vulnerabilities: 'Vulnerabilities',
  Permissions: 'Permissions',
  Files: 'Files',
  CodeAnalysis: 'Code Analysis',
  StaticAnalysis: 'Static Analysis',
  SandboxAnalysis: 'Sandbox Analysis',
  LlmAnalysis: 'LLM Analysis',
};

export function escapeHtml(value: unknown): string {
  return String(value ?? '')
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;')
    .replaceAll("'", '&#39;');
}

const SEVERITY_RANK: Record<Severity, number> = {
  High: 3, Medium: 2, Low: 1, Info: 0,
};

export function severityBadge(severity: Severity): string {
  return `<span class="badge sev-${severity.toLowerCase()}">${severity}</span>`;
}

export function verdictBadge(level: string): string {
  return `<span class="badge verdict verdict-${level.toLowerCase()}">${escapeHtml(level)}</span>`;
}

function sortedFindings(findings: Finding[]): Finding[] {
  return [...findings].sort(
    (a, b) => SEVERITY_RANK[b.severity] - SEVERITY_RANK[a.severity]
      || a.id.localeCompare(b.id),
  );
}

function emptyState(text: string): string {
  return `<p class="empty">${escapeHtml(text)}</p>`;
}

function kb(bytes: number): string {
  return bytes >= 1024 ? `${(bytes / 1024).toFixed(1)} KB` : `${bytes} B`;
}

// ---- Overview ---------------------------------------------------------------

export function renderOverview(record: AnalysisRecord, report: Report): string {
  const a = report.artifact;
  const rows: [string, string][] = [
    ['Name', `${escapeHtml(a.name)} ${escapeHtml(a.version)}`],
    ['Kind', escapeHtml(a.kind)],
    ['Publisher', escapeHtml(a.publisher || '(none)')],
    ['Description', escapeHtml(a.description || '(none)')],
    ['Digest', `<code>${escapeHtml(a.digest)}</code>`],
    ['Files', `${a.fileCount} (${kb(a.totalSizeBytes)})`],
    ['Dynamic outcome', escapeHtml(report.outcome.dynamic)
      + (report.outcome.detail ? ` — ${escapeHtml(report.outcome.detail)}` : '')],
    ['Events recorded', String(report.events.count)],
    ['Scenario hash', `<code>${escapeHtml(report.scenarioHash.slice(0, 16))}…</code>`],
    ['Tool version', escapeHtml(report.toolVersion)],
  ];
  if (record.parent) {
    rows.push(['Re-run of', `<a href="#/analysis/${escapeHtml(record.parent)}">${escapeHtml(record.parent)}</a>`]);
  }
  const flags = [
    record.cached ? '<span class="badge flag">cached</span>' : '',
    report.approved ? '<span class="badge flag">analyst-approved</span>' : '',
  ].join(' ');
  return `
    <div class="verdict-line">
      ${verdictBadge(report.verdict.level)}
      <span class="score">score ${report.verdict.score}</span>
      ${flags}
    </div>
    <table class="kv">${rows
      .map(([k, v]) => `<tr><th>${k}</th><td>${v}</td></tr>`)
      .join('')}</table>
    <h3>Verdict reasons</h3>
    ${report.verdict.reasons.length
      ? `<ul class="reasons">${report.verdict.reasons
          .map((r) => `<li><code>${escapeHtml(r)}</code></li>`)
          .join('')}</ul>`
      : emptyState('No contributing findings.')}
  `;
}

// ---- Vulnerabilities ----------------------------------------------------------

export function renderVulnerabilities(report: Report): string {
  const rows = sortedFindings(
    report.findings.filter((f) => f.ruleId === 'vulnerable-library'),
  );
  if (rows.length === 0) {
    return emptyState('No known-vulnerable libraries detected.');
  }
  return `<table class="list">
    <thead><tr><th>Severity</th><th>Library</th><th>Detail</th><th>Location</th></tr></thead>
    <tbody>${rows
      .map(
        (f) => `<tr>
          <td>${severityBadge(f.severity)}</td>
          <td>${escapeHtml(f.title)}</td>
          <td>${escapeHtml(f.detail)}</td>
          <td>${f.location ? fileLink(f) : '—'}</td>
        </tr>`,
      )
      .join('')}</tbody>
  </table>`;
}

// ---- Permissions ---------------------------------------------------------------

export function renderPermissions(report: Report): string {
  const perms = report.artifact.permissions ?? [];
  const hosts = report.artifact.hostPatterns ?? [];
  if (perms.length === 0 && hosts.length === 0) {
    return emptyState('The manifest declares no permissions.');
  }
  const permRows = perms
    .map(
      (p) => `<tr><td><code>${escapeHtml(p)}</code></td><td>${escapeHtml(
        describePermission(p),
      )}</td></tr>`,
    )
    .join('');
  const hostRows = hosts
    .map(
      (p) => `<tr><td><code>${escapeHtml(p)}</code></td><td>${escapeHtml(
        describeHostPattern(p),
      )}</td></tr>`,
    )
    .join('');
  return `<table class="list">
    <thead><tr><th>Permission</th><th>What it allows</th></tr></thead>
    <tbody>${permRows}${hostRows}</tbody>
  </table>`;
}

// ---- Files -----------------------------------------------------------------------

export interface FileTreeNode {
  name: string;
  path: string;
  children: FileTreeNode[];
  isFile: boolean;
}

export function buildFileTree(paths: string[]): FileTreeNode {
  const root: FileTreeNode = { name: '', path: '', children: [], isFile: false };
  for (const path of [...paths].sort()) {
    let node = root;
    const segments = path.split('/');
    segments.forEach((segment, index) => {
      const isFile = index === segments.length - 1;
      let child = node.children.find((c) => c.name === segment && c.isFile === isFile);
      if (!child) {
        child = {
          name: segment,
          path: segments.slice(0, index + 1).join('/'),
          children: [],
          isFile,
        };
        node.children.push(child);
      }
      node = child;
    });
  }
  return root;
}

export function renderFiles(paths: string[], selected?: string,
                            content?: string): string {
  if (paths.length === 0) return emptyState('No files stored for this analysis.');
  const tree = buildFileTree(paths);
  const renderNode = (node: FileTreeNode): string => {
    if (node.isFile) {
      const active = node.path === selected ? ' active' : '';
      return `<li><a class="file${active}" data-file="${escapeHtml(node.path)}" href="#">${escapeHtml(node.name)}</a></li>`;
    }
    const inner = node.children.map(renderNode).join('');
    if (!node.name) return inner;
    return `<li class="dir"><span>${escapeHtml(node.name)}/</span><ul>${inner}</ul></li>`;
  };
  const viewer = selected
    ? `<h4><code>${escapeHtml(selected)}</code></h4><pre class="source">${escapeHtml(content ?? '')}</pre>`
    : emptyState('Select a file to view its contents.');
  return `<div class="files-split">
    <ul class="file-tree">${renderNode(tree)}</ul>
    <div class="file-viewer">${viewer}</div>
  </div>`;
}

// ---- Code Analysis ------------------------------------------------------------------

export function renderCodeAnalysis(report: Report): string {
  if (!report.code || report.code.length === 0) {
    return emptyState('No ECMAScript files in this artifact.');
  }
  return report.code
    .map((unit) => {
      const flagBadges = [
        unit.parseStatus === 'parse-failed'
          ? '<span class="badge sev-medium">parse failed</span>' : '',
        unit.flags.minified ? '<span class="badge flag">minified</span>' : '',
        unit.flags.hasInvisibleUnicode
          ? '<span class="badge sev-high">invisible unicode</span>' : '',
      ].join(' ');
      const m = unit.metrics;
      const calls = unit.callSites
        .map(
          (c) => `<tr><td>${c.line}</td><td><code>${escapeHtml(c.callee)}</code></td>
            <td>${c.args.map((arg) => `<code>${escapeHtml(truncate(arg, 60))}</code>`).join(', ')}</td></tr>`,
        )
        .join('');
      const overflow = unit.callSiteCount > unit.callSites.length
        ? `<p class="empty">…and ${unit.callSiteCount - unit.callSites.length} more call sites</p>`
        : '';
      return `<section class="code-unit">
        <h3><code>${escapeHtml(unit.path)}</code> ${flagBadges}</h3>
        <p class="metrics">
          non-alnum ratio ${m.nonAlnumRatio.toFixed(3)} ·
          avg identifier ${m.avgIdentifierLength.toFixed(1)} ·
          max line ${m.maxLineLength} ·
          entropy ${m.entropyBitsPerChar.toFixed(2)} bits/char ·
          strings: ${escapeHtml(JSON.stringify(unit.stringLiterals))}
        </p>
        ${calls
          ? `<table class="list"><thead><tr><th>Line</th><th>Call</th><th>String args</th></tr></thead><tbody>${calls}</tbody></table>`
          : emptyState('No call sites recorded.')}
        ${overflow}
      </section>`;
    })
    .join('');
}

function truncate(value: string, max: number): string {
  return value.length > max ? `${value.slice(0, max)}…` : value;
}

// ---- Static Analysis -------------------------------------------------------------------

function fileLink(finding: Finding): string {
  const location = finding.location!;
  const label = `${location.path}${location.line !== undefined ? `:${location.line}` : ''}`;
  return `<a class="file" data-file="${escapeHtml(location.path)}" href="#">${escapeHtml(label)}</a>`;
}

export function renderStaticAnalysis(report: Report): string {
  const rows = sortedFindings(report.findings);
  if (rows.length === 0) return emptyState('No findings.');
  const contradictions = new Set(report.contradictions);
  return `<table class="list findings">
    <thead><tr><th>Severity</th><th>Finding</th><th>Evidence</th><th>Where</th><th>Phase</th></tr></thead>
    <tbody>${rows
      .map(
        (f) => `<tr class="${contradictions.has(f.id) ? 'contradiction' : ''}">
          <td>${severityBadge(f.severity)}</td>
          <td><strong>${escapeHtml(f.title)}</strong><br><span class="detail">${escapeHtml(f.detail)}</span></td>
          <td>${f.evidence ? `<code class="evidence">${escapeHtml(truncate(f.evidence, 120))}</code>` : '—'}</td>
          <td>${f.location ? fileLink(f) : 'artifact'}</td>
          <td>${escapeHtml(f.phase)}</td>
        </tr>`,
      )
      .join('')}</tbody>
  </table>`;
}

// ---- Sandbox Analysis ----------------------------------------------------------------------

export function renderTimelineRows(events: SandboxEvent[], startMs: number): string {
  return events
    .map(
      (e) => `<tr class="cat-${escapeHtml(e.category)}">
        <td class="t">+${e.virtualTimeMs - startMs}ms</td>
        <td>${escapeHtml(e.category)}</td>
        <td><code>${escapeHtml(e.action)}</code>${e.blocked ? ' <span class="badge sev-high">blocked</span>' : ''}</td>
        <td class="args">${escapeHtml(truncate(e.argsSummary, 160))}</td>
        <td class="origin">${escapeHtml(e.origin || '')}</td>
      </tr>`,
    )
    .join('');
}

export function renderSandboxAnalysis(report: Report,
                                      events: SandboxEvent[]): string {
  const start = typeof report.scenario.virtualStartDate === 'number'
    ? (report.scenario.virtualStartDate as number)
    : events.length > 0 ? events[0].virtualTimeMs : 0;
  const counts = new Map<string, number>();
  for (const e of events) counts.set(e.category, (counts.get(e.category) ?? 0) + 1);
  const summary = [...counts.entries()]
    .sort((a, b) => b[1] - a[1])
    .map(([category, n]) => `<span class="pill">${escapeHtml(category)}: ${n}</span>`)
    .join(' ');
  const body = events.length > 0
    ? `<div class="timeline-wrap"><table class="list timeline">
        <thead><tr><th>Virtual time</th><th>Category</th><th>Action</th><th>Details</th><th>Origin</th></tr></thead>
        <tbody id="timeline-body">${renderTimelineRows(events, start)}</tbody>
      </table></div>`
    : emptyState('No sandbox events (dynamic phase skipped or silent).');
  return `
    <p>Outcome: <strong>${escapeHtml(report.outcome.dynamic)}</strong>
      ${report.outcome.detail ? `(${escapeHtml(report.outcome.detail)})` : ''}
      · ${events.length} events</p>
    <p class="pills">${summary}</p>
    ${body}
  `;
}

// ---- LLM Analysis ---------------------------------------------------------------------------

export function renderLlmAnalysis(report: Report): string {
  if (!report.llm) {
    return emptyState('Model narrative skipped for this analysis.');
  }
  return `
    <p class="advisory-note">Advisory only — the deterministic verdict above
      is computed from concrete findings and is never overridden by the model.</p>
    <p>Model: <code>${escapeHtml(report.llm.model)}</code> ·
       Stated risk level: ${verdictBadge(report.llm.riskLevel)}</p>
    <div class="narrative">${escapeHtml(report.llm.narrative)}</div>
  `;
}

// ---- diff view (parent/child comparison) -------------------------------------------------------

export function renderComparison(parent: Report, child: Report): string {
  const diff = diffFindings(parent, child);
  const section = (title: string, items: Finding[]) =>
    `<h4>${title} (${items.length})</h4>${
      items.length
        ? `<ul>${sortedFindings(items)
            .map((f) => `<li>${severityBadge(f.severity)} ${escapeHtml(f.title)} <code>${escapeHtml(f.id)}</code></li>`)
            .join('')}</ul>`
        : emptyState('none')
    }`;
  return `<div class="diff">
    <div class="diff-col">
      <h3>Parent ${verdictBadge(parent.verdict.level)}</h3>
      ${section('Only in parent', diff.removed)}
    </div>
    <div class="diff-col">
      <h3>Re-run ${verdictBadge(child.verdict.level)}</h3>
      ${section('New in re-run', diff.added)}
      ${section('Unchanged', diff.unchanged)}
    </div>
  </div>`;
}

// ---- dispatcher ------------------------------------------------------------------------------

export interface TabContext {
  record: AnalysisRecord;
  report: Report;
  events: SandboxEvent[];
  files: string[];
  selectedFile?: string;
  fileContent?: string;
}

export function renderTab(tab: TabName, ctx: TabContext): string {
  switch (tab) {
    case 'Overview': return renderOverview(ctx.record, ctx.report);
    case 'Vulnerabilities': return renderVulnerabilities(ctx.report);
    case 'Permissions': return renderPermissions(ctx.report);
    case 'Files': return renderFiles(ctx.files, ctx.selectedFile, ctx.fileContent);
    case 'CodeAnalysis': return renderCodeAnalysis(ctx.report);
    case 'StaticAnalysis': return renderStaticAnalysis(ctx.report);
    case 'SandboxAnalysis': return renderSandboxAnalysis(ctx.report, ctx.events);
    case 'LlmAnalysis': return renderLlmAnalysis(ctx.report);
  }
}
