// Finding diff between a parent analysis and a scenario re-run.

import type { Finding, Report } from './types.js';

export interface FindingDiff {
  added: Finding[];
  removed: Finding[];
  unchanged: Finding[];
}

export function diffFindings(parent: Report, child: Report): FindingDiff {
  const parentIds = new Map(parent.findings.map((f) => [f.id, f]));
  const childIds = new Map(child.findings.map((f) => [f.id, f]));
  const added = child.findings.filter((f) => !parentIds.has(f.id));
  const removed = parent.findings.filter((f) => !childIds.has(f.id));
  const unchanged = child.findings.filter((f) => parentIds.has(f.id));
  return { added, removed, unchanged };
}
