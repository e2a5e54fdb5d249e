// Wire types for the analysis service. Field names mirror the report JSON
// schema exactly; the dashboard never derives analysis facts client-side.

export type Severity = 'Info' | 'Low' | 'Medium' | 'High';
export type RiskLevel = 'Low' | 'Medium' | 'High';
export type AnalysisState = 'queued' | 'running' | 'done' | 'failed';

export interface FindingLocation {
  path: string;
  line?: number;
  col?: number;
  start?: number;
  length?: number;
}

export interface Finding {
  id: string;
  ruleId: string;
  severity: Severity;
  title: string;
  detail: string;
  phase: 'static' | 'dynamic';
  evidence?: string;
  location?: FindingLocation;
}

export interface CallSiteSummary {
  callee: string;
  line: number;
  args: string[];
}

export interface CodeUnitSummary {
  path: string;
  parseStatus: 'parsed' | 'parse-failed';
  flags: { minified: boolean; hasInvisibleUnicode: boolean };
  metrics: {
    nonAlnumRatio: number;
    avgIdentifierLength: number;
    maxLineLength: number;
    entropyBitsPerChar: number;
  };
  callSites: CallSiteSummary[];
  callSiteCount: number;
  stringLiterals: Record<string, number>;
}

export interface Report {
  schema: number;
  toolVersion: string;
  artifact: {
    digest: string;
    kind: string;
    name: string;
    version: string;
    publisher: string;
    description: string;
    permissions: string[];
    hostPatterns: string[];
    fileCount: number;
    totalSizeBytes: number;
  };
  scenarioHash: string;
  scenario: Record<string, unknown>;
  verdict: { level: RiskLevel; score: number; reasons: string[] };
  findings: Finding[];
  contradictions: string[];
  events: { count: number; ref: string };
  outcome: { dynamic: string; detail: string };
  code: CodeUnitSummary[];
  timings: Record<string, number>;
  llm?: { model: string; riskLevel: string; narrative: string };
  approved?: boolean;
}

export interface AnalysisRecord {
  id: string;
  state: AnalysisState;
  digest: string;
  scenarioHash: string;
  createdAt: number;
  cached: boolean;
  parent?: string;
  error?: string;
  report?: Report;
}

export interface SandboxEvent {
  seq: number;
  virtualTimeMs: number;
  category: string;
  action: string;
  blocked: boolean;
  origin: string;
  argsSummary: string;
}

export interface NavigationRequest {
  url: string;
  atVirtualTimeMs: number;
}

// Exactly the scenario fields the service accepts over the wire.
export interface ScenarioRequest {
  virtualStartDate?: number;
  fastForwardThresholdMs?: number;
  maxVirtualHorizonMs?: number;
  maxTasks?: number;
  navigations?: NavigationRequest[];
  cookieJar?: Record<string, { name: string; value: string }[]>;
  clipboardText?: string;
  networkPolicy?: 'block' | 'stub' | 'record';
  stubResponses?: Record<string, { status: number; body: string }>;
  dummyStorage?: Record<string, unknown>;
  skipLlm?: boolean;
}
