/**
 * Typed client for the covermine HTTP API.
 *
 * The UI holds no mining logic: every displayed number originates from one
 * of these responses.
 */

export interface RuleView {
  text: string;
  exclusion: boolean;
  visited: boolean;
  accepted: boolean;
}

export interface EntryView {
  digest: string;
  ruleset: string;
  formatted: string;
  vector: number[];
  evaluation: Record<string, number>;
  rules: RuleView[];
  neighbors?: Record<string, { next: string | null; previous: string | null }>;
  at_boundary?: boolean;
}

export interface FrontView {
  digest: string;
  entries: EntryView[];
}

export interface StatusView {
  dataset_version: number;
  record_count: number;
  cause_count: number;
  front_size: number;
  front_digest: string;
  target_function: string;
  bounds: (number | null)[];
  dimensions: string[];
  agents: { id: number; iterations: number; state: string; last_action: string }[];
  queues: { local_search: number; path_relink: number };
  log_position: number;
}

export interface RecordView {
  id: string;
  values: Record<string, string | number>;
  causes: string[];
}

export interface FeatureStatsView {
  feature: string;
  kind: string;
  count: number;
  top_values?: [string, number][];
  minimum?: number | null;
  maximum?: number | null;
  mean?: number | null;
}

export interface LogEntry {
  seq: number;
  kind: string;
  actor: string;
  params?: Record<string, unknown>;
  digest?: string;
}

export interface ActionResult {
  seq: number;
  [key: string]: unknown;
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string,
              readonly position?: number) {
    super(detail);
  }
}

export class Client {
  constructor(readonly base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.base + path, init);
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(response.status, String(payload.detail ?? response.statusText),
                         typeof payload.position === "number" ? payload.position : undefined);
    }
    return payload as T;
  }

  status(): Promise<StatusView> {
    return this.request("GET", "/status");
  }

  front(): Promise<FrontView> {
    return this.request("GET", "/front");
  }

  entry(digest: string): Promise<EntryView> {
    return this.request("GET", `/front/${digest}`);
  }

  bestInDimension(dim: string): Promise<EntryView> {
    return this.request("GET", `/front/best?dim=${encodeURIComponent(dim)}`);
  }

  navigate(from: string, dim: string, direction: 1 | -1): Promise<EntryView> {
    const q = `dim=${encodeURIComponent(dim)}&dir=${direction}&from=${from}`;
    return this.request("GET", `/front/navigate?${q}`);
  }

  submitRuleset(text: string): Promise<ActionResult> {
    return this.request("POST", "/rulesets", { text });
  }

  setTarget(spec: string): Promise<ActionResult> {
    return this.request("POST", "/target-function", { spec });
  }

  setBounds(upper: (number | null)[]): Promise<ActionResult> {
    return this.request("POST", "/bounds", { upper });
  }

  reject(slots: { feature: string; op?: string; value?: string | number }[]): Promise<ActionResult> {
    return this.request("POST", "/feedback/reject", { slots });
  }

  accept(rule: string): Promise<ActionResult> {
    return this.request("POST", "/feedback/accept", { rule });
  }

  undo(restrictionId: number): Promise<ActionResult> {
    return this.request("POST", "/feedback/undo", { restriction_id: restrictionId });
  }

  markVisited(rule: string, flag = true): Promise<ActionResult> {
    return this.request("POST", "/feedback/visited", { rule, flag });
  }

  trim(keep: number, seed = 0): Promise<ActionResult> {
    return this.request("POST", "/front/trim", { keep, seed });
  }

  stats(ruleset?: string): Promise<{ stats: FeatureStatsView[] }> {
    const q = ruleset ? `?ruleset=${encodeURIComponent(ruleset)}` : "";
    return this.request("GET", `/stats${q}`);
  }

  sample(ruleset: string | undefined, n: number, seed: number): Promise<{ records: RecordView[] }> {
    const base = ruleset ? `ruleset=${encodeURIComponent(ruleset)}&` : "";
    return this.request("GET", `/records/sample?${base}n=${n}&seed=${seed}`);
  }

  misclassified(ruleset: string): Promise<{
    false_positives: RecordView[];
    missed_causes: Record<string, RecordView[]>;
  }> {
    return this.request("GET", `/records/misclassified?ruleset=${encodeURIComponent(ruleset)}`);
  }

  defaultBranch(ruleset: string, n: number, seed: number): Promise<{ records: RecordView[] }> {
    const q = `ruleset=${encodeURIComponent(ruleset)}&n=${n}&seed=${seed}`;
    return this.request("GET", `/records/default-branch?${q}`);
  }

  removeRecords(predicate: string): Promise<ActionResult> {
    return this.request("POST", "/records/remove", { predicate });
  }

  relabel(recordId: string, causeIds: string[]): Promise<ActionResult> {
    return this.request("POST", "/records/relabel", { record_id: recordId, cause_ids: causeIds });
  }

  addComputedFeature(name: string, expression: string): Promise<ActionResult> {
    return this.request("POST", "/features/computed", { name, expression });
  }

  startAgents(n: number, seed?: number): Promise<{ agents: unknown[] }> {
    return this.request("POST", "/agents/start", seed === undefined ? { n } : { n, seed });
  }

  stopAgents(): Promise<{ agents: unknown[] }> {
    return this.request("POST", "/agents/stop", {});
  }

  logSince(since: number, timeoutSeconds: number): Promise<{ entries: LogEntry[]; position: number }> {
    return this.request("GET", `/log?since=${since}&timeout=${timeoutSeconds}`);
  }
}
