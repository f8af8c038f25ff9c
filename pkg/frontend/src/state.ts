/**
 * View-model helpers kept free of DOM access so they stay unit-testable.
 * The server is the authority for every number; these functions only
 * organize responses for rendering and guard double submissions.
 */

import type { EntryView, LogEntry } from "./api.js";

/** Deduplicates in-flight mutating actions: a second identical action is
 * ignored until the first one's sequence number has come back. */
export class PendingGuard {
  private pending = new Set<string>();
  private seen = new Map<string, number>();

  begin(key: string): boolean {
    if (this.pending.has(key)) {
      return false;
    }
    this.pending.add(key);
    return true;
  }

  end(key: string, seq?: number): void {
    this.pending.delete(key);
    if (seq !== undefined) {
      const prior = this.seen.get(key);
      if (prior !== undefined && prior === seq) {
        return; // duplicate response for the same action
      }
      this.seen.set(key, seq);
    }
  }

  inFlight(key: string): boolean {
    return this.pending.has(key);
  }
}

/** Cursor over the replay log for long polling; remembers the last seq so
 * refreshes are incremental. */
export class LogCursor {
  position = 0;

  advance(entries: LogEntry[], position: number): LogEntry[] {
    const fresh = entries.filter((e) => e.seq > this.position);
    this.position = Math.max(this.position, position);
    return fresh;
  }
}

/** Entries sorted for display along one objective dimension. */
export function sortByDimension(entries: EntryView[], dim: number): EntryView[] {
  return [...entries].sort((a, b) =>
    a.vector[dim] - b.vector[dim] || a.ruleset.localeCompare(b.ruleset));
}

/** Client-side oracle used by tests: the minimum of a dimension over the
 * listed entries (the navigator itself always asks the server). */
export function minimumInDimension(entries: EntryView[], dim: number): number | null {
  if (entries.length === 0) {
    return null;
  }
  return Math.min(...entries.map((e) => e.vector[dim]));
}

/** True when some rule of the entry matches a reject-pattern slot list the
 * way the server does: every slot matched by some proposition. */
export function entryUsesFeature(entry: EntryView, feature: string): boolean {
  const needle = new RegExp(`(^|[( ])${feature}\\s*(=|!=|<=|>=)`);
  return entry.rules.some((r) => needle.test(r.text));
}

export interface ScatterPoint {
  x: number;
  y: number;
  digest: string;
  selected: boolean;
}

/** Project front entries onto two dimensions for the objective scatter. */
export function scatterPoints(entries: EntryView[], dimX: number, dimY: number,
                              selectedDigest: string | null): ScatterPoint[] {
  return entries.map((e) => ({
    x: e.vector[dimX],
    y: e.vector[dimY],
    digest: e.digest,
    selected: e.digest === selectedDigest,
  }));
}

/** Scale points into a pixel box, padding included; pure for testing. */
export function scaleToBox(points: ScatterPoint[], width: number, height: number,
                           pad: number): (ScatterPoint & { px: number; py: number })[] {
  if (points.length === 0) {
    return [];
  }
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMin = Math.min(...ys), yMax = Math.max(...ys);
  const spanX = xMax - xMin || 1;
  const spanY = yMax - yMin || 1;
  return points.map((p) => ({
    ...p,
    // smaller is better on both axes: best points gather at the lower left
    px: pad + ((p.x - xMin) / spanX) * (width - 2 * pad),
    py: pad + ((yMax - p.y) / spanY) * (height - 2 * pad),
  }));
}
