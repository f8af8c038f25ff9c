/**
 * Application wiring: keeps one AppState, refreshes it from the service via
 * log long-polling, and routes form submissions through a PendingGuard so
 * double clicks cannot fire an action twice.
 */

import { ApiError, Client, EntryView } from "./api.js";
import { LogCursor, PendingGuard, scatterPoints } from "./state.js";
import {
  el, renderEntryDetail, renderFrontList, renderMissedCauses, renderRecords,
  renderScatter, renderStats, renderStatus, showError,
} from "./views.js";

const client = new Client("");
const guard = new PendingGuard();
const cursor = new LogCursor();

interface AppState {
  dimensions: string[];
  entries: EntryView[];
  selected: string | null;
  scatterX: number;
  scatterY: number;
  restrictionIds: number[];
}

const state: AppState = {
  dimensions: [],
  entries: [],
  selected: null,
  scatterX: 0,
  scatterY: 1,
  restrictionIds: [],
};

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

function reportError(err: unknown): void {
  const box = byId("error-box");
  if (err instanceof ApiError) {
    const where = err.position !== undefined ? ` (position ${err.position})` : "";
    showError(box, `${err.detail}${where}`);
  } else {
    showError(box, String(err));
  }
  window.setTimeout(() => showError(box, null), 6000);
}

/** Runs a mutating action once per key; remembers returned seq and undo ids. */
async function act(key: string, run: () => Promise<{ seq?: number; restriction_id?: number }>):
    Promise<void> {
  if (!guard.begin(key)) {
    return;
  }
  try {
    const out = await run();
    if (typeof out.restriction_id === "number") {
      state.restrictionIds.push(out.restriction_id);
      renderUndo();
    }
    guard.end(key, out.seq);
    await refresh();
  } catch (err) {
    guard.end(key);
    reportError(err);
  }
}

async function refresh(): Promise<void> {
  const [status, front] = await Promise.all([client.status(), client.front()]);
  state.dimensions = status.dimensions;
  state.entries = front.entries;
  if (state.selected && !front.entries.some((e) => e.digest === state.selected)) {
    state.selected = null; // trimmed or rejected away; never show stale digests
  }
  renderStatus(byId("status-bar"), status);
  renderFrontList(byId("front-list"), state.entries, state.selected, pick);
  renderScatter(byId("scatter") as HTMLCanvasElement,
                scatterPoints(state.entries, state.scatterX, state.scatterY, state.selected),
                [state.dimensions[state.scatterX] ?? "", state.dimensions[state.scatterY] ?? ""],
                pick);
  renderDimensionControls();
  await renderDetail();
}

async function renderDetail(): Promise<void> {
  const root = byId("entry-detail");
  if (state.selected === null) {
    renderEntryDetail(root, null, ruleActions);
    return;
  }
  try {
    const entry = await client.entry(state.selected);
    renderEntryDetail(root, entry, ruleActions);
  } catch {
    state.selected = null;
    renderEntryDetail(root, null, ruleActions);
  }
}

function pick(digest: string): void {
  state.selected = digest;
  void refresh();
}

const ruleActions = {
  onAccept: (rule: string) => void act(`accept:${rule}`, () => client.accept(rule)),
  onRejectRule: (rule: string) => {
    // rejecting a rule rejects its exact proposition pattern
    const slots = rulePropositions(rule);
    void act(`reject:${rule}`, () => client.reject(slots));
  },
  onVisited: (rule: string, flag: boolean) =>
    void act(`visited:${rule}:${flag}`, () => client.markVisited(rule, flag)),
};

/** Splits a rule text "(a = 1 and b <= 2)" into reject-pattern slots. */
export function rulePropositions(rule: string):
    { feature: string; op: string; value: string | number }[] {
  const inner = rule.replace(/^\(|\)$/g, "");
  return inner.split(/\s+and\s+/).map((prop) => {
    const m = prop.match(/^(\S+)\s*(<=|>=|!=|=)\s*(.+)$/);
    if (!m) {
      throw new Error(`cannot parse proposition: ${prop}`);
    }
    const raw = m[3].trim().replace(/^"|"$/g, "");
    const numeric = m[2] === "<=" || m[2] === ">=";
    return { feature: m[1], op: m[2], value: numeric ? Number(raw) : raw };
  });
}

function renderDimensionControls(): void {
  const nav = byId("dim-nav");
  nav.replaceChildren(...state.dimensions.map((dim, i) => {
    const row = el("div", { class: "dim-row" },
      el("span", { class: "dim-name" }, dim));
    const prev = el("button", { title: `previous along ${dim}` }, "◀");
    const best = el("button", { title: `best ${dim}` }, "best");
    const next = el("button", { title: `next along ${dim}` }, "▶");
    best.addEventListener("click", () => {
      client.bestInDimension(dim).then((entry) => {
        state.selected = entry.digest;
        void refresh();
      }).catch(reportError);
    });
    const step = (direction: 1 | -1) => () => {
      if (!state.selected) {
        return;
      }
      client.navigate(state.selected, dim, direction).then((entry) => {
        if (entry.at_boundary) {
          showError(byId("error-box"), `already at the ${direction > 0 ? "top" : "bottom"} of ${dim}`);
          window.setTimeout(() => showError(byId("error-box"), null), 2000);
        }
        state.selected = entry.digest;
        void refresh();
      }).catch(reportError);
    };
    prev.addEventListener("click", step(-1));
    next.addEventListener("click", step(1));
    row.append(prev, best, next);
    return row;
  }));
  const axes = byId("scatter-axes");
  axes.replaceChildren(...["x", "y"].map((axis, which) => {
    const select = el("select", {});
    state.dimensions.forEach((dim, i) => {
      const option = el("option", { value: String(i) }, dim);
      if ((which === 0 ? state.scatterX : state.scatterY) === i) {
        option.setAttribute("selected", "selected");
      }
      select.append(option);
    });
    select.addEventListener("change", () => {
      if (which === 0) {
        state.scatterX = Number(select.value);
      } else {
        state.scatterY = Number(select.value);
      }
      void refresh();
    });
    return el("label", {}, `${axis}: `, select);
  }));
}

function renderUndo(): void {
  const root = byId("undo-list");
  root.replaceChildren(...state.restrictionIds.slice(-8).map((rid) => {
    const button = el("button", {}, `undo #${rid}`);
    button.addEventListener("click", () => void act(`undo:${rid}`, async () => {
      const out = await client.undo(rid);
      state.restrictionIds = state.restrictionIds.filter((x) => x !== rid);
      renderUndo();
      return out;
    }));
    return button;
  }));
}

function wireForms(): void {
  byId("submit-ruleset").addEventListener("submit", (event) => {
    event.preventDefault();
    const input = byId("ruleset-text") as HTMLTextAreaElement;
    void act(`submit:${input.value}`, () => client.submitRuleset(input.value));
  });
  byId("target-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const spec = (byId("target-spec") as HTMLInputElement).value;
    void act(`target:${spec}`, () => client.setTarget(spec));
  });
  byId("bounds-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const raw = (byId("bounds-text") as HTMLInputElement).value;
    const upper = raw.split(",").map((b) => b.trim() === "" ? null : Number(b.trim()));
    void act(`bounds:${raw}`, () => client.setBounds(upper));
  });
  byId("trim-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const keep = Number((byId("trim-keep") as HTMLInputElement).value);
    void act(`trim:${keep}`, () => client.trim(keep, Date.now() % 100000));
  });
  byId("reject-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const feature = (byId("reject-feature") as HTMLInputElement).value.trim();
    const op = (byId("reject-op") as HTMLSelectElement).value;
    const slots: { feature: string; op?: string }[] = [{ feature }];
    if (op !== "") {
      slots[0].op = op;
    }
    void act(`reject-pattern:${feature}:${op}`, () => client.reject(slots));
  });
  byId("agents-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const n = Number((byId("agents-n") as HTMLInputElement).value);
    void act(`agents:${n}`, async () => {
      await client.startAgents(n);
      return {};
    });
  });
  byId("agents-stop").addEventListener("click", () => {
    void act("agents-stop", async () => {
      await client.stopAgents();
      return {};
    });
  });
  byId("computed-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const name = (byId("computed-name") as HTMLInputElement).value.trim();
    const expression = (byId("computed-expr") as HTMLInputElement).value;
    void act(`computed:${name}`, () => client.addComputedFeature(name, expression));
  });
  byId("remove-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const predicate = (byId("remove-predicate") as HTMLInputElement).value;
    void act(`remove:${predicate}`, () => client.removeRecords(predicate));
  });
  byId("relabel-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const rid = (byId("relabel-id") as HTMLInputElement).value.trim();
    const causes = (byId("relabel-causes") as HTMLInputElement).value
      .split(";").map((c) => c.trim()).filter(Boolean);
    void act(`relabel:${rid}`, () => client.relabel(rid, causes));
  });
  byId("explore-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void refreshExploration();
  });
}

async function refreshExploration(): Promise<void> {
  const predicate = (byId("explore-predicate") as HTMLInputElement).value.trim();
  const view = (byId("explore-view") as HTMLSelectElement).value;
  try {
    const statsBody = await client.stats(predicate || undefined);
    renderStats(byId("stats-pane"), statsBody.stats);
    const recordsRoot = byId("records-pane");
    if (view === "sample") {
      const body = await client.sample(predicate || undefined, 12, Date.now() % 1000);
      renderRecords(recordsRoot, "sample", body.records);
    } else if (view === "misclassified" && predicate) {
      const body = await client.misclassified(predicate);
      renderRecords(recordsRoot, "false positives", body.false_positives);
      renderMissedCauses(byId("missed-pane"), body.missed_causes);
      return;
    } else if (view === "default-branch" && predicate) {
      const body = await client.defaultBranch(predicate, 12, Date.now() % 1000);
      renderRecords(recordsRoot, "default branch", body.records);
    }
    byId("missed-pane").replaceChildren();
  } catch (err) {
    reportError(err);
  }
}

/** Long-poll loop: any new log entry triggers a snapshot refresh, so the
 * front view follows the agents live without merging anything client-side. */
async function followLog(): Promise<void> {
  for (;;) {
    try {
      const body = await client.logSince(cursor.position, 25);
      const fresh = cursor.advance(body.entries, body.position);
      if (fresh.length > 0) {
        await refresh();
      }
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 2000));
    }
  }
}

export function start(): void {
  wireForms();
  void refresh().then(() => void refreshExploration());
  void followLog();
}

if (typeof document !== "undefined" && document.getElementById("front-list")) {
  start();
}
