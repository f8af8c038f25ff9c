/**
 * DOM rendering for the three panes: front navigator, rule detail with
 * feedback forms, and data exploration.  Rendering is replace-children
 * style; state lives in main.ts and every value shown comes from the API.
 */

import type { EntryView, FeatureStatsView, RecordView, StatusView } from "./api.js";
import { ScatterPoint, scaleToBox } from "./state.js";

export function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, attrs: Record<string, string> = {}, ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") {
      node.className = v;
    } else {
      node.setAttribute(k, v);
    }
  }
  node.append(...children);
  return node;
}

export function renderStatus(root: HTMLElement, status: StatusView): void {
  const agents = status.agents.length
    ? status.agents.map((a) => `#${a.id} ${a.state} (${a.iterations} it)`).join(", ")
    : "no agents";
  root.replaceChildren(
    el("span", { class: "chip" }, `${status.record_count} records`),
    el("span", { class: "chip" }, `${status.cause_count} causes`),
    el("span", { class: "chip" }, `front ${status.front_size}`),
    el("span", { class: "chip" }, `target ${status.target_function}`),
    el("span", { class: "chip" }, agents),
  );
}

export function renderFrontList(root: HTMLElement, entries: EntryView[],
                                selected: string | null,
                                onPick: (digest: string) => void): void {
  const items = entries.map((entry) => {
    const row = el("li",
      { class: "front-row" + (entry.digest === selected ? " selected" : ""), tabindex: "0" },
      el("code", { class: "vector" }, `(${entry.vector.join(", ")})`),
      el("span", { class: "ruleset" }, entry.ruleset),
    );
    row.addEventListener("click", () => onPick(entry.digest));
    return row;
  });
  root.replaceChildren(...items);
}

export function renderScatter(canvas: HTMLCanvasElement, points: ScatterPoint[],
                              labels: [string, string],
                              onPick: (digest: string) => void): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const { width, height } = canvas;
  const pad = 18;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#8884";
  ctx.strokeRect(pad, pad, width - 2 * pad, height - 2 * pad);
  ctx.fillStyle = "#666";
  ctx.font = "10px sans-serif";
  ctx.fillText(labels[0], width / 2 - 20, height - 4);
  ctx.save();
  ctx.translate(10, height / 2 + 20);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(labels[1], 0, 0);
  ctx.restore();
  const placed = scaleToBox(points, width, height, pad);
  for (const p of placed) {
    ctx.beginPath();
    ctx.arc(p.px, p.py, p.selected ? 6 : 4, 0, Math.PI * 2);
    ctx.fillStyle = p.selected ? "#d97706" : "#2563eb";
    ctx.fill();
  }
  canvas.onclick = (event) => {
    const rect = canvas.getBoundingClientRect();
    const x = (event.clientX - rect.left) * (width / rect.width);
    const y = (event.clientY - rect.top) * (height / rect.height);
    let best: { digest: string; d: number } | null = null;
    for (const p of placed) {
      const d = (p.px - x) ** 2 + (p.py - y) ** 2;
      if (best === null || d < best.d) {
        best = { digest: p.digest, d };
      }
    }
    if (best && best.d <= 15 ** 2) {
      onPick(best.digest);
    }
  };
}

export interface RuleActions {
  onAccept: (rule: string) => void;
  onRejectRule: (rule: string) => void;
  onVisited: (rule: string, flag: boolean) => void;
}

export function renderEntryDetail(root: HTMLElement, entry: EntryView | null,
                                  actions: RuleActions): void {
  if (entry === null) {
    root.replaceChildren(el("p", { class: "empty" },
      "Front is empty (within bounds). Start an agent or submit a ruleset."));
    return;
  }
  const evaluation = el("table", { class: "kv" });
  for (const [key, value] of Object.entries(entry.evaluation)) {
    evaluation.append(el("tr", {}, el("td", {}, key), el("td", {}, String(value))));
  }
  const rules = entry.rules.map((rule) => {
    const marks = [
      rule.exclusion ? "except" : "include",
      rule.visited ? "visited" : "",
      rule.accepted ? "accepted" : "",
    ].filter(Boolean).join(" ");
    const block = el("div", { class: `rule ${rule.visited ? "visited" : ""} ${rule.accepted ? "accepted" : ""}` },
      el("code", {}, rule.text),
      el("span", { class: "marks" }, marks),
    );
    const buttons = el("div", { class: "rule-buttons" });
    const visitedBtn = el("button", {}, rule.visited ? "unvisit" : "visited");
    visitedBtn.addEventListener("click", () => actions.onVisited(rule.text, !rule.visited));
    const acceptBtn = el("button", {}, "accept");
    acceptBtn.addEventListener("click", () => actions.onAccept(rule.text));
    const rejectBtn = el("button", {}, "reject");
    rejectBtn.addEventListener("click", () => actions.onRejectRule(rule.text));
    buttons.append(visitedBtn, acceptBtn, rejectBtn);
    block.append(buttons);
    return block;
  });
  root.replaceChildren(
    el("h3", {}, `ruleset ${entry.digest}`),
    el("pre", { class: "formatted" }, entry.formatted),
    el("div", { class: "rules" }, ...rules),
    el("h4", {}, "evaluation"),
    evaluation,
  );
}

export function renderStats(root: HTMLElement, stats: FeatureStatsView[]): void {
  const table = el("table", { class: "stats" },
    el("tr", {}, el("th", {}, "feature"), el("th", {}, "kind"), el("th", {}, "summary")));
  for (const s of stats) {
    let summary: string;
    if (s.kind === "nominal") {
      summary = (s.top_values ?? []).map(([v, c]) => `${v}: ${c}`).join(", ");
    } else if (s.mean === null || s.mean === undefined) {
      summary = "no values";
    } else {
      summary = `min ${s.minimum} / mean ${s.mean?.toFixed(3)} / max ${s.maximum}`;
    }
    table.append(el("tr", {},
      el("td", {}, s.feature), el("td", {}, s.kind), el("td", {}, summary)));
  }
  root.replaceChildren(el("h4", {}, "feature statistics"), table);
}

export function renderRecords(root: HTMLElement, title: string, records: RecordView[]): void {
  if (records.length === 0) {
    root.replaceChildren(el("h4", {}, title), el("p", { class: "empty" }, "none"));
    return;
  }
  const features = Object.keys(records[0].values);
  const table = el("table", { class: "records" },
    el("tr", {}, el("th", {}, "id"),
      ...features.map((f) => el("th", {}, f)), el("th", {}, "causes")));
  for (const r of records) {
    table.append(el("tr", {},
      el("td", {}, r.id),
      ...features.map((f) => el("td", {}, String(r.values[f]))),
      el("td", {}, r.causes.join(";"))));
  }
  root.replaceChildren(el("h4", {}, title), table);
}

export function renderMissedCauses(root: HTMLElement,
                                   missed: Record<string, RecordView[]>): void {
  const blocks: Node[] = [el("h4", {}, "missed causes")];
  const causes = Object.keys(missed);
  if (causes.length === 0) {
    blocks.push(el("p", { class: "empty" }, "every cause is covered"));
  }
  for (const cause of causes) {
    blocks.push(el("details", {},
      el("summary", {}, `${cause} (${missed[cause].length} records)`),
      el("div", { class: "cause-records" },
        ...missed[cause].map((r) => el("code", { class: "rid" }, r.id)))));
  }
  root.replaceChildren(...blocks);
}

export function showError(root: HTMLElement, message: string | null): void {
  root.textContent = message ?? "";
  root.classList.toggle("visible", message !== null);
}
