/** Pure HTML renderers: state in, markup string out.
 *
 * Keeping these pure lets tests assert on the exact rendered output
 * (disabled buttons, alert badges) without a browser.
 */

import { ACTIONS, isAllowed, type Action } from "./fsm.js";
import {
  STALE_AFTER_S,
  totalDrops,
  type ConsoleViewState,
  type NodeRow,
} from "./state.js";
import { PHASES, type Phase } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderStepper(phase: Phase): string {
  const reached = PHASES.indexOf(phase);
  const steps = PHASES.map((name, i) => {
    const cls =
      i < reached ? "step done" : i === reached ? "step current" : "step";
    return `<li class="${cls}" data-phase="${name}">${name}</li>`;
  });
  return `<ol class="stepper">${steps.join("")}</ol>`;
}

export function renderControls(state: ConsoleViewState): string {
  const buttons = ACTIONS.map((action) => {
    const enabled = state.connected && isAllowed(action, state.phase);
    const disabled = enabled ? "" : " disabled";
    return (
      `<button class="control" data-action="${action}"${disabled}>` +
      `${action}</button>`
    );
  });
  return `<div class="controls">${buttons.join("")}</div>`;
}

/** Single toggle echoing the physical LED start/stop button. */
export function renderTriggerToggle(state: ConsoleViewState): string {
  const on = state.triggerRunning;
  const action: Action = on ? "stop" : "start";
  const enabled = state.connected && isAllowed(action, state.phase);
  return (
    `<button class="trigger-led ${on ? "on" : "off"}" data-action="${action}"` +
    `${enabled ? "" : " disabled"}>` +
    `<span class="led"></span>trigger ${on ? "running" : "stopped"}</button>`
  );
}

function renderNodeCard(row: NodeRow): string {
  const node = row.node;
  const sensors = Object.entries(node.sensors);
  const faults = sensors.reduce((n, [, s]) => n + s.faults, 0);
  const records = sensors.reduce((n, [, s]) => n + s.records, 0);
  const classes = ["node"];
  if (node.recording) classes.push("recording");
  if (node.degraded || row.stale) classes.push("degraded");
  const pct = node.storage_capacity
    ? Math.round((100 * node.storage_used) / node.storage_capacity)
    : 0;
  const staleNote = row.stale
    ? `<div class="stale">no heartbeat &gt; ${STALE_AFTER_S}s</div>`
    : "";
  return (
    `<div class="${classes.join(" ")}" data-node="${node.node_id}">` +
    `<h3>node ${node.node_id}</h3>` +
    `<div>sensors ${sensors.length} / faults ${faults}</div>` +
    `<div>records ${records}</div>` +
    `<div>storage ${pct}%</div>` +
    staleNote +
    `</div>`
  );
}

export function renderNodeGrid(state: ConsoleViewState): string {
  const masterClass = state.connected ? "node master" : "node master degraded";
  const master =
    `<div class="${masterClass}" data-node="master">` +
    `<h3>master</h3><div>gateway ${state.connected ? "online" : "offline"}</div>` +
    `<div>phase ${state.phase}</div></div>`;
  const workers = Object.values(state.nodes)
    .sort((a, b) => a.node.node_id - b.node.node_id)
    .map(renderNodeCard);
  return `<div class="node-grid">${master}${workers.join("")}</div>`;
}

export function renderSyncView(state: ConsoleViewState): string {
  if (state.syncReports.length === 0) {
    return `<div class="sync-view empty">no sync run yet</div>`;
  }
  const rows = state.syncReports.map((r) => {
    const cls = r.converged ? "converged" : "blocked";
    return (
      `<tr class="${cls}"><td>${r.node_id}</td>` +
      `<td>${(r.pre_offset_s * 1e3).toFixed(3)} ms</td>` +
      `<td>${(r.post_offset_s * 1e3).toFixed(3)} ms</td>` +
      `<td>${r.rounds}</td><td>${r.converged ? "ok" : "BLOCKED"}</td></tr>`
    );
  });
  return (
    `<table class="sync-view"><thead><tr><th>node</th><th>pre</th>` +
    `<th>post</th><th>rounds</th><th>state</th></tr></thead>` +
    `<tbody>${rows.join("")}</tbody></table>`
  );
}

export function renderDropAlerts(state: ConsoleViewState): string {
  const alerts = Object.values(state.dropAlerts).sort((a, b) =>
    a.sensor.localeCompare(b.sensor),
  );
  if (alerts.length === 0) {
    return `<div class="drop-alerts empty">no frame drops</div>`;
  }
  const badges = alerts.map(
    (a) =>
      `<div class="drop-alert" data-sensor="${escapeHtml(a.sensor)}">` +
      `<strong>${escapeHtml(a.sensor)}</strong> dropped ` +
      `${a.triggerIndices.length} frame(s): ` +
      `triggers [${a.triggerIndices.join(", ")}]</div>`,
  );
  return (
    `<div class="drop-alerts alerting">` +
    `<span class="badge">${totalDrops(state)}</span>${badges.join("")}</div>`
  );
}

export function renderRates(state: ConsoleViewState): string {
  const ids = Object.keys(state.recordCounts).sort();
  if (ids.length === 0) return `<div class="rates empty">no sensors yet</div>`;
  const rows = ids.map((id) => {
    const rate = state.recordRates[id];
    const rateText = rate === undefined ? "–" : `${rate.toFixed(1)}/s`;
    return (
      `<tr data-sensor="${escapeHtml(id)}"><td>${escapeHtml(id)}</td>` +
      `<td>${state.recordCounts[id]}</td><td>${rateText}</td></tr>`
    );
  });
  return (
    `<table class="rates"><thead><tr><th>sensor</th><th>records</th>` +
    `<th>rate</th></tr></thead><tbody>${rows.join("")}</tbody></table>`
  );
}

export function renderLog(state: ConsoleViewState): string {
  const lines = state.log
    .slice(0, 50)
    .map(
      (entry) =>
        `<li class="${entry.level}">[${entry.time.toFixed(1)}s] ` +
        `${escapeHtml(entry.text)}</li>`,
    );
  return `<ul class="event-log">${lines.join("")}</ul>`;
}

export function renderApp(state: ConsoleViewState): string {
  return (
    `<header><h1>collection console</h1>` +
    `<span class="conn ${state.connected ? "up" : "down"}">` +
    `${state.connected ? "connected" : "disconnected"}</span>` +
    `<span class="simtime">t = ${state.simTime.toFixed(1)}s</span></header>` +
    renderStepper(state.phase) +
    renderControls(state) +
    renderTriggerToggle(state) +
    `<section class="grid-pane"><h2>nodes</h2>${renderNodeGrid(state)}</section>` +
    `<section><h2>clock sync</h2>${renderSyncView(state)}</section>` +
    `<section><h2>drops</h2>${renderDropAlerts(state)}</section>` +
    `<section><h2>record rates</h2>${renderRates(state)}</section>` +
    `<section><h2>events</h2>${renderLog(state)}</section>`
  );
}
