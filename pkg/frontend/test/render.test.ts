import { describe, expect, it } from "vitest";

import {
  renderApp,
  renderControls,
  renderDropAlerts,
  renderNodeGrid,
  renderStepper,
  renderTriggerToggle,
} from "../src/render.js";
import { applyEvent, initialState, type ConsoleViewState } from "../src/state.js";
import type { NodeStatus } from "../src/types.js";

function connected(state = initialState()): ConsoleViewState {
  return { ...state, connected: true };
}

function nodeRow(id: number): { node: NodeStatus; lastHeartbeatAt: number; stale: boolean } {
  return {
    node: {
      node_id: id,
      storage_used: 0,
      storage_capacity: 1000,
      recording: false,
      degraded: false,
      sensors: {},
    },
    lastHeartbeatAt: 0,
    stale: false,
  };
}

describe("stepper", () => {
  it("marks earlier phases done and the current one current", () => {
    const html = renderStepper("TimeSynced");
    expect(html).toContain('class="step done" data-phase="ClusterUp"');
    expect(html).toContain('class="step current" data-phase="TimeSynced"');
    expect(html).toContain('class="step" data-phase="Recording"');
  });
});

describe("controls", () => {
  it("disables every phase-forbidden button", () => {
    const html = renderControls({ ...connected(), phase: "SensorsUp" });
    expect(html).toContain('data-action="start">start</button>');
    expect(html).toContain('data-action="bringup" disabled');
    expect(html).toContain('data-action="sync" disabled');
    expect(html).toContain('data-action="launch" disabled');
    expect(html).toContain('data-action="stop" disabled');
  });

  it("disables everything while disconnected", () => {
    const html = renderControls({ ...initialState(), phase: "SensorsUp" });
    for (const action of ["bringup", "sync", "launch", "start", "stop"]) {
      expect(html).toContain(`data-action="${action}" disabled`);
    }
  });
});

describe("trigger toggle", () => {
  it("offers start when stopped in SensorsUp", () => {
    const html = renderTriggerToggle({ ...connected(), phase: "SensorsUp" });
    expect(html).toContain('trigger-led off');
    expect(html).toContain('data-action="start"');
    expect(html).not.toContain("disabled");
  });

  it("offers stop and lights the LED while recording", () => {
    const html = renderTriggerToggle({
      ...connected(),
      phase: "Recording",
      triggerRunning: true,
    });
    expect(html).toContain("trigger-led on");
    expect(html).toContain('data-action="stop"');
    expect(html).toContain("trigger running");
  });
});

describe("node grid", () => {
  it("renders a master tile plus one tile per worker", () => {
    const state = connected();
    for (let id = 1; id <= 15; id++) state.nodes[id] = nodeRow(id);
    const html = renderNodeGrid(state);
    expect(html).toContain('data-node="master"');
    for (let id = 1; id <= 15; id++) {
      expect(html).toContain(`data-node="${id}"`);
    }
    expect(html.match(/data-node=/g)).toHaveLength(16);
  });

  it("marks stale nodes degraded", () => {
    const state = connected();
    state.nodes[3] = { ...nodeRow(3), stale: true };
    expect(renderNodeGrid(state)).toContain("node degraded");
  });
});

describe("drop alerts", () => {
  it("renders a badge with the dropped trigger indices", () => {
    let state = initialState();
    state = applyEvent(state, { event: "drop", time: 1, sensor: "cam07", trigger_index: 4 });
    state = applyEvent(state, { event: "drop", time: 2, sensor: "cam07", trigger_index: 19 });
    const html = renderDropAlerts(state);
    expect(html).toContain('data-sensor="cam07"');
    expect(html).toContain("triggers [4, 19]");
    expect(html).toContain('<span class="badge">2</span>');
  });

  it("escapes sensor ids", () => {
    let state = initialState();
    state = applyEvent(state, {
      event: "drop",
      time: 1,
      sensor: "<img>",
      trigger_index: 0,
    });
    expect(renderDropAlerts(state)).not.toContain("<img>");
  });
});

describe("full app", () => {
  it("composes every pane", () => {
    const html = renderApp(connected());
    for (const marker of ["stepper", "controls", "trigger-led", "node-grid", "sync-view", "drop-alerts", "event-log"]) {
      expect(html).toContain(marker);
    }
  });
});
