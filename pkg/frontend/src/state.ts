/** Console view state and its pure reducers.
 *
 * The view is derived only from gateway messages: a full GET /status
 * snapshot (resync) plus incremental /events messages. The client holds
 * no lifecycle authority of its own.
 */

import type {
  GatewayEvent,
  NodeStatus,
  Phase,
  StatusResponse,
  SyncReport,
} from "./types.js";

/** Heartbeats older than this (simulated seconds) mark a node degraded. */
export const STALE_AFTER_S = 3;

/** Event-log entries kept; older ones fall off the end. */
export const LOG_LIMIT = 200;

export interface NodeRow {
  node: NodeStatus;
  /** Sim time of the last heartbeat, or null if only seen via /status. */
  lastHeartbeatAt: number | null;
  stale: boolean;
}

export interface DropAlert {
  sensor: string;
  triggerIndices: number[];
  lastTime: number;
}

export interface LogEntry {
  time: number;
  level: "info" | "warn" | "error";
  text: string;
}

export interface ConsoleViewState {
  connected: boolean;
  phase: Phase;
  simTime: number;
  triggerRunning: boolean;
  nodes: Record<number, NodeRow>;
  syncReports: SyncReport[];
  /** Cumulative record count per sensor, from counts events / status. */
  recordCounts: Record<string, number>;
  /** Records per simulated second, from successive counts events. */
  recordRates: Record<string, number>;
  lastCountsTime: number | null;
  dropAlerts: Record<string, DropAlert>;
  log: LogEntry[];
}

export function initialState(): ConsoleViewState {
  return {
    connected: false,
    phase: "PoweredOff",
    simTime: 0,
    triggerRunning: false,
    nodes: {},
    syncReports: [],
    recordCounts: {},
    recordRates: {},
    lastCountsTime: null,
    dropAlerts: {},
    log: [],
  };
}

export function pushLog(
  state: ConsoleViewState,
  level: LogEntry["level"],
  text: string,
): ConsoleViewState {
  const log = [{ time: state.simTime, level, text }, ...state.log];
  return { ...state, log: log.slice(0, LOG_LIMIT) };
}

/** Rebuild the entire view from a /status snapshot (reconnect path). */
export function resyncFromStatus(
  state: ConsoleViewState,
  status: StatusResponse,
): ConsoleViewState {
  const nodes: Record<number, NodeRow> = {};
  const recordCounts: Record<string, number> = {};
  for (const node of status.nodes) {
    nodes[node.node_id] = {
      node,
      lastHeartbeatAt: status.sim_time,
      stale: false,
    };
    for (const [sensorId, sensor] of Object.entries(node.sensors)) {
      recordCounts[sensorId] = sensor.records;
    }
  }
  const dropAlerts: Record<string, DropAlert> = {};
  for (const [sensorId, indices] of Object.entries(status.drops)) {
    if (indices.length > 0) {
      dropAlerts[sensorId] = {
        sensor: sensorId,
        triggerIndices: [...indices],
        lastTime: status.sim_time,
      };
    }
  }
  return {
    ...state,
    phase: status.phase,
    simTime: status.sim_time,
    triggerRunning: status.trigger_running,
    nodes,
    syncReports: status.sync_reports,
    recordCounts,
    recordRates: {},
    lastCountsTime: null,
    dropAlerts,
  };
}

/** Apply one pushed gateway event; latest event per entity wins. */
export function applyEvent(
  state: ConsoleViewState,
  event: GatewayEvent,
): ConsoleViewState {
  const next = { ...state, simTime: Math.max(state.simTime, event.time) };
  switch (event.event) {
    case "phase": {
      next.phase = event.phase;
      next.triggerRunning = event.phase === "Recording";
      return pushLog(next, "info", `phase → ${event.phase}`);
    }
    case "heartbeat": {
      next.nodes = {
        ...state.nodes,
        [event.node.node_id]: {
          node: event.node,
          lastHeartbeatAt: event.time,
          stale: false,
        },
      };
      return next;
    }
    case "counts": {
      const rates: Record<string, number> = {};
      if (state.lastCountsTime !== null && event.time > state.lastCountsTime) {
        const dt = event.time - state.lastCountsTime;
        for (const [sensorId, count] of Object.entries(event.sensors)) {
          rates[sensorId] = (count - (state.recordCounts[sensorId] ?? 0)) / dt;
        }
      }
      next.recordCounts = { ...event.sensors };
      next.recordRates = rates;
      next.lastCountsTime = event.time;
      return next;
    }
    case "drop": {
      const prior = state.dropAlerts[event.sensor];
      next.dropAlerts = {
        ...state.dropAlerts,
        [event.sensor]: {
          sensor: event.sensor,
          triggerIndices: [...(prior?.triggerIndices ?? []), event.trigger_index],
          lastTime: event.time,
        },
      };
      return pushLog(
        next,
        "warn",
        `drop: ${event.sensor} trigger #${event.trigger_index}`,
      );
    }
    case "summary":
      return pushLog(next, "info", "run summary received");
  }
}

/** Mark nodes without a recent heartbeat as stale/degraded. */
export function markStale(
  state: ConsoleViewState,
  nowSimTime: number,
): ConsoleViewState {
  let changed = false;
  const nodes: Record<number, NodeRow> = {};
  for (const [id, row] of Object.entries(state.nodes)) {
    const stale =
      row.lastHeartbeatAt !== null &&
      nowSimTime - row.lastHeartbeatAt > STALE_AFTER_S;
    if (stale !== row.stale) changed = true;
    nodes[Number(id)] = stale === row.stale ? row : { ...row, stale };
  }
  return changed ? { ...state, nodes } : state;
}

export function totalDrops(state: ConsoleViewState): number {
  return Object.values(state.dropAlerts).reduce(
    (sum, alert) => sum + alert.triggerIndices.length,
    0,
  );
}
