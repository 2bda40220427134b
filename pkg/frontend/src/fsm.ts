/** Client-side mirror of the server lifecycle machine.
 *
 * The console never sends a request the current phase forbids; the server
 * remains the authority and will still 409 anything we get wrong.
 */

import type { Phase } from "./types.js";

export const ACTIONS = ["bringup", "sync", "launch", "start", "stop"] as const;
export type Action = (typeof ACTIONS)[number];

const ALLOWED: Record<Phase, readonly Action[]> = {
  PoweredOff: ["bringup"],
  MasterUp: [],
  ClusterUp: ["sync"],
  TimeSynced: ["launch"],
  SensorsUp: ["start"],
  Recording: ["stop"],
  Finished: [],
};

export function allowedActions(phase: Phase): readonly Action[] {
  return ALLOWED[phase];
}

export function isAllowed(action: Action, phase: Phase): boolean {
  return ALLOWED[phase].includes(action);
}
