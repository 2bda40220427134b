/** Gateway API shapes, validated at the trust boundary with zod. */

import { z } from "zod";

export const PHASES = [
  "PoweredOff",
  "MasterUp",
  "ClusterUp",
  "TimeSynced",
  "SensorsUp",
  "Recording",
  "Finished",
] as const;

export type Phase = (typeof PHASES)[number];

export const SensorStatusSchema = z.object({
  kind: z.string(),
  records: z.number(),
  faults: z.number(),
});
export type SensorStatus = z.infer<typeof SensorStatusSchema>;

export const NodeStatusSchema = z.object({
  node_id: z.number(),
  storage_used: z.number(),
  storage_capacity: z.number(),
  recording: z.boolean(),
  degraded: z.boolean(),
  sensors: z.record(SensorStatusSchema),
});
export type NodeStatus = z.infer<typeof NodeStatusSchema>;

export const SyncReportSchema = z.object({
  node_id: z.number(),
  pre_offset_s: z.number(),
  post_offset_s: z.number(),
  rounds: z.number(),
  converged: z.boolean(),
});
export type SyncReport = z.infer<typeof SyncReportSchema>;

export const StatusResponseSchema = z.object({
  phase: z.enum(PHASES),
  sim_time: z.number(),
  trigger_running: z.boolean(),
  record_window: z.array(z.number().nullable()),
  nodes: z.array(NodeStatusSchema),
  sync_reports: z.array(SyncReportSchema),
  drops: z.record(z.array(z.number())),
  transitions: z.array(z.tuple([z.string(), z.number()])),
});
export type StatusResponse = z.infer<typeof StatusResponseSchema>;

export const LifecycleResponseSchema = z.object({
  ok: z.boolean(),
  phase: z.enum(PHASES),
  detail: z.string().default(""),
});
export type LifecycleResponse = z.infer<typeof LifecycleResponseSchema>;

export const GatewayEventSchema = z.discriminatedUnion("event", [
  z.object({ event: z.literal("phase"), time: z.number(), phase: z.enum(PHASES) }),
  z.object({
    event: z.literal("heartbeat"),
    time: z.number(),
    node: NodeStatusSchema,
  }),
  z.object({
    event: z.literal("counts"),
    time: z.number(),
    sensors: z.record(z.number()),
  }),
  z.object({
    event: z.literal("drop"),
    time: z.number(),
    sensor: z.string(),
    trigger_index: z.number(),
  }),
  z.object({ event: z.literal("summary"), time: z.number(), summary: z.unknown() }),
]);
export type GatewayEvent = z.infer<typeof GatewayEventSchema>;
