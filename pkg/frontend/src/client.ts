/** Gateway client: one WebSocket subscription, serialized commands,
 * resync from GET /status on every (re)connect.
 */

import { isAllowed, type Action } from "./fsm.js";
import {
  applyEvent,
  initialState,
  markStale,
  pushLog,
  resyncFromStatus,
  type ConsoleViewState,
} from "./state.js";
import {
  GatewayEventSchema,
  LifecycleResponseSchema,
  StatusResponseSchema,
} from "./types.js";

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

interface WebSocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export interface GatewayClientOptions {
  fetchImpl?: FetchLike;
  webSocketImpl?: new (url: string) => WebSocketLike;
  onChange?: (state: ConsoleViewState) => void;
  reconnectDelayMs?: number;
}

export interface CommandResult {
  ok: boolean;
  /** True when the client-side phase guard stopped the request. */
  blocked: boolean;
  detail: string;
}

export class GatewayClient {
  readonly baseUrl: string;
  state: ConsoleViewState = initialState();

  private readonly fetchImpl: FetchLike;
  private readonly webSocketImpl: new (url: string) => WebSocketLike;
  private readonly onChange: (state: ConsoleViewState) => void;
  private readonly reconnectDelayMs: number;
  private socket: WebSocketLike | null = null;
  private closed = false;
  private commandChain: Promise<unknown> = Promise.resolve();

  constructor(baseUrl: string, options: GatewayClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
    this.webSocketImpl =
      options.webSocketImpl ??
      (globalThis.WebSocket as unknown as new (url: string) => WebSocketLike);
    this.onChange = options.onChange ?? (() => {});
    this.reconnectDelayMs = options.reconnectDelayMs ?? 1000;
  }

  private setState(state: ConsoleViewState): void {
    this.state = state;
    this.onChange(state);
  }

  /** Rebuild the full view from /status; no event replay needed. */
  async resync(): Promise<void> {
    const res = await this.fetchImpl(`${this.baseUrl}/status`);
    if (!res.ok) throw new Error(`status fetch failed: ${res.status}`);
    const status = StatusResponseSchema.parse(await res.json());
    this.setState(resyncFromStatus(this.state, status));
  }

  /** Open the event stream; on drop, resync + resubscribe. */
  connect(): void {
    if (this.closed) return;
    const wsUrl =
      this.baseUrl.replace(/^http/, "ws") + "/events";
    const socket = new this.webSocketImpl(wsUrl);
    this.socket = socket;
    socket.onopen = () => {
      void this.resync()
        .then(() => this.setState({ ...this.state, connected: true }))
        .catch(() => socket.close());
    };
    socket.onmessage = (ev) => {
      const parsed = GatewayEventSchema.safeParse(
        JSON.parse(String(ev.data)),
      );
      if (!parsed.success) return; // unknown event kinds are ignored
      let next = applyEvent(this.state, parsed.data);
      next = markStale(next, next.simTime);
      this.setState(next);
    };
    socket.onerror = () => socket.close();
    socket.onclose = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      this.setState({ ...this.state, connected: false });
      if (!this.closed) {
        setTimeout(() => this.connect(), this.reconnectDelayMs);
      }
    };
  }

  /** POST a lifecycle action, unless the phase guard forbids it. */
  command(action: Action): Promise<CommandResult> {
    const run = async (): Promise<CommandResult> => {
      if (!this.state.connected || !isAllowed(action, this.state.phase)) {
        return {
          ok: false,
          blocked: true,
          detail: `${action} not allowed in ${this.state.phase}`,
        };
      }
      const res = await this.fetchImpl(
        `${this.baseUrl}/lifecycle/${action}`,
        { method: "POST" },
      );
      const body = await res.json();
      if (!res.ok) {
        const detail =
          typeof body?.detail === "string" ? body.detail : `HTTP ${res.status}`;
        this.setState(pushLog(this.state, "error", `${action}: ${detail}`));
        return { ok: false, blocked: false, detail };
      }
      const ack = LifecycleResponseSchema.parse(body);
      // No optimistic state: refresh the full view from /status so
      // sync reports and node rows reflect the acknowledged action.
      await this.resync();
      this.setState(
        pushLog(this.state, "info", `${action} acknowledged (${ack.phase})`),
      );
      return { ok: true, blocked: false, detail: ack.detail };
    };
    const result = this.commandChain.then(run, run);
    this.commandChain = result.catch(() => {});
    return result;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }
}
