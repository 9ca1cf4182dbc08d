import {
  CommandAckFrame,
  CommandPayload,
  ErrorFrame,
  ProtocolError,
  TelemetryFrame,
  encodeCommandFrame,
  parseServerFrame,
} from "./protocol";

export type ConnectionState = "connecting" | "open" | "closed";

export interface BridgeStatus {
  state: ConnectionState;
  /** True while connected but no telemetry arrived for `staleAfterMs`. */
  stale: boolean;
  reconnectAttempt: number;
}

/** The subset of the WebSocket API the client relies on. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export interface BridgeClientOptions {
  url: string;
  staleAfterMs?: number;
  reconnectDelayMs?: number;
  maxReconnectDelayMs?: number;
  socketFactory?: (url: string) => SocketLike;
  now?: () => number;
}

export interface CommandResult {
  accepted: boolean;
  reason: string | null;
  phase: string;
}

interface PendingCommand {
  resolve: (result: CommandResult) => void;
  reject: (err: Error) => void;
}

/**
 * Bridge connection with automatic reconnection, telemetry staleness
 * detection and promise-based command acknowledgements.
 */
export class BridgeClient {
  private readonly opts: Required<
    Omit<BridgeClientOptions, "socketFactory" | "now">
  >;
  private readonly makeSocket: (url: string) => SocketLike;
  private readonly now: () => number;

  private socket: SocketLike | null = null;
  private state: ConnectionState = "closed";
  private stale = false;
  private reconnectAttempt = 0;
  private disposed = false;
  private nextSeq = 0;
  private lastTelemetryAt = 0;
  private readonly pending = new Map<number, PendingCommand>();
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private staleTimer: ReturnType<typeof setInterval> | null = null;

  onTelemetry: ((frame: TelemetryFrame) => void) | null = null;
  onAck: ((ack: CommandAckFrame) => void) | null = null;
  onServerError: ((err: ErrorFrame) => void) | null = null;
  onStatus: ((status: BridgeStatus) => void) | null = null;
  onProtocolError: ((err: ProtocolError) => void) | null = null;

  constructor(options: BridgeClientOptions) {
    this.opts = {
      url: options.url,
      staleAfterMs: options.staleAfterMs ?? 1000,
      reconnectDelayMs: options.reconnectDelayMs ?? 500,
      maxReconnectDelayMs: options.maxReconnectDelayMs ?? 8000,
    };
    this.makeSocket =
      options.socketFactory ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike);
    this.now = options.now ?? (() => Date.now());
  }

  status(): BridgeStatus {
    return {
      state: this.state,
      stale: this.stale,
      reconnectAttempt: this.reconnectAttempt,
    };
  }

  connect(): void {
    if (this.disposed || this.socket) return;
    this.setState("connecting");
    const socket = this.makeSocket(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      this.reconnectAttempt = 0;
      this.nextSeq = 0;
      this.lastTelemetryAt = this.now();
      this.setStale(false);
      this.setState("open");
      this.startStaleTimer();
    };
    socket.onmessage = (ev) => this.handleMessage(ev.data);
    socket.onerror = () => {
      /* close always follows; reconnect handled there */
    };
    socket.onclose = () => this.handleClose();
  }

  dispose(): void {
    this.disposed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    if (this.staleTimer !== null) clearInterval(this.staleTimer);
    this.failPending(new Error("client disposed"));
    const socket = this.socket;
    this.socket = null;
    socket?.close();
    this.setState("closed");
  }

  /** Send a command; resolves with the mission's accept/reject verdict. */
  sendCommand(payload: CommandPayload): Promise<CommandResult> {
    if (this.state !== "open" || !this.socket) {
      return Promise.reject(new Error("bridge is not connected"));
    }
    const seq = this.nextSeq;
    this.nextSeq += 1;
    const text = encodeCommandFrame(seq, payload);
    return new Promise<CommandResult>((resolve, reject) => {
      this.pending.set(seq, { resolve, reject });
      try {
        this.socket!.send(text);
      } catch (err) {
        this.pending.delete(seq);
        reject(err instanceof Error ? err : new Error(String(err)));
      }
    });
  }

  // ------------------------------------------------------------------

  private handleMessage(data: unknown): void {
    let frame;
    try {
      frame = parseServerFrame(String(data));
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.onProtocolError?.(err);
        return;
      }
      throw err;
    }
    switch (frame.kind) {
      case "telemetry":
        this.lastTelemetryAt = this.now();
        this.setStale(false);
        this.onTelemetry?.(frame);
        break;
      case "command_ack": {
        const ref = frame.payload.ref_seq;
        if (ref !== null && this.pending.has(ref)) {
          const entry = this.pending.get(ref)!;
          this.pending.delete(ref);
          entry.resolve({
            accepted: frame.payload.accepted,
            reason: frame.payload.reason,
            phase: frame.payload.phase,
          });
        }
        this.onAck?.(frame);
        break;
      }
      case "error": {
        const ref = frame.payload.ref_seq;
        if (ref !== null && this.pending.has(ref)) {
          const entry = this.pending.get(ref)!;
          this.pending.delete(ref);
          entry.reject(new Error(frame.payload.message));
        }
        this.onServerError?.(frame);
        break;
      }
    }
  }

  private handleClose(): void {
    this.socket = null;
    if (this.staleTimer !== null) {
      clearInterval(this.staleTimer);
      this.staleTimer = null;
    }
    this.failPending(new Error("connection lost"));
    if (this.disposed) return;
    this.setState("closed");
    const delay = Math.min(
      this.opts.reconnectDelayMs * 2 ** this.reconnectAttempt,
      this.opts.maxReconnectDelayMs,
    );
    this.reconnectAttempt += 1;
    this.emitStatus();
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.connect();
    }, delay);
  }

  private failPending(err: Error): void {
    for (const entry of this.pending.values()) entry.reject(err);
    this.pending.clear();
  }

  private startStaleTimer(): void {
    if (this.staleTimer !== null) clearInterval(this.staleTimer);
    const period = Math.max(50, Math.floor(this.opts.staleAfterMs / 4));
    this.staleTimer = setInterval(() => {
      if (this.state !== "open") return;
      const silent = this.now() - this.lastTelemetryAt;
      this.setStale(silent > this.opts.staleAfterMs);
    }, period);
  }

  private setState(state: ConnectionState): void {
    if (state !== this.state) {
      this.state = state;
      this.emitStatus();
    }
  }

  private setStale(stale: boolean): void {
    if (stale !== this.stale) {
      this.stale = stale;
      this.emitStatus();
    }
  }

  private emitStatus(): void {
    this.onStatus?.(this.status());
  }
}
