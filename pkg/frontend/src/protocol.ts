/**
 * Wire protocol of the simulator bridge.
 *
 * Every frame is a JSON text message `{kind, seq, payload}`; `seq`
 * counts per direction per connection.  Telemetry frames additionally
 * carry a `dropped` count when the server had to evict older records
 * for a slow consumer — the charts render those as gaps.
 */

export interface TelemetryRecord {
  t: number;
  phase: string;
  p: [number, number, number];
  p_ref: [number, number, number];
  f_fb: number;
  f_d: number;
  q: number[];
  contact: boolean;
  vacuum: boolean;
  thrust: number;
  events?: string[];
  [key: string]: unknown;
}

export interface TelemetryFrame {
  kind: "telemetry";
  seq: number;
  dropped?: number;
  payload: TelemetryRecord;
}

export interface CommandAckFrame {
  kind: "command_ack";
  seq: number;
  payload: {
    ref_seq: number | null;
    accepted: boolean;
    reason: string | null;
    phase: string;
  };
}

export interface ErrorFrame {
  kind: "error";
  seq: number;
  payload: { message: string; ref_seq: number | null };
}

export type ServerFrame = TelemetryFrame | CommandAckFrame | ErrorFrame;

export type CommandPayload =
  | { cmd: "trigger_next_phase" }
  | { cmd: "abort" }
  | { cmd: "land" }
  | { cmd: "set_force"; newtons: number }
  | { cmd: "velocity_setpoint"; linear: number[]; angular: number[] };

export interface CommandFrame {
  kind: "command";
  seq: number;
  payload: CommandPayload;
}

export class ProtocolError extends Error {}

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function asVector3(x: unknown): [number, number, number] {
  if (!Array.isArray(x) || x.length !== 3) {
    throw new ProtocolError("expected a 3-vector");
  }
  const [a, b, c] = x as unknown[];
  if (!isFiniteNumber(a) || !isFiniteNumber(b) || !isFiniteNumber(c)) {
    throw new ProtocolError("expected a 3-vector");
  }
  return [a, b, c];
}

function parseTelemetryRecord(raw: unknown): TelemetryRecord {
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError("telemetry payload must be an object");
  }
  const rec = raw as Record<string, unknown>;
  if (!isFiniteNumber(rec.t)) throw new ProtocolError("telemetry lacks time");
  if (typeof rec.phase !== "string") {
    throw new ProtocolError("telemetry lacks phase");
  }
  if (!isFiniteNumber(rec.f_fb) || !isFiniteNumber(rec.f_d)) {
    throw new ProtocolError("telemetry lacks force fields");
  }
  return {
    ...rec,
    t: rec.t,
    phase: rec.phase,
    p: asVector3(rec.p),
    p_ref: asVector3(rec.p_ref),
    f_fb: rec.f_fb,
    f_d: rec.f_d,
    q: Array.isArray(rec.q) ? rec.q.filter(isFiniteNumber) : [],
    contact: Boolean(rec.contact),
    vacuum: Boolean(rec.vacuum),
    thrust: isFiniteNumber(rec.thrust) ? rec.thrust : 0,
    ...(Array.isArray(rec.events)
      ? { events: rec.events.filter((e): e is string => typeof e === "string") }
      : {}),
  };
}

/** Parse and validate one server-to-client frame. */
export function parseServerFrame(text: string): ServerFrame {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("frame is not valid JSON");
  }
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError("frame must be a JSON object");
  }
  const frame = raw as Record<string, unknown>;
  if (!isFiniteNumber(frame.seq)) {
    throw new ProtocolError("frame lacks an integer seq");
  }
  const seq = frame.seq;
  switch (frame.kind) {
    case "telemetry": {
      const out: TelemetryFrame = {
        kind: "telemetry",
        seq,
        payload: parseTelemetryRecord(frame.payload),
      };
      if (isFiniteNumber(frame.dropped) && frame.dropped > 0) {
        out.dropped = frame.dropped;
      }
      return out;
    }
    case "command_ack": {
      const p = frame.payload as Record<string, unknown> | null;
      if (typeof p !== "object" || p === null) {
        throw new ProtocolError("ack payload must be an object");
      }
      return {
        kind: "command_ack",
        seq,
        payload: {
          ref_seq: isFiniteNumber(p.ref_seq) ? p.ref_seq : null,
          accepted: Boolean(p.accepted),
          reason: typeof p.reason === "string" ? p.reason : null,
          phase: typeof p.phase === "string" ? p.phase : "",
        },
      };
    }
    case "error": {
      const p = frame.payload as Record<string, unknown> | null;
      return {
        kind: "error",
        seq,
        payload: {
          message:
            typeof p?.message === "string" ? p.message : "unknown bridge error",
          ref_seq: isFiniteNumber(p?.ref_seq) ? (p.ref_seq as number) : null,
        },
      };
    }
    default:
      throw new ProtocolError(`unknown frame kind ${String(frame.kind)}`);
  }
}

/** Serialize a client-to-server command frame. */
export function encodeCommandFrame(seq: number, payload: CommandPayload): string {
  const frame: CommandFrame = { kind: "command", seq, payload };
  return JSON.stringify(frame);
}
