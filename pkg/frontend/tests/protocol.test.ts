import { describe, expect, it } from "vitest";

import {
  CommandPayload,
  ProtocolError,
  encodeCommandFrame,
  parseServerFrame,
} from "../src/protocol";

function telemetryJson(extra: Record<string, unknown> = {}): string {
  return JSON.stringify({
    kind: "telemetry",
    seq: 3,
    payload: {
      t: 1.25,
      phase: "MEASURE",
      p: [0.1, 0.2, 1.5],
      p_ref: [0.1, 0.2, 1.5],
      f_fb: 3.4,
      f_d: 3.5,
      q: [0, 0.4, 0.8, -0.2, 0.1],
      contact: true,
      vacuum: true,
      thrust: 52.0,
      ...extra,
    },
  });
}

describe("parseServerFrame", () => {
  it("parses a telemetry frame", () => {
    const frame = parseServerFrame(telemetryJson());
    expect(frame.kind).toBe("telemetry");
    if (frame.kind !== "telemetry") return;
    expect(frame.seq).toBe(3);
    expect(frame.payload.t).toBeCloseTo(1.25);
    expect(frame.payload.phase).toBe("MEASURE");
    expect(frame.payload.p).toEqual([0.1, 0.2, 1.5]);
    expect(frame.payload.f_fb).toBeCloseTo(3.4);
    expect(frame.payload.contact).toBe(true);
    expect(frame.payload.q).toHaveLength(5);
    expect(frame.dropped).toBeUndefined();
    expect(frame.payload.events).toBeUndefined();
  });

  it("keeps optional events and echo fields", () => {
    const frame = parseServerFrame(
      telemetryJson({ events: ["contact", 7, "measure_start"], echo: 0.019 }),
    );
    if (frame.kind !== "telemetry") throw new Error("wrong kind");
    expect(frame.payload.events).toEqual(["contact", "measure_start"]);
    expect(frame.payload["echo"]).toBeCloseTo(0.019);
  });

  it("propagates a positive dropped count", () => {
    const raw = JSON.parse(telemetryJson());
    raw.dropped = 4;
    const frame = parseServerFrame(JSON.stringify(raw));
    if (frame.kind !== "telemetry") throw new Error("wrong kind");
    expect(frame.dropped).toBe(4);
  });

  it("omits dropped when zero", () => {
    const raw = JSON.parse(telemetryJson());
    raw.dropped = 0;
    const frame = parseServerFrame(JSON.stringify(raw));
    if (frame.kind !== "telemetry") throw new Error("wrong kind");
    expect(frame.dropped).toBeUndefined();
  });

  it("parses a command ack", () => {
    const frame = parseServerFrame(
      JSON.stringify({
        kind: "command_ack",
        seq: 0,
        payload: { ref_seq: 17, accepted: false, reason: "not in contact", phase: "APPROACH" },
      }),
    );
    expect(frame.kind).toBe("command_ack");
    if (frame.kind !== "command_ack") return;
    expect(frame.payload.ref_seq).toBe(17);
    expect(frame.payload.accepted).toBe(false);
    expect(frame.payload.reason).toBe("not in contact");
    expect(frame.payload.phase).toBe("APPROACH");
  });

  it("defaults missing ack fields", () => {
    const frame = parseServerFrame(
      JSON.stringify({ kind: "command_ack", seq: 1, payload: { accepted: true } }),
    );
    if (frame.kind !== "command_ack") throw new Error("wrong kind");
    expect(frame.payload.ref_seq).toBeNull();
    expect(frame.payload.reason).toBeNull();
    expect(frame.payload.phase).toBe("");
  });

  it("parses an error frame", () => {
    const frame = parseServerFrame(
      JSON.stringify({
        kind: "error",
        seq: 2,
        payload: { message: "unknown command 'warp'", ref_seq: 5 },
      }),
    );
    expect(frame.kind).toBe("error");
    if (frame.kind !== "error") return;
    expect(frame.payload.message).toBe("unknown command 'warp'");
    expect(frame.payload.ref_seq).toBe(5);
  });

  it("substitutes a message when the error payload is malformed", () => {
    const frame = parseServerFrame(
      JSON.stringify({ kind: "error", seq: 2, payload: null }),
    );
    if (frame.kind !== "error") throw new Error("wrong kind");
    expect(frame.payload.message).toBe("unknown bridge error");
    expect(frame.payload.ref_seq).toBeNull();
  });

  it.each([
    ["not json at all", "{nope"],
    ["a bare array", "[1, 2]"],
    ["a bare number", "42"],
    ["missing seq", JSON.stringify({ kind: "telemetry", payload: {} })],
    ["an unknown kind", JSON.stringify({ kind: "mystery", seq: 0, payload: {} })],
  ])("rejects %s", (_label, text) => {
    expect(() => parseServerFrame(text)).toThrow(ProtocolError);
  });

  it.each([
    ["time", { t: "soon" }],
    ["phase", { phase: 7 }],
    ["force", { f_fb: null }],
    ["position vector", { p: [1, 2] }],
    ["position values", { p: [1, 2, "x"] }],
  ])("rejects telemetry with a bad %s", (_label, extra) => {
    expect(() =>
      parseServerFrame(telemetryJson(extra as Record<string, unknown>)),
    ).toThrow(ProtocolError);
  });
});

describe("encodeCommandFrame", () => {
  it("round-trips through JSON", () => {
    const payload: CommandPayload = { cmd: "set_force", newtons: 4.5 };
    const decoded = JSON.parse(encodeCommandFrame(12, payload));
    expect(decoded).toEqual({
      kind: "command",
      seq: 12,
      payload: { cmd: "set_force", newtons: 4.5 },
    });
  });
});
