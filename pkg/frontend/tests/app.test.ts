import { describe, expect, it } from "vitest";

import { formatCommandResult, updateLanding } from "../src/app";

describe("formatCommandResult", () => {
  it("reports acceptance with the current phase", () => {
    const entry = formatCommandResult("trigger", {
      accepted: true,
      reason: null,
      phase: "APPROACH",
    });
    expect(entry.kind).toBe("accepted");
    expect(entry.text).toBe("trigger accepted (phase APPROACH)");
  });

  it("reports the rejection reason", () => {
    const entry = formatCommandResult("abort", {
      accepted: false,
      reason: "nothing to abort in HOME",
      phase: "HOME",
    });
    expect(entry.kind).toBe("rejected");
    expect(entry.text).toBe("abort rejected: nothing to abort in HOME");
  });

  it("copes with a missing reason", () => {
    const entry = formatCommandResult("land", {
      accepted: false,
      reason: null,
      phase: "HOME",
    });
    expect(entry.text).toBe("land rejected: no reason given");
  });
});

describe("updateLanding", () => {
  it("latches on the landing event", () => {
    expect(updateLanding(false, ["contact", "landing"])).toBe(true);
  });

  it("stays latched through later events", () => {
    expect(updateLanding(true, ["landed"])).toBe(true);
    expect(updateLanding(true, [])).toBe(true);
  });

  it("ignores unrelated events", () => {
    expect(updateLanding(false, ["contact", "measure_start"])).toBe(false);
    expect(updateLanding(false, [])).toBe(false);
  });
});
