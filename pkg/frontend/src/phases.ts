/**
 * Mission phase metadata mirrored from the simulator's phase machine.
 * Buttons are enabled only where the mission can accept the command;
 * conditional guards (e.g. "contact not yet stable") stay enabled and
 * surface the rejection reason instead.
 */

export const PHASES = ["HOME", "APPROACH", "MEASURE", "RETRACT"] as const;
export type Phase = (typeof PHASES)[number];

export interface CommandGate {
  enabled: boolean;
  /** UI hint for why a disabled button is disabled. */
  hint?: string;
}

export function triggerGate(phase: string, landing: boolean): CommandGate {
  if (landing) return { enabled: false, hint: "landing in progress" };
  switch (phase) {
    case "HOME":
      return { enabled: true, hint: "start approach" };
    case "APPROACH":
      return { enabled: true, hint: "start measurement (needs stable contact)" };
    case "MEASURE":
      return { enabled: true, hint: "finish early and retract" };
    default:
      return { enabled: false, hint: "retract completes automatically" };
  }
}

export function abortGate(phase: string): CommandGate {
  if (phase === "APPROACH" || phase === "MEASURE") {
    return { enabled: true, hint: "retract immediately" };
  }
  return { enabled: false, hint: `nothing to abort in ${phase}` };
}

export function landGate(landing: boolean): CommandGate {
  return landing
    ? { enabled: false, hint: "already landing" }
    : { enabled: true, hint: "retract if needed, then land" };
}

/** Label shown on the trigger button for the current phase. */
export function triggerLabel(phase: string): string {
  switch (phase) {
    case "HOME":
      return "Start approach";
    case "APPROACH":
      return "Start measurement";
    case "MEASURE":
      return "Finish measurement";
    default:
      return "Advance phase";
  }
}
