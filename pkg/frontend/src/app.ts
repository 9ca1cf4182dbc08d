import { BridgeClient, BridgeStatus, CommandResult } from "./client";
import { StripChart } from "./chart";
import { abortGate, landGate, triggerGate, triggerLabel } from "./phases";
import { CommandPayload, TelemetryFrame } from "./protocol";
import { TimeSeries } from "./series";

export interface LogEntry {
  t: number;
  text: string;
  kind: "accepted" | "rejected" | "error" | "event";
}

export function formatCommandResult(
  cmd: string,
  result: CommandResult,
): LogEntry {
  if (result.accepted) {
    return {
      t: Date.now() / 1000,
      text: `${cmd} accepted (phase ${result.phase})`,
      kind: "accepted",
    };
  }
  return {
    t: Date.now() / 1000,
    text: `${cmd} rejected: ${result.reason ?? "no reason given"}`,
    kind: "rejected",
  };
}

/**
 * Tracks the landing state from mission events in the telemetry.  Landing is
 * one-way: once descent starts the mission never returns to flight, so the
 * flag latches.
 */
export function updateLanding(current: boolean, events: string[]): boolean {
  return current || events.includes("landing");
}

export class ConsoleApp {
  private readonly forceActual = new TimeSeries();
  private readonly forceRef = new TimeSeries();
  private readonly deviation = new TimeSeries();
  private readonly forceChart: StripChart;
  private readonly deviationChart: StripChart;
  private landing = false;
  private lastPhase = "";
  private readonly log: LogEntry[] = [];
  private readonly readings: { t: number; value: number }[] = [];

  constructor(
    private readonly root: HTMLElement,
    private readonly client: BridgeClient,
  ) {
    this.root.innerHTML = `
      <header class="bar">
        <span id="conn" class="badge">connecting</span>
        <span id="stale" class="badge banner hidden">telemetry stale</span>
        <span id="phase" class="badge">–</span>
        <span id="contact" class="badge hidden">contact</span>
        <span id="vacuum" class="badge hidden">vacuum</span>
        <span id="sim-t" class="mono"></span>
      </header>
      <section class="charts">
        <canvas id="force-chart" width="640" height="180"></canvas>
        <canvas id="dev-chart" width="640" height="140"></canvas>
      </section>
      <section class="controls">
        <button id="btn-trigger"></button>
        <button id="btn-abort">Abort</button>
        <button id="btn-land">Land</button>
        <label>Force target [N]
          <input id="force-input" type="number" min="0" step="0.5" value="3.5">
        </label>
        <button id="btn-force">Set force</button>
      </section>
      <section class="panels">
        <div><h3>Thickness readings</h3><ul id="readings"></ul></div>
        <div><h3>Log</h3><ul id="log"></ul></div>
      </section>
    `;
    this.forceChart = new StripChart(this.el<HTMLCanvasElement>("#force-chart"), {
      title: "Contact force",
      unit: " N",
      references: [0],
    });
    this.forceChart.addTrace({
      series: this.forceActual,
      color: "#6fd3a7",
      label: "measured",
    });
    this.forceChart.addTrace({
      series: this.forceRef,
      color: "#e0b55a",
      label: "reference",
      dashed: true,
    });
    this.deviationChart = new StripChart(this.el<HTMLCanvasElement>("#dev-chart"), {
      title: "Base deviation from hold point",
      unit: " m",
      references: [0],
    });
    this.deviationChart.addTrace({
      series: this.deviation,
      color: "#6fa7d3",
      label: "|p − p_ref|",
    });

    this.el("#btn-trigger").addEventListener("click", () =>
      this.issue({ cmd: "trigger_next_phase" }, "trigger"),
    );
    this.el("#btn-abort").addEventListener("click", () =>
      this.issue({ cmd: "abort" }, "abort"),
    );
    this.el("#btn-land").addEventListener("click", () =>
      this.issue({ cmd: "land" }, "land"),
    );
    this.el("#btn-force").addEventListener("click", () => {
      const value = Number(this.el<HTMLInputElement>("#force-input").value);
      this.issue({ cmd: "set_force", newtons: value }, `set_force ${value} N`);
    });

    client.onTelemetry = (frame) => this.handleTelemetry(frame);
    client.onStatus = (status) => this.renderStatus(status);
    client.onServerError = (frame) =>
      this.pushLog({
        t: Date.now() / 1000,
        text: `bridge error: ${frame.payload.message}`,
        kind: "error",
      });
    this.renderStatus(client.status());
    this.renderGates();
  }

  private el<T extends HTMLElement = HTMLElement>(selector: string): T {
    const node = this.root.querySelector<T>(selector);
    if (!node) throw new Error(`missing element ${selector}`);
    return node;
  }

  private issue(payload: CommandPayload, label: string): void {
    this.client.sendCommand(payload).then(
      (result) => this.pushLog(formatCommandResult(label, result)),
      (err: Error) =>
        this.pushLog({
          t: Date.now() / 1000,
          text: `${label} failed: ${err.message}`,
          kind: "error",
        }),
    );
  }

  private handleTelemetry(frame: TelemetryFrame): void {
    const rec = frame.payload;
    const gap = (frame.dropped ?? 0) > 0;
    this.forceActual.push(rec.t, rec.f_fb, gap);
    this.forceRef.push(rec.t, rec.f_d, gap);
    const dev = Math.hypot(
      rec.p[0] - rec.p_ref[0],
      rec.p[1] - rec.p_ref[1],
      rec.p[2] - rec.p_ref[2],
    );
    this.deviation.push(rec.t, dev, gap);

    const events = rec.events ?? [];
    this.landing = updateLanding(this.landing, events);
    for (const event of events) {
      this.pushLog({ t: rec.t, text: event, kind: "event" });
    }
    const echo = rec["echo"];
    if (typeof echo === "number") {
      this.readings.push({ t: rec.t, value: echo });
      const item = document.createElement("li");
      item.textContent = `t=${rec.t.toFixed(2)} s: ${(echo * 1e3).toFixed(4)} mm`;
      this.el("#readings").prepend(item);
    }

    this.lastPhase = rec.phase;
    this.el("#phase").textContent = rec.phase;
    this.el("#sim-t").textContent = `t = ${rec.t.toFixed(2)} s`;
    this.el("#contact").classList.toggle("hidden", !rec.contact);
    this.el("#vacuum").classList.toggle("hidden", !rec.vacuum);
    this.renderGates();
    this.forceChart.render();
    this.deviationChart.render();
  }

  private renderGates(): void {
    const trigger = triggerGate(this.lastPhase, this.landing);
    const abort = abortGate(this.lastPhase);
    const land = landGate(this.landing);
    const btnTrigger = this.el<HTMLButtonElement>("#btn-trigger");
    btnTrigger.disabled = !trigger.enabled;
    btnTrigger.textContent = triggerLabel(this.lastPhase);
    btnTrigger.title = trigger.hint ?? "";
    const btnAbort = this.el<HTMLButtonElement>("#btn-abort");
    btnAbort.disabled = !abort.enabled;
    btnAbort.title = abort.hint ?? "";
    const btnLand = this.el<HTMLButtonElement>("#btn-land");
    btnLand.disabled = !land.enabled;
    btnLand.title = land.hint ?? "";
  }

  private renderStatus(status: BridgeStatus): void {
    const conn = this.el("#conn");
    conn.textContent =
      status.state === "closed" && status.reconnectAttempt > 0
        ? `reconnecting (${status.reconnectAttempt})`
        : status.state;
    conn.classList.toggle("ok", status.state === "open");
    this.el("#stale").classList.toggle(
      "hidden",
      !(status.state === "open" && status.stale),
    );
  }

  private pushLog(entry: LogEntry): void {
    this.log.push(entry);
    const item = document.createElement("li");
    item.className = entry.kind;
    item.textContent = entry.text;
    const list = this.el("#log");
    list.prepend(item);
    while (list.children.length > 200) list.lastChild?.remove();
  }
}
