import { Sample, TimeSeries, valueRange } from "./series";

export interface TraceSpec {
  series: TimeSeries;
  color: string;
  label: string;
  /** Dashed rendering (used for references). */
  dashed?: boolean;
}

export interface StripChartOptions {
  title: string;
  windowSeconds?: number;
  unit?: string;
  /** Horizontal reference values always kept inside the y-range. */
  references?: number[];
}

/**
 * Minimal canvas strip chart: trailing time window, autoscaled y-axis,
 * dashed reference traces, and explicit hole rendering where telemetry
 * was dropped (each gap starts a fresh polyline segment and is marked).
 */
export class StripChart {
  private readonly ctx: CanvasRenderingContext2D;
  readonly traces: TraceSpec[] = [];

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly opts: StripChartOptions,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2D canvas context unavailable");
    this.ctx = ctx;
  }

  addTrace(spec: TraceSpec): void {
    this.traces.push(spec);
  }

  render(): void {
    const { ctx, canvas } = this;
    const w = canvas.width;
    const h = canvas.height;
    const margin = { left: 46, right: 8, top: 18, bottom: 16 };
    const plotW = w - margin.left - margin.right;
    const plotH = h - margin.top - margin.bottom;
    const windowS = this.opts.windowSeconds ?? 30;

    ctx.fillStyle = "#11151c";
    ctx.fillRect(0, 0, w, h);

    const windows = this.traces.map((t) => t.series.window(windowS));
    const all = windows.flat();
    const [lo, hi] = valueRange(all, this.opts.references ?? []);
    const tEnd = all.length ? Math.max(...all.map((s) => s.t)) : 0;
    const tStart = tEnd - windowS;

    const x = (t: number) => margin.left + ((t - tStart) / windowS) * plotW;
    const y = (v: number) => margin.top + (1 - (v - lo) / (hi - lo)) * plotH;

    // frame + y labels
    ctx.strokeStyle = "#2a3140";
    ctx.strokeRect(margin.left, margin.top, plotW, plotH);
    ctx.fillStyle = "#8b93a3";
    ctx.font = "10px system-ui, sans-serif";
    ctx.textAlign = "right";
    const unit = this.opts.unit ?? "";
    ctx.fillText(`${hi.toPrecision(3)}${unit}`, margin.left - 4, margin.top + 8);
    ctx.fillText(`${lo.toPrecision(3)}${unit}`, margin.left - 4, margin.top + plotH);
    ctx.textAlign = "left";
    ctx.fillStyle = "#c6ccd8";
    ctx.fillText(this.opts.title, margin.left, 12);

    for (const ref of this.opts.references ?? []) {
      ctx.strokeStyle = "#46506366";
      ctx.setLineDash([2, 3]);
      ctx.beginPath();
      ctx.moveTo(margin.left, y(ref));
      ctx.lineTo(margin.left + plotW, y(ref));
      ctx.stroke();
      ctx.setLineDash([]);
    }

    this.traces.forEach((trace, i) => {
      const samples = windows[i] ?? [];
      ctx.strokeStyle = trace.color;
      ctx.setLineDash(trace.dashed ? [5, 4] : []);
      for (const segment of TimeSeries.segments(samples)) {
        ctx.beginPath();
        segment.forEach((s, j) => {
          if (j === 0) ctx.moveTo(x(s.t), y(s.value));
          else ctx.lineTo(x(s.t), y(s.value));
        });
        ctx.stroke();
      }
      ctx.setLineDash([]);
      // gap markers
      ctx.fillStyle = "#e05555";
      for (const s of samples) {
        if (s.gapBefore) ctx.fillRect(x(s.t) - 1, margin.top, 2, plotH);
      }
      // legend
      ctx.fillStyle = trace.color;
      ctx.fillText(
        trace.label,
        margin.left + 60 + i * 90,
        12,
      );
    });
  }
}

/** Pure helper used by tests: map samples to polyline segment lengths. */
export function segmentLengths(samples: Sample[]): number[] {
  return TimeSeries.segments(samples).map((seg) => seg.length);
}
