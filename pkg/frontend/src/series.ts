import { RingBuffer } from "./ring";

export interface Sample {
  t: number;
  value: number;
  /** True when records were lost immediately before this sample. */
  gapBefore: boolean;
}

/**
 * One chart trace.  Samples arrive in time order; a sample flagged with
 * `gapBefore` starts a new polyline segment so lost data renders as a
 * hole instead of a misleading straight line.
 */
export class TimeSeries {
  readonly samples: RingBuffer<Sample>;

  constructor(capacity = 3000) {
    this.samples = new RingBuffer<Sample>(capacity);
  }

  push(t: number, value: number, gapBefore = false): void {
    this.samples.push({ t, value, gapBefore });
  }

  clear(): void {
    this.samples.clear();
  }

  /** Samples within the trailing window [tail-window, tail]. */
  window(windowSeconds: number): Sample[] {
    const last = this.samples.last();
    if (!last) return [];
    const t0 = last.t - windowSeconds;
    const out: Sample[] = [];
    for (const s of this.samples) {
      if (s.t >= t0) out.push(s);
    }
    return out;
  }

  /**
   * Split a sample window into contiguous segments at gap markers.
   * Each segment draws as one polyline.
   */
  static segments(samples: Sample[]): Sample[][] {
    const out: Sample[][] = [];
    let current: Sample[] = [];
    for (const s of samples) {
      if (s.gapBefore && current.length) {
        out.push(current);
        current = [];
      }
      current.push(s);
    }
    if (current.length) out.push(current);
    return out;
  }
}

/** Padded [min, max] covering all values (and optional references). */
export function valueRange(
  samples: Sample[],
  include: number[] = [],
  pad = 0.1,
): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of samples) {
    if (s.value < lo) lo = s.value;
    if (s.value > hi) hi = s.value;
  }
  for (const v of include) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) return [0, 1];
  if (hi - lo < 1e-9) {
    const c = (hi + lo) / 2;
    return [c - 0.5, c + 0.5];
  }
  const margin = (hi - lo) * pad;
  return [lo - margin, hi + margin];
}
