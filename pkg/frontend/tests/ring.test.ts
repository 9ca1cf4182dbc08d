import { describe, expect, it } from "vitest";

import { RingBuffer } from "../src/ring";

describe("RingBuffer", () => {
  it.each([0, -1, 1.5, NaN])("rejects capacity %s", (capacity) => {
    expect(() => new RingBuffer<number>(capacity)).toThrow(/capacity/);
  });

  it("stores items below capacity in order", () => {
    const ring = new RingBuffer<number>(4);
    ring.push(1);
    ring.push(2);
    ring.push(3);
    expect(ring.length).toBe(3);
    expect(ring.at(0)).toBe(1);
    expect(ring.at(2)).toBe(3);
    expect(ring.last()).toBe(3);
    expect(ring.toArray()).toEqual([1, 2, 3]);
  });

  it("evicts the oldest items once full", () => {
    const ring = new RingBuffer<number>(3);
    for (const v of [10, 20, 30, 40, 50]) ring.push(v);
    expect(ring.length).toBe(3);
    expect(ring.toArray()).toEqual([30, 40, 50]);
    expect(ring.at(0)).toBe(30);
    expect(ring.last()).toBe(50);
  });

  it("keeps order across many wraps", () => {
    const ring = new RingBuffer<number>(7);
    for (let i = 0; i < 100; i += 1) ring.push(i);
    expect(ring.toArray()).toEqual([93, 94, 95, 96, 97, 98, 99]);
  });

  it("range-checks indexed access", () => {
    const ring = new RingBuffer<number>(2);
    ring.push(5);
    expect(() => ring.at(-1)).toThrow(RangeError);
    expect(() => ring.at(1)).toThrow(RangeError);
  });

  it("reports empty state", () => {
    const ring = new RingBuffer<string>(2);
    expect(ring.length).toBe(0);
    expect(ring.last()).toBeUndefined();
    expect(ring.toArray()).toEqual([]);
  });

  it("clears back to empty", () => {
    const ring = new RingBuffer<number>(3);
    ring.push(1);
    ring.push(2);
    ring.clear();
    expect(ring.length).toBe(0);
    expect(ring.toArray()).toEqual([]);
    ring.push(9);
    expect(ring.toArray()).toEqual([9]);
  });
});
