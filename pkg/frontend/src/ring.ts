/** Fixed-capacity ring buffer for chart series. */
export class RingBuffer<T> {
  private readonly items: (T | undefined)[];
  private start = 0;
  private count = 0;

  constructor(readonly capacity: number) {
    if (!Number.isInteger(capacity) || capacity <= 0) {
      throw new Error("ring capacity must be a positive integer");
    }
    this.items = new Array(capacity);
  }

  get length(): number {
    return this.count;
  }

  push(item: T): void {
    const end = (this.start + this.count) % this.capacity;
    this.items[end] = item;
    if (this.count < this.capacity) {
      this.count += 1;
    } else {
      this.start = (this.start + 1) % this.capacity;
    }
  }

  at(index: number): T {
    if (index < 0 || index >= this.count) {
      throw new RangeError(`index ${index} out of range 0..${this.count - 1}`);
    }
    return this.items[(this.start + index) % this.capacity] as T;
  }

  last(): T | undefined {
    return this.count ? this.at(this.count - 1) : undefined;
  }

  clear(): void {
    this.start = 0;
    this.count = 0;
    this.items.fill(undefined);
  }

  *[Symbol.iterator](): Iterator<T> {
    for (let i = 0; i < this.count; i += 1) yield this.at(i);
  }

  toArray(): T[] {
    return [...this];
  }
}
