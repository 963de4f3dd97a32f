/** Bounded event-feed buffer: newest last, seq-ordered, duplicate-free.
 *
 * The render model derives purely from what the server sent; reconnect
 * overlap or repeated deliveries collapse here, so the UI shows each record
 * exactly once no matter how the transport behaved.
 */

import type { EventRecord } from "./types.js";

export class FeedBuffer {
  private records: EventRecord[] = [];
  private seen = new Set<number>();

  constructor(readonly capacity: number = 500) {}

  /** Returns true when the record was new (and is now in the buffer). */
  push(record: EventRecord): boolean {
    if (this.seen.has(record.seq)) return false;
    this.seen.add(record.seq);
    // insert keeping seq order; out-of-order arrivals are rare, so scan from
    // the tail.
    let index = this.records.length;
    while (index > 0 && this.records[index - 1]!.seq > record.seq) {
      index -= 1;
    }
    this.records.splice(index, 0, record);
    if (this.records.length > this.capacity) {
      const evicted = this.records.splice(0, this.records.length - this.capacity);
      for (const old of evicted) this.seen.delete(old.seq);
    }
    return true;
  }

  pushAll(records: Iterable<EventRecord>): number {
    let added = 0;
    for (const record of records) {
      if (this.push(record)) added += 1;
    }
    return added;
  }

  get all(): readonly EventRecord[] {
    return this.records;
  }

  ofKind(kind: string | null): readonly EventRecord[] {
    if (!kind) return this.records;
    return this.records.filter((r) => r.kind === kind);
  }

  count(kind: string): number {
    return this.records.reduce((n, r) => n + (r.kind === kind ? 1 : 0), 0);
  }

  get lastSeq(): number {
    return this.records.length ? this.records[this.records.length - 1]!.seq : 0;
  }

  /** True when the buffered window is contiguous (no interior gaps). */
  isGapFree(): boolean {
    for (let i = 1; i < this.records.length; i += 1) {
      if (this.records[i]!.seq !== this.records[i - 1]!.seq + 1) return false;
    }
    return true;
  }

  clear(): void {
    this.records = [];
    this.seen.clear();
  }
}
