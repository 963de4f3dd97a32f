/** Server-sent-events reader for the follow endpoint.
 *
 * Implemented over fetch streaming rather than the EventSource global so the
 * exact same code runs in browsers and under vitest on node, and so
 * reconnection carries `since=<last seq>`, so the server resumes the feed
 * with no gaps and no duplicates.
 */

import type { ConnectionStatus, EventRecord } from "./types.js";

export interface FeedOptions {
  since?: number;
  kind?: string;
  onRecord: (record: EventRecord) => void;
  onStatus?: (status: ConnectionStatus) => void;
  /** Delay before a reconnect attempt (ms). */
  retryMs?: number;
}

export class EventFeedConnection {
  private lastSeq: number;
  private stopped = false;
  private controller: AbortController | null = null;
  private running: Promise<void> | null = null;

  constructor(
    private readonly base: string,
    private readonly instanceId: string,
    private readonly opts: FeedOptions,
  ) {
    this.lastSeq = opts.since ?? 0;
  }

  get lastSequence(): number {
    return this.lastSeq;
  }

  start(): void {
    if (this.running) return;
    this.stopped = false;
    this.running = this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  /** Tear down the transport but keep the loop alive: used to exercise the
   * resume-from-last-seq path (and by flaky networks, free of charge). */
  forceReconnect(): void {
    this.controller?.abort();
  }

  private status(status: ConnectionStatus): void {
    this.opts.onStatus?.(status);
  }

  private url(): string {
    const params = new URLSearchParams({ follow: "true", since: String(this.lastSeq) });
    if (this.opts.kind) params.set("kind", this.opts.kind);
    return `${this.base}/api/v1/instances/${this.instanceId}/events?${params}`;
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      this.controller = new AbortController();
      try {
        const response = await fetch(this.url(), {
          signal: this.controller.signal,
          headers: { accept: "text/event-stream" },
        });
        if (!response.ok || !response.body) {
          throw new Error(`stream rejected: ${response.status}`);
        }
        this.status("connected");
        await this.consume(response.body);
      } catch {
        // fallthrough to reconnect
      }
      if (this.stopped) break;
      this.status("reconnecting");
      await sleep(this.opts.retryMs ?? 250);
    }
    this.status("idle");
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let boundary: number;
      while ((boundary = buffer.indexOf("\n\n")) >= 0) {
        const chunk = buffer.slice(0, boundary);
        buffer = buffer.slice(boundary + 2);
        this.handleChunk(chunk);
      }
    }
  }

  private handleChunk(chunk: string): void {
    for (const line of chunk.split("\n")) {
      if (!line.startsWith("data: ")) continue;
      let record: EventRecord;
      try {
        record = JSON.parse(line.slice("data: ".length)) as EventRecord;
      } catch {
        continue;
      }
      if (record.seq > this.lastSeq) {
        this.lastSeq = record.seq;
      }
      this.opts.onRecord(record);
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
