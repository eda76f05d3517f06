// Live monitor model: an ordered, gap-free view of one instance's trace,
// maintained across disconnects by resuming from the last seen index.

import { openSse, SseConnection } from "./sse.js";
import type { TraceEntry } from "./types.js";

export interface MonitorStats {
  entries: number;
  duplicates: number;
  gaps: number;
  lastIdx: number;
  connections: number;
}

export class LiveMonitor {
  readonly entries: TraceEntry[] = [];
  duplicates = 0;
  gaps = 0;
  connections = 0;
  private listeners: ((entry: TraceEntry) => void)[] = [];
  private connection: SseConnection | null = null;
  private running = false;

  get lastIdx(): number {
    return this.entries.length > 0 ? this.entries[this.entries.length - 1].idx : -1;
  }

  onEntry(listener: (entry: TraceEntry) => void): void {
    this.listeners.push(listener);
  }

  /** Accept an entry, dropping duplicates and counting gaps. */
  offer(entry: TraceEntry): boolean {
    if (entry.idx <= this.lastIdx) {
      this.duplicates += 1;
      return false;
    }
    if (entry.idx !== this.lastIdx + 1) {
      this.gaps += 1;
    }
    this.entries.push(entry);
    for (const listener of this.listeners) {
      listener(entry);
    }
    return true;
  }

  seqOrdered(): boolean {
    for (let i = 1; i < this.entries.length; i++) {
      if (this.entries[i].seq < this.entries[i - 1].seq) {
        return false;
      }
    }
    return true;
  }

  contiguous(): boolean {
    const first = this.entries.length > 0 ? this.entries[0].idx : 0;
    return this.gaps === 0 && this.entries.every((e, i) => e.idx === first + i);
  }

  stats(): MonitorStats {
    return {
      entries: this.entries.length,
      duplicates: this.duplicates,
      gaps: this.gaps,
      lastIdx: this.lastIdx,
      connections: this.connections,
    };
  }

  /** Run until stopped, reconnecting with the last seen index. */
  async run(streamUrl: (fromIdx: number) => string): Promise<void> {
    this.running = true;
    while (this.running) {
      this.connections += 1;
      const connection = openSse(streamUrl(this.lastIdx));
      this.connection = connection;
      try {
        for await (const message of connection.messages) {
          if (message.event !== "trace") {
            continue;
          }
          this.offer(JSON.parse(message.data) as TraceEntry);
        }
      } catch {
        // connection dropped; fall through to reconnect
      }
      if (this.running) {
        await new Promise((resolve) => setTimeout(resolve, 50));
      }
    }
  }

  /** Drop the current connection (the run loop reconnects if still running). */
  disconnect(): void {
    this.connection?.abort();
  }

  stop(): void {
    this.running = false;
    this.connection?.abort();
  }
}
