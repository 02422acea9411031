import { EventEmitter } from "events";
import type { Clock } from "./clock";

/** Entry stored in the cache. */
interface Entry<V> {
  value: V;
  expiresAt: number;
}

// Time-bounded cache with change notifications.
export class TtlCache<V> extends EventEmitter {
  private readonly entries = new Map<string, Entry<V>>();

  constructor(private readonly clock: Clock, private readonly ttlMs: number) {
    super();
  }

  get(key: string): V | undefined {
    const e = this.entries.get(key);
    if (!e) {
      return undefined;
    }
    if (e.expiresAt <= this.clock.now()) {
      this.entries.delete(key);
      this.emit("expired", key);
      return undefined;
    }
    return e.value;
  }

  set(key: string, value: V): void {
    this.entries.set(key, { value, expiresAt: this.clock.now() + this.ttlMs });
    this.emit("set", key);
  }

  get size(): number {
    return this.entries.size;
  }

  /*
   * Drops expired entries and reports how many were removed.
   */
  sweep(): number {
    let removed = 0;
    for (const [key, e] of this.entries) {
      if (e.expiresAt <= this.clock.now()) {
        this.entries.delete(key);
        removed++;
      }
    }
    return removed;
  }
}
