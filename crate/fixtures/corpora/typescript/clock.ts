export interface Clock {
  now(): number;
}

// Wall clock backed by Date.
export class SystemClock implements Clock {
  now(): number {
    return Date.now();
  }
}

/** Manually advanced clock for tests. */
export class FakeClock implements Clock {
  private t = 0;

  now(): number {
    return this.t;
  }

  advance(ms: number): void {
    this.t += ms;
  }
}
