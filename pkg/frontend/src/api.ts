// Gateway access: typed fetch wrappers plus the live event feed with a
// 2-second polling fallback when the SSE stream is unavailable.

import type {
  Asset,
  CommandReceipt,
  CommitEvent,
  ContractName,
  ObjectAsset,
  PoseEvent,
  RobotInfo,
  TrajectoryPoint,
  WorldSpec,
} from './types.js';

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) {
    throw new ApiError(resp.status, `${url}: HTTP ${resp.status}`);
  }
  return (await resp.json()) as T;
}

export class HttpGateway {
  constructor(readonly base: string = '') {}

  channels(): Promise<string[]> {
    return getJson(`${this.base}/api/channels`);
  }

  assets(channel: string, contract: ContractName): Promise<Asset[]> {
    return getJson(`${this.base}/api/channels/${channel}/assets?contract=${contract}`);
  }

  trajectory(robotId: string): Promise<TrajectoryPoint[]> {
    return getJson(`${this.base}/api/robots/${robotId}/trajectory`);
  }

  objects(): Promise<ObjectAsset[]> {
    return getJson(`${this.base}/api/objects`);
  }

  robots(): Promise<RobotInfo[]> {
    return getJson(`${this.base}/api/robots`);
  }

  async world(): Promise<WorldSpec | null> {
    try {
      return await getJson(`${this.base}/api/world`);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        return null; // ledger-only deployment: no live sim attached
      }
      throw err;
    }
  }

  async postCommand(
    robotId: string,
    waypoints: [number, number, number][],
  ): Promise<CommandReceipt> {
    const resp = await fetch(`${this.base}/api/commands`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ robot_id: robotId, waypoints }),
    });
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, body.error ?? `HTTP ${resp.status}`);
    }
    return body as CommandReceipt;
  }
}

export type FeedStatus = 'connecting' | 'live' | 'polling';

export interface FeedHandlers {
  onCommit?: (event: CommitEvent) => void;
  onPose?: (event: PoseEvent) => void;
  onStatus?: (status: FeedStatus) => void;
}

interface EventSourceLike {
  onopen: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  addEventListener(type: string, cb: (ev: { data: string }) => void): void;
  close(): void;
}

export interface FeedOptions {
  // injectable for tests and for environments without EventSource
  eventSourceFactory?: (url: string) => EventSourceLike;
  pollFn?: () => void | Promise<void>;
  pollIntervalMs?: number;
  setIntervalFn?: typeof setInterval;
  clearIntervalFn?: typeof clearInterval;
}

export const POLL_INTERVAL_MS = 2000;

export class EventFeed {
  private source: EventSourceLike | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private status: FeedStatus = 'connecting';
  private readonly opts: Required<FeedOptions>;

  constructor(
    readonly url: string,
    readonly handlers: FeedHandlers,
    opts: FeedOptions = {},
  ) {
    this.opts = {
      eventSourceFactory:
        opts.eventSourceFactory ??
        ((u: string) => new EventSource(u) as unknown as EventSourceLike),
      pollFn: opts.pollFn ?? (() => {}),
      pollIntervalMs: opts.pollIntervalMs ?? POLL_INTERVAL_MS,
      setIntervalFn: opts.setIntervalFn ?? setInterval,
      clearIntervalFn: opts.clearIntervalFn ?? clearInterval,
    };
  }

  get currentStatus(): FeedStatus {
    return this.status;
  }

  start(): void {
    let source: EventSourceLike;
    try {
      source = this.opts.eventSourceFactory(this.url);
    } catch {
      this.startPolling();
      return;
    }
    this.source = source;
    source.onopen = () => {
      this.stopPolling();
      this.setStatus('live');
    };
    // EventSource reconnects by itself; we poll while it is down
    source.onerror = () => this.startPolling();
    source.addEventListener('commit', (ev) => {
      this.handlers.onCommit?.(JSON.parse(ev.data) as CommitEvent);
    });
    source.addEventListener('pose', (ev) => {
      this.handlers.onPose?.(JSON.parse(ev.data) as PoseEvent);
    });
  }

  stop(): void {
    this.source?.close();
    this.source = null;
    this.stopPolling();
    this.setStatus('connecting');
  }

  private setStatus(status: FeedStatus): void {
    if (status !== this.status) {
      this.status = status;
      this.handlers.onStatus?.(status);
    }
  }

  private startPolling(): void {
    if (this.pollTimer !== null) {
      return;
    }
    this.setStatus('polling');
    this.pollTimer = this.opts.setIntervalFn(
      () => void this.opts.pollFn(),
      this.opts.pollIntervalMs,
    );
  }

  private stopPolling(): void {
    if (this.pollTimer !== null) {
      this.opts.clearIntervalFn(this.pollTimer);
      this.pollTimer = null;
    }
  }
}
