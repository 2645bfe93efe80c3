import { ApiClient, ApiError } from "./api.js";
import { decodeRle } from "./rle.js";
import type { ClickRecord, FinishResponse, SessionInfo } from "./types.js";

export interface OverlayUpdate {
  labels: Uint8Array;
  t: number;
  modelVersion: number;
  latencyMs: number;
}

export interface SessionEvents {
  onOverlay(update: OverlayUpdate): void;
  onError(message: string, code: string): void;
  /** A click is being processed (true) or the session is idle (false). */
  onBusy(busy: boolean): void;
  onFinished(summary: FinishResponse): void;
}

interface PendingClick {
  row: number;
  col: number;
  classLabel: number;
}

/** Client-side session state: click log, latency trace, and a strict
 * single-in-flight click pipeline with at most one queued follow-up. */
export class ClientSession {
  readonly clickLog: ClickRecord[] = [];
  readonly latencyTrace: number[] = [];
  modelVersion: number;
  finished = false;

  private inFlight = false;
  private queued: PendingClick | null = null;

  constructor(
    private api: ApiClient,
    readonly info: SessionInfo,
    private events: SessionEvents,
    private now: () => number = () => performance.now(),
  ) {
    this.modelVersion = info.model_version;
  }

  get t(): number {
    return this.clickLog.length;
  }

  inBounds(row: number, col: number): boolean {
    return row >= 0 && row < this.info.height && col >= 0 && col < this.info.width;
  }

  alreadyClicked(row: number, col: number): boolean {
    return this.clickLog.some((c) => c.row === row && c.col === col);
  }

  /** Place a click. Returns false when it was ignored (out of bounds,
   * duplicate pixel, session finished, or a click is already queued). */
  placeClick(row: number, col: number, classLabel: number): boolean {
    if (this.finished) {
      this.events.onError("session is finished", "SessionClosed");
      return false;
    }
    if (!this.inBounds(row, col)) {
      this.events.onError(`(${row}, ${col}) is outside the image`, "OutOfBounds");
      return false;
    }
    if (this.alreadyClicked(row, col)) {
      this.events.onError("pixel already clicked", "DuplicateClick");
      return false;
    }
    const click = { row, col, classLabel };
    if (this.inFlight) {
      if (this.queued !== null) return false; // at most one pending click
      this.queued = click;
      return true;
    }
    void this.dispatch(click);
    return true;
  }

  private async dispatch(click: PendingClick): Promise<void> {
    this.inFlight = true;
    this.events.onBusy(true);
    const started = this.now();
    try {
      const resp = await this.api.submitClick(
        this.info.session_id,
        click.row,
        click.col,
        click.classLabel,
      );
      const latencyMs = this.now() - started;
      this.modelVersion = resp.model_version;
      this.clickLog.push({
        row: click.row,
        col: click.col,
        classLabel: click.classLabel,
        t: resp.t,
        latencyMs,
        modelVersion: resp.model_version,
      });
      this.latencyTrace.push(latencyMs);
      this.events.onOverlay({
        labels: decodeRle(resp.mask),
        t: resp.t,
        modelVersion: resp.model_version,
        latencyMs,
      });
    } catch (err) {
      const apiErr = err instanceof ApiError ? err : new ApiError(0, "Unknown", String(err));
      this.events.onError(apiErr.message, apiErr.code);
    } finally {
      this.inFlight = false;
      const next = this.queued;
      this.queued = null;
      if (next !== null && !this.finished) {
        void this.dispatch(next);
      } else {
        this.events.onBusy(false);
      }
    }
  }

  async finish(accept: boolean): Promise<FinishResponse | null> {
    if (this.finished) return null;
    if (this.t < 1) {
      this.events.onError("place at least one click first", "NoClicks");
      return null;
    }
    try {
      const summary = await this.api.finishSession(this.info.session_id, accept);
      this.finished = true;
      this.modelVersion = summary.model_version;
      this.events.onFinished(summary);
      return summary;
    } catch (err) {
      const apiErr = err instanceof ApiError ? err : new ApiError(0, "Unknown", String(err));
      this.events.onError(apiErr.message, apiErr.code);
      return null;
    }
  }

  /** The recorded clicks in submission order; replaying them through the API
   * against the same checkpoint reproduces the same overlays. */
  exportClickLog(): PendingClick[] {
    return this.clickLog.map(({ row, col, classLabel }) => ({ row, col, classLabel }));
  }
}

/** Drive a fresh session by replaying a recorded click log sequentially. */
export async function replayClickLog(
  api: ApiClient,
  info: SessionInfo,
  log: PendingClick[],
): Promise<Uint8Array[]> {
  const overlays: Uint8Array[] = [];
  for (const click of log) {
    const resp = await api.submitClick(info.session_id, click.row, click.col, click.classLabel);
    overlays.push(decodeRle(resp.mask));
  }
  return overlays;
}
