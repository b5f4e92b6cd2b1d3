import type { LabelApi } from "./api.js";
import type {
  LabelQuery,
  SegmentationState,
  SessionMeta,
  SessionRequest,
} from "./types.js";

export type OverlayMode = "none" | "segmentation" | "provenance";

export type Phase = "idle" | "creating" | "labeling" | "done" | "error";

/** Everything a view needs to render; the server owns all algorithmic state. */
export interface ViewState {
  phase: Phase;
  session: SessionMeta | null;
  query: LabelQuery | null;
  segmentation: SegmentationState | null;
  overlay: OverlayMode;
  busy: boolean;
  error: string | null;
}

const INITIAL: ViewState = {
  phase: "idle",
  session: null,
  query: null,
  segmentation: null,
  overlay: "segmentation",
  busy: false,
  error: null,
};

/**
 * Lock-step session driver: the server hands out one query at a time and
 * every user action is exactly one API call.  After each round-trip the
 * state is re-derived from the server response, so a page refresh (attach)
 * lands in the same place.
 */
export class SessionController {
  private state: ViewState = { ...INITIAL };

  constructor(
    private readonly api: LabelApi,
    private readonly onChange: (state: ViewState) => void = () => {},
  ) {}

  get view(): ViewState {
    return this.state;
  }

  /** Create a fresh session and advance to its first query (or the result). */
  async create(request: SessionRequest): Promise<void> {
    this.patch({ ...INITIAL, phase: "creating", busy: true });
    try {
      const session = await this.api.createSession(request);
      await this.syncFrom(session);
    } catch (error) {
      this.fail(error);
    }
  }

  /** Resume an existing session (page refresh, shared link). */
  async attach(sessionId: string): Promise<void> {
    this.patch({ ...INITIAL, phase: "creating", busy: true });
    try {
      const session = await this.api.getSession(sessionId);
      await this.syncFrom(session);
    } catch (error) {
      this.fail(error);
    }
  }

  /** Answer the open query.  No-op unless a query is showing. */
  async chooseClass(classId: number): Promise<void> {
    const { session, query } = this.state;
    if (!session || !query || this.state.busy) return;
    if (classId < 1 || classId > session.classes) return;
    this.patch({ busy: true });
    try {
      const updated = await this.api.submitLabel(session.id, query.pixel, classId);
      await this.syncFrom(updated);
    } catch (error) {
      this.fail(error);
    }
  }

  setOverlay(mode: OverlayMode): void {
    this.patch({ overlay: mode });
  }

  /** Pull whatever the session state implies: the next query or the result. */
  private async syncFrom(session: SessionMeta): Promise<void> {
    if (session.state === "awaiting-label") {
      const query = await this.api.getQuery(session.id);
      this.patch({
        phase: "labeling",
        session,
        query,
        segmentation: null,
        busy: false,
        error: null,
      });
    } else if (session.state === "complete") {
      const segmentation = await this.api.getSegmentation(session.id);
      this.patch({
        phase: "done",
        session,
        query: null,
        segmentation,
        busy: false,
        error: null,
      });
    } else {
      this.patch({ phase: "creating", session, busy: true });
    }
  }

  private fail(error: unknown): void {
    const message = error instanceof Error ? error.message : String(error);
    this.patch({ phase: "error", busy: false, error: message });
  }

  private patch(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    this.onChange(this.state);
  }
}
