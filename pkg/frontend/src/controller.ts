/**
 * UI actions, decoupled from the DOM. Every user gesture maps to one
 * method here; every method issues only documented endpoints and keeps
 * the local state in sync with what the server confirmed.
 */

import { ApiClient } from "./api.js";
import type { Box3, OverlayMode, SessionDescriptor } from "./api.js";
import { readEventStream } from "./events.js";
import {
  PendingModification,
  PickMode,
  ViewState,
  appendLoss,
  emptyPending,
  hasPendingChanges,
  initialState,
  isDisjoint,
  markPick,
  setBox,
  toRoiRequest,
} from "./state.js";

export interface ControllerHooks {
  onState?: (state: ViewState) => void;
  onFrame?: (url: string) => void;
  onToast?: (message: string) => void;
  onExport?: (data: Blob, filename: string) => void;
}

export class Controller {
  state: ViewState = initialState();

  constructor(private api: ApiClient, private hooks: ControllerHooks = {}) {}

  private notify(): void {
    this.hooks.onState?.(this.state);
  }

  private toast(message: string): void {
    this.hooks.onToast?.(message);
  }

  private applyDescriptor(descriptor: SessionDescriptor): void {
    this.state.status = descriptor.status;
    this.state.round = descriptor.round;
    this.state.roiSize = descriptor.roi_size;
  }

  async loadScene(scenePly: Blob, camerasJson: Blob, viewCount: number): Promise<string> {
    const reply = await this.api.uploadScene(scenePly, camerasJson);
    this.state = initialState();
    this.state.sceneId = reply.scene_id;
    this.state.viewCount = viewCount;
    this.notify();
    await this.refreshFrame();
    return reply.scene_id;
  }

  async createSession(instruction: string): Promise<string> {
    if (!this.state.sceneId) throw new Error("load a scene first");
    const descriptor = await this.api.createSession(this.state.sceneId, instruction);
    this.state.sessionId = descriptor.id;
    this.state.history = [];
    this.applyDescriptor(descriptor);
    this.notify();
    return descriptor.id;
  }

  async runStage(stage: "describe" | "extract" | "masks" | "lift"): Promise<void> {
    if (!this.state.sessionId) throw new Error("no session");
    await this.api.runStage(this.state.sessionId, stage);
    this.applyDescriptor(await this.api.descriptor(this.state.sessionId));
    this.notify();
    if (stage === "lift") await this.refreshFrame();
  }

  // -- viewing ---------------------------------------------------------------

  async showView(view: number, overlayMode?: OverlayMode): Promise<void> {
    if (view < 0 || (this.state.viewCount > 0 && view >= this.state.viewCount)) {
      this.toast(`view ${view} out of range`);
      return;
    }
    this.state.activeView = view;
    if (overlayMode) this.state.overlayMode = overlayMode;
    this.notify();
    await this.refreshFrame();
  }

  async refreshFrame(): Promise<void> {
    if (!this.state.sceneId) return;
    const url = this.api.renderUrl(
      this.state.sceneId, this.state.activeView, this.state.overlayMode,
      this.state.sessionId,
    );
    this.hooks.onFrame?.(url);
  }

  setPickMode(mode: PickMode): void {
    this.state.pickMode = mode;
    this.notify();
  }

  // -- RoI refinement ----------------------------------------------------------

  /** Click on the frame: pick the point under the pixel and mark it. */
  async pickAt(x: number, y: number): Promise<number | null> {
    if (!this.state.sceneId) throw new Error("load a scene first");
    const index = await this.api.pick(
      this.state.sceneId, this.state.activeView, x, y, this.state.sessionId,
    );
    if (index === null) {
      this.toast("no point under the cursor");
      return null;
    }
    this.state.pending = markPick(this.state.pending, index, this.state.pickMode);
    if (!isDisjoint(this.state.pending)) {
      throw new Error("pending add/del sets overlap"); // invariant guard
    }
    this.notify();
    return index;
  }

  /** Numeric box entry (authoritative). Pass null to clear. */
  setBoxFields(box: Box3 | null): void {
    this.state.pending = setBox(this.state.pending, box);
    this.notify();
  }

  /** 2D drag: ask the server for a box suggestion and fill the fields. */
  async dragBox(x0: number, y0: number, x1: number, y1: number): Promise<Box3 | null> {
    if (!this.state.sceneId) throw new Error("load a scene first");
    const box = await this.api.suggestBox(
      this.state.sceneId, this.state.activeView, x0, y0, x1, y1, this.state.sessionId,
    );
    if (box === null) {
      this.toast("no points inside the dragged region");
      return null;
    }
    this.state.pending = setBox(this.state.pending, box);
    this.notify();
    return box;
  }

  async applyRoi(): Promise<number> {
    if (!this.state.sessionId) throw new Error("no session");
    if (!hasPendingChanges(this.state.pending)) {
      this.toast("nothing to apply");
      return this.state.roiSize ?? 0;
    }
    const reply = await this.api.applyRoi(
      this.state.sessionId, toRoiRequest(this.state.pending),
    );
    this.state.pending = emptyPending();
    this.state.roiSize = reply.selected;
    this.notify();
    await this.refreshFrame();
    return reply.selected;
  }

  // -- rounds ------------------------------------------------------------------

  async start(maxRounds: number | null): Promise<void> {
    if (!this.state.sessionId) throw new Error("no session");
    this.applyDescriptor(await this.api.start(this.state.sessionId, maxRounds));
    this.notify();
    void this.followEvents();
  }

  async pause(): Promise<void> {
    if (!this.state.sessionId) throw new Error("no session");
    this.applyDescriptor(await this.api.pause(this.state.sessionId));
    this.notify();
  }

  async resume(maxRounds: number | null): Promise<void> {
    if (!this.state.sessionId) throw new Error("no session");
    this.applyDescriptor(await this.api.resume(this.state.sessionId, maxRounds));
    this.notify();
    void this.followEvents();
  }

  /** Consume the loss stream until the run settles; returns event count. */
  async followEvents(): Promise<number> {
    if (!this.state.sessionId) throw new Error("no session");
    const response = await this.api.openEvents(this.state.sessionId);
    if (!response.body) return 0;
    const count = await readEventStream(response.body, (event) => {
      this.state.history = appendLoss(this.state.history, event);
      this.state.round = event.round;
      this.notify();
    });
    this.applyDescriptor(await this.api.descriptor(this.state.sessionId));
    this.notify();
    await this.refreshFrame();
    return count;
  }

  async exportScene(): Promise<Blob> {
    if (!this.state.sessionId) throw new Error("no session");
    const blob = await this.api.exportScene(this.state.sessionId);
    this.hooks.onExport?.(blob, `${this.state.sessionId}.ply`);
    return blob;
  }
}
