/**
 * View state and the pending RoI modification.
 *
 * The pending modification is exactly the body the next
 * POST /sessions/{id}/roi will send, and its add/del sets stay disjoint
 * no matter the click sequence: marking a point in one direction
 * removes it from the other.
 */

import type { Box3, LossEvent, OverlayMode, RoiRequestBody } from "./api.js";

export type PickMode = "add" | "del";

export interface PendingModification {
  add: number[];
  del: number[];
  box: Box3 | null;
}

export interface ViewState {
  sceneId: string | null;
  sessionId: string | null;
  activeView: number;
  viewCount: number;
  overlayMode: OverlayMode;
  pickMode: PickMode;
  pending: PendingModification;
  history: LossEvent[];
  status: string;
  round: number;
  roiSize: number | null;
}

export function initialState(): ViewState {
  return {
    sceneId: null,
    sessionId: null,
    activeView: 0,
    viewCount: 0,
    overlayMode: "color",
    pickMode: "add",
    pending: { add: [], del: [], box: null },
    history: [],
    status: "idle",
    round: 0,
    roiSize: null,
  };
}

export function emptyPending(): PendingModification {
  return { add: [], del: [], box: null };
}

/** Record a picked point, keeping add/del disjoint. Re-marking a point
 * in its current list is a no-op; marking it in the other list moves it. */
export function markPick(pending: PendingModification, index: number,
                         mode: PickMode): PendingModification {
  const add = pending.add.filter((i) => i !== index);
  const del = pending.del.filter((i) => i !== index);
  if (mode === "add") add.push(index);
  else del.push(index);
  return { add, del, box: pending.box };
}

export function setBox(pending: PendingModification, box: Box3 | null): PendingModification {
  if (box !== null) {
    for (let axis = 0; axis < 3; axis++) {
      if (!(box.min[axis] <= box.max[axis])) {
        throw new Error(`box min exceeds max on axis ${axis}`);
      }
    }
  }
  return { add: [...pending.add], del: [...pending.del], box };
}

export function isDisjoint(pending: PendingModification): boolean {
  const dels = new Set(pending.del);
  return pending.add.every((i) => !dels.has(i));
}

export function hasPendingChanges(pending: PendingModification): boolean {
  return pending.add.length > 0 || pending.del.length > 0 || pending.box !== null;
}

/** The exact wire body for POST /sessions/{id}/roi. */
export function toRoiRequest(pending: PendingModification): RoiRequestBody {
  return {
    add: [...pending.add].sort((a, b) => a - b),
    del: [...pending.del].sort((a, b) => a - b),
    box: pending.box,
  };
}

export function appendLoss(history: LossEvent[], event: LossEvent): LossEvent[] {
  if (history.length > 0 && event.round <= history[history.length - 1].round) {
    // Stream replays from the start on reconnect; drop what we already have.
    return history;
  }
  return [...history, event];
}
