/** DOM wiring: builds the page and binds gestures to controller actions. */

import { ApiClient } from "./api.js";
import type { Box3 } from "./api.js";
import { drawLossChart } from "./chart.js";
import { Controller } from "./controller.js";
import type { ViewState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

export function mountApp(root: HTMLElement, baseUrl: string): Controller {
  const api = new ApiClient(baseUrl);

  root.innerHTML = "";
  const toast = el("div", { class: "toast" });
  const status = el("div", { class: "status" }, "no scene loaded");
  const frame = el("img", { class: "frame", draggable: "false" });
  const dragRect = el("div", { class: "dragrect" });
  const frameWrap = el("div", { class: "framewrap" });
  frameWrap.append(frame, dragRect);
  const chart = el("canvas", { width: "360", height: "120", class: "chart" });
  const pendingLabel = el("div", { class: "pending" });

  const sceneFile = el("input", { type: "file", accept: ".ply" });
  const camerasFile = el("input", { type: "file", accept: ".json" });
  const loadBtn = el("button", {}, "load scene");

  const instruction = el("input", { type: "text", size: "40",
                                    placeholder: "e.g. Turn the red cluster blue" });
  const sessionBtn = el("button", {}, "new session");

  const stageButtons = (["describe", "extract", "masks", "lift"] as const).map(
    (stage) => ({ stage, button: el("button", {}, stage) }),
  );

  const prevBtn = el("button", {}, "prev view");
  const nextBtn = el("button", {}, "next view");
  const overlaySelect = el("select");
  for (const mode of ["color", "roi", "overlay"]) {
    overlaySelect.append(el("option", { value: mode }, mode));
  }

  const addModeBtn = el("button", { class: "active" }, "click adds");
  const delModeBtn = el("button", {}, "click removes");

  const boxInputs = ["min x", "min y", "min z", "max x", "max y", "max z"].map(
    (name) => el("input", { type: "number", step: "0.1", placeholder: name, class: "box" }),
  );
  const boxClearBtn = el("button", {}, "clear box");
  const applyBtn = el("button", {}, "apply RoI");

  const roundsInput = el("input", { type: "number", value: "100", min: "1" });
  const startBtn = el("button", {}, "start");
  const pauseBtn = el("button", {}, "pause");
  const resumeBtn = el("button", {}, "resume");
  const exportBtn = el("button", {}, "export PLY");

  root.append(
    rowOf("Scene:", sceneFile, camerasFile, loadBtn),
    rowOf("Instruction:", instruction, sessionBtn),
    rowOf("Stages:", ...stageButtons.map((s) => s.button)),
    rowOf("View:", prevBtn, nextBtn, overlaySelect, addModeBtn, delModeBtn),
    frameWrap,
    rowOf("Box:", ...boxInputs, boxClearBtn),
    rowOf("", applyBtn, pendingLabel),
    rowOf("Rounds:", roundsInput, startBtn, pauseBtn, resumeBtn, exportBtn),
    chart,
    status,
    toast,
  );

  function rowOf(label: string, ...children: HTMLElement[]): HTMLElement {
    const row = el("div", { class: "row" });
    if (label) row.append(el("span", { class: "label" }, label));
    row.append(...children);
    return row;
  }

  let toastTimer: ReturnType<typeof setTimeout> | undefined;
  function showToast(message: string): void {
    toast.textContent = message;
    clearTimeout(toastTimer);
    toastTimer = setTimeout(() => (toast.textContent = ""), 2500);
  }

  const controller = new Controller(api, {
    onFrame: (url) => {
      frame.src = `${url}&_=${Date.now()}`; // bust the browser cache per refresh
    },
    onToast: showToast,
    onExport: (blob, filename) => {
      const link = el("a", { download: filename });
      link.href = URL.createObjectURL(blob);
      link.click();
      URL.revokeObjectURL(link.href);
    },
    onState: (state) => renderState(state),
  });

  function renderState(state: ViewState): void {
    status.textContent =
      `scene=${state.sceneId ?? "-"} session=${state.sessionId ?? "-"} ` +
      `view=${state.activeView} status=${state.status} round=${state.round}` +
      (state.roiSize === null ? "" : ` roi=${state.roiSize}`);
    pendingLabel.textContent =
      `pending: +[${state.pending.add.join(",")}] -[${state.pending.del.join(",")}]` +
      (state.pending.box ? " box set" : "");
    addModeBtn.classList.toggle("active", state.pickMode === "add");
    delModeBtn.classList.toggle("active", state.pickMode === "del");
    drawLossChart(chart, state.history);
  }

  // -- gestures ---------------------------------------------------------------

  function framePixel(event: MouseEvent): { x: number; y: number } {
    const rect = frame.getBoundingClientRect();
    const x = Math.floor(((event.clientX - rect.left) / rect.width) * frame.naturalWidth);
    const y = Math.floor(((event.clientY - rect.top) / rect.height) * frame.naturalHeight);
    return { x, y };
  }

  loadBtn.addEventListener("click", async () => {
    const scene = sceneFile.files?.[0];
    const cameras = camerasFile.files?.[0];
    if (!scene || !cameras) {
      showToast("choose a scene PLY and a cameras JSON first");
      return;
    }
    const text = await cameras.text();
    const viewCount = (JSON.parse(text) as unknown[]).length;
    await controller.loadScene(scene, new Blob([text]), viewCount);
  });

  sessionBtn.addEventListener("click", () => {
    void controller.createSession(instruction.value);
  });
  for (const { stage, button } of stageButtons) {
    button.addEventListener("click", () => void controller.runStage(stage));
  }
  prevBtn.addEventListener("click", () =>
    void controller.showView(controller.state.activeView - 1));
  nextBtn.addEventListener("click", () =>
    void controller.showView(controller.state.activeView + 1));
  overlaySelect.addEventListener("change", () =>
    void controller.showView(controller.state.activeView,
                             overlaySelect.value as ViewState["overlayMode"]));
  addModeBtn.addEventListener("click", () => controller.setPickMode("add"));
  delModeBtn.addEventListener("click", () => controller.setPickMode("del"));

  // Click picks; drag suggests a box (threshold distinguishes the two).
  let downAt: { x: number; y: number } | null = null;
  frame.addEventListener("mousedown", (event) => {
    downAt = framePixel(event);
  });
  frame.addEventListener("mouseup", (event) => {
    if (!downAt) return;
    const up = framePixel(event);
    const moved = Math.hypot(up.x - downAt.x, up.y - downAt.y);
    if (moved < 3) {
      void controller.pickAt(up.x, up.y);
    } else {
      void controller.dragBox(downAt.x, downAt.y, up.x, up.y).then((box) => {
        if (box) fillBoxInputs(box);
      });
    }
    downAt = null;
  });

  function fillBoxInputs(box: Box3): void {
    box.min.forEach((v, i) => (boxInputs[i].value = v.toFixed(3)));
    box.max.forEach((v, i) => (boxInputs[i + 3].value = v.toFixed(3)));
  }

  function readBoxInputs(): Box3 | null {
    const values = boxInputs.map((input) => input.value.trim());
    if (values.every((v) => v === "")) return null;
    if (values.some((v) => v === "")) throw new Error("fill all six box fields");
    const nums = values.map(Number);
    return { min: [nums[0], nums[1], nums[2]], max: [nums[3], nums[4], nums[5]] };
  }

  boxClearBtn.addEventListener("click", () => {
    boxInputs.forEach((input) => (input.value = ""));
    controller.setBoxFields(null);
  });
  for (const input of boxInputs) {
    input.addEventListener("change", () => {
      try {
        controller.setBoxFields(readBoxInputs());
      } catch (err) {
        showToast(String(err));
      }
    });
  }

  applyBtn.addEventListener("click", () => void controller.applyRoi());
  startBtn.addEventListener("click", () =>
    void controller.start(Number(roundsInput.value) || null));
  pauseBtn.addEventListener("click", () => void controller.pause());
  resumeBtn.addEventListener("click", () => void controller.resume(null));
  exportBtn.addEventListener("click", () => void controller.exportScene());

  renderState(controller.state);
  return controller;
}
