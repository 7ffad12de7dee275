/** Minimal canvas loss chart. */

import type { LossEvent } from "./api.js";

export function drawLossChart(canvas: HTMLCanvasElement, history: LossEvent[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, width, height);
  if (history.length === 0) return;

  const losses = history.map((e) => e.loss);
  const maxLoss = Math.max(...losses, 1e-12);
  const pad = 6;

  ctx.strokeStyle = "#4fc3f7";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  history.forEach((event, i) => {
    const x = pad + (i / Math.max(history.length - 1, 1)) * (width - 2 * pad);
    const y = height - pad - (event.loss / maxLoss) * (height - 2 * pad);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();

  ctx.fillStyle = "#9e9e9e";
  ctx.font = "10px monospace";
  const last = history[history.length - 1];
  ctx.fillText(`round ${last.round}  loss ${last.loss.toExponential(2)}`, pad, 12);
}
