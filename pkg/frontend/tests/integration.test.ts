/**
 * Scripted session against the real mock-backed service:
 * load -> stages/lift -> pick 3 add + 1 del -> box -> 10 rounds -> export.
 *
 * Requires the Python package installed (`pip install -e .`); the test
 * spawns `splatedit serve` itself.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiClient } from "../src/api.js";
import { Controller } from "../src/controller.js";

const PORT = 8749;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let workdir: string;

async function waitForHealth(timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const reply = await fetch(`${BASE}/health`);
      if (reply.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "splatedit-ui-"));
  const fixture = spawnSync("python3", ["-", workdir], {
    input: [
      "import sys",
      "from pathlib import Path",
      "from splatedit.core import export_ply, dump_cameras",
      "from splatedit.synthetic import make_two_cluster_scene, orbit_cameras",
      "root = Path(sys.argv[1])",
      "(root / 'scene.ply').write_bytes(export_ply(make_two_cluster_scene()))",
      "(root / 'cameras.json').write_text(dump_cameras(orbit_cameras(8)))",
    ].join("\n"),
    encoding: "utf-8",
  });
  if (fixture.status !== 0) throw new Error(`fixture generation failed: ${fixture.stderr}`);

  server = spawn("splatedit", ["serve", "--port", String(PORT)], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  await waitForHealth();
}, 90_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("scripted session", () => {
  it("completes load, lift, refine, rounds, and export", async () => {
    const api = new ApiClient(BASE);
    const toasts: string[] = [];
    const controller = new Controller(api, { onToast: (m) => toasts.push(m) });

    const scenePly = new Blob([readFileSync(join(workdir, "scene.ply"))]);
    const camerasJson = new Blob([readFileSync(join(workdir, "cameras.json"))]);

    const sceneId = await controller.loadScene(scenePly, camerasJson, 8);
    expect(sceneId).toBeTruthy();

    await controller.createSession("Turn the red cluster blue");
    const sessionId = controller.state.sessionId;
    const roiBefore = await api.fetchFrame(sceneId, 0, "roi", sessionId);
    for (const stage of ["describe", "extract", "masks", "lift"] as const) {
      await controller.runStage(stage);
    }
    const lifted = controller.state.roiSize;
    expect(lifted).not.toBeNull();
    expect(lifted!).toBeGreaterThanOrEqual(45);

    // The roi channel now shows the lifted cluster where it was dark before.
    const roiAfter = await api.fetchFrame(sceneId, 0, "roi", sessionId);
    expect(roiAfter.size).toBeGreaterThan(0);
    const before = new Uint8Array(await roiBefore.arrayBuffer());
    const after = new Uint8Array(await roiAfter.arrayBuffer());
    expect(Buffer.from(after).equals(Buffer.from(before))).toBe(false);

    // Scan the frame for clickable points: blue-cluster indices (>= 50)
    // become adds, a red-cluster index (< 50) becomes the del.
    const adds = new Set<number>();
    let delIndex: number | null = null;
    outer: for (let y = 8; y < 56; y += 2) {
      for (let x = 8; x < 56; x += 2) {
        const index = await api.pick(sceneId, 0, x, y, controller.state.sessionId);
        if (index === null) continue;
        if (index >= 50 && adds.size < 3) {
          controller.setPickMode("add");
          await controller.pickAt(x, y);
          adds.add(index);
        } else if (index < 50 && delIndex === null) {
          controller.setPickMode("del");
          await controller.pickAt(x, y);
          delIndex = index;
        }
        if (adds.size === 3 && delIndex !== null) break outer;
      }
    }
    expect(adds.size).toBe(3);
    expect(delIndex).not.toBeNull();
    expect(controller.state.pending.add).toHaveLength(3);
    expect(controller.state.pending.del).toHaveLength(1);

    // Box from a full-frame drag; it spans the whole scene.
    const box = await controller.dragBox(0, 0, 63, 63);
    expect(box).not.toBeNull();

    const selected = await controller.applyRoi();
    expect(selected).toBe(lifted! + adds.size - 1);
    expect(controller.state.pending).toEqual({ add: [], del: [], box: null });

    await controller.start(10);
    const events = await controller.followEvents();
    expect(events).toBe(10);
    expect(controller.state.round).toBe(10);
    expect(controller.state.status).toBe("done");
    expect(controller.state.history).toHaveLength(10);

    const exported = await controller.exportScene();
    const head = new Uint8Array(await exported.arrayBuffer()).slice(0, 3);
    expect(new TextDecoder().decode(head)).toBe("ply");
    expect(toasts).toEqual([]); // nothing misfired along the way
  }, 120_000);
});
