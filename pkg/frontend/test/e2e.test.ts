/** API-backed end-to-end test of the review flow.
 *
 * Spawns the real segmentation service on an ephemeral port, then drives
 * the same client, store, and renderers the browser app uses: load a
 * session, inspect a spectrum, force a cut (segment count must increment
 * server-side), and re-color the timeline through the k slider without
 * re-segmenting.
 */

import assert from "node:assert/strict";
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";
import { after, before, test } from "node:test";

import { ApiClient } from "../src/api.js";
import { renderSegmentTable, renderSpectrumSvg, renderTimeline, spectrumGeometry, timelineSpans } from "../src/render.js";
import { ReviewStore } from "../src/state.js";

let proc: ChildProcess;
let baseUrl: string;
let stateDir: string;
let api: ApiClient;

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianPair(rand: () => number): [number, number] {
  const u = Math.max(rand(), 1e-12);
  const v = rand();
  const r = Math.sqrt(-2 * Math.log(u));
  return [r * Math.cos(2 * Math.PI * v), r * Math.sin(2 * Math.PI * v)];
}

/** Two-regime synthetic bar CSV: calm then volatile. */
function barsCsv(): string {
  const rand = mulberry32(42);
  const lines = ["timestamp,value"];
  let price = 1000;
  const start = Date.UTC(2006, 0, 2, 10, 0, 0);
  for (let i = 0; i < 420; i++) {
    const sigma = i < 210 ? 1.0 : 30.0;
    const [g] = gaussianPair(rand);
    price += g * sigma;
    const ts = new Date(start + i * 30 * 60 * 1000).toISOString().replace(".000Z", "Z");
    lines.push(`${ts},${price}`);
  }
  return lines.join("\n") + "\n";
}

before(async () => {
  stateDir = mkdtempSync(path.join(tmpdir(), "regimescope-e2e-"));
  proc = spawn("python3", ["-m", "regimescope", "serve", "--port", "0"], {
    env: { ...process.env, REGIMESCOPE_STATE: stateDir },
    stdio: ["ignore", "pipe", "inherit"],
  });
  baseUrl = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("service did not start")), 30000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      const m = chunk.toString().match(/listening on (http:\/\/[\d.]+:\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve(m[1]);
      }
    });
    proc.on("exit", (code) => reject(new Error(`service exited early: ${code}`)));
  });
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${baseUrl}/healthz`);
      if (resp.ok) break;
    } catch {
      await new Promise((r) => setTimeout(r, 100));
    }
  }
  api = new ApiClient(baseUrl);
});

after(() => {
  proc.kill("SIGTERM");
  rmSync(stateDir, { recursive: true, force: true });
});

test("review flow: load, inspect, force-cut increments segments server-side", async () => {
  const created = await api.createSession(barsCsv(), "normal");
  assert.equal(created.status, "segmenting");
  assert.ok(created.segment_count >= 2, "two-regime series should split");

  const store = new ReviewStore();
  store.applySession(await api.loadSession(created.id));
  const session = store.state.session!;
  assert.equal(session.id, created.id);

  // overview renders one row per segment and one timeline span per segment
  const table = renderSegmentTable(session, null);
  assert.equal((table.match(/<tr data-segment=/g) ?? []).length, session.segment_count);
  const strip = renderTimeline(session.segments, null);
  assert.equal((strip.match(/<rect /g) ?? []).length, session.segment_count);

  // inspect the longest segment's spectrum
  const longest = session.segments.reduce((a, b) => (b.n > a.n ? b : a));
  store.selectSegment(longest.index);
  const spectrum = await api.fetchSpectrum(session.id, longest.index);
  store.applySpectrum(spectrum);
  assert.equal(spectrum.positions.length, longest.n - 2 * session.config.min_len + 1);
  assert.equal(spectrum.max, Math.max(...spectrum.values));

  // the rendered marker sits exactly at the server-reported argmax
  const svg = renderSpectrumSvg(spectrum);
  assert.match(svg, new RegExp(`data-t="${spectrum.argmax}"`));
  const geo = spectrumGeometry(spectrum);
  const t0 = spectrum.positions[0];
  const t1 = spectrum.positions[spectrum.positions.length - 1];
  const expectedX = 34 + ((spectrum.argmax - t0) / Math.max(1, t1 - t0)) * (720 - 68);
  assert.ok(Math.abs(geo.markerX - expectedX) < 1e-9);

  // force-cut at the argmax: server must report one more segment
  const before_count = session.segment_count;
  store.beginEdit("force-cut", spectrum.argmax);
  const updated = await api.submitEdit(
    session.id,
    "force-cut",
    spectrum.argmax,
    session.version,
  );
  store.applySession(updated);
  assert.equal(updated.segment_count, before_count + 1);
  assert.equal(store.state.pendingEdit, null, "ack clears the pending edit");

  const reloaded = await api.loadSession(session.id);
  assert.equal(reloaded.segment_count, before_count + 1);
  assert.ok(reloaded.boundaries.some((b) => b.provenance === "manual-add"));
});

test("k slider re-colors the timeline without re-segmenting", async () => {
  const created = await api.createSession(barsCsv(), "lognormal");
  const store = new ReviewStore();
  store.applySession(await api.loadSession(created.id));
  let session = store.state.session!;
  const m = session.segment_count;
  assert.ok(m >= 3, `need >= 3 segments for a k sweep, got ${m}`);
  const boundariesBefore = session.boundaries.map((b) => b.index);

  const k2 = await api.cluster(session.id, 2, session.version);
  store.applyCluster(k2);
  const colors2 = timelineSpans(session.segments, k2.phases, null).map((s) => s.color);

  const k3 = await api.cluster(session.id, 3, k2.version);
  store.applyCluster(k3);
  const colors3 = timelineSpans(session.segments, k3.phases, null).map((s) => s.color);

  assert.notDeepEqual(colors2, colors3, "changing k must re-color the strip");
  assert.equal(colors2.length, m);
  assert.equal(colors3.length, m);

  session = await api.loadSession(created.id);
  assert.deepEqual(
    session.boundaries.map((b) => b.index),
    boundariesBefore,
    "clustering must not move any boundary",
  );
  assert.equal(session.status, "clustered");
});

test("stale version is rejected and surfaced as a conflict", async () => {
  const created = await api.createSession(barsCsv(), "normal");
  const store = new ReviewStore();
  store.applySession(await api.loadSession(created.id));
  const session = store.state.session!;

  await api.submitEdit(session.id, "accept", null, session.version);
  store.beginEdit("accept", null);
  await assert.rejects(
    api.submitEdit(session.id, "accept", null, session.version),
    (err: any) => err.status === 409 && err.code === "VersionConflict",
  );
  store.failEdit("conflict");
  assert.equal(store.state.pendingEdit, null);
  assert.ok(store.state.error);
});
