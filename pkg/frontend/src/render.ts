/** Pure HTML/SVG string builders; no DOM access, so every renderer is
 * testable under node. */

import type {
  DendrogramDoc,
  PhaseDoc,
  SegmentInfo,
  SessionDoc,
  SpectrumDoc,
} from "./api.js";
import type { ZoomWindow } from "./state.js";

const SVG_W = 720;
const SVG_H = 220;
const PAD = 34;

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(x: number, digits = 3): string {
  return Number.isInteger(x) ? String(x) : x.toFixed(digits);
}

export function renderSegmentTable(session: SessionDoc, selected: number | null): string {
  const rows = session.segments
    .map((s) => {
      const cls = s.index === selected ? ' class="selected"' : "";
      const delta = s.delta === null ? "-" : fmt(s.delta, 2);
      const prov = s.provenance ?? "-";
      return (
        `<tr${cls} data-segment="${s.index}">` +
        `<td>${s.index}</td><td>${s.start}</td><td>${s.end}</td>` +
        `<td>${s.n}</td><td>${fmt(s.sigma)}</td><td>${delta}</td><td>${esc(prov)}</td></tr>`
      );
    })
    .join("");
  return (
    "<table><thead><tr>" +
    "<th>#</th><th>start</th><th>end</th><th>len</th>" +
    "<th>sigma</th><th>delta</th><th>boundary</th>" +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export interface SpectrumGeometry {
  markerX: number;
  markerY: number;
  thresholdY: number | null;
}

export function spectrumGeometry(spec: SpectrumDoc): SpectrumGeometry {
  const t0 = spec.positions[0];
  const t1 = spec.positions[spec.positions.length - 1];
  const span = Math.max(1, t1 - t0);
  const top = Math.max(spec.max, spec.threshold, 1e-12);
  const x = (t: number) => PAD + ((t - t0) / span) * (SVG_W - 2 * PAD);
  const y = (v: number) => SVG_H - PAD - (v / top) * (SVG_H - 2 * PAD);
  return {
    markerX: x(spec.argmax),
    markerY: y(spec.max),
    thresholdY: spec.threshold <= top ? y(spec.threshold) : null,
  };
}

export function renderSpectrumSvg(spec: SpectrumDoc): string {
  const t0 = spec.positions[0];
  const t1 = spec.positions[spec.positions.length - 1];
  const span = Math.max(1, t1 - t0);
  const top = Math.max(spec.max, spec.threshold, 1e-12);
  const x = (t: number) => PAD + ((t - t0) / span) * (SVG_W - 2 * PAD);
  const y = (v: number) => SVG_H - PAD - (v / top) * (SVG_H - 2 * PAD);

  const points = spec.positions
    .map((t, i) => `${x(t).toFixed(1)},${y(spec.values[i]).toFixed(1)}`)
    .join(" ");
  const geo = spectrumGeometry(spec);
  const threshold =
    geo.thresholdY === null
      ? ""
      : `<line class="threshold" x1="${PAD}" y1="${geo.thresholdY.toFixed(1)}"` +
        ` x2="${SVG_W - PAD}" y2="${geo.thresholdY.toFixed(1)}" stroke="#b22222"` +
        ` stroke-dasharray="6,4"/>` +
        `<text x="${SVG_W - PAD + 2}" y="${geo.thresholdY.toFixed(1)}" class="axis">d0</text>`;

  return (
    `<svg viewBox="0 0 ${SVG_W} ${SVG_H}" xmlns="http://www.w3.org/2000/svg">` +
    `<polyline fill="none" stroke="#1f4e79" stroke-width="1.5" points="${points}"/>` +
    threshold +
    `<circle class="argmax" data-t="${spec.argmax}" cx="${geo.markerX.toFixed(1)}"` +
    ` cy="${geo.markerY.toFixed(1)}" r="4" fill="#d2691e"/>` +
    `<text x="${geo.markerX.toFixed(1)}" y="${(geo.markerY - 8).toFixed(1)}" class="axis">` +
    `t*=${spec.argmax}, d*=${fmt(spec.max, 2)}</text>` +
    `</svg>`
  );
}

export interface TimelineSpanView {
  segment: number;
  start: number;
  end: number;
  color: string;
  label: string;
}

export function timelineSpans(
  segments: SegmentInfo[],
  phases: PhaseDoc | null,
  zoom: ZoomWindow | null,
): TimelineSpanView[] {
  const byId = new Map(phases?.clusters.map((c) => [c.id, c]) ?? []);
  const spans: TimelineSpanView[] = [];
  for (const s of segments) {
    if (zoom && (s.end < zoom.first || s.start > zoom.last)) continue;
    const cluster = phases ? byId.get(phases.cluster_of[s.index]) : undefined;
    spans.push({
      segment: s.index,
      start: s.start,
      end: s.end,
      color: cluster?.color ?? "#9e9e9e",
      label: cluster?.label ?? "unclustered",
    });
  }
  return spans;
}

export function renderTimeline(
  segments: SegmentInfo[],
  phases: PhaseDoc | null,
  zoom: ZoomWindow | null = null,
): string {
  if (segments.length === 0) return "<svg viewBox=\"0 0 720 40\"></svg>";
  const spans = timelineSpans(segments, phases, zoom);
  const first = zoom ? zoom.first : segments[0].start;
  const last = zoom ? zoom.last : segments[segments.length - 1].end;
  const total = Math.max(1, last - first + 1);
  const rects = spans
    .map((sp) => {
      const x = ((Math.max(sp.start, first) - first) / total) * SVG_W;
      const w = ((Math.min(sp.end, last) - Math.max(sp.start, first) + 1) / total) * SVG_W;
      return (
        `<rect data-segment="${sp.segment}" x="${x.toFixed(1)}" y="4"` +
        ` width="${Math.max(w, 0.5).toFixed(1)}" height="28" fill="${sp.color}">` +
        `<title>#${sp.segment} ${esc(sp.label)} [${sp.start}..${sp.end}]</title></rect>`
      );
    })
    .join("");
  return `<svg viewBox="0 0 ${SVG_W} 40" xmlns="http://www.w3.org/2000/svg">${rects}</svg>`;
}

/** Dendrogram with merge heights written at the major branches. */
export function renderDendrogram(tree: DendrogramDoc, phases: PhaseDoc | null): string {
  const m = tree.leaf_count;
  const width = SVG_W;
  const height = 260;
  const pad = 24;
  const maxH = Math.max(...tree.merges.map((mg) => mg.height), 1e-12);
  const xOf = new Map<number, number>();
  const yOf = new Map<number, number>();
  const leafGap = (width - 2 * pad) / Math.max(1, m - 1);

  // leaves ordered left-to-right by recursive tree order
  const children = new Map<number, [number, number]>();
  tree.merges.forEach((mg, i) => children.set(m + i, [mg.left, mg.right]));
  const order: number[] = [];
  const walk = (node: number): void => {
    const kids = children.get(node);
    if (!kids) {
      order.push(node);
      return;
    }
    walk(kids[0]);
    walk(kids[1]);
  };
  walk(m + tree.merges.length - 1);
  order.forEach((leaf, i) => {
    xOf.set(leaf, pad + i * leafGap);
    yOf.set(leaf, height - pad);
  });

  const yScale = (h: number) => height - pad - (h / maxH) * (height - 2 * pad);
  const parts: string[] = [];
  tree.merges.forEach((mg, i) => {
    const node = m + i;
    const xl = xOf.get(mg.left)!;
    const xr = xOf.get(mg.right)!;
    const y = yScale(mg.height);
    parts.push(
      `<path fill="none" stroke="#444" d="M ${xl.toFixed(1)} ${yOf.get(mg.left)!.toFixed(1)}` +
        ` V ${y.toFixed(1)} H ${xr.toFixed(1)} V ${yOf.get(mg.right)!.toFixed(1)}"/>`,
    );
    parts.push(
      `<text class="axis" x="${((xl + xr) / 2).toFixed(1)}" y="${(y - 3).toFixed(1)}">` +
        `${fmt(mg.height, 1)}</text>`,
    );
    xOf.set(node, (xl + xr) / 2);
    yOf.set(node, y);
  });

  const byId = new Map(phases?.clusters.map((c) => [c.id, c]) ?? []);
  for (const leaf of order) {
    const color = phases ? byId.get(phases.cluster_of[leaf])?.color ?? "#999" : "#999";
    parts.push(
      `<circle cx="${xOf.get(leaf)!.toFixed(1)}" cy="${(height - pad).toFixed(1)}"` +
        ` r="3.5" fill="${color}"><title>s${leaf}</title></circle>`,
    );
  }
  return `<svg viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">${parts.join("")}</svg>`;
}

export function renderErrorBanner(message: string | null): string {
  return message ? `<div class="error-banner">${esc(message)}</div>` : "";
}

export function renderStatus(session: SessionDoc | null): string {
  if (!session) return "<em>no session loaded</em>";
  return (
    `<strong>${esc(session.id)}</strong> &middot; model ${esc(session.model)}` +
    ` &middot; ${session.segment_count} segments &middot; status ${esc(session.status)}` +
    ` &middot; v${session.version}`
  );
}
