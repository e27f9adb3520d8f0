/** Browser bootstrap: wires the store, the API client, and the renderers.
 *
 * Every mutating action round-trips through the service; on success the
 * whole view re-renders from the returned session document.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  renderDendrogram,
  renderErrorBanner,
  renderSegmentTable,
  renderSpectrumSvg,
  renderStatus,
  renderTimeline,
} from "./render.js";
import { ReviewStore } from "./state.js";

const baseUrl =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8750";
const api = new ApiClient(baseUrl);
const store = new ReviewStore();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function render(): void {
  const s = store.state;
  el("error").innerHTML = renderErrorBanner(s.error);
  el("status").innerHTML = renderStatus(s.session);
  el("segments").innerHTML = s.session
    ? renderSegmentTable(s.session, s.selectedSegment)
    : "";
  el("spectrum").innerHTML = s.spectrum ? renderSpectrumSvg(s.spectrum) : "";
  el("timeline").innerHTML = s.session
    ? renderTimeline(s.session.segments, s.clusterResult?.phases ?? null, s.zoom)
    : "";
  el("dendrogram").innerHTML = s.clusterResult
    ? renderDendrogram(s.clusterResult.dendrogram, s.clusterResult.phases)
    : "";

  const hasSession = s.session !== null;
  const hasSpectrum = s.spectrum !== null;
  (el("btn-force-cut") as HTMLButtonElement).disabled = !hasSpectrum || s.pendingEdit !== null;
  (el("btn-remove") as HTMLButtonElement).disabled =
    !hasSession || s.selectedSegment === null || s.pendingEdit !== null;
  (el("btn-accept") as HTMLButtonElement).disabled = !hasSession || s.pendingEdit !== null;
  const slider = el<HTMLInputElement>("k-slider");
  if (s.session) {
    slider.max = String(Math.min(10, s.session.segment_count));
    slider.disabled = s.session.segment_count < 2;
  }
  if (s.session) {
    const a = el<HTMLAnchorElement>("export-link");
    a.href = api.exportUrl(s.session.id);
  }
}

async function guard(action: () => Promise<void>): Promise<void> {
  try {
    await action();
  } catch (err) {
    if (err instanceof ApiError && err.status === 409 && err.code === "VersionConflict") {
      store.failEdit("someone else edited this session; reload to continue");
    } else if (err instanceof ApiError) {
      store.failEdit(`${err.code}: ${err.message}`);
    } else {
      store.setError(String(err));
    }
  }
}

async function loadSession(id: string): Promise<void> {
  await guard(async () => {
    store.applySession(await api.loadSession(id));
  });
}

function selectedBoundaryTarget(): number | null {
  const s = store.state;
  if (!s.session || s.selectedSegment === null) return null;
  // removing the boundary that closes the selected segment merges it right
  const seg = s.session.segments[s.selectedSegment];
  const boundary = s.session.boundaries.find((b) => b.index === seg.end);
  return boundary ? boundary.index : null;
}

function wire(): void {
  el("load-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const id = el<HTMLInputElement>("session-id").value.trim();
    if (id) void loadSession(id);
  });

  el("segments").addEventListener("click", (ev) => {
    const row = (ev.target as HTMLElement).closest("tr[data-segment]");
    if (!row || !store.state.session) return;
    const index = Number(row.getAttribute("data-segment"));
    store.selectSegment(index);
    void guard(async () => {
      store.applySpectrum(await api.fetchSpectrum(store.state.session!.id, index));
    });
  });

  el("btn-force-cut").addEventListener("click", () => {
    const s = store.state;
    if (!s.session || !s.spectrum) return;
    store.beginEdit("force-cut", s.spectrum.argmax);
    void guard(async () => {
      store.applySession(
        await api.submitEdit(s.session!.id, "force-cut", s.spectrum!.argmax, s.session!.version),
      );
    });
  });

  el("btn-remove").addEventListener("click", () => {
    const s = store.state;
    const target = selectedBoundaryTarget();
    if (!s.session || target === null) {
      store.setError("selected segment has no removable closing boundary");
      return;
    }
    store.beginEdit("remove-boundary", target);
    void guard(async () => {
      store.applySession(
        await api.submitEdit(s.session!.id, "remove-boundary", target, s.session!.version),
      );
    });
  });

  el("btn-accept").addEventListener("click", () => {
    const s = store.state;
    if (!s.session) return;
    store.beginEdit("accept", null);
    void guard(async () => {
      store.applySession(await api.submitEdit(s.session!.id, "accept", null, s.session!.version));
    });
  });

  el("k-slider").addEventListener("change", () => {
    const s = store.state;
    if (!s.session) return;
    const k = Number(el<HTMLInputElement>("k-slider").value);
    el("k-value").textContent = String(k);
    void guard(async () => {
      store.applyCluster(await api.cluster(s.session!.id, k, s.session!.version));
    });
  });

  store.subscribe(render);
  render();
}

wire();
