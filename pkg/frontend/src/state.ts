/** View state for one review session.
 *
 * Server responses are the single source of truth: every mutation goes
 * through the edit endpoint and the store only re-renders what the API
 * returned.  The pending edit is cleared as soon as the server acknowledges.
 */

import type { ClusterResult, SessionDoc, SpectrumDoc } from "./api.js";

export interface PendingEdit {
  kind: string;
  at: number | null;
}

export interface ZoomWindow {
  first: number;
  last: number;
}

export interface ViewState {
  session: SessionDoc | null;
  selectedSegment: number | null;
  spectrum: SpectrumDoc | null;
  clusterResult: ClusterResult | null;
  zoom: ZoomWindow | null;
  pendingEdit: PendingEdit | null;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    session: null,
    selectedSegment: null,
    spectrum: null,
    clusterResult: null,
    zoom: null,
    pendingEdit: null,
    error: null,
  };
}

export class ReviewStore {
  state: ViewState = initialState();
  private listeners: Array<(s: ViewState) => void> = [];

  subscribe(fn: (s: ViewState) => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  applySession(doc: SessionDoc): void {
    const keepSelection =
      this.state.selectedSegment !== null &&
      this.state.selectedSegment < doc.segment_count;
    this.state = {
      ...this.state,
      session: doc,
      selectedSegment: keepSelection ? this.state.selectedSegment : null,
      // spectrum belongs to the previous segmentation once an edit lands
      spectrum: keepSelection ? this.state.spectrum : null,
      pendingEdit: null,
      error: null,
    };
    this.emit();
  }

  selectSegment(index: number): void {
    const session = this.state.session;
    if (!session || index < 0 || index >= session.segment_count) {
      throw new Error(`segment ${index} not in session`);
    }
    this.state = { ...this.state, selectedSegment: index, spectrum: null };
    this.emit();
  }

  applySpectrum(doc: SpectrumDoc): void {
    this.state = { ...this.state, spectrum: doc };
    this.emit();
  }

  beginEdit(kind: string, at: number | null): void {
    this.state = { ...this.state, pendingEdit: { kind, at } };
    this.emit();
  }

  failEdit(message: string): void {
    this.state = { ...this.state, pendingEdit: null, error: message };
    this.emit();
  }

  applyCluster(result: ClusterResult): void {
    const session = this.state.session;
    if (session) session.version = result.version;
    this.state = { ...this.state, clusterResult: result, error: null };
    this.emit();
  }

  setZoom(zoom: ZoomWindow | null): void {
    this.state = { ...this.state, zoom };
    this.emit();
  }

  setError(message: string): void {
    this.state = { ...this.state, error: message };
    this.emit();
  }
}
