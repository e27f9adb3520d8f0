"""Session-oriented HTTP API for the interactive review workflow.

One JSON document per session on disk; mutations are serialized per
session behind optimistic version checks, so concurrent editors get 409s
instead of lost updates.  The current segmentation is always reproducible
by replaying the audit log over the automatic result.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
import tempfile
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import report as report_mod
from .cluster import (
    build_distance_matrix,
    complete_link,
    cut_tree,
    dendrogram_from_dict,
    dendrogram_to_dict,
    phases_from_dict,
    phases_to_dict,
)
from .errors import (
    BadInputError,
    BadKError,
    RegimescopeError,
    TooFewSegmentsError,
    UnknownSessionError,
    VersionConflictError,
)
from .ingest import (
    BarSeries,
    Model,
    MovementSeries,
    format_timestamp,
    movements,
    parse_bars_csv_text,
    read_bars_csv,
)
from .segment import (
    EditKind,
    ManualEdit,
    Segmentation,
    SegmentationConfig,
    apply_manual_edit,
    divergence_spectrum,
    optimize_boundaries,
    recursive_segment,
    segmentation_from_dict,
    segmentation_to_dict,
    _parse_iso,
)
from .stats import build_prefix_stats

logger = logging.getLogger(__name__)

SESSION_SCHEMA = "regimescope.session/1"

STATUS_CODES = {
    "EmptyData": 400,
    "BadInput": 400,
    "BadTick": 400,
    "BadK": 400,
    "TooShort": 422,
    "BadValue": 422,
    "BadInterval": 400,
    "DegenerateVariance": 409,
    "DegenerateInterval": 409,
    "BadEdit": 404,
    "Incompatible": 409,
    "TooFewSegments": 409,
    "VersionConflict": 409,
    "UnknownSession": 404,
}


class SessionStore:
    """One JSON document per session, written atomically."""

    def __init__(self, state_dir: str | Path):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> Path:
        return self.state_dir / f"{session_id}.json"

    def load(self, session_id: str) -> dict:
        path = self._path(session_id)
        if not path.exists():
            raise UnknownSessionError(f"no session {session_id}")
        return json.loads(path.read_text(encoding="utf-8"))

    def save(self, doc: dict) -> None:
        path = self._path(doc["id"])
        fd, tmp = tempfile.mkstemp(dir=self.state_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class CreateSessionRequest(BaseModel):
    bars_csv: str | None = None
    bars_path: str | None = None
    model: str = "normal"
    bars_per_day: int = 13
    threshold: float | None = None
    min_len: int | None = None
    max_opt_sweeps: int | None = None
    variance_floor_ratio: float | None = None


class EditRequest(BaseModel):
    kind: str
    at: int | None = None
    actor: str = "analyst"
    expected_version: int


class ClusterRequest(BaseModel):
    k: int
    expected_version: int


def _movement_series(doc: dict) -> MovementSeries:
    bars = BarSeries(
        timestamps=tuple(_parse_iso(t) for t in doc["bars"]["timestamps"]),
        values=np.asarray(doc["bars"]["values"], dtype=np.float64),
        bars_per_day=doc["bars"]["bars_per_day"],
    )
    return movements(bars, doc["model"])


def _config(doc: dict) -> SegmentationConfig:
    return SegmentationConfig(**doc["config"])


def _session_summary(doc: dict) -> dict:
    seg = segmentation_from_dict(doc["current"])
    boundaries = [
        {
            "index": b.index,
            "timestamp": format_timestamp(b.timestamp) if b.timestamp else None,
            "delta": b.delta,
            "provenance": b.provenance.value,
        }
        for b in seg.boundaries
    ]
    segments = []
    for m, s in enumerate(seg.segments):
        segments.append(
            {
                "index": m,
                "start": s.start,
                "end": s.end,
                "n": s.stats.n,
                "mean": s.stats.mean,
                "variance": s.stats.variance,
                "sigma": s.stats.sigma,
                "delta": seg.boundaries[m].delta if m < len(seg.boundaries) else None,
                "provenance": seg.boundaries[m].provenance.value
                if m < len(seg.boundaries)
                else None,
            }
        )
    summary = {
        "id": doc["id"],
        "status": doc["status"],
        "version": doc["version"],
        "model": doc["model"],
        "config": doc["config"],
        "created_at": doc["created_at"],
        "n_movements": seg.n,
        "bars_per_day": seg.bars_per_day,
        "segment_count": len(seg.segments),
        "boundaries": boundaries,
        "segments": segments,
    }
    if doc.get("cluster"):
        summary["cluster"] = {
            "k": doc["cluster"]["k"],
            "phases": doc["cluster"]["phases"],
        }
    return summary


def create_app(state_dir: str | Path | None = None) -> FastAPI:
    state_dir = Path(
        state_dir
        or os.environ.get("REGIMESCOPE_STATE", "")
        or Path.cwd() / "regimescope_state"
    )
    store = SessionStore(state_dir)
    app = FastAPI(title="regimescope", version="0.1.0")
    app.state.store = store

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RegimescopeError)
    async def _domain_error(request: Request, exc: RegimescopeError):
        status = STATUS_CODES.get(exc.code, 400)
        return JSONResponse(
            status_code=status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"code": "BadRequest", "message": str(exc)}
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        if req.model not in (Model.NORMAL.value, Model.LOGNORMAL.value):
            raise BadInputError(f"unknown model {req.model!r}")
        if req.bars_csv is not None:
            bars = parse_bars_csv_text(req.bars_csv, bars_per_day=req.bars_per_day)
        elif req.bars_path is not None:
            if not Path(req.bars_path).exists():
                raise BadInputError(f"no such file {req.bars_path}")
            bars = read_bars_csv(req.bars_path, bars_per_day=req.bars_per_day)
        else:
            raise BadInputError("one of bars_csv or bars_path is required")

        overrides = {
            name: getattr(req, name)
            for name in ("threshold", "min_len", "max_opt_sweeps", "variance_floor_ratio")
            if getattr(req, name) is not None
        }
        try:
            cfg = SegmentationConfig(**overrides)
        except ValueError as exc:
            raise BadInputError(str(exc)) from exc

        z = movements(bars, req.model)
        seg = recursive_segment(z, cfg)
        seg = optimize_boundaries(z, seg, cfg)

        doc = {
            "schema": SESSION_SCHEMA,
            "id": uuid.uuid4().hex[:12],
            "created_at": format_timestamp(dt.datetime.now(dt.timezone.utc)),
            "status": "segmenting",
            "version": 1,
            "model": req.model,
            "config": {
                "threshold": cfg.threshold,
                "min_len": cfg.min_len,
                "max_opt_sweeps": cfg.max_opt_sweeps,
                "variance_floor_ratio": cfg.variance_floor_ratio,
            },
            "bars": {
                "timestamps": [format_timestamp(t) for t in bars.timestamps],
                "values": [float(v) for v in bars.values],
                "bars_per_day": bars.bars_per_day,
            },
            "automatic": segmentation_to_dict(seg),
            "current": segmentation_to_dict(seg),
            "audit": [],
            "cluster": None,
        }
        store.save(doc)
        return _session_summary(doc)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_summary(store.load(session_id))

    @app.get("/sessions/{session_id}/segments")
    def get_segments(session_id: str):
        return _session_summary(store.load(session_id))["segments"]

    @app.get("/sessions/{session_id}/segments/{m}/spectrum")
    def get_spectrum(session_id: str, m: int):
        doc = store.load(session_id)
        seg = segmentation_from_dict(doc["current"])
        if not 0 <= m < len(seg.segments):
            raise UnknownSessionError(f"no segment {m}")
        cfg = _config(doc)
        target = seg.segments[m]
        if target.length < 2 * cfg.min_len:
            # too short to inspect is a conflict here, not a payload error
            return JSONResponse(
                status_code=409,
                content={
                    "code": "TooShort",
                    "message": f"segment {m} has length {target.length} < {2 * cfg.min_len}",
                },
            )
        z = _movement_series(doc)
        spec = divergence_spectrum(build_prefix_stats(z), target.start, target.end, cfg)
        return {
            "segment": m,
            "start": target.start,
            "end": target.end,
            "threshold": cfg.threshold,
            "positions": [int(t) for t in spec.positions],
            "values": [float(v) for v in spec.values],
            "argmax": spec.t_star,
            "max": spec.delta_star,
        }

    @app.post("/sessions/{session_id}/edits")
    def post_edit(session_id: str, req: EditRequest):
        with store.lock(session_id):
            doc = store.load(session_id)
            if req.expected_version != doc["version"]:
                raise VersionConflictError(
                    f"expected version {req.expected_version}, have {doc['version']}"
                )
            try:
                kind = EditKind(req.kind)
            except ValueError as exc:
                raise BadInputError(f"unknown edit kind {req.kind!r}") from exc

            edit = ManualEdit(
                kind=kind,
                at=req.at,
                actor=req.actor,
                timestamp=dt.datetime.now(dt.timezone.utc),
            )
            z = _movement_series(doc)
            cfg = _config(doc)
            seg = segmentation_from_dict(doc["current"])
            seg = apply_manual_edit(seg, edit, z, cfg)
            if kind is not EditKind.ACCEPT:
                seg = optimize_boundaries(z, seg, cfg)

            doc["current"] = segmentation_to_dict(seg)
            doc["audit"].append(
                {
                    "kind": kind.value,
                    "at": req.at,
                    "actor": req.actor,
                    "timestamp": format_timestamp(edit.timestamp),
                }
            )
            doc["version"] += 1
            doc["status"] = "reviewing" if kind is EditKind.ACCEPT else "segmenting"
            if kind is not EditKind.ACCEPT:
                doc["cluster"] = None  # stale after a structural edit
            store.save(doc)
            return _session_summary(doc)

    @app.post("/sessions/{session_id}/cluster")
    def post_cluster(session_id: str, req: ClusterRequest):
        with store.lock(session_id):
            doc = store.load(session_id)
            if req.expected_version != doc["version"]:
                raise VersionConflictError(
                    f"expected version {req.expected_version}, have {doc['version']}"
                )
            seg = segmentation_from_dict(doc["current"])
            if len(seg.segments) < 2:
                raise TooFewSegmentsError("need at least 2 segments to cluster")
            if not 2 <= req.k <= len(seg.segments):
                raise BadKError(f"k={req.k} outside [2, {len(seg.segments)}]")
            dm = build_distance_matrix(
                [s.stats for s in seg.segments],
                variance_floor_ratio=_config(doc).variance_floor_ratio,
            )
            tree = complete_link(dm)
            phases = cut_tree(tree, req.k)
            doc["cluster"] = {
                "k": req.k,
                "dendrogram": dendrogram_to_dict(tree),
                "phases": phases_to_dict(phases),
            }
            doc["version"] += 1
            doc["status"] = "clustered"
            store.save(doc)
            return {
                "id": doc["id"],
                "version": doc["version"],
                "status": doc["status"],
                "k": req.k,
                "dendrogram": doc["cluster"]["dendrogram"],
                "phases": doc["cluster"]["phases"],
            }

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str, format: str = "bundle"):
        doc = store.load(session_id)
        seg = segmentation_from_dict(doc["current"])
        tree = phases = timeline = None
        if doc.get("cluster"):
            tree = dendrogram_from_dict(doc["cluster"]["dendrogram"])
            phases = phases_from_dict(doc["cluster"]["phases"])
            timeline = report_mod.phase_timeline(seg, phases)

        import tempfile as _tempfile

        with _tempfile.TemporaryDirectory() as tmp:
            files = report_mod.export_bundle(
                tmp,
                segmentation=seg,
                dendrogram=tree,
                phases=phases,
                timeline=timeline,
            )
            contents = {
                name: path.read_text(encoding="utf-8") for name, path in files.items()
            }

        if format == "bundle":
            return JSONResponse(content={"files": contents})
        name_by_format = {
            "segmentation": "segmentation.json",
            "dendrogram": "dendrogram.json",
            "newick": "dendrogram.newick",
            "timeline": "timeline.csv",
        }
        if format not in name_by_format:
            raise BadInputError(f"unknown export format {format!r}")
        name = name_by_format[format]
        if name not in contents:
            raise BadInputError(f"session has no {format} artifact yet")
        media = {
            "segmentation": "application/json",
            "dendrogram": "application/json",
            "newick": "text/plain",
            "timeline": "text/csv",
        }[format]
        return Response(content=contents[name], media_type=media)

    ui_dir = os.environ.get("REGIMESCOPE_UI", "")
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def replay_audit(doc: dict) -> Segmentation:
    """Rebuild the current segmentation from the automatic result + audit log."""
    seg = segmentation_from_dict(doc["automatic"])
    z = _movement_series(doc)
    cfg = _config(doc)
    for entry in doc["audit"]:
        edit = ManualEdit(
            kind=EditKind(entry["kind"]),
            at=entry.get("at"),
            actor=entry.get("actor", "analyst"),
            timestamp=_parse_iso(entry.get("timestamp")),
        )
        seg = apply_manual_edit(seg, edit, z, cfg)
        if edit.kind is not EditKind.ACCEPT:
            seg = optimize_boundaries(z, seg, cfg)
    return seg
