"""Recursive divergence segmentation engine.

A cursor position t splits an interval into left/right subsequences; the
divergence at t is how much better two independent Gaussian fits explain
the data than one (log-likelihood ratio at the MLEs, plus the conventional
additive 1/2).  Segmentation repeatedly accepts the strongest cut above a
threshold, re-optimizing all boundaries inside their supersegments after
every accepted cut.  Manual edits support the semi-automated termination
step: an analyst may force cuts below threshold, remove boundaries, or
accept the result.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import (
    BadEditError,
    DegenerateIntervalError,
    TooShortError,
)
from .stats import GaussianStats, PrefixStats, build_prefix_stats, interval_stats


class Provenance(str, Enum):
    AUTOMATIC = "automatic"
    MANUAL_ADD = "manual-add"
    MANUAL_KEEP = "manual-keep"


class EditKind(str, Enum):
    FORCE_CUT = "force-cut"
    REMOVE_BOUNDARY = "remove-boundary"
    ACCEPT = "accept"


@dataclass(frozen=True)
class SegmentationConfig:
    threshold: float = 10.0
    min_len: int = 13
    max_opt_sweeps: int = 100
    variance_floor_ratio: float = 1e-12

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if self.min_len < 2:
            raise ValueError("min_len must be >= 2")
        if self.max_opt_sweeps < 1:
            raise ValueError("max_opt_sweeps must be >= 1")
        if not 0 < self.variance_floor_ratio < 1:
            raise ValueError("variance_floor_ratio must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class DivergenceSpectrum:
    """Divergence values over every admissible cursor position of an interval."""

    a: int
    b: int
    positions: np.ndarray
    values: np.ndarray
    t_star: int
    delta_star: float


@dataclass(frozen=True)
class Boundary:
    index: int
    delta: float | None
    provenance: Provenance
    timestamp: dt.datetime | None = None


@dataclass(frozen=True)
class Segment:
    start: int
    end: int
    stats: GaussianStats

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class ManualEdit:
    kind: EditKind
    at: int | None = None
    actor: str = "analyst"
    timestamp: dt.datetime | None = None


@dataclass(frozen=True)
class Segmentation:
    """Ordered interior boundaries plus per-segment Gaussian statistics.

    Boundary m at cursor t_m closes segment m; segment m spans movement
    indices (t_{m-1}+1 .. t_m) with t_0 = 0 and t_{M+1} = n.
    """

    model: str | None
    config: SegmentationConfig
    n: int
    boundaries: tuple[Boundary, ...]
    segments: tuple[Segment, ...]
    bars_per_day: int | None = None
    series_start: dt.datetime | None = None
    series_end: dt.datetime | None = None
    audit: tuple[ManualEdit, ...] = ()

    @property
    def boundary_indices(self) -> list[int]:
        return [b.index for b in self.boundaries]


def divergence_spectrum(
    p: PrefixStats, a: int, b: int, cfg: SegmentationConfig
) -> DivergenceSpectrum:
    """Divergence at every cursor t in [a+min_len-1, b-min_len] of [a..b].

    Subsegment variances below variance_floor_ratio times the whole-interval
    variance are floored there, so constant runs yield enormous but finite
    divergence instead of infinities.
    """
    if not (1 <= a <= b <= p.n_total):
        raise TooShortError(f"interval [{a}..{b}] outside series")
    n_tot = b - a + 1
    if n_tot < 2 * cfg.min_len:
        raise TooShortError(
            f"interval of length {n_tot} admits no cut at min_len={cfg.min_len}"
        )

    whole = interval_stats(p, a, b)
    if whole.variance <= 0.0:
        raise DegenerateIntervalError("whole-interval variance is zero")

    # Local, interval-mean-conditioned cumulative sums in extended precision.
    # Global float64 prefixes lose digits when a low-variance subsegment sits
    # inside a large high-variance interval; the spectrum must stay within
    # 1e-8 of a direct two-pass evaluation.
    seg = np.asarray(p.values[a - 1 : b], dtype=np.longdouble)
    local_mean = seg.mean()
    centered = seg - local_mean
    cs = np.concatenate((np.zeros(1, dtype=np.longdouble), np.cumsum(centered)))
    cq = np.concatenate(
        (np.zeros(1, dtype=np.longdouble), np.cumsum(centered * centered))
    )

    t = np.arange(a + cfg.min_len - 1, b - cfg.min_len + 1)
    k = t - (a - 1)  # left lengths
    n_l = k.astype(np.longdouble)
    n_r = np.longdouble(n_tot) - n_l

    s_l = cs[k]
    q_l = cq[k]
    s_r = cs[n_tot] - s_l
    q_r = cq[n_tot] - q_l

    v_l = q_l / n_l - (s_l / n_l) ** 2
    v_r = q_r / n_r - (s_r / n_r) ** 2
    v_full = float(cq[n_tot] / n_tot - (cs[n_tot] / n_tot) ** 2)
    if v_full <= 0.0:
        raise DegenerateIntervalError("whole-interval variance is zero")

    floor = cfg.variance_floor_ratio * v_full
    np.maximum(v_l, floor, out=v_l)
    np.maximum(v_r, floor, out=v_r)

    delta = 0.5 * (n_tot * np.log(np.longdouble(v_full)) - n_l * np.log(v_l) - n_r * np.log(v_r)) + 0.5
    delta = delta.astype(np.float64)

    best = int(np.argmax(delta))
    return DivergenceSpectrum(
        a=a,
        b=b,
        positions=t,
        values=delta,
        t_star=int(t[best]),
        delta_star=float(delta[best]),
    )


def best_split(s: DivergenceSpectrum) -> tuple[int, float]:
    """Argmax of the spectrum; ties already resolved to the smallest t."""
    if s.positions.size == 0:
        raise TooShortError("spectrum has no defined positions")
    return s.t_star, s.delta_star


# Internal mutable boundary state used by the engine: (index, delta, provenance).


def _segment_spans(indices: list[int], n: int) -> list[tuple[int, int]]:
    edges = [0] + list(indices) + [n]
    return [(edges[i] + 1, edges[i + 1]) for i in range(len(edges) - 1)]


def _spectrum_or_none(p, a, b, cfg, cache):
    key = (a, b)
    if key in cache:
        return cache[key]
    try:
        spec = divergence_spectrum(p, a, b, cfg)
    except (TooShortError, DegenerateIntervalError):
        spec = None
    cache[key] = spec
    return spec


def _optimize_indices(
    p: PrefixStats,
    bounds: list[list],
    n: int,
    cfg: SegmentationConfig,
    cache: dict,
    trace: list | None = None,
) -> int:
    """Gauss-Seidel sweeps moving each boundary to its supersegment argmax.

    A move is accepted only on strict improvement of the supersegment
    divergence.  Returns the number of sweeps run.  Boundaries whose current
    position falls outside the admissible cursor range (possible after
    manual edits created short segments) are left untouched.
    """
    sweeps = 0
    for _ in range(cfg.max_opt_sweeps):
        sweeps += 1
        moved = False
        for m in range(len(bounds)):
            left = bounds[m - 1][0] if m > 0 else 0
            right = bounds[m + 1][0] if m < len(bounds) - 1 else n
            a, b = left + 1, right
            spec = _spectrum_or_none(p, a, b, cfg, cache)
            if spec is None:
                continue
            cur = bounds[m][0]
            lo = int(spec.positions[0])
            hi = int(spec.positions[-1])
            if cur < lo or cur > hi:
                continue
            cur_val = float(spec.values[cur - lo])
            if spec.delta_star > cur_val:
                bounds[m][0] = spec.t_star
                moved = True
        if trace is not None:
            trace.append([b[0] for b in bounds])
        if not moved:
            break
    return sweeps


def _assemble(
    p: PrefixStats,
    bounds: list[list],
    n: int,
    cfg: SegmentationConfig,
    z,
    audit: tuple[ManualEdit, ...] = (),
) -> Segmentation:
    mv_ts = getattr(z, "source_timestamps", None)
    boundaries = tuple(
        Boundary(
            index=idx,
            delta=delta,
            provenance=prov,
            timestamp=mv_ts[idx - 1] if mv_ts is not None else None,
        )
        for idx, delta, prov in (tuple(b) for b in bounds)
    )
    segments = tuple(
        Segment(start=a, end=b, stats=interval_stats(p, a, b))
        for a, b in _segment_spans([b.index for b in boundaries], n)
    )
    return Segmentation(
        model=getattr(getattr(z, "model", None), "value", getattr(z, "model", None)),
        config=cfg,
        n=n,
        boundaries=boundaries,
        segments=segments,
        bars_per_day=getattr(z, "bars_per_day", None),
        series_start=getattr(z, "series_start", None),
        series_end=mv_ts[-1] if mv_ts is not None else None,
        audit=audit,
    )


def recursive_segment(z, cfg: SegmentationConfig | None = None) -> Segmentation:
    """Recursively cut a movement series until no split reaches the threshold.

    Work-queue order: always cut the live segment whose best internal split
    has the largest divergence.  Every accepted cut is followed by a full
    boundary optimization pass over the complete boundary set.
    """
    cfg = cfg or SegmentationConfig()
    p = build_prefix_stats(z)
    n = p.n_total
    if n < 2 * cfg.min_len:
        raise TooShortError(f"series of length {n} is shorter than 2*min_len")

    cache: dict = {}
    bounds: list[list] = []  # [index, delta_at_creation, provenance]

    while True:
        best_spec = None
        for a, b in _segment_spans([bb[0] for bb in bounds], n):
            spec = _spectrum_or_none(p, a, b, cfg, cache)
            if spec is None or spec.delta_star < cfg.threshold:
                continue
            if best_spec is None or spec.delta_star > best_spec.delta_star:
                best_spec = spec
        if best_spec is None:
            break
        bounds.append([best_spec.t_star, best_spec.delta_star, Provenance.AUTOMATIC])
        bounds.sort(key=lambda bb: bb[0])
        _optimize_indices(p, bounds, n, cfg, cache)

    return _assemble(p, bounds, n, cfg, z)


def _timestamp_for(seg: Segmentation, index: int) -> dt.datetime | None:
    for b in seg.boundaries:
        if b.index == index:
            return b.timestamp
    return None


def _finish(
    prefix: PrefixStats,
    bounds: list[list],
    seg: Segmentation,
    cfg: SegmentationConfig,
    z,
    audit: tuple[ManualEdit, ...],
) -> Segmentation:
    """Assemble a result, keeping series metadata when z carries none."""
    series_like = hasattr(z, "source_timestamps")
    out = _assemble(prefix, bounds, seg.n, cfg, z if series_like else prefix, audit=audit)
    if not series_like:
        out = replace(
            out,
            model=seg.model,
            bars_per_day=seg.bars_per_day,
            series_start=seg.series_start,
            series_end=seg.series_end,
            boundaries=tuple(
                replace(nb, timestamp=_timestamp_for(seg, nb.index))
                for nb in out.boundaries
            ),
        )
    return out


def optimize_boundaries(
    z, seg: Segmentation, cfg: SegmentationConfig | None = None, trace: list | None = None
) -> Segmentation:
    """Re-optimize every boundary inside its supersegment until a fixed point.

    ``z`` may be the movement series or a prebuilt PrefixStats.  Recorded
    per-boundary divergences are the values at creation and are not updated
    by moves; only positions (and their timestamps) change.
    """
    cfg = cfg or seg.config
    p = z if isinstance(z, PrefixStats) else build_prefix_stats(z)
    if p.n_total != seg.n:
        raise BadEditError("series length does not match segmentation")
    bounds = [[b.index, b.delta, b.provenance] for b in seg.boundaries]
    cache: dict = {}
    _optimize_indices(p, bounds, seg.n, cfg, cache, trace=trace)
    return _finish(p, bounds, seg, cfg, z, audit=seg.audit)


def apply_manual_edit(
    seg: Segmentation,
    edit: ManualEdit,
    p,
    cfg: SegmentationConfig | None = None,
) -> Segmentation:
    """Apply one manual edit and append it to the audit trail.

    force-cut inserts a boundary at the target segment's internal spectrum
    argmax regardless of the threshold (short segments fall back to a
    manual minimum length of 2).  remove-boundary merges the two adjacent
    segments.  accept is an audited no-op.
    """
    cfg = cfg or seg.config
    prefix = p if isinstance(p, PrefixStats) else build_prefix_stats(p)
    if prefix.n_total != seg.n:
        raise BadEditError("series length does not match segmentation")

    audit = seg.audit + (edit,)

    if edit.kind == EditKind.ACCEPT:
        return replace(seg, audit=audit)

    if edit.at is None:
        raise BadEditError(f"{edit.kind.value} requires a target position")

    bounds = [[b.index, b.delta, b.provenance] for b in seg.boundaries]

    if edit.kind == EditKind.REMOVE_BOUNDARY:
        hits = [bb for bb in bounds if bb[0] == edit.at]
        if not hits:
            raise BadEditError(f"no boundary at {edit.at}")
        bounds.remove(hits[0])
    elif edit.kind == EditKind.FORCE_CUT:
        if not (1 <= edit.at <= seg.n):
            raise BadEditError(f"position {edit.at} outside series")
        target = next(
            (s for s in seg.segments if s.start <= edit.at <= s.end), None
        )
        if target is None:
            raise BadEditError(f"no segment contains {edit.at}")
        length = target.length
        if length < 4:
            raise BadEditError("segment too short to cut manually")
        eff_min = cfg.min_len if length >= 2 * cfg.min_len else 2
        eff_cfg = replace(cfg, min_len=eff_min)
        spec = divergence_spectrum(prefix, target.start, target.end, eff_cfg)
        bounds.append([spec.t_star, spec.delta_star, Provenance.MANUAL_ADD])
        bounds.sort(key=lambda bb: bb[0])
    else:
        raise BadEditError(f"unknown edit kind {edit.kind!r}")

    return _finish(prefix, bounds, seg, cfg, p, audit=audit)


# ---------------------------------------------------------------------------
# JSON codec (schema regimescope.segmentation/1)

SEGMENTATION_SCHEMA = "regimescope.segmentation/1"


def _iso(ts: dt.datetime | None) -> str | None:
    if ts is None:
        return None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc).isoformat().replace("+00:00", "Z")


def _parse_iso(s: str | None) -> dt.datetime | None:
    if s is None:
        return None
    return dt.datetime.fromisoformat(s.replace("Z", "+00:00"))


def segmentation_to_dict(seg: Segmentation) -> dict:
    return {
        "schema": SEGMENTATION_SCHEMA,
        "model": seg.model,
        "config": {
            "threshold": seg.config.threshold,
            "min_len": seg.config.min_len,
            "max_opt_sweeps": seg.config.max_opt_sweeps,
            "variance_floor_ratio": seg.config.variance_floor_ratio,
        },
        "n_movements": seg.n,
        "bars_per_day": seg.bars_per_day,
        "series_start": _iso(seg.series_start),
        "series_end": _iso(seg.series_end),
        "boundaries": [
            {
                "index": b.index,
                "timestamp": _iso(b.timestamp),
                "delta": b.delta,
                "provenance": b.provenance.value,
            }
            for b in seg.boundaries
        ],
        "segments": [
            {
                "start": s.start,
                "end": s.end,
                "n": s.stats.n,
                "mean": s.stats.mean,
                "variance": s.stats.variance,
            }
            for s in seg.segments
        ],
        "audit": [
            {
                "kind": e.kind.value,
                "at": e.at,
                "actor": e.actor,
                "timestamp": _iso(e.timestamp),
            }
            for e in seg.audit
        ],
    }


def segmentation_from_dict(doc: dict) -> Segmentation:
    if doc.get("schema") != SEGMENTATION_SCHEMA:
        raise ValueError(f"unsupported segmentation schema {doc.get('schema')!r}")
    cfg = SegmentationConfig(**doc["config"])
    return Segmentation(
        model=doc.get("model"),
        config=cfg,
        n=doc["n_movements"],
        bars_per_day=doc.get("bars_per_day"),
        series_start=_parse_iso(doc.get("series_start")),
        series_end=_parse_iso(doc.get("series_end")),
        boundaries=tuple(
            Boundary(
                index=b["index"],
                delta=b["delta"],
                provenance=Provenance(b["provenance"]),
                timestamp=_parse_iso(b.get("timestamp")),
            )
            for b in doc["boundaries"]
        ),
        segments=tuple(
            Segment(
                start=s["start"],
                end=s["end"],
                stats=GaussianStats(n=s["n"], mean=s["mean"], variance=s["variance"]),
            )
            for s in doc["segments"]
        ),
        audit=tuple(
            ManualEdit(
                kind=EditKind(e["kind"]),
                at=e.get("at"),
                actor=e.get("actor", "analyst"),
                timestamp=_parse_iso(e.get("timestamp")),
            )
            for e in doc.get("audit", [])
        ),
    )
