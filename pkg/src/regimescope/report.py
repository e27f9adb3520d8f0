"""Cross-model comparison, phase timelines, shock scanning, and exports.

Boundary matching is greedy nearest-gap one-to-one within a tolerance,
with ties resolved toward earlier boundaries; disagreement intervals are
maximal runs of inter-boundary gaps that contain unmatched boundaries,
bounded by matched (robust) boundaries or the series ends.  Shock-sequence
detection is a heuristic reading of precursor / inverted shock runs and is
labeled as such in every output.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cluster import (
    Dendrogram,
    PhaseAssignment,
    dendrogram_to_dict,
    phases_to_dict,
    to_newick,
)
from .errors import IncompatibleError
from .ingest import format_timestamp
from .segment import (
    DivergenceSpectrum,
    Segmentation,
    segmentation_to_dict,
    segmentation_from_dict,
    _parse_iso,
)

COMPARISON_SCHEMA = "regimescope.comparison/1"
SHOCKS_SCHEMA = "regimescope.shocks/1"


@dataclass(frozen=True)
class MatchedPair:
    index_a: int
    index_b: int
    gap: int


@dataclass(frozen=True)
class DisagreementInterval:
    """Span bounded by robust boundaries (or series ends) where the models
    disagree; counts follow the shape of a per-interval comparison table."""

    start_a: int
    end_a: int
    start_b: int
    end_b: int
    segments_a: int
    segments_b: int
    common_inside: int


@dataclass(frozen=True)
class CommonBoundaryReport:
    tolerance: int
    pairs: tuple[MatchedPair, ...]
    common: int
    exact: int
    unmatched_a: tuple[int, ...]
    unmatched_b: tuple[int, ...]
    intervals: tuple[DisagreementInterval, ...]


@dataclass(frozen=True)
class PhaseSpan:
    start: dt.datetime
    end: dt.datetime
    cluster: int
    label: str
    sigma: float
    color: str
    n_bars: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PhaseTimeline:
    spans: tuple[PhaseSpan, ...]


@dataclass(frozen=True)
class ShockRun:
    direction: str  # "precursor" | "inverted"
    first_span: int
    last_span: int
    start: dt.datetime
    end: dt.datetime
    sigmas: tuple[float, ...]
    severity_trend: str  # "rising" | "falling" | "flat"


@dataclass(frozen=True)
class ShockReport:
    min_run: int
    window_bars: int
    runs: tuple[ShockRun, ...]
    heuristic: bool = True


def compare_segmentations(
    a: Segmentation, b: Segmentation, tolerance_bars: int | None = None
) -> CommonBoundaryReport:
    """Greedy nearest-gap one-to-one boundary matching within a tolerance."""
    if a.n != b.n:
        raise IncompatibleError(f"series lengths differ: {a.n} vs {b.n}")
    if tolerance_bars is None:
        tolerance_bars = a.bars_per_day if a.bars_per_day else 13
    if tolerance_bars < 0:
        raise IncompatibleError("tolerance must be >= 0")

    pos_a = [bd.index for bd in a.boundaries]
    pos_b = [bd.index for bd in b.boundaries]

    candidates = sorted(
        (
            (abs(x - y), min(x, y), max(x, y), x, y)
            for x in pos_a
            for y in pos_b
            if abs(x - y) <= tolerance_bars
        ),
    )
    used_a: set[int] = set()
    used_b: set[int] = set()
    pairs: list[MatchedPair] = []
    for gap, _, _, x, y in candidates:
        if x in used_a or y in used_b:
            continue
        used_a.add(x)
        used_b.add(y)
        pairs.append(MatchedPair(index_a=x, index_b=y, gap=gap))
    pairs.sort(key=lambda pr: pr.index_a)

    unmatched_a = tuple(x for x in pos_a if x not in used_a)
    unmatched_b = tuple(y for y in pos_b if y not in used_b)

    intervals = _disagreement_intervals(pairs, unmatched_a, unmatched_b, a.n)

    return CommonBoundaryReport(
        tolerance=tolerance_bars,
        pairs=tuple(pairs),
        common=len(pairs),
        exact=sum(1 for pr in pairs if pr.gap == 0),
        unmatched_a=unmatched_a,
        unmatched_b=unmatched_b,
        intervals=intervals,
    )


def _disagreement_intervals(pairs, unmatched_a, unmatched_b, n):
    """Maximal runs of robust-boundary gaps containing unmatched boundaries.

    Adjacent disagreeing gaps merge across their shared robust boundary, so
    an interval may contain common boundaries in its interior; those are
    counted in common_inside.
    """
    # Sentinels at the series ends behave like robust boundaries.
    robust = [(0, 0)] + [(p.index_a, p.index_b) for p in pairs] + [(n, n)]
    gap_disagrees = []
    for (la, lb), (ra, rb) in zip(robust, robust[1:]):
        has_a = any(la < x < ra for x in unmatched_a)
        has_b = any(lb < y < rb for y in unmatched_b)
        gap_disagrees.append(has_a or has_b)

    intervals = []
    i = 0
    while i < len(gap_disagrees):
        if not gap_disagrees[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(gap_disagrees) and gap_disagrees[j + 1]:
            j += 1
        start_a, start_b = robust[i]
        end_a, end_b = robust[j + 1]
        inside_a = sum(1 for x in unmatched_a if start_a < x < end_a)
        inside_b = sum(1 for y in unmatched_b if start_b < y < end_b)
        common_inside = j - i  # robust boundaries interior to the merged run
        intervals.append(
            DisagreementInterval(
                start_a=start_a,
                end_a=end_a,
                start_b=start_b,
                end_b=end_b,
                segments_a=inside_a + common_inside + 1,
                segments_b=inside_b + common_inside + 1,
                common_inside=common_inside,
            )
        )
        i = j + 1
    return tuple(intervals)


def phase_timeline(seg: Segmentation, phases: PhaseAssignment) -> PhaseTimeline:
    """One chronological span per segment, tiling [first bar, last bar]."""
    if len(phases.cluster_of) != len(seg.segments):
        raise IncompatibleError(
            f"{len(phases.cluster_of)} cluster assignments for {len(seg.segments)} segments"
        )
    if seg.series_start is None or seg.series_end is None:
        raise IncompatibleError("segmentation carries no timestamps")

    by_id = {c.id: c for c in phases.clusters}
    spans = []
    prev_end = seg.series_start
    for m, segment in enumerate(seg.segments):
        if m < len(seg.boundaries):
            end = seg.boundaries[m].timestamp
        else:
            end = seg.series_end
        if end is None:
            raise IncompatibleError(f"boundary {m} carries no timestamp")
        summary = by_id[phases.cluster_of[m]]
        spans.append(
            PhaseSpan(
                start=prev_end,
                end=end,
                cluster=summary.id,
                label=summary.label,
                sigma=segment.stats.sigma,
                color=summary.color,
                n_bars=segment.length,
            )
        )
        prev_end = end
    return PhaseTimeline(spans=tuple(spans))


def _trend(sigmas) -> str:
    if sigmas[-1] > sigmas[0]:
        return "rising"
    if sigmas[-1] < sigmas[0]:
        return "falling"
    return "flat"


def detect_shock_sequences(
    tl: PhaseTimeline, min_run: int = 2, window_bars: int = 130
) -> ShockReport:
    """Heuristic scan for precursor and inverted shock runs.

    A precursor run is a maximal block of consecutive moderate spans, at
    least min_run long with non-decreasing sigma, entered from a
    low-dominated context.  An inverted run is a maximal block of
    consecutive low/moderate spans bounded on both sides by high or extreme
    spans, with a high-dominated trailing context.  Context domination is
    measured over the spans within window_bars before the block (span
    counts when bar lengths are unavailable).
    """
    spans = tl.spans
    if not spans:
        return ShockReport(min_run=min_run, window_bars=window_bars, runs=())

    def weight(span: PhaseSpan) -> int:
        return span.n_bars if span.n_bars > 0 else 1

    def context_weights(block_start: int) -> dict[str, int]:
        weights: dict[str, int] = {}
        used = 0
        for i in range(block_start - 1, -1, -1):
            w = min(weight(spans[i]), window_bars - used)
            if w <= 0:
                break
            weights[spans[i].label] = weights.get(spans[i].label, 0) + w
            used += w
        return weights

    runs: list[ShockRun] = []

    # Precursor runs: consecutive moderates in a low-dominated context.
    i = 0
    while i < len(spans):
        if spans[i].label != "moderate":
            i += 1
            continue
        j = i
        while j + 1 < len(spans) and spans[j + 1].label == "moderate":
            j += 1
        block = spans[i : j + 1]
        sigmas = [s.sigma for s in block]
        if (
            len(block) >= min_run
            and all(x <= y for x, y in zip(sigmas, sigmas[1:]))
            and i > 0
            and spans[i - 1].label == "low"
        ):
            ctx = context_weights(i)
            low_w = ctx.get("low", 0)
            rest_w = sum(v for k, v in ctx.items() if k != "low")
            if low_w > rest_w:
                runs.append(
                    ShockRun(
                        direction="precursor",
                        first_span=i,
                        last_span=j,
                        start=block[0].start,
                        end=block[-1].end,
                        sigmas=tuple(sigmas),
                        severity_trend=_trend(sigmas),
                    )
                )
        i = j + 1

    # Inverted runs: consecutive low/moderates flanked by high/extreme.
    calm = {"low", "moderate"}
    stormy = {"high", "extreme"}
    i = 0
    while i < len(spans):
        if spans[i].label not in calm:
            i += 1
            continue
        j = i
        while j + 1 < len(spans) and spans[j + 1].label in calm:
            j += 1
        bounded = (
            i > 0
            and j + 1 < len(spans)
            and spans[i - 1].label in stormy
            and spans[j + 1].label in stormy
        )
        if bounded and (j - i + 1) >= min_run:
            ctx = context_weights(i)
            storm_w = sum(v for k, v in ctx.items() if k in stormy)
            rest_w = sum(v for k, v in ctx.items() if k not in stormy)
            if storm_w > rest_w:
                block = spans[i : j + 1]
                sigmas = [s.sigma for s in block]
                runs.append(
                    ShockRun(
                        direction="inverted",
                        first_span=i,
                        last_span=j,
                        start=block[0].start,
                        end=block[-1].end,
                        sigmas=tuple(sigmas),
                        severity_trend=_trend(sigmas),
                    )
                )
        i = j + 1

    runs.sort(key=lambda r: r.first_span)
    return ShockReport(min_run=min_run, window_bars=window_bars, runs=tuple(runs))


# ---------------------------------------------------------------------------
# Serialization


def comparison_to_dict(report: CommonBoundaryReport) -> dict:
    return {
        "schema": COMPARISON_SCHEMA,
        "tolerance": report.tolerance,
        "common": report.common,
        "exact": report.exact,
        "pairs": [
            {"index_a": p.index_a, "index_b": p.index_b, "gap": p.gap}
            for p in report.pairs
        ],
        "unmatched_a": list(report.unmatched_a),
        "unmatched_b": list(report.unmatched_b),
        "intervals": [
            {
                "start_a": iv.start_a,
                "end_a": iv.end_a,
                "start_b": iv.start_b,
                "end_b": iv.end_b,
                "segments_a": iv.segments_a,
                "segments_b": iv.segments_b,
                "common_inside": iv.common_inside,
            }
            for iv in report.intervals
        ],
    }


def comparison_from_dict(doc: dict) -> CommonBoundaryReport:
    if doc.get("schema") != COMPARISON_SCHEMA:
        raise ValueError(f"unsupported comparison schema {doc.get('schema')!r}")
    return CommonBoundaryReport(
        tolerance=doc["tolerance"],
        pairs=tuple(
            MatchedPair(p["index_a"], p["index_b"], p["gap"]) for p in doc["pairs"]
        ),
        common=doc["common"],
        exact=doc["exact"],
        unmatched_a=tuple(doc["unmatched_a"]),
        unmatched_b=tuple(doc["unmatched_b"]),
        intervals=tuple(
            DisagreementInterval(
                start_a=iv["start_a"],
                end_a=iv["end_a"],
                start_b=iv["start_b"],
                end_b=iv["end_b"],
                segments_a=iv["segments_a"],
                segments_b=iv["segments_b"],
                common_inside=iv["common_inside"],
            )
            for iv in doc["intervals"]
        ),
    )


def shock_report_to_dict(report: ShockReport) -> dict:
    return {
        "schema": SHOCKS_SCHEMA,
        "heuristic": True,
        "min_run": report.min_run,
        "window_bars": report.window_bars,
        "runs": [
            {
                "direction": r.direction,
                "first_span": r.first_span,
                "last_span": r.last_span,
                "start": format_timestamp(r.start),
                "end": format_timestamp(r.end),
                "sigmas": list(r.sigmas),
                "severity_trend": r.severity_trend,
            }
            for r in report.runs
        ],
    }


def timeline_to_csv(tl: PhaseTimeline) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["start", "end", "cluster", "label", "sigma", "color"])
    for s in tl.spans:
        writer.writerow(
            [
                format_timestamp(s.start),
                format_timestamp(s.end),
                s.cluster,
                s.label,
                repr(s.sigma),
                s.color,
            ]
        )
    return buf.getvalue()


def timeline_from_csv(text: str) -> PhaseTimeline:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["start", "end", "cluster", "label", "sigma", "color"]:
        raise ValueError(f"unexpected timeline header {header!r}")
    spans = []
    for row in reader:
        if not row:
            continue
        spans.append(
            PhaseSpan(
                start=_parse_iso(row[0]),
                end=_parse_iso(row[1]),
                cluster=int(row[2]),
                label=row[3],
                sigma=float(row[4]),
                color=row[5],
            )
        )
    return PhaseTimeline(spans=tuple(spans))


def spectrum_to_csv(spec: DivergenceSpectrum) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "delta"])
    for t, d in zip(spec.positions, spec.values):
        writer.writerow([int(t), repr(float(d))])
    return buf.getvalue()


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def export_bundle(
    out_dir: str | Path,
    segmentation: Segmentation,
    dendrogram: Dendrogram | None = None,
    phases: PhaseAssignment | None = None,
    timeline: PhaseTimeline | None = None,
    comparison: CommonBoundaryReport | None = None,
    shocks: ShockReport | None = None,
    spectra: dict[int, DivergenceSpectrum] | None = None,
) -> dict[str, Path]:
    """Write the plot-ready artifact set; byte output is deterministic.

    Returns a mapping from artifact name to written path.  The dendrogram
    JSON embeds the phase assignment when one is supplied, so the pair can
    be reconstructed from a single document.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    def _write(name: str, content: str) -> None:
        path = out_dir / name
        try:
            path.write_text(content, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        written[name] = path

    _write("segmentation.json", _dump_json(segmentation_to_dict(segmentation)))
    if dendrogram is not None:
        doc = dendrogram_to_dict(dendrogram)
        if phases is not None:
            doc["phase_assignment"] = phases_to_dict(phases)
        _write("dendrogram.json", _dump_json(doc))
        _write("dendrogram.newick", to_newick(dendrogram) + "\n")
    if timeline is not None:
        _write("timeline.csv", timeline_to_csv(timeline))
    if comparison is not None:
        _write("comparison.json", _dump_json(comparison_to_dict(comparison)))
    if shocks is not None:
        _write("shocks.json", _dump_json(shock_report_to_dict(shocks)))
    for index in sorted(spectra or {}):
        _write(f"spectrum_{index:04d}.csv", spectrum_to_csv(spectra[index]))
    return written


def load_segmentation(path: str | Path) -> Segmentation:
    return segmentation_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
