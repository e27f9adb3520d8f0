"""Batch command-line entry points for the full pipeline.

Exit codes: 0 success, 2 input error, 3 computation error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import socket
import sys
from pathlib import Path

from .cluster import (
    build_distance_matrix,
    complete_link,
    cut_tree,
    dendrogram_to_dict,
    phases_to_dict,
    to_newick,
)
from .errors import (
    BadInputError,
    BadKError,
    BadTickError,
    BadValueError,
    DegenerateIntervalError,
    DegenerateVarianceError,
    EmptyDataError,
    IncompatibleError,
    RegimescopeError,
    TooFewSegmentsError,
    TooShortError,
)
from .ingest import (
    TradingCalendar,
    aggregate_ticks,
    movements,
    read_bars_csv,
    read_ticks_csv,
    write_bars_csv,
)
from .report import (
    comparison_to_dict,
    compare_segmentations,
    load_segmentation,
)
from .segment import SegmentationConfig, recursive_segment, segmentation_to_dict

INPUT_ERRORS = (
    EmptyDataError,
    BadTickError,
    BadValueError,
    BadInputError,
    TooShortError,
    BadKError,
    IncompatibleError,
    TooFewSegmentsError,
    FileNotFoundError,
)
COMPUTE_ERRORS = (DegenerateIntervalError, DegenerateVarianceError)


def _dump(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_ingest(args) -> int:
    calendar = TradingCalendar(
        session_open=dt.time.fromisoformat(args.session_open),
        session_close=dt.time.fromisoformat(args.session_close),
        bar_width=dt.timedelta(minutes=args.bar_minutes),
    )
    ticks = read_ticks_csv(args.ticks)
    bars = aggregate_ticks(ticks, calendar)
    write_bars_csv(bars, args.out)
    print(f"wrote {len(bars)} bars to {args.out}")
    return 0


def cmd_segment(args) -> int:
    bars = read_bars_csv(args.bars, bars_per_day=args.bars_per_day)
    cfg = SegmentationConfig(threshold=args.threshold, min_len=args.min_len)
    z = movements(bars, args.model)
    seg = recursive_segment(z, cfg)
    _dump(segmentation_to_dict(seg), args.out)
    if args.out:
        print(f"{len(seg.boundaries)} boundaries -> {args.out}")
    return 0


def cmd_cluster(args) -> int:
    seg = load_segmentation(args.segmentation)
    if len(seg.segments) < 2:
        raise TooFewSegmentsError("segmentation has fewer than 2 segments")
    dm = build_distance_matrix([s.stats for s in seg.segments])
    tree = complete_link(dm)
    phases = cut_tree(tree, args.k)
    _dump(dendrogram_to_dict(tree), args.out_dendrogram)
    _dump(phases_to_dict(phases), args.out_phases)
    if args.out_newick:
        Path(args.out_newick).write_text(to_newick(tree) + "\n", encoding="utf-8")
    return 0


def cmd_compare(args) -> int:
    a = load_segmentation(args.a)
    b = load_segmentation(args.b)
    rep = compare_segmentations(a, b, tolerance_bars=args.tolerance)
    _dump(comparison_to_dict(rep), args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(state_dir=args.state_dir)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((args.host, args.port))
    host, port = sock.getsockname()[:2]
    print(f"listening on http://{host}:{port}", flush=True)
    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    server.run(sockets=[sock])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regimescope",
        description="Segment index series into stationary Gaussian regimes and volatility phases",
    )
    parser.add_argument(
        "--json-errors",
        action="store_true",
        help="print errors as JSON {code, message} on stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="aggregate tick CSV into bar CSV")
    p.add_argument("--ticks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--session-open", default="09:30")
    p.add_argument("--session-close", default="16:00")
    p.add_argument("--bar-minutes", type=int, default=30)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("segment", help="segment a bar CSV")
    p.add_argument("--bars", required=True)
    p.add_argument("--model", choices=["normal", "lognormal"], default="normal")
    p.add_argument("--threshold", type=float, default=10.0)
    p.add_argument("--min-len", type=int, default=13, dest="min_len")
    p.add_argument("--bars-per-day", type=int, default=13, dest="bars_per_day")
    p.add_argument("--out")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("cluster", help="cluster a segmentation into phases")
    p.add_argument("--segmentation", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out-dendrogram", dest="out_dendrogram")
    p.add_argument("--out-phases", dest="out_phases")
    p.add_argument("--out-newick", dest="out_newick")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("compare", help="match boundaries across two segmentations")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--tolerance", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--state-dir", dest="state_dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def _emit_error(args, code: str, message: str) -> None:
    if getattr(args, "json_errors", False):
        print(json.dumps({"code": code, "message": message}), file=sys.stderr)
    else:
        print(f"error [{code}]: {message}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        code = getattr(exc, "code", "BadInput")
        _emit_error(args, code, str(exc))
        return 2
    except COMPUTE_ERRORS as exc:
        _emit_error(args, exc.code, str(exc))
        return 3
    except RegimescopeError as exc:
        _emit_error(args, exc.code, str(exc))
        return 2
    except Exception as exc:  # computation failure of any other kind
        _emit_error(args, "Internal", f"{type(exc).__name__}: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
