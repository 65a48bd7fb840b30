"""
Trace ingestion service

A trace is line-delimited JSON, one frame object per line. Ingestion is
single-pass: only the current frame and the set of seen POCs are held.
"""
import json
import logging
import math
from typing import Iterable, Iterator, TextIO

import numpy as np
from pydantic import ValidationError

from ..constants import TraceConstants
from ..core.custom_exceptions import TraceInvariantError, TraceSyntaxError
from ..schemas.trace import FrameRecord, FrameType


logger = logging.getLogger(__name__)

# pydantic error types that mean the line is not a frame object at all
_SYNTAX_ERROR_TYPES = {"missing", "extra_forbidden", "model_type", "dict_type", "list_type", "tuple_type"}


def _error_field(loc: tuple) -> str:
    return ".".join(str(part) for part in loc) if loc else "<frame>"


def _raise_from_validation(line_number: int, exc: ValidationError) -> None:
    first = exc.errors()[0]
    field = _error_field(first.get("loc", ()))
    message = first.get("msg", "invalid value")
    if first.get("type") in _SYNTAX_ERROR_TYPES or first.get("type", "").endswith("_parsing"):
        raise TraceSyntaxError(line_number, f"{field}: {message}") from exc
    raise TraceInvariantError(line_number, message, field=field) from exc


def check_frame_invariants(frame: FrameRecord, line_number: int = 0) -> None:
    """Geometric and frame-type rules that per-field validation cannot express."""
    if not frame.blocks:
        raise TraceInvariantError(line_number, "frame has no blocks", field="blocks")

    for index, block in enumerate(frame.blocks):
        field = f"blocks.{index}"
        if block.x + block.w > frame.width or block.y + block.h > frame.height:
            raise TraceInvariantError(line_number, "block lies outside the frame", field=field)
        if frame.is_intra:
            if block.skip:
                raise TraceInvariantError(line_number, "skip block in an intra frame", field=f"{field}.skip")
            if block.mvs:
                raise TraceInvariantError(line_number, "intra frame block carries motion vectors", field=f"{field}.mvs")
        elif frame.frame_type == FrameType.P and len(block.mvs) > TraceConstants.MAX_MVS_P_FRAME:
            raise TraceInvariantError(line_number, "P frame block carries two motion vectors", field=f"{field}.mvs")

    covered = sum(block.area for block in frame.blocks)
    if covered != frame.width * frame.height:
        raise TraceInvariantError(
            line_number,
            f"blocks cover {covered} pixels, frame has {frame.width * frame.height}",
            field="blocks",
        )

    # Rasterize on the coarsest grid every coordinate falls on
    grid = math.gcd(frame.width, frame.height, *(v for b in frame.blocks for v in (b.x, b.y, b.w, b.h)))
    occupancy = np.zeros((frame.height // grid, frame.width // grid), dtype=np.uint8)
    for block in frame.blocks:
        occupancy[block.y // grid:(block.y + block.h) // grid, block.x // grid:(block.x + block.w) // grid] += 1
    if occupancy.max() > 1:
        raise TraceInvariantError(line_number, "blocks overlap", field="blocks")


def parse_frame_line(line: str, line_number: int) -> FrameRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceSyntaxError(line_number, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise TraceSyntaxError(line_number, "line is not a frame object")
    try:
        frame = FrameRecord.model_validate(obj)
    except ValidationError as exc:
        _raise_from_validation(line_number, exc)
    check_frame_invariants(frame, line_number)
    return frame


def iter_trace(lines: Iterable[str]) -> Iterator[FrameRecord]:
    """Yield validated frames in file order; blank lines are ignored."""
    seen_pocs: set[int] = set()
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        frame = parse_frame_line(line, line_number)
        if frame.poc in seen_pocs:
            raise TraceInvariantError(line_number, f"duplicate poc {frame.poc}", field="poc")
        seen_pocs.add(frame.poc)
        yield frame


def parse_trace(lines: Iterable[str]) -> list[FrameRecord]:
    return list(iter_trace(lines))


def serialize_frame(frame: FrameRecord) -> str:
    return json.dumps(frame.to_trace(), separators=(",", ":"))


def write_trace(frames: Iterable[FrameRecord], out: TextIO) -> int:
    """Emit one frame per LF-terminated line; returns the number of frames."""
    count = 0
    for frame in frames:
        out.write(serialize_frame(frame))
        out.write("\n")
        count += 1
    logger.debug("Wrote %d trace frames", count)
    return count
