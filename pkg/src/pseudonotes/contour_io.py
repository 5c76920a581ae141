"""Frame-level pitch contours and their CSV interchange format.

A contour file looks like::

    time_sec,f0_hz,confidence
    0.000000,440.000000,0.900000
    0.010000,0.000000,0.100000

``f0_hz == 0`` marks an unvoiced frame.  The hop is never stored; it is the
median spacing of the time column, which must be uniform to within 1 us.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyInput, MalformedRow, NonUniformHop, RangeViolation

CONTOUR_HEADER = "time_sec,f0_hz,confidence"
ENVELOPE_HEADER = "time_sec,strength"

F0_MIN = 20.0
F0_MAX = 5000.0
HOP_TOLERANCE = 1e-6
# used only when a file has a single row, so no spacing can be measured
DEFAULT_HOP = 0.01

# values are written with 6 decimals, so the measured spacing of a perfectly
# uniform grid can wobble by one unit in the last place
_HOP_SLACK = 1e-9


@dataclass(frozen=True)
class PitchFrame:
    f0: float
    confidence: float

    def __post_init__(self):
        f0 = float(self.f0)
        conf = float(self.confidence)
        if not (f0 == 0.0 or F0_MIN <= f0 <= F0_MAX):
            raise RangeViolation(f"f0 {f0!r} Hz outside {{0}} U [{F0_MIN}, {F0_MAX}]")
        if not 0.0 <= conf <= 1.0:
            raise RangeViolation(f"confidence {conf!r} outside [0, 1]")
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "confidence", conf)

    @property
    def voiced(self) -> bool:
        return self.f0 > 0.0


@dataclass(frozen=True)
class PitchContour:
    """Uniformly sampled pitch track.

    ``start`` is the time of the first frame; frame ``i`` sits at
    ``start + i * hop``.
    """

    hop: float
    frames: tuple
    track_id: str = ""
    start: float = 0.0

    def __post_init__(self):
        hop = float(self.hop)
        if not (math.isfinite(hop) and hop > 0):
            raise RangeViolation(f"hop must be positive and finite, got {self.hop!r}")
        frames = tuple(self.frames)
        if not frames:
            raise EmptyInput("a contour needs at least one frame")
        for fr in frames:
            if not isinstance(fr, PitchFrame):
                raise TypeError(f"frames must be PitchFrame instances, got {type(fr).__name__}")
        start = float(self.start)
        if not math.isfinite(start) or not math.isfinite(len(frames) * hop):
            raise RangeViolation("contour timing is not finite")
        object.__setattr__(self, "hop", hop)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "start", start)

    @classmethod
    def from_arrays(cls, f0, confidence, hop, track_id="", start=0.0):
        f0 = np.asarray(f0, dtype=float)
        confidence = np.asarray(confidence, dtype=float)
        if f0.shape != confidence.shape or f0.ndim != 1:
            raise ValueError("f0 and confidence must be 1-D arrays of equal length")
        frames = tuple(PitchFrame(a, c) for a, c in zip(f0.tolist(), confidence.tolist()))
        return cls(hop=hop, frames=frames, track_id=track_id, start=start)

    def __len__(self):
        return len(self.frames)

    @property
    def duration(self) -> float:
        return len(self.frames) * self.hop

    @cached_property
    def f0(self) -> np.ndarray:
        arr = np.array([fr.f0 for fr in self.frames], dtype=float)
        arr.flags.writeable = False
        return arr

    @cached_property
    def confidence(self) -> np.ndarray:
        arr = np.array([fr.confidence for fr in self.frames], dtype=float)
        arr.flags.writeable = False
        return arr

    @property
    def times(self) -> np.ndarray:
        return self.start + np.arange(len(self.frames)) * self.hop


def _read_table(data: bytes, header: str, ncols: int):
    """Split a CSV byte string into float rows, checking header and arity."""
    if isinstance(data, str):
        text = data
    else:
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedRow(f"input is not valid UTF-8: {exc}") from None
    if text.startswith("\ufeff"):
        text = text[1:]
    lines = [ln.rstrip("\r") for ln in text.split("\n")]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise EmptyInput("input is empty")
    if lines[0].strip().replace(" ", "") != header:
        raise MalformedRow(f"line 1: expected header {header!r}, got {lines[0]!r}")
    if len(lines) == 1:
        raise EmptyInput("input has a header but no rows")

    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != ncols:
            raise MalformedRow(f"line {lineno}: expected {ncols} fields, got {len(cells)}")
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise MalformedRow(f"line {lineno}: non-numeric field in {line!r}") from None
        if not math.isfinite(values[0]):
            raise MalformedRow(f"line {lineno}: time {cells[0]!r} is not finite")
        rows.append((lineno, values))
    return rows


def _infer_hop(times: Sequence[float], fallback) -> float:
    if len(times) == 1:
        return float(fallback) if fallback is not None else DEFAULT_HOP
    diffs = np.diff(np.asarray(times, dtype=float))
    hop = float(np.median(diffs))
    if hop <= 0:
        raise NonUniformHop("time column is not strictly increasing")
    for i, d in enumerate(diffs):
        if d <= 0:
            raise NonUniformHop(f"time column is not strictly increasing at row {i + 2}")
        if abs(d - hop) > HOP_TOLERANCE + _HOP_SLACK:
            raise NonUniformHop(
                f"row {i + 2}: spacing {d:.9f} s deviates from hop {hop:.9f} s by more than 1e-6 s"
            )
    return hop


def parse_contour_csv(data: bytes, track_id: str = "", hop=None) -> PitchContour:
    """Parse a contour CSV.

    ``hop`` is only consulted for single-row files, where it cannot be
    inferred; it defaults to :data:`DEFAULT_HOP`.
    """
    rows = _read_table(data, CONTOUR_HEADER, 3)
    times = [v[0] for _, v in rows]
    inferred = _infer_hop(times, hop)
    frames = []
    for lineno, (_, f0, conf) in rows:
        try:
            frames.append(PitchFrame(f0, conf))
        except RangeViolation as exc:
            raise RangeViolation(f"line {lineno}: {exc}") from None
    return PitchContour(hop=inferred, frames=tuple(frames), track_id=track_id, start=times[0])


def write_contour_csv(contour: PitchContour) -> bytes:
    out = [CONTOUR_HEADER]
    for i, fr in enumerate(contour.frames):
        t = contour.start + i * contour.hop
        out.append(f"{_fmt(t)},{_fmt(fr.f0)},{_fmt(fr.confidence)}")
    return ("\n".join(out) + "\n").encode("utf-8")


def parse_envelope_csv(data: bytes, hop=None):
    """Parse an onset-strength CSV; returns ``(values, hop)``."""
    rows = _read_table(data, ENVELOPE_HEADER, 2)
    times = [v[0] for _, v in rows]
    inferred = _infer_hop(times, hop)
    values = np.array([v[1] for _, v in rows], dtype=float)
    for (lineno, _), s in zip(rows, values):
        if not (math.isfinite(s) and s >= 0.0):
            raise RangeViolation(f"line {lineno}: strength {s!r} must be finite and >= 0")
    return values, inferred


def write_envelope_csv(values, hop: float, start: float = 0.0) -> bytes:
    out = [ENVELOPE_HEADER]
    for i, s in enumerate(np.asarray(values, dtype=float).tolist()):
        out.append(f"{_fmt(start + i * hop)},{_fmt(s)}")
    return ("\n".join(out) + "\n").encode("utf-8")


def _fmt(x: float) -> str:
    text = f"{x:.6f}"
    return "0.000000" if text == "-0.000000" else text


def read_contour(path, track_id=None, hop=None) -> PitchContour:
    """Load a contour file; the track id defaults to the file name stem."""
    path = Path(path)
    if track_id is None:
        track_id = path.name.split(".")[0]
    return parse_contour_csv(path.read_bytes(), track_id=track_id, hop=hop)
