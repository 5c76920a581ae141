"""Pitch contour to note sequence conversion.

Pipeline::

    quantize_pitch -> rhythm_quantize -> remove_fragments
                   -> correct_octaves -> segment_notes

Frame labels are integer MIDI numbers in ``[MIDI_MIN, MIDI_MAX]`` or
``UNVOICED``.  ``UNVOICED`` is -1, below every pitch, so silence takes part
in the median filters like any other label.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .contour_io import PitchContour
from .errors import HopMismatch
from .notes import NoteEvent, NoteSequence, MIDI_MAX, MIDI_MIN
from .tempo import BeatGrid, exact, frames_for_beat_fraction

UNVOICED = -1

DEFAULT_FILTER_FRACTIONS = (Fraction(1, 32), Fraction(1, 16), Fraction(1, 12))

# a run must sit at least this far from its context median before it moves
OCTAVE_TRIGGER = 11
MAX_OCTAVE_SHIFTS = 2

# stage names, in order; stored in each self-training manifest
PIPELINE_STAGES = (
    "quantize_pitch",
    "rhythm_quantize",
    "remove_fragments",
    "correct_octaves",
    "segment_notes",
)


def parse_fraction(value) -> Fraction:
    """Accept ``Fraction``, ints, floats, or strings such as ``"1/16"``."""
    if isinstance(value, Fraction):
        frac = value
    elif isinstance(value, str):
        frac = Fraction(value.strip())
    else:
        frac = exact(value)
    if frac <= 0:
        raise ValueError(f"beat fraction must be positive, got {value!r}")
    return frac


@dataclass(frozen=True)
class QuantizationConfig:
    filter_fractions: tuple = DEFAULT_FILTER_FRACTIONS
    min_fragment_fraction: Fraction = Fraction(1, 16)
    confidence_floor: float = 0.5
    octave_context_seconds: float = 2.0

    def __post_init__(self):
        fracs = tuple(parse_fraction(f) for f in self.filter_fractions)
        object.__setattr__(self, "filter_fractions", fracs)
        object.__setattr__(self, "min_fragment_fraction", parse_fraction(self.min_fragment_fraction))
        floor = float(self.confidence_floor)
        if not 0.0 <= floor <= 1.0:
            raise ValueError(f"confidence_floor must be in [0, 1], got {floor}")
        object.__setattr__(self, "confidence_floor", floor)
        ctx = float(self.octave_context_seconds)
        if not (math.isfinite(ctx) and ctx > 0):
            raise ValueError(f"octave_context_seconds must be positive, got {ctx}")
        object.__setattr__(self, "octave_context_seconds", ctx)

    def to_dict(self) -> dict:
        return {
            "filter_fractions": [str(f) for f in self.filter_fractions],
            "min_fragment_fraction": str(self.min_fragment_fraction),
            "confidence_floor": self.confidence_floor,
            "octave_context_seconds": self.octave_context_seconds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizationConfig":
        return cls(
            filter_fractions=tuple(d.get("filter_fractions", DEFAULT_FILTER_FRACTIONS)),
            min_fragment_fraction=d.get("min_fragment_fraction", Fraction(1, 16)),
            confidence_floor=d.get("confidence_floor", 0.5),
            octave_context_seconds=d.get("octave_context_seconds", 2.0),
        )


@dataclass(frozen=True, eq=False)
class QuantizedContour:
    hop: float
    labels: np.ndarray
    start: float = 0.0
    track_id: str = ""

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        bad = (labels != UNVOICED) & ((labels < MIDI_MIN) | (labels > MIDI_MAX))
        if np.any(bad):
            raise ValueError(f"label {int(labels[bad][0])} outside [{MIDI_MIN}, {MIDI_MAX}]")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "hop", float(self.hop))
        object.__setattr__(self, "start", float(self.start))

    def __eq__(self, other):
        if not isinstance(other, QuantizedContour):
            return NotImplemented
        return (
            self.hop == other.hop
            and self.start == other.start
            and self.track_id == other.track_id
            and np.array_equal(self.labels, other.labels)
        )

    def __len__(self):
        return len(self.labels)

    def replace_labels(self, labels) -> "QuantizedContour":
        return QuantizedContour(hop=self.hop, labels=labels, start=self.start, track_id=self.track_id)


def semitone_round(f0) -> np.ndarray:
    """``floor(69 + 12 log2(f0 / 440) + 0.5)`` without clamping."""
    f0 = np.asarray(f0, dtype=float)
    return np.floor(69.0 + 12.0 * np.log2(f0 / 440.0) + 0.5).astype(np.int64)


def quantize_pitch(contour: PitchContour, config: QuantizationConfig = QuantizationConfig()) -> QuantizedContour:
    f0 = contour.f0
    voiced = (f0 > 0.0) & (contour.confidence >= config.confidence_floor)
    labels = np.full(len(f0), UNVOICED, dtype=np.int64)
    if np.any(voiced):
        labels[voiced] = np.clip(semitone_round(f0[voiced]), MIDI_MIN, MIDI_MAX)
    return QuantizedContour(hop=contour.hop, labels=labels, start=contour.start, track_id=contour.track_id)


def median_filter(labels, width: int) -> np.ndarray:
    """Running median of odd ``width`` with edge-replicate padding."""
    x = np.asarray(labels)
    if width < 1 or width % 2 == 0:
        raise ValueError(f"median window must be a positive odd integer, got {width}")
    if width == 1 or len(x) == 0:
        return x.copy()
    half = width // 2
    padded = np.pad(x, half, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, width)
    return np.sort(windows, axis=1)[:, half]


def _check_hop(q: QuantizedContour, grid: BeatGrid):
    if not math.isclose(q.hop, grid.hop, rel_tol=1e-9, abs_tol=1e-12):
        raise HopMismatch(f"contour hop {q.hop} s differs from beat grid hop {grid.hop} s")


def filter_widths(grid: BeatGrid, config: QuantizationConfig):
    return [frames_for_beat_fraction(grid, f) for f in config.filter_fractions]


def rhythm_quantize(q: QuantizedContour, grid: BeatGrid, config: QuantizationConfig = QuantizationConfig()) -> QuantizedContour:
    """Cascade one median filter per beat fraction, in configured order."""
    _check_hop(q, grid)
    labels = q.labels
    for width in filter_widths(grid, config):
        labels = median_filter(labels, width)
    return q.replace_labels(labels)


def runs(labels):
    """Yield ``(start, stop, label)`` for each maximal run of equal labels."""
    labels = np.asarray(labels)
    n = len(labels)
    if n == 0:
        return
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    bounds = np.concatenate(([0], change, [n]))
    for a, b in zip(bounds[:-1].tolist(), bounds[1:].tolist()):
        yield a, b, int(labels[a])


def remove_fragments(q: QuantizedContour, grid: BeatGrid, config: QuantizationConfig = QuantizationConfig()) -> QuantizedContour:
    """Silence voiced runs strictly shorter than ``min_fragment_fraction`` beats."""
    _check_hop(q, grid)
    threshold = Fraction(60) / exact(grid.bpm) * config.min_fragment_fraction
    hop = exact(q.hop)
    labels = q.labels.copy()
    for a, b, label in runs(labels):
        if label != UNVOICED and (b - a) * hop < threshold:
            labels[a:b] = UNVOICED
    return q.replace_labels(labels)


def correct_octaves(q: QuantizedContour, config: QuantizationConfig = QuantizationConfig()) -> QuantizedContour:
    """Move voiced runs by whole octaves toward the surrounding melody.

    For each run, the context is every voiced frame within
    ``octave_context_seconds`` before or after it (the run itself excluded),
    taken from the input labels.  A run whose pitch is 11+ semitones from the
    context median moves one octave toward it while that reduces the gap,
    at most twice, never leaving the MIDI range.
    """
    src = q.labels
    out = src.copy()
    n = len(src)
    reach = int(round(config.octave_context_seconds / q.hop))
    for a, b, pitch in runs(src):
        if pitch == UNVOICED:
            continue
        before = src[max(0, a - reach):a]
        after = src[b:min(n, b + reach)]
        ctx = np.concatenate((before, after))
        ctx = ctx[ctx != UNVOICED]
        if len(ctx) == 0:
            continue
        m = float(np.median(ctx))
        p = pitch
        for _ in range(MAX_OCTAVE_SHIFTS):
            gap = abs(p - m)
            if gap < OCTAVE_TRIGGER:
                break
            cand = p + 12 if m > p else p - 12
            if abs(cand - m) >= gap or not MIDI_MIN <= cand <= MIDI_MAX:
                break
            p = cand
        if p != pitch:
            out[a:b] = p
    return q.replace_labels(out)


def segment_notes(q: QuantizedContour) -> NoteSequence:
    notes = []
    for a, b, label in runs(q.labels):
        if label == UNVOICED:
            continue
        notes.append(NoteEvent(onset=q.start + a * q.hop, offset=q.start + b * q.hop, pitch=label))
    return NoteSequence(notes=tuple(notes), track_id=q.track_id)


def postprocess(q: QuantizedContour, grid: BeatGrid, config: QuantizationConfig = QuantizationConfig()) -> NoteSequence:
    """Everything after pitch quantization: rhythm, fragments, octaves, notes."""
    q = rhythm_quantize(q, grid, config)
    q = remove_fragments(q, grid, config)
    q = correct_octaves(q, config)
    return segment_notes(q)


def convert(contour: PitchContour, grid: BeatGrid, config: QuantizationConfig = QuantizationConfig()) -> NoteSequence:
    """Full contour-to-notes conversion."""
    return postprocess(quantize_pitch(contour, config), grid, config)


def render_labels(notes: NoteSequence, hop: float, n_frames: int, start: float = 0.0) -> QuantizedContour:
    """Piano-roll rendering of a note sequence back onto a frame grid.

    Frame ``i`` takes the pitch of the note covering ``start + i * hop``;
    boundaries are rounded to the nearest frame.
    """
    labels = np.full(n_frames, UNVOICED, dtype=np.int64)
    for note in notes.notes:
        a = max(0, int(round((note.onset - start) / hop)))
        b = min(n_frames, int(round((note.offset - start) / hop)))
        if b > a:
            labels[a:b] = note.pitch
    return QuantizedContour(hop=hop, labels=labels, start=start, track_id=notes.track_id)
