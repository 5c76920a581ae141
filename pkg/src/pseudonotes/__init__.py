"""Vocal pitch contours to note-level pseudo labels, with scoring and self-training."""

from .contour_io import PitchContour, PitchFrame, parse_contour_csv, write_contour_csv
from .metrics import EvalConfig, EvalReport, Level, match_valid, score, score_corpus
from .midi import export_midi, import_midi
from .notes import NoteEvent, NoteSequence, dumps_notes, loads_notes
from .quantizer import (
    UNVOICED,
    QuantizationConfig,
    QuantizedContour,
    convert,
    correct_octaves,
    quantize_pitch,
    remove_fragments,
    rhythm_quantize,
    segment_notes,
)
from .tempo import BeatGrid, envelope_from_contour, estimate_tempo, frames_for_beat_fraction

__version__ = "0.1.0"

__all__ = [
    "BeatGrid",
    "EvalConfig",
    "EvalReport",
    "Level",
    "NoteEvent",
    "NoteSequence",
    "PitchContour",
    "PitchFrame",
    "QuantizationConfig",
    "QuantizedContour",
    "UNVOICED",
    "convert",
    "correct_octaves",
    "dumps_notes",
    "envelope_from_contour",
    "estimate_tempo",
    "export_midi",
    "frames_for_beat_fraction",
    "import_midi",
    "loads_notes",
    "match_valid",
    "parse_contour_csv",
    "quantize_pitch",
    "remove_fragments",
    "rhythm_quantize",
    "score",
    "score_corpus",
    "segment_notes",
    "write_contour_csv",
]
