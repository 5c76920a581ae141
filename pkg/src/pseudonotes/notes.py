"""Note events, monophonic note sequences, and the notes JSON format."""

import json
import math
from dataclasses import dataclass
from pathlib import Path

from ._files import atomic_write_text, dumps_fixed
from .errors import NotesFormatError

MIDI_MIN = 36
MIDI_MAX = 95


@dataclass(frozen=True, order=True)
class NoteEvent:
    onset: float
    offset: float
    pitch: int

    def __post_init__(self):
        onset, offset = float(self.onset), float(self.offset)
        if not (math.isfinite(onset) and math.isfinite(offset)):
            raise NotesFormatError("note times must be finite")
        if not offset > onset:
            raise NotesFormatError(f"note offset {offset} must be after onset {onset}")
        if isinstance(self.pitch, bool) or int(self.pitch) != self.pitch:
            raise NotesFormatError(f"pitch must be an integer MIDI number, got {self.pitch!r}")
        pitch = int(self.pitch)
        if not MIDI_MIN <= pitch <= MIDI_MAX:
            raise NotesFormatError(f"pitch {pitch} outside [{MIDI_MIN}, {MIDI_MAX}]")
        object.__setattr__(self, "onset", onset)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "pitch", pitch)

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    def shifted(self, dt: float) -> "NoteEvent":
        return NoteEvent(self.onset + dt, self.offset + dt, self.pitch)


@dataclass(frozen=True)
class NoteSequence:
    """Monophonic notes sorted by onset; a note may end where the next starts."""

    notes: tuple = ()
    track_id: str = ""

    def __post_init__(self):
        notes = tuple(self.notes)
        for prev, cur in zip(notes, notes[1:]):
            if cur.onset < prev.onset:
                raise NotesFormatError("notes must be sorted by onset")
            if prev.offset > cur.onset:
                raise NotesFormatError(
                    f"overlapping notes: {prev.onset:.6f}-{prev.offset:.6f} and "
                    f"{cur.onset:.6f}-{cur.offset:.6f}"
                )
        object.__setattr__(self, "notes", notes)

    def __len__(self):
        return len(self.notes)

    def __iter__(self):
        return iter(self.notes)

    def shifted(self, dt: float) -> "NoteSequence":
        return NoteSequence(tuple(n.shifted(dt) for n in self.notes), self.track_id)


def notes_to_dict(seq: NoteSequence) -> dict:
    return {
        "track_id": seq.track_id,
        "notes": [
            {"onset_sec": n.onset, "offset_sec": n.offset, "midi_pitch": n.pitch}
            for n in seq.notes
        ],
    }


def dumps_notes(seq: NoteSequence) -> str:
    return dumps_fixed(notes_to_dict(seq)) + "\n"


def loads_notes(text) -> NoteSequence:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NotesFormatError(f"notes file is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NotesFormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("notes"), list):
        raise NotesFormatError('expected an object with a "notes" list')
    track_id = doc.get("track_id", "")
    if not isinstance(track_id, str):
        raise NotesFormatError("track_id must be a string")
    notes = []
    for i, item in enumerate(doc["notes"]):
        try:
            onset, offset, pitch = item["onset_sec"], item["offset_sec"], item["midi_pitch"]
        except (KeyError, TypeError):
            raise NotesFormatError(f"note {i}: needs onset_sec, offset_sec, midi_pitch") from None
        for name, value in (("onset_sec", onset), ("offset_sec", offset), ("midi_pitch", pitch)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise NotesFormatError(f"note {i}: {name} must be a number")
        try:
            notes.append(NoteEvent(onset, offset, pitch))
        except NotesFormatError as exc:
            raise NotesFormatError(f"note {i}: {exc}") from None
    return NoteSequence(tuple(notes), track_id)


def read_notes(path) -> NoteSequence:
    return loads_notes(Path(path).read_bytes())


def write_notes(path, seq: NoteSequence) -> None:
    atomic_write_text(path, dumps_notes(seq))
