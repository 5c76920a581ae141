"""Format-0 Standard MIDI File export (and a matching reader for checks)."""

import struct

from .errors import MidiFormatError
from .notes import NoteEvent, NoteSequence

TICKS_PER_QUARTER = 480
VELOCITY = 80
CHANNEL = 0


def _vlq(value: int) -> bytes:
    """MIDI variable-length quantity."""
    if value < 0:
        raise ValueError("delta time cannot be negative")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def seconds_to_ticks(seconds: float, bpm: float) -> int:
    return int(round(seconds * bpm / 60.0 * TICKS_PER_QUARTER))


def export_midi(notes: NoteSequence, bpm: float) -> bytes:
    """Render ``notes`` as a single-track SMF at a fixed tempo.

    Zero-length notes after tick rounding are stretched to one tick.  At equal
    ticks, note-offs are written before note-ons.
    """
    bpm = float(getattr(bpm, "bpm", bpm))
    tempo_us = int(round(60_000_000 / bpm))
    if not 0 < tempo_us < 1 << 24:
        raise ValueError(f"tempo {bpm} BPM does not fit a MIDI tempo event")

    events = []  # (tick, order, bytes) with order 0 = off, 1 = on
    for n in notes.notes:
        on = seconds_to_ticks(n.onset, bpm)
        off = max(seconds_to_ticks(n.offset, bpm), on + 1)
        events.append((on, 1, bytes((0x90 | CHANNEL, n.pitch, VELOCITY))))
        events.append((off, 0, bytes((0x80 | CHANNEL, n.pitch, 0))))
    events.sort(key=lambda e: (e[0], e[1]))

    track = bytearray()
    track += _vlq(0) + b"\xff\x51\x03" + tempo_us.to_bytes(3, "big")
    now = 0
    for tick, _, msg in events:
        track += _vlq(tick - now) + msg
        now = tick
    track += _vlq(0) + b"\xff\x2f\x00"

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, TICKS_PER_QUARTER)
    return header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)


def _read_vlq(data: bytes, pos: int):
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise MidiFormatError("truncated variable-length quantity")
        b = data[pos]
        pos += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, pos
    raise MidiFormatError("variable-length quantity longer than 4 bytes")


def import_midi(data: bytes, track_id: str = ""):
    """Read a format-0 file written by :func:`export_midi`.

    Returns ``(NoteSequence, bpm)``.  Only the first tempo event is honoured.
    """
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiFormatError("missing MThd header")
    hlen, fmt, ntrks, division = struct.unpack(">IHHH", data[4:14])
    if fmt != 0 or ntrks != 1:
        raise MidiFormatError(f"expected format 0 with one track, got format {fmt} with {ntrks}")
    if division & 0x8000:
        raise MidiFormatError("SMPTE time division is not supported")
    pos = 8 + hlen
    if data[pos:pos + 4] != b"MTrk":
        raise MidiFormatError("missing MTrk chunk")
    (tlen,) = struct.unpack(">I", data[pos + 4:pos + 8])
    pos += 8
    end = pos + tlen
    if end > len(data):
        raise MidiFormatError("track chunk runs past end of file")

    tempo_us = 500_000
    tempo_seen = False
    tick = 0
    status = None
    open_notes = {}
    spans = []
    while pos < end:
        delta, pos = _read_vlq(data, pos)
        tick += delta
        byte = data[pos]
        if byte == 0xFF:
            kind = data[pos + 1]
            length, pos = _read_vlq(data, pos + 2)
            payload = data[pos:pos + length]
            pos += length
            if kind == 0x51 and not tempo_seen:
                tempo_us = int.from_bytes(payload, "big")
                tempo_seen = True
            elif kind == 0x2F:
                break
            continue
        if byte in (0xF0, 0xF7):
            length, pos = _read_vlq(data, pos + 1)
            pos += length
            continue
        if byte & 0x80:
            status = byte
            pos += 1
        elif status is None:
            raise MidiFormatError("running status with no previous status byte")
        kind = status & 0xF0
        nargs = 1 if kind in (0xC0, 0xD0) else 2
        args = data[pos:pos + nargs]
        pos += nargs
        if kind == 0x90 and args[1] > 0:
            open_notes[args[0]] = tick
        elif kind == 0x80 or (kind == 0x90 and args[1] == 0):
            start = open_notes.pop(args[0], None)
            if start is not None:
                spans.append((start, tick, args[0]))

    sec_per_tick = tempo_us / 1e6 / division
    spans.sort()
    notes = tuple(NoteEvent(a * sec_per_tick, b * sec_per_tick, p) for a, b, p in spans)
    bpm = 60_000_000 / tempo_us
    return NoteSequence(notes, track_id), bpm
