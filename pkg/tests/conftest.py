import sys
from pathlib import Path

import numpy as np
import pytest

from pseudonotes import NoteEvent, NoteSequence, PitchContour

STUBS = Path(__file__).parent / "stubs" / "stub_models.py"

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[key])


def midi_to_hz(pitch):
    return 440.0 * 2.0 ** ((np.asarray(pitch, dtype=float) - 69.0) / 12.0)


def contour_from_labels(labels, hop=0.01, track_id="t", start=0.0):
    """Contour whose frames sit exactly on the given MIDI labels (-1 = unvoiced)."""
    labels = np.asarray(labels)
    voiced = labels >= 0
    f0 = np.where(voiced, midi_to_hz(np.where(voiced, labels, 69)), 0.0)
    conf = np.where(voiced, 1.0, 0.0)
    return PitchContour.from_arrays(f0, conf, hop, track_id=track_id, start=start)


def random_note_sequence(rng, n_max=8, grid=0.001, pitch_range=(60, 63), track_id=""):
    """Monophonic notes on a ``grid``-second lattice."""
    n = int(rng.integers(0, n_max + 1))
    t = int(rng.integers(0, 50))
    notes = []
    for _ in range(n):
        t += int(rng.integers(0, 60))
        dur = int(rng.integers(5, 400))
        pitch = int(rng.integers(pitch_range[0], pitch_range[1] + 1))
        notes.append(NoteEvent(t * grid, (t + dur) * grid, pitch))
        t += dur
    return NoteSequence(tuple(notes), track_id)


def stub_command(*args):
    import shlex

    return " ".join(shlex.quote(a) for a in (sys.executable, str(STUBS), *args))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
