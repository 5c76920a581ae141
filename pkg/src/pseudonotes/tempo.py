"""Global tempo per track and beat-to-frame arithmetic.

The rhythm quantizer sizes its median filters in beats, so every track needs
a :class:`BeatGrid`.  Tempo either comes from the caller (``--bpm``) or from
:func:`estimate_tempo`, an autocorrelation tempogram with a log-normal prior
around 120 BPM.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateEnvelope, EnvelopeTooShort, RangeViolation

BPM_MIN = 30.0
BPM_MAX = 300.0
PRIOR_CENTER_BPM = 120.0
PRIOR_SIGMA_OCTAVES = 1.0
MIN_ENVELOPE_SECONDS = 4.0


@dataclass(frozen=True)
class BeatGrid:
    bpm: float
    hop: float

    def __post_init__(self):
        bpm = float(self.bpm)
        hop = float(self.hop)
        if not (math.isfinite(bpm) and BPM_MIN <= bpm <= BPM_MAX):
            raise RangeViolation(f"bpm {self.bpm!r} outside [{BPM_MIN}, {BPM_MAX}]")
        if not (math.isfinite(hop) and hop > 0):
            raise RangeViolation(f"hop must be positive, got {self.hop!r}")
        object.__setattr__(self, "bpm", bpm)
        object.__setattr__(self, "hop", hop)

    @property
    def beat_seconds(self) -> float:
        return 60.0 / self.bpm

    def seconds(self, fraction) -> float:
        """Duration of ``fraction`` of a beat, in seconds."""
        return self.beat_seconds * float(fraction)


def exact(x) -> Fraction:
    """Rational value of a number as it would be written in decimal.

    ``Fraction(0.01)`` is the binary approximation; going through ``repr``
    gives 1/100, so hand-computed ties land on the tie.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def frames_for_beat_fraction(grid: BeatGrid, fraction) -> int:
    """Odd median-filter width closest to ``fraction`` of a beat.

    Ties between two odd integers round up; the result is at least 1.
    """
    frac = exact(fraction)
    if frac <= 0:
        raise ValueError(f"beat fraction must be positive, got {fraction!r}")
    width = Fraction(60) / exact(grid.bpm) * frac / exact(grid.hop)
    # odd numbers are 2k + 1; pick k nearest to (width - 1) / 2, half up
    k = math.floor((width - 1) / 2 + Fraction(1, 2))
    return max(1, 2 * k + 1)


def _lag_range(hop: float, n: int):
    lo = max(1, math.ceil(60.0 / (BPM_MAX * hop) - 1e-9))
    hi = min(n - 1, math.floor(60.0 / (BPM_MIN * hop) + 1e-9))
    return lo, hi


def tempogram_scores(envelope, hop: float):
    """Prior-weighted autocorrelation over candidate lags.

    Returns ``(lags, scores)``; exposed for inspection and testing.
    """
    env = np.asarray(envelope, dtype=float)
    x = env - env.mean()
    n = len(x)
    lo, hi = _lag_range(hop, n)
    if hi < lo:
        raise EnvelopeTooShort(f"{n} frames at hop {hop} s cover no lag in [{BPM_MIN}, {BPM_MAX}] BPM")
    lags = np.arange(lo, hi + 1)
    ac = np.array([np.dot(x[: n - lag], x[lag:]) for lag in lags])
    bpms = 60.0 / (lags * hop)
    prior = np.exp(-0.5 * (np.log2(bpms / PRIOR_CENTER_BPM) / PRIOR_SIGMA_OCTAVES) ** 2)
    return lags, ac * prior


def estimate_tempo(envelope, hop: float) -> BeatGrid:
    """Pick the lag that maximizes autocorrelation times the tempo prior."""
    env = np.asarray(envelope, dtype=float)
    if env.ndim != 1:
        raise ValueError("envelope must be one-dimensional")
    if not (math.isfinite(hop) and hop > 0):
        raise RangeViolation(f"hop must be positive, got {hop!r}")
    if len(env) * hop < MIN_ENVELOPE_SECONDS - 1e-9:
        raise EnvelopeTooShort(
            f"envelope covers {len(env) * hop:.3f} s, need at least {MIN_ENVELOPE_SECONDS} s"
        )
    if not np.all(np.isfinite(env)) or np.any(env < 0):
        raise DegenerateEnvelope("envelope values must be finite and non-negative")
    if not np.any(env > 0):
        raise DegenerateEnvelope("envelope is all zero")
    if np.all(env == env[0]):
        raise DegenerateEnvelope("envelope is constant; no periodicity to measure")

    lags, scores = tempogram_scores(env, hop)
    best = int(lags[int(np.argmax(scores))])
    bpm = min(max(60.0 / (best * hop), BPM_MIN), BPM_MAX)
    return BeatGrid(bpm=bpm, hop=hop)


def envelope_from_contour(contour, confidence_floor: float = 0.5) -> np.ndarray:
    """Onset strength derived from the pitch track itself.

    Semitone jumps between consecutive voiced frames plus 1.0 at every
    unvoiced-to-voiced transition.  Used when no audio envelope is given.
    """
    from .quantizer import UNVOICED, QuantizationConfig, quantize_pitch

    labels = quantize_pitch(contour, QuantizationConfig(confidence_floor=confidence_floor)).labels
    env = np.zeros(len(labels), dtype=float)
    if len(labels) < 2:
        return env
    prev, cur = labels[:-1], labels[1:]
    both = (prev != UNVOICED) & (cur != UNVOICED)
    jumps = np.where(both, np.abs(cur - prev), 0).astype(float)
    onsets = ((prev == UNVOICED) & (cur != UNVOICED)).astype(float)
    env[1:] = np.maximum(0.0, jumps) + onsets
    return env
