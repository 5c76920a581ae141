import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pseudonotes.errors import DegenerateEnvelope, EnvelopeTooShort, RangeViolation
from pseudonotes.tempo import (
    BeatGrid,
    envelope_from_contour,
    estimate_tempo,
    frames_for_beat_fraction,
)

from conftest import contour_from_labels


def nearest_odd_oracle(bpm, hop, fraction):
    """Scan odd candidates; ties go to the larger one."""
    x = Fraction(60) / Fraction(str(bpm)) * Fraction(fraction) / Fraction(str(hop))
    best = None
    for w in range(1, 2 * int(x) + 4, 2):
        d = abs(Fraction(w) - x)
        if best is None or d < best[0] or (d == best[0] and w > best[1]):
            best = (d, w)
    return best[1]


def acf_oracle_bpm(env, hop):
    """Plain-Python autocorrelation scan with the same log-normal prior."""
    n = len(env)
    mean = sum(env) / n
    x = [v - mean for v in env]
    best_lag, best_score = None, -math.inf
    for lag in range(1, n):
        bpm = 60.0 / (lag * hop)
        if not 30.0 - 1e-9 <= bpm <= 300.0 + 1e-9:
            continue
        ac = sum(x[t] * x[t + lag] for t in range(n - lag))
        prior = math.exp(-0.5 * math.log2(bpm / 120.0) ** 2)
        if ac * prior > best_score:
            best_lag, best_score = lag, ac * prior
    return 60.0 / (best_lag * hop)


def impulse_train(period_s, hop=0.01, seconds=10.0):
    env = np.zeros(int(round(seconds / hop)))
    step = int(round(period_s / hop))
    env[::step] = 1.0
    return env


class TestFramesForBeatFraction:
    @pytest.mark.parametrize("fraction,expected", [(Fraction(1, 32), 1), (Fraction(1, 16), 3), (Fraction(1, 12), 5)])
    def test_table(self, fraction, expected):
        # 0.5 s beat at 10 ms hop: 1.5625 -> 1, 3.125 -> 3, 4.1667 -> 5
        assert frames_for_beat_fraction(BeatGrid(120, 0.01), fraction) == expected
        assert nearest_odd_oracle(120, 0.01, fraction) == expected

    def test_tie_rounds_up(self):
        # 60 / 93.75 / 16 / 0.01 = 4 exactly, halfway between 3 and 5
        assert frames_for_beat_fraction(BeatGrid(93.75, 0.01), Fraction(1, 16)) == 5

    def test_minimum_one(self):
        assert frames_for_beat_fraction(BeatGrid(300, 0.05), Fraction(1, 32)) == 1

    @settings(max_examples=300, deadline=None)
    @given(bpm=st.floats(30, 300), hop=st.floats(0.001, 0.05), frac=st.sampled_from(
        [Fraction(1, 32), Fraction(1, 16), Fraction(1, 12), Fraction(1, 4), Fraction(3, 8)]))
    def test_matches_oracle(self, bpm, hop, frac):
        assert frames_for_beat_fraction(BeatGrid(bpm, hop), frac) == nearest_odd_oracle(bpm, hop, frac)

    @settings(max_examples=200, deadline=None)
    @given(bpm=st.floats(30, 300), hop=st.floats(0.001, 0.05))
    def test_monotone(self, bpm, hop):
        g = BeatGrid(bpm, hop)
        widths = [frames_for_beat_fraction(g, f) for f in (Fraction(1, 32), Fraction(1, 16), Fraction(1, 12), Fraction(1, 2))]
        assert widths == sorted(widths)
        faster = BeatGrid(min(300.0, bpm * 1.5), hop)
        assert frames_for_beat_fraction(faster, Fraction(1, 12)) <= widths[2]


class TestBeatGrid:
    @pytest.mark.parametrize("bpm", [29.9, 300.1, float("nan")])
    def test_range(self, bpm):
        with pytest.raises(RangeViolation):
            BeatGrid(bpm, 0.01)

    def test_beat_seconds(self):
        assert BeatGrid(120, 0.01).beat_seconds == 0.5


class TestEstimateTempo:
    @pytest.mark.parametrize("period,bpm", [(0.5, 120.0), (1.0, 60.0), (0.6, 100.0)])
    def test_impulse_trains(self, period, bpm):
        env = impulse_train(period)
        assert acf_oracle_bpm(list(env), 0.01) == pytest.approx(bpm, abs=1)
        assert estimate_tempo(env, 0.01).bpm == pytest.approx(bpm, abs=1)

    def test_agrees_with_oracle_on_noise(self, rng):
        for _ in range(5):
            env = rng.random(500) ** 4
            assert estimate_tempo(env, 0.01).bpm == pytest.approx(acf_oracle_bpm(list(env), 0.01))

    def test_all_zero(self):
        with pytest.raises(DegenerateEnvelope):
            estimate_tempo(np.zeros(1000), 0.01)

    def test_negative(self):
        env = impulse_train(0.5)
        env[3] = -1
        with pytest.raises(DegenerateEnvelope):
            estimate_tempo(env, 0.01)

    def test_too_short(self):
        with pytest.raises(EnvelopeTooShort):
            estimate_tempo(impulse_train(0.5, seconds=3.0), 0.01)

    def test_scale_invariant(self, rng):
        env = impulse_train(0.6) + 0.1 * rng.random(1000)
        ref = estimate_tempo(env, 0.01).bpm
        for c in rng.uniform(1e-3, 1e3, size=20):
            assert estimate_tempo(env * c, 0.01).bpm == ref

    def test_deterministic(self, rng):
        env = rng.random(800)
        assert estimate_tempo(env, 0.01) == estimate_tempo(env.copy(), 0.01)


class TestEnvelopeFromContour:
    def test_constant_voiced(self):
        env = envelope_from_contour(contour_from_labels([60] * 20))
        assert env[0] == 0 and not env[1:].any()

    def test_single_onset(self):
        env = envelope_from_contour(contour_from_labels([-1] * 5 + [60] * 5))
        assert np.count_nonzero(env) == 1
        assert env[5] == 1.0

    def test_pitch_step(self):
        env = envelope_from_contour(contour_from_labels([60] * 5 + [62] * 5))
        assert env[5] >= 2.0

    def test_offset_is_not_an_onset(self):
        env = envelope_from_contour(contour_from_labels([60] * 5 + [-1] * 5))
        assert not env.any()
