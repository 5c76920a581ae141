"""Independent reference computations used by several test modules."""

from functools import lru_cache

import mpmath


def midi_round_oracle(freq_hz: int) -> int:
    """round-half-up(69 + 12 log2(f / 440)) at 50 significant digits."""
    with mpmath.workdps(50):
        x = 69 + 12 * mpmath.log(mpmath.mpf(freq_hz) / 440, 2)
        return int(mpmath.floor(x + mpmath.mpf("0.5")))


def valid_ms(r, e, level):
    """Pair validity on integer-millisecond notes ``(onset, offset, pitch)``.

    offset tolerance max(50 ms, 0.2 * duration) compared as
    5 * |delta| <= max(250, duration) to stay in integers.
    """
    if abs(r[0] - e[0]) > 50:
        return False
    if level == "COn":
        return True
    if r[2] != e[2]:
        return False
    if level == "COnP":
        return True
    return 5 * abs(r[1] - e[1]) <= max(250, r[1] - r[0])


def max_matching_exhaustive(ref, est, level):
    """Largest one-to-one pairing, trying every assignment.

    Each reference note is either left out or paired with a still-unused
    valid estimate; the search is memoized on (position, used set) only to
    keep 8 x 8 instances fast.
    """
    n_est = len(est)
    allowed = [[j for j in range(n_est) if valid_ms(r, est[j], level)] for r in ref]

    @lru_cache(maxsize=None)
    def best(i, used):
        if i == len(ref):
            return 0
        result = best(i + 1, used)
        for j in allowed[i]:
            if not used & (1 << j):
                result = max(result, 1 + best(i + 1, used | (1 << j)))
        return result

    return best(0, 0)


def f1_oracle(n_match, n_ref, n_est):
    p = n_match / n_est if n_est else 0.0
    r = n_match / n_ref if n_ref else 0.0
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)
