"""Note-level transcription metrics: COn, COnP and COnPOff.

A reference note and an estimated note may be paired when

* COn      onsets are within ``onset_tolerance``;
* COnP     additionally pitches are within ``pitch_tolerance`` cents;
* COnPOff  additionally offsets are within
           ``max(offset_min_tolerance, offset_ratio * reference duration)``.

Each level is scored on a maximum-cardinality one-to-one matching of the
valid pairs.  All tolerances are inclusive.
"""

import bisect
import enum
import math
from dataclasses import dataclass, field

from .errors import EmptyCorpus
from .notes import NoteSequence

# absorbs binary rounding in time differences; far below the 1e-9 s
# resolution at which boundary behaviour is specified
_EPS = 1e-10


class Level(str, enum.Enum):
    COn = "COn"
    COnP = "COnP"
    COnPOff = "COnPOff"


LEVELS = (Level.COn, Level.COnP, Level.COnPOff)


@dataclass(frozen=True)
class EvalConfig:
    onset_tolerance: float = 0.05
    offset_min_tolerance: float = 0.05
    offset_ratio: float = 0.2
    pitch_tolerance: float = 50.0

    def __post_init__(self):
        for name in ("onset_tolerance", "offset_min_tolerance", "offset_ratio", "pitch_tolerance"):
            value = float(getattr(self, name))
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)

    def offset_tolerance(self, ref_note) -> float:
        return max(self.offset_min_tolerance, self.offset_ratio * (ref_note.offset - ref_note.onset))


def is_valid_pair(r, e, config: EvalConfig, level: Level) -> bool:
    if abs(r.onset - e.onset) > config.onset_tolerance + _EPS:
        return False
    if level is Level.COn:
        return True
    if abs(100.0 * (r.pitch - e.pitch)) > config.pitch_tolerance + _EPS:
        return False
    if level is Level.COnP:
        return True
    return abs(r.offset - e.offset) <= config.offset_tolerance(r) + _EPS


def candidate_pairs(ref: NoteSequence, est: NoteSequence, config: EvalConfig, level: Level):
    """Adjacency list: for each reference index, the valid estimate indices."""
    est_notes = list(est.notes)
    order = sorted(range(len(est_notes)), key=lambda j: est_notes[j].onset)
    onsets = [est_notes[j].onset for j in order]
    width = config.onset_tolerance + _EPS
    adj = []
    for r in ref.notes:
        lo = bisect.bisect_left(onsets, r.onset - width)
        hi = bisect.bisect_right(onsets, r.onset + width)
        cands = sorted(order[k] for k in range(lo, hi))
        adj.append([j for j in cands if is_valid_pair(r, est_notes[j], config, level)])
    return adj


def maximum_matching(adj, n_right: int):
    """Maximum bipartite matching by repeated augmenting-path search.

    ``adj[i]`` lists the right vertices adjacent to left vertex ``i``.
    Returns sorted ``(left, right)`` pairs.
    """
    match_right = [-1] * n_right
    for root in range(len(adj)):
        seen = [False] * n_right
        # stack[d] = [left vertex, next neighbour index]; via[d] is the
        # right vertex that leads from stack[d] to stack[d + 1]
        stack = [[root, 0]]
        via = []
        while stack:
            frame = stack[-1]
            nbrs = adj[frame[0]]
            if frame[1] >= len(nbrs):
                stack.pop()
                if via:
                    via.pop()
                continue
            right = nbrs[frame[1]]
            frame[1] += 1
            if seen[right]:
                continue
            seen[right] = True
            via.append(right)
            if match_right[right] < 0:
                for (left, _), r in zip(stack, via):
                    match_right[r] = left
                break
            stack.append([match_right[right], 0])
    return sorted((l, r) for r, l in enumerate(match_right) if l >= 0)


def match_valid(ref: NoteSequence, est: NoteSequence, config: EvalConfig = EvalConfig(), level=Level.COnPOff):
    level = Level(level)
    adj = candidate_pairs(ref, est, config, level)
    return maximum_matching(adj, len(est.notes))


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def f_measure(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf(n_matched: int, n_ref, n_est) -> Scores:
    precision = n_matched / n_est if n_est else 0.0
    recall = n_matched / n_ref if n_ref else 0.0
    return Scores(precision, recall, f_measure(precision, recall))


@dataclass(frozen=True)
class EvalReport:
    scores: dict
    matches: dict = field(default_factory=dict)
    n_ref: float = 0
    n_est: float = 0

    def __getitem__(self, level) -> Scores:
        return self.scores[Level(level)]

    def to_dict(self) -> dict:
        out = {lv.value: self.scores[lv].to_dict() for lv in LEVELS}
        out["n_ref"] = self.n_ref
        out["n_est"] = self.n_est
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        scores = {lv: Scores(**{k: float(d[lv.value][k]) for k in ("precision", "recall", "f1")}) for lv in LEVELS}
        return cls(scores=scores, n_ref=d.get("n_ref", 0), n_est=d.get("n_est", 0))


def score(ref: NoteSequence, est: NoteSequence, config: EvalConfig = EvalConfig()) -> EvalReport:
    scores, matches = {}, {}
    for level in LEVELS:
        m = match_valid(ref, est, config, level)
        matches[level] = m
        scores[level] = prf(len(m), len(ref.notes), len(est.notes))
    return EvalReport(scores=scores, matches=matches, n_ref=len(ref.notes), n_est=len(est.notes))


def score_corpus(pairs, config: EvalConfig = EvalConfig()) -> EvalReport:
    """Average per-track precision, recall and F1 with equal track weight.

    Note counts are totals over the corpus.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpus("corpus has no (reference, estimate) pairs")
    reports = [score(r, e, config) for r, e in pairs]
    return average_reports(reports)


def average_reports(reports) -> EvalReport:
    reports = list(reports)
    if not reports:
        raise EmptyCorpus("nothing to average")
    n = len(reports)
    scores = {}
    for level in LEVELS:
        scores[level] = Scores(
            precision=math.fsum(r.scores[level].precision for r in reports) / n,
            recall=math.fsum(r.scores[level].recall for r in reports) / n,
            f1=math.fsum(r.scores[level].f1 for r in reports) / n,
        )
    return EvalReport(
        scores=scores,
        matches={lv: [] for lv in LEVELS},
        n_ref=sum(r.n_ref for r in reports),
        n_est=sum(r.n_est for r in reports),
    )
