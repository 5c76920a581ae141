"""Teacher-student self-training driven by external model commands.

Iteration 0 turns pitch contours (precomputed, or produced by a pitch model's
predict command) into note-level pseudo labels.  Iteration ``k >= 1``:

1. takes the teacher's hard labels: the initial labels for ``k = 1``,
   otherwise the previous student's predictions on the original audio pushed
   through the full quantizer;
2. in noisy-student mode, augments each training track with a per-track seed;
3. trains a student once over the label manifest;
4. lets the student predict on the original audio; those predictions are
   scored against gold notes (when present) and become the next teacher's
   output.

Every phase writes a JSON manifest under ``<run_dir>/iter<k>/`` recording
input digests, the commands run, and output hashes, so a rerun with the same
inputs skips finished iterations.

External commands are templates split with :func:`shlex.split`; placeholders
are substituted inside each argument, so paths never need quoting.
"""

import datetime as _dt
import hashlib
import json
import logging
import os
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from ._files import atomic_write_text, dumps_fixed, sha256_file, sha256_text
from .contour_io import parse_contour_csv, parse_envelope_csv
from .errors import (
    AugmenterRequired,
    CommandFailed,
    ContourError,
    MissingInput,
    NotesFormatError,
    PseudoNotesError,
    SchemaViolation,
    StaleManifest,
    TemplateError,
)
from .metrics import EvalConfig, EvalReport, score_corpus
from .notes import dumps_notes, read_notes
from .quantizer import PIPELINE_STAGES, QuantizationConfig, convert
from .tempo import BeatGrid, envelope_from_contour, estimate_tempo

log = logging.getLogger(__name__)

INITIAL_LABELS = "initial-pseudo-labels"
PRECOMPUTED = "precomputed-contours"
MODES = ("TS", "NS")
RUN_DIR_TOKEN = "${RUN_DIR}"


# --------------------------------------------------------------------------
# specs


def _check_placeholders(template: str, required, optional=(), what="template"):
    for name in required:
        count = template.count("{" + name + "}")
        if count != 1:
            raise TemplateError(f"{what} must contain {{{name}}} exactly once, found {count}: {template!r}")
    for name in optional:
        if template.count("{" + name + "}") > 1:
            raise TemplateError(f"{what} may contain {{{name}}} at most once: {template!r}")
    try:
        shlex.split(template)
    except ValueError as exc:
        raise TemplateError(f"{what} is not a valid command line: {exc}") from None


def render_command(template: str, **values) -> list:
    """Split ``template`` into argv and substitute ``{name}`` placeholders."""
    argv = []
    for token in shlex.split(template):
        for name, value in values.items():
            token = token.replace("{" + name + "}", str(value))
        argv.append(token)
    return argv


@dataclass(frozen=True)
class ExternalModelSpec:
    """A model reachable only through shell commands.

    ``predict_command`` needs ``{input_list}`` and ``{output_dir}`` and may
    use ``{model}``; ``train_command`` (optional for pure predictors) needs
    ``{label_manifest}``, ``{output_model}`` and ``{seed}``.
    """

    predict_command: str
    train_command: Optional[str] = None
    model_artifact: Optional[str] = None
    name: str = ""

    def __post_init__(self):
        _check_placeholders(self.predict_command, ("input_list", "output_dir"), ("model",), "predict_command")
        if self.train_command is not None:
            _check_placeholders(self.train_command, ("label_manifest", "output_model", "seed"), (), "train_command")

    @property
    def identity(self) -> str:
        return self.name or self.model_artifact or self.predict_command

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "predict_command": self.predict_command,
            "train_command": self.train_command,
            "model_artifact": self.model_artifact,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExternalModelSpec":
        return cls(
            predict_command=d["predict_command"],
            train_command=d.get("train_command"),
            model_artifact=d.get("model_artifact"),
            name=d.get("name", ""),
        )

    @classmethod
    def load(cls, path) -> "ExternalModelSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class AugmenterSpec:
    command: Optional[str] = None
    enabled: bool = False

    def __post_init__(self):
        if self.enabled:
            if not self.command:
                raise TemplateError("an enabled augmenter needs a command")
            _check_placeholders(self.command, ("input_audio", "output_audio", "seed"), (), "augmenter command")

    def to_dict(self) -> dict:
        return {"command": self.command, "enabled": self.enabled}

    @classmethod
    def from_dict(cls, d: dict) -> "AugmenterSpec":
        return cls(command=d.get("command"), enabled=bool(d.get("enabled", d.get("command") is not None)))

    @classmethod
    def load(cls, path) -> "AugmenterSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class DatasetEntry:
    track_id: str
    audio_path: Optional[Path] = None
    contour_path: Optional[Path] = None
    gold_notes_path: Optional[Path] = None

    def to_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "audio_path": None if self.audio_path is None else str(self.audio_path),
            "contour_path": None if self.contour_path is None else str(self.contour_path),
            "gold_notes_path": None if self.gold_notes_path is None else str(self.gold_notes_path),
        }


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple
    role: str = "unlabeled"

    def __post_init__(self):
        entries = tuple(self.entries)
        if self.role not in ("unlabeled", "labeled", "test"):
            raise ValueError(f"unknown dataset role {self.role!r}")
        seen = set()
        for e in entries:
            if not e.track_id or "/" in e.track_id or "\t" in e.track_id or "\n" in e.track_id:
                raise ValueError(f"invalid track id {e.track_id!r}")
            if e.track_id in seen:
                raise ValueError(f"duplicate track id {e.track_id!r}")
            seen.add(e.track_id)
        object.__setattr__(self, "entries", entries)

    def to_dict(self) -> dict:
        return {"role": self.role, "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "DatasetManifest":
        base = Path(base_dir) if base_dir is not None else None

        def _path(value):
            if value is None:
                return None
            p = Path(value)
            if base is not None and not p.is_absolute():
                p = base / p
            return p

        entries = tuple(
            DatasetEntry(
                track_id=item["track_id"],
                audio_path=_path(item.get("audio_path")),
                contour_path=_path(item.get("contour_path")),
                gold_notes_path=_path(item.get("gold_notes_path")),
            )
            for item in d["entries"]
        )
        return cls(entries=entries, role=d.get("role", "unlabeled"))

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)


@dataclass(frozen=True)
class TempoSource:
    """Where each track's tempo comes from.

    A fixed ``bpm`` wins; otherwise a per-track onset-strength envelope file
    is used when listed in ``envelopes``; otherwise the tempo is estimated
    from the contour's own pitch-change envelope.
    """

    bpm: Optional[float] = None
    envelopes: dict = field(default_factory=dict)

    def resolve(self, track_id: str, contour) -> float:
        if self.bpm is not None:
            return BeatGrid(self.bpm, contour.hop).bpm
        if track_id in self.envelopes:
            values, hop = parse_envelope_csv(Path(self.envelopes[track_id]).read_bytes())
            bpm = estimate_tempo(values, hop).bpm
        else:
            bpm = estimate_tempo(envelope_from_contour(contour), contour.hop).bpm
        # stored in manifests at 6 decimals; use the stored value everywhere
        return round(bpm, 6)

    def to_dict(self) -> dict:
        return {
            "bpm": self.bpm,
            "envelopes": {k: str(v) for k, v in sorted(self.envelopes.items())},
        }


# --------------------------------------------------------------------------
# manifests


@dataclass
class IterationManifest:
    iteration: int
    teacher: str
    student_model: str
    pseudo_label_dir: str
    rng_seed: int
    mode: Optional[str] = None
    inputs_digest: str = ""
    inputs: dict = field(default_factory=dict)
    quantization: dict = field(default_factory=dict)
    postprocess: list = field(default_factory=lambda: list(PIPELINE_STAGES))
    tracks: list = field(default_factory=list)
    commands: list = field(default_factory=list)
    predictions_dir: Optional[str] = None
    outputs: dict = field(default_factory=dict)
    quality: Optional[dict] = None
    started_at: str = ""
    finished_at: str = ""

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "mode": self.mode,
            "teacher": self.teacher,
            "student_model": self.student_model,
            "pseudo_label_dir": self.pseudo_label_dir,
            "predictions_dir": self.predictions_dir,
            "rng_seed": self.rng_seed,
            "postprocess": list(self.postprocess),
            "quantization": self.quantization,
            "inputs_digest": self.inputs_digest,
            "inputs": self.inputs,
            "tracks": self.tracks,
            "commands": self.commands,
            "outputs": dict(sorted(self.outputs.items())),
            "quality": self.quality,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IterationManifest":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})

    def dumps(self) -> str:
        return dumps_fixed(self.to_dict(), indent=2) + "\n"

    @property
    def quality_report(self) -> Optional[EvalReport]:
        return None if self.quality is None else EvalReport.from_dict(self.quality)

    def track_bpm(self) -> dict:
        return {t["track_id"]: float(t["bpm"]) for t in self.tracks}


def manifest_path(run_dir, k: int) -> Path:
    return Path(run_dir) / f"iter{k}" / "manifest.json"


def load_manifest(path) -> IterationManifest:
    try:
        return IterationManifest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise StaleManifest(f"cannot read manifest {path}: {exc}") from None


def outputs_intact(run_dir, manifest: IterationManifest) -> bool:
    run_dir = Path(run_dir)
    for rel, digest in manifest.outputs.items():
        p = run_dir / rel
        if not p.is_file() or sha256_file(p) != digest:
            return False
    return True


def stable_seed(seed: int, key: str) -> int:
    """31-bit seed derived from ``(seed, key)``, stable across processes."""
    h = hashlib.sha256(f"{int(seed)}\x1f{key}".encode("utf-8")).digest()
    return int.from_bytes(h[:4], "big") & 0x7FFFFFFF


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------
# helpers


class _Runner:
    """Runs external commands and records them relative to the run dir."""

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        self.records = []

    def _portable(self, argv):
        root = str(self.run_dir)
        return [a.replace(root, RUN_DIR_TOKEN) for a in argv]

    def __call__(self, argv, record=True):
        log.info("running %s", " ".join(shlex.quote(a) for a in argv))
        try:
            proc = subprocess.run(argv, capture_output=True, text=True)
        except OSError as exc:
            raise CommandFailed(argv, 127, str(exc)) from None
        if proc.returncode != 0:
            raise CommandFailed(argv, proc.returncode, proc.stderr)
        if record:
            self.records.append(self._portable(argv))
        return proc


def _rel(run_dir: Path, path: Path) -> str:
    return Path(os.path.relpath(path, run_dir)).as_posix()


def _file_digest(path) -> Optional[str]:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise MissingInput(f"input file not found: {p}")
    return sha256_file(p)


def _digest(inputs: dict) -> str:
    return sha256_text(dumps_fixed(inputs))


def _dataset_inputs(data: DatasetManifest, use_audio=True, use_contour=True) -> list:
    rows = []
    for e in data.entries:
        rows.append(
            {
                "track_id": e.track_id,
                "audio": _file_digest(e.audio_path) if use_audio else None,
                "contour": _file_digest(e.contour_path) if use_contour else None,
                "gold": _file_digest(e.gold_notes_path),
            }
        )
    return rows


def _write_list(path: Path, rows) -> None:
    atomic_write_text(path, "".join("\t".join(str(c) for c in row) + "\n" for row in rows))


def _read_predicted_contour(out_dir: Path, track_id: str):
    path = out_dir / f"{track_id}.contour.csv"
    if not path.is_file():
        raise SchemaViolation(f"track {track_id!r}: model did not write {path.name}")
    try:
        return parse_contour_csv(path.read_bytes(), track_id=track_id)
    except ContourError as exc:
        raise SchemaViolation(f"track {track_id!r}: {path.name} is not a valid contour CSV: {exc}") from None


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _quality(data: DatasetManifest, predicted: dict, eval_config: EvalConfig):
    pairs = []
    for e in data.entries:
        if e.gold_notes_path is None or e.track_id not in predicted:
            continue
        try:
            gold = read_notes(e.gold_notes_path)
        except NotesFormatError as exc:
            raise SchemaViolation(f"track {e.track_id!r}: gold notes unreadable: {exc}") from None
        pairs.append((gold, predicted[e.track_id]))
    if not pairs:
        return None
    return score_corpus(pairs, eval_config).to_dict()


def _check_mode(mode: str, augmenter: Optional[AugmenterSpec]):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "NS" and (augmenter is None or not augmenter.enabled):
        raise AugmenterRequired("noisy-student mode needs an enabled augmenter")


# --------------------------------------------------------------------------
# iteration 0


def _initial_inputs(data, pitch_model, tempo_source, config, eval_config) -> dict:
    return {
        "iteration": 0,
        "dataset": _dataset_inputs(data, use_audio=pitch_model is not None),
        "pitch_model": None if pitch_model is None else pitch_model.to_dict(),
        "pitch_model_artifact": _artifact_digest(pitch_model),
        "tempo": tempo_source.to_dict(),
        "quantization": config.to_dict(),
        "eval": _eval_dict(eval_config),
    }


def _artifact_digest(model: Optional[ExternalModelSpec]):
    if model is None or model.model_artifact is None:
        return None
    p = Path(model.model_artifact)
    return sha256_file(p) if p.is_file() else None


def _eval_dict(c: EvalConfig) -> dict:
    return {
        "onset_tolerance": c.onset_tolerance,
        "offset_min_tolerance": c.offset_min_tolerance,
        "offset_ratio": c.offset_ratio,
        "pitch_tolerance": c.pitch_tolerance,
    }


def generate_initial_labels(
    data: DatasetManifest,
    pitch_model: Optional[ExternalModelSpec],
    tempo_source: TempoSource,
    config: QuantizationConfig,
    run_dir,
    *,
    eval_config: EvalConfig = EvalConfig(),
    jobs: int = 1,
    clock: Callable[[], str] = _utc_now,
) -> IterationManifest:
    """Iteration 0: contours to hard note labels, one notes JSON per track."""
    run_dir = Path(run_dir)
    it_dir = run_dir / "iter0"
    started = clock()

    for e in data.entries:
        if e.contour_path is None:
            if e.audio_path is None:
                raise MissingInput(f"track {e.track_id!r} has neither a contour nor audio")
            if pitch_model is None:
                raise MissingInput(f"track {e.track_id!r} has no contour and no pitch model was given")
    inputs = _initial_inputs(data, pitch_model, tempo_source, config, eval_config)
    runner = _Runner(run_dir)

    need_predict = [e for e in data.entries if e.contour_path is None]
    contour_dir = it_dir / "contours"
    if need_predict:
        contour_dir.mkdir(parents=True, exist_ok=True)
        list_path = it_dir / "predict_inputs.tsv"
        _write_list(list_path, [(e.track_id, e.audio_path) for e in need_predict])
        argv = render_command(
            pitch_model.predict_command,
            input_list=list_path,
            output_dir=contour_dir,
            model=pitch_model.model_artifact or "",
        )
        runner(argv)

    def load(entry):
        if entry.contour_path is not None:
            try:
                contour = parse_contour_csv(Path(entry.contour_path).read_bytes(), track_id=entry.track_id)
            except ContourError as exc:
                raise SchemaViolation(f"track {entry.track_id!r}: {entry.contour_path}: {exc}") from None
        else:
            contour = _read_predicted_contour(contour_dir, entry.track_id)
        bpm = tempo_source.resolve(entry.track_id, contour)
        notes = convert(contour, BeatGrid(bpm, contour.hop), config)
        return entry.track_id, bpm, notes

    results = _map(load, data.entries, jobs)

    label_dir = it_dir / "labels"
    outputs, tracks, predicted = {}, [], {}
    for track_id, bpm, notes in results:
        path = label_dir / f"{track_id}.notes.json"
        atomic_write_text(path, dumps_notes(notes))
        outputs[_rel(run_dir, path)] = sha256_file(path)
        tracks.append({"track_id": track_id, "bpm": bpm, "label": _rel(run_dir, path), "n_notes": len(notes)})
        predicted[track_id] = notes
    for e in need_predict:
        path = contour_dir / f"{e.track_id}.contour.csv"
        outputs[_rel(run_dir, path)] = sha256_file(path)

    manifest = IterationManifest(
        iteration=0,
        teacher=f"pitch-model:{pitch_model.identity}" if pitch_model is not None else PRECOMPUTED,
        student_model=INITIAL_LABELS,
        pseudo_label_dir=_rel(run_dir, label_dir),
        rng_seed=0,
        inputs_digest=_digest(inputs),
        inputs=inputs,
        quantization=config.to_dict(),
        tracks=tracks,
        commands=runner.records,
        outputs=outputs,
        quality=_quality(data, predicted, eval_config),
        started_at=started,
    )
    manifest.finished_at = clock()
    path = manifest_path(run_dir, 0)
    atomic_write_text(path, manifest.dumps())
    # hand back exactly what is on disk (floats at 6 decimals)
    return load_manifest(path)


# --------------------------------------------------------------------------
# iterations k >= 1


def _iteration_inputs(k, prev_manifest_digest, data, model, augmenter, mode, config, seed, eval_config) -> dict:
    return {
        "iteration": k,
        "previous_manifest": prev_manifest_digest,
        "dataset": _dataset_inputs(data, use_contour=False),
        "model": model.to_dict(),
        "model_artifact": _artifact_digest(model),
        "augmenter": None if mode == "TS" else augmenter.to_dict(),
        "mode": mode,
        "seed": int(seed),
        "quantization": config.to_dict(),
        "eval": _eval_dict(eval_config),
    }


def _validate_prev(k: int, prev: IterationManifest, run_dir: Path):
    if prev.iteration != k - 1:
        raise StaleManifest(f"iteration {k} needs manifest {k - 1}, got {prev.iteration}")
    path = manifest_path(run_dir, prev.iteration)
    if not path.is_file():
        raise StaleManifest(f"manifest for iteration {prev.iteration} not found at {path}")
    on_disk = load_manifest(path)
    if on_disk.to_dict() != prev.to_dict():
        raise StaleManifest(f"{path} does not match the manifest passed in")
    if not outputs_intact(run_dir, prev):
        raise StaleManifest(f"outputs of iteration {prev.iteration} are missing or modified")
    return sha256_file(path)


def run_iteration(
    k: int,
    prev: IterationManifest,
    data: DatasetManifest,
    model: ExternalModelSpec,
    augmenter: Optional[AugmenterSpec],
    mode: str,
    config: QuantizationConfig,
    seed: int,
    run_dir,
    *,
    eval_config: EvalConfig = EvalConfig(),
    jobs: int = 1,
    clock: Callable[[], str] = _utc_now,
) -> IterationManifest:
    """One teacher-student round; see the module docstring for the steps."""
    if k < 1:
        raise ValueError("run_iteration handles k >= 1; iteration 0 is generate_initial_labels")
    _check_mode(mode, augmenter)
    if model.train_command is None:
        raise TemplateError("the student model spec needs a train_command")
    if "{model}" not in model.predict_command:
        raise TemplateError("the student model's predict_command must take {model}")
    run_dir = Path(run_dir)
    prev_digest = _validate_prev(k, prev, run_dir)
    for e in data.entries:
        if e.audio_path is None:
            raise MissingInput(f"track {e.track_id!r} has no audio for training")

    started = clock()
    inputs = _iteration_inputs(k, prev_digest, data, model, augmenter, mode, config, seed, eval_config)
    runner = _Runner(run_dir)
    it_dir = run_dir / f"iter{k}"
    outputs = {}
    bpm_of = prev.track_bpm()

    # 1-2. teacher labels after the full quantizer
    if k == 1:
        label_dir = run_dir / prev.pseudo_label_dir
    else:
        label_dir = it_dir / "labels"
        teacher_dir = run_dir / prev.predictions_dir

        def relabel(entry):
            contour = _read_predicted_contour(teacher_dir, entry.track_id)
            notes = convert(contour, BeatGrid(bpm_of[entry.track_id], contour.hop), config)
            return entry.track_id, notes

        for track_id, notes in _map(relabel, data.entries, jobs):
            path = label_dir / f"{track_id}.notes.json"
            atomic_write_text(path, dumps_notes(notes))
            outputs[_rel(run_dir, path)] = sha256_file(path)

    # 3. noisy-student augmentation, one seed per track
    train_audio = {}
    track_rows = []
    if mode == "NS":
        aug_dir = it_dir / "augmented"
        aug_dir.mkdir(parents=True, exist_ok=True)

        def augment(entry):
            src = Path(entry.audio_path)
            dst = aug_dir / f"{entry.track_id}{src.suffix}"
            track_seed = stable_seed(seed, f"iter{k}/{entry.track_id}")
            argv = render_command(augmenter.command, input_audio=src, output_audio=dst, seed=track_seed)
            runner(argv, record=False)
            if not dst.is_file():
                raise SchemaViolation(f"track {entry.track_id!r}: augmenter did not write {dst.name}")
            return entry.track_id, dst, track_seed, argv

        for track_id, dst, track_seed, argv in _map(augment, data.entries, jobs):
            runner.records.append(runner._portable(argv))
            train_audio[track_id] = dst
            outputs[_rel(run_dir, dst)] = sha256_file(dst)
            track_rows.append({"track_id": track_id, "augment_seed": track_seed, "train_audio": _rel(run_dir, dst)})
    else:
        for e in data.entries:
            train_audio[e.track_id] = Path(e.audio_path)
            track_rows.append({"track_id": e.track_id, "augment_seed": None, "train_audio": str(e.audio_path)})

    for row in track_rows:
        label = label_dir / f"{row['track_id']}.notes.json"
        if not label.is_file():
            raise StaleManifest(f"pseudo label missing for track {row['track_id']!r}: {label}")
        try:
            read_notes(label)
        except NotesFormatError as exc:
            raise SchemaViolation(f"pseudo label {label} is not a valid notes file: {exc}") from None
        row["bpm"] = bpm_of[row["track_id"]]
        row["label"] = _rel(run_dir, label)

    # 4. train the student once over the label manifest
    label_manifest = it_dir / "label_manifest.tsv"
    _write_list(
        label_manifest,
        [(e.track_id, train_audio[e.track_id], label_dir / f"{e.track_id}.notes.json") for e in data.entries],
    )
    train_seed = stable_seed(seed, f"iter{k}/train")
    student = it_dir / "student.model"
    runner(render_command(model.train_command, label_manifest=label_manifest, output_model=student, seed=train_seed))
    if not student.exists():
        raise SchemaViolation(f"train command did not produce {student}")
    if student.is_file():
        outputs[_rel(run_dir, student)] = sha256_file(student)

    # 5. student predicts on the original audio; scored against gold
    pred_dir = it_dir / "predictions"
    pred_dir.mkdir(parents=True, exist_ok=True)
    list_path = it_dir / "predict_inputs.tsv"
    _write_list(list_path, [(e.track_id, e.audio_path) for e in data.entries])
    runner(render_command(model.predict_command, input_list=list_path, output_dir=pred_dir, model=student))

    def student_notes(entry):
        contour = _read_predicted_contour(pred_dir, entry.track_id)
        return entry.track_id, convert(contour, BeatGrid(bpm_of[entry.track_id], contour.hop), config)

    predicted = dict(_map(student_notes, data.entries, jobs))
    for e in data.entries:
        path = pred_dir / f"{e.track_id}.contour.csv"
        outputs[_rel(run_dir, path)] = sha256_file(path)

    manifest = IterationManifest(
        iteration=k,
        mode=mode,
        teacher=prev.student_model,
        student_model=_rel(run_dir, student),
        pseudo_label_dir=_rel(run_dir, label_dir),
        predictions_dir=_rel(run_dir, pred_dir),
        rng_seed=train_seed,
        inputs_digest=_digest(inputs),
        inputs=inputs,
        quantization=config.to_dict(),
        tracks=track_rows,
        commands=runner.records,
        outputs=outputs,
        quality=_quality(data, predicted, eval_config),
        started_at=started,
    )
    manifest.finished_at = clock()
    path = manifest_path(run_dir, k)
    atomic_write_text(path, manifest.dumps())
    return load_manifest(path)


# --------------------------------------------------------------------------
# full loop


def _reusable(run_dir: Path, k: int, expected_digest: str) -> Optional[IterationManifest]:
    path = manifest_path(run_dir, k)
    if not path.is_file():
        return None
    try:
        m = load_manifest(path)
    except StaleManifest:
        return None
    if m.iteration != k or m.inputs_digest != expected_digest or not outputs_intact(run_dir, m):
        return None
    return m


def quality_curve(manifests) -> dict:
    return {
        "iterations": [
            {"iteration": m.iteration, **m.quality} for m in manifests if m.quality is not None
        ]
    }


def run_self_training(
    data: DatasetManifest,
    model: ExternalModelSpec,
    augmenter: Optional[AugmenterSpec],
    mode: str,
    n_iterations: int,
    config: QuantizationConfig,
    seed: int,
    run_dir,
    *,
    pitch_model: Optional[ExternalModelSpec] = None,
    tempo_source: TempoSource = TempoSource(),
    eval_config: EvalConfig = EvalConfig(),
    jobs: int = 1,
    clock: Callable[[], str] = _utc_now,
) -> list:
    """Iteration 0 followed by ``n_iterations`` teacher-student rounds.

    Finished iterations whose recorded inputs and outputs still match are
    reused as-is.  Writes ``quality.json`` when any track has gold notes.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be at least 1")
    _check_mode(mode, augmenter)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    for e in data.entries:
        if e.contour_path is None and (e.audio_path is None or pitch_model is None):
            raise MissingInput(f"track {e.track_id!r} has no contour and cannot be predicted")
    inputs0 = _initial_inputs(data, pitch_model, tempo_source, config, eval_config)
    m = _reusable(run_dir, 0, _digest(inputs0))
    if m is None:
        log.info("iteration 0: generating initial pseudo labels")
        m = generate_initial_labels(
            data, pitch_model, tempo_source, config, run_dir, eval_config=eval_config, jobs=jobs, clock=clock
        )
    else:
        log.info("iteration 0: up to date, skipping")
    manifests = [m]

    for k in range(1, n_iterations + 1):
        prev = manifests[-1]
        prev_digest = sha256_file(manifest_path(run_dir, k - 1))
        try:
            expected = _digest(
                _iteration_inputs(k, prev_digest, data, model, augmenter, mode, config, seed, eval_config)
            )
        except PseudoNotesError:
            expected = None
        m = _reusable(run_dir, k, expected) if expected else None
        if m is None:
            log.info("iteration %d: training", k)
            m = run_iteration(
                k, prev, data, model, augmenter, mode, config, seed, run_dir,
                eval_config=eval_config, jobs=jobs, clock=clock,
            )
        else:
            log.info("iteration %d: up to date, skipping", k)
        manifests.append(m)

    curve = quality_curve(manifests)
    if curve["iterations"]:
        atomic_write_text(run_dir / "quality.json", dumps_fixed(curve, indent=2) + "\n")
    return manifests
