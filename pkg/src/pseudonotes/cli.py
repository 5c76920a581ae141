"""Command-line front end.

Exit codes: 0 success, 1 domain error (bad input file, failed command...),
2 usage error.
"""

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

from ._files import atomic_write_bytes, dumps_fixed
from .contour_io import parse_envelope_csv, read_contour
from .errors import PseudoNotesError
from .metrics import EvalConfig, score, score_corpus
from .midi import export_midi
from .notes import read_notes, write_notes
from .quantizer import DEFAULT_FILTER_FRACTIONS, QuantizationConfig, convert
from .selftrain import (
    AugmenterSpec,
    DatasetManifest,
    ExternalModelSpec,
    TempoSource,
    run_self_training,
)
from .tempo import BeatGrid, envelope_from_contour, estimate_tempo

log = logging.getLogger("pseudonotes")


class UsageError(Exception):
    pass


def _fractions(text: str):
    try:
        return tuple(Fraction(part.strip()) for part in text.split(",") if part.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected comma-separated fractions like 1/32,1/16, got {text!r}")


def _fraction(text: str):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a fraction like 1/16, got {text!r}")


def _add_quant_flags(p):
    g = p.add_argument_group("quantization")
    g.add_argument("--filters", type=_fractions, default=DEFAULT_FILTER_FRACTIONS,
                   help="median filter sizes in beats, applied in order (default 1/32,1/16,1/12)")
    g.add_argument("--min-fragment", type=_fraction, default=Fraction(1, 16),
                   help="drop voiced runs shorter than this many beats (default 1/16)")
    g.add_argument("--confidence-floor", type=float, default=0.5)
    g.add_argument("--octave-context", type=float, default=2.0, metavar="SECONDS")


def _add_eval_flags(p):
    g = p.add_argument_group("evaluation tolerances")
    g.add_argument("--onset-tolerance", type=float, default=0.05, metavar="SECONDS")
    g.add_argument("--offset-min-tolerance", type=float, default=0.05, metavar="SECONDS")
    g.add_argument("--offset-ratio", type=float, default=0.2)
    g.add_argument("--pitch-tolerance", type=float, default=50.0, metavar="CENTS")


def _quant_config(args) -> QuantizationConfig:
    try:
        return QuantizationConfig(
            filter_fractions=args.filters,
            min_fragment_fraction=args.min_fragment,
            confidence_floor=args.confidence_floor,
            octave_context_seconds=args.octave_context,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _eval_config(args) -> EvalConfig:
    try:
        return EvalConfig(
            onset_tolerance=args.onset_tolerance,
            offset_min_tolerance=args.offset_min_tolerance,
            offset_ratio=args.offset_ratio,
            pitch_tolerance=args.pitch_tolerance,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_bpm(bpm):
    if bpm is not None and not 30.0 <= bpm <= 300.0:
        raise UsageError(f"--bpm must be within [30, 300], got {bpm}")


def cmd_convert(args) -> int:
    config = _quant_config(args)
    _check_bpm(args.bpm)
    contour_path = Path(args.contour)
    contour = read_contour(contour_path, track_id=args.track_id, hop=args.hop)
    if args.bpm is not None:
        grid, source = BeatGrid(args.bpm, contour.hop), "fixed"
    elif args.envelope is not None:
        values, env_hop = parse_envelope_csv(Path(args.envelope).read_bytes(), hop=args.hop)
        grid, source = BeatGrid(estimate_tempo(values, env_hop).bpm, contour.hop), "envelope"
    else:
        env = envelope_from_contour(contour, config.confidence_floor)
        grid, source = BeatGrid(estimate_tempo(env, contour.hop).bpm, contour.hop), "contour"
    notes = convert(contour, grid, config)
    out = Path(args.output) if args.output else contour_path.with_name(f"{contour.track_id}.notes.json")
    write_notes(out, notes)
    print(f"track_id={contour.track_id} n_notes={len(notes)} bpm={grid.bpm:.6f} "
          f"bpm_source={source} output={out}")
    return 0


def cmd_tempo(args) -> int:
    if args.envelope is not None:
        values, hop = parse_envelope_csv(Path(args.envelope).read_bytes(), hop=args.hop)
    else:
        contour = read_contour(args.contour, hop=args.hop)
        values, hop = envelope_from_contour(contour, args.confidence_floor), contour.hop
    grid = estimate_tempo(values, hop)
    print(f"{grid.bpm:.6f}")
    return 0


def _read_corpus(path: Path):
    pairs = []
    base = path.parent
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        if len(cells) != 2:
            raise PseudoNotesError(f"{path}:{lineno}: expected 'ref_path<TAB>est_path'")
        ref, est = (Path(c.strip()) for c in cells)
        ref = ref if ref.is_absolute() else base / ref
        est = est if est.is_absolute() else base / est
        pairs.append((read_notes(ref), read_notes(est)))
    return pairs


def cmd_eval(args) -> int:
    config = _eval_config(args)
    if args.corpus is not None:
        if args.ref or args.est:
            raise UsageError("give either REF EST or --corpus, not both")
        report = score_corpus(_read_corpus(Path(args.corpus)), config)
    else:
        if not (args.ref and args.est):
            raise UsageError("eval needs REF and EST paths, or --corpus")
        report = score(read_notes(args.ref), read_notes(args.est), config)
    print(dumps_fixed(report.to_dict()))
    return 0


def cmd_selftrain(args) -> int:
    config = _quant_config(args)
    eval_config = _eval_config(args)
    _check_bpm(args.bpm)
    if args.iterations < 1:
        raise UsageError("--iterations must be at least 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    if args.mode == "NS" and args.augmenter is None:
        raise UsageError("--mode NS needs --augmenter")

    data = DatasetManifest.load(args.data)
    model = ExternalModelSpec.load(args.model)
    pitch_model = ExternalModelSpec.load(args.pitch_model) if args.pitch_model else None
    augmenter = AugmenterSpec.load(args.augmenter) if args.augmenter else None
    run_dir = Path(args.runs_root) / args.run_id
    manifests = run_self_training(
        data, model, augmenter, args.mode, args.iterations, config, args.seed, run_dir,
        pitch_model=pitch_model, tempo_source=TempoSource(bpm=args.bpm),
        eval_config=eval_config, jobs=args.jobs,
    )
    for m in manifests:
        line = f"iter{m.iteration} teacher={m.teacher} student={m.student_model}"
        if m.quality is not None:
            line += " " + " ".join(f"{lv}_f1={m.quality[lv]['f1']:.6f}" for lv in ("COn", "COnP", "COnPOff"))
        print(line)
    return 0


def cmd_export_midi(args) -> int:
    _check_bpm(args.bpm)
    notes = read_notes(args.notes)
    out = Path(args.output) if args.output else Path(args.notes).with_suffix(".mid")
    atomic_write_bytes(out, export_midi(notes, args.bpm))
    print(f"wrote {out} ({len(notes)} notes, {args.bpm:g} BPM)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudonotes", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="pitch contour CSV -> notes JSON")
    p.add_argument("contour")
    tempo = p.add_mutually_exclusive_group()
    tempo.add_argument("--bpm", type=float)
    tempo.add_argument("--envelope", help="onset-strength CSV (time_sec,strength)")
    p.add_argument("-o", "--output")
    p.add_argument("--track-id")
    p.add_argument("--hop", type=float, help="hop for single-row files (default 0.01 s)")
    _add_quant_flags(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("tempo", help="estimate a global tempo")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--envelope")
    src.add_argument("--contour")
    p.add_argument("--hop", type=float)
    p.add_argument("--confidence-floor", type=float, default=0.5)
    p.set_defaults(func=cmd_tempo)

    p = sub.add_parser("eval", help="COn / COnP / COnPOff scores as JSON")
    p.add_argument("ref", nargs="?")
    p.add_argument("est", nargs="?")
    p.add_argument("--corpus", help="TSV of ref_path<TAB>est_path lines")
    _add_eval_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftrain", help="iterative teacher-student training")
    p.add_argument("--data", required=True, help="dataset manifest JSON")
    p.add_argument("--model", required=True, help="student model spec JSON")
    p.add_argument("--pitch-model", help="pitch estimator spec JSON (for tracks without contours)")
    p.add_argument("--augmenter", help="augmenter spec JSON")
    p.add_argument("--mode", choices=("TS", "NS"), default="NS")
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--runs-root", default="runs")
    p.add_argument("--run-id", required=True)
    p.add_argument("--bpm", type=float, help="fixed tempo for every track")
    _add_quant_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_selftrain)

    p = sub.add_parser("export-midi", help="notes JSON -> format-0 MIDI file")
    p.add_argument("notes")
    p.add_argument("--bpm", type=float, required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_midi)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (PseudoNotesError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
