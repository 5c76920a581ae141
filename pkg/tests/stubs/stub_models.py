"""Deterministic stand-ins for the external pitch model, note model and augmenter.

"Audio" files in the tests are contour CSVs, so the pitch model just copies
them.  The note model memorizes the labels it is trained on and replays them
as a frame-level contour on the track's own frame grid.

Each invocation appends one line to $STUB_LOG when that variable is set.
"""

import argparse
import json
import os
import shutil
import sys
from pathlib import Path


def _log(*parts):
    path = os.environ.get("STUB_LOG")
    if path:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(" ".join(str(p) for p in parts) + "\n")


def _read_list(path):
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line:
            rows.append(line.split("\t"))
    return rows


def _frame_grid(csv_path):
    lines = Path(csv_path).read_text(encoding="utf-8").strip().splitlines()[1:]
    times = [float(ln.split(",")[0]) for ln in lines]
    hop = round(times[1] - times[0], 6) if len(times) > 1 else 0.01
    return times[0], hop, len(times)


def cmd_pitch(args):
    _log("pitch", args.list)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for track_id, audio in _read_list(args.list):
        dst = out / f"{track_id}.contour.csv"
        if args.malformed:
            dst.write_text("time_sec,f0_hz,confidence\n0.0,not-a-number,1.0\n", encoding="utf-8")
        elif args.constant is not None:
            start, hop, n = _frame_grid(audio)
            rows = [f"{start + i * hop:.6f},{args.constant:.6f},1.000000" for i in range(n)]
            dst.write_text("time_sec,f0_hz,confidence\n" + "\n".join(rows) + "\n", encoding="utf-8")
        else:
            shutil.copyfile(audio, dst)


def cmd_train(args):
    _log("train", args.labels, args.seed)
    tracks = {}
    for track_id, audio, notes_path in _read_list(args.labels):
        tracks[track_id] = json.loads(Path(notes_path).read_text(encoding="utf-8"))["notes"]
        if not Path(audio).is_file():
            print(f"missing training audio {audio}", file=sys.stderr)
            return 3
    model = {"seed": int(args.seed), "tracks": tracks}
    Path(args.out).write_text(json.dumps(model, sort_keys=True), encoding="utf-8")
    return 0


def cmd_predict(args):
    _log("predict", args.list, args.model)
    model = json.loads(Path(args.model).read_text(encoding="utf-8"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for track_id, audio in _read_list(args.list):
        start, hop, n = _frame_grid(audio)
        f0 = [0.0] * n
        for note in model["tracks"].get(track_id, []):
            a = max(0, int(round((note["onset_sec"] - start) / hop)))
            b = min(n, int(round((note["offset_sec"] - start) / hop)))
            hz = 440.0 * 2.0 ** ((note["midi_pitch"] - 69) / 12.0)
            for i in range(a, b):
                f0[i] = hz
        rows = [
            f"{start + i * hop:.6f},{f:.6f},{1.0 if f > 0 else 0.0:.6f}" for i, f in enumerate(f0)
        ]
        (out / f"{track_id}.contour.csv").write_text(
            "time_sec,f0_hz,confidence\n" + "\n".join(rows) + "\n", encoding="utf-8"
        )
    return 0


def cmd_augment(args):
    _log("augment", args.input, args.seed)
    shutil.copyfile(args.input, args.out)
    return 0


def cmd_fail(args):
    print("stub failure requested", file=sys.stderr)
    return 5


def main(argv=None):
    p = argparse.ArgumentParser()
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("pitch")
    s.add_argument("--list", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--malformed", action="store_true")
    s.add_argument("--constant", type=float)
    s.set_defaults(func=cmd_pitch)

    s = sub.add_parser("train")
    s.add_argument("--labels", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict")
    s.add_argument("--list", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--model", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("augment")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", required=True)
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("fail")
    s.add_argument("rest", nargs="*")
    s.set_defaults(func=cmd_fail)

    args = p.parse_args(argv)
    return args.func(args) or 0


if __name__ == "__main__":
    sys.exit(main())
