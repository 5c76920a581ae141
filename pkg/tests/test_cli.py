import json

import numpy as np
import pytest

from pseudonotes.cli import main
from pseudonotes.contour_io import PitchContour, write_contour_csv, write_envelope_csv
from pseudonotes.midi import import_midi
from pseudonotes.notes import NoteEvent, NoteSequence, read_notes, write_notes

from conftest import stub_command


@pytest.fixture
def a440(tmp_path):
    path = tmp_path / "a440.contour.csv"
    contour = PitchContour.from_arrays(np.full(200, 440.0), np.ones(200), 0.01)
    path.write_bytes(write_contour_csv(contour))
    return path


def click_envelope(bpm, seconds=12.0, hop=0.01):
    env = np.zeros(int(seconds / hop))
    period = 60.0 / bpm / hop
    env[np.round(np.arange(0, len(env), period)).astype(int).clip(0, len(env) - 1)] = 1.0
    return env


class TestConvert:
    def test_fixed_bpm(self, a440, tmp_path, capsys):
        out = tmp_path / "out.json"
        assert main(["convert", str(a440), "--bpm", "120", "-o", str(out)]) == 0
        seq = read_notes(out)
        assert [(n.onset, n.offset, n.pitch) for n in seq] == [(0.0, 2.0, 69)]
        assert seq.track_id == "a440"
        line = capsys.readouterr().out
        assert "n_notes=1" in line and "bpm_source=fixed" in line

    def test_default_output_path(self, a440):
        assert main(["convert", str(a440), "--bpm", "100"]) == 0
        assert (a440.parent / "a440.notes.json").is_file()

    def test_envelope_tempo(self, a440, tmp_path, capsys):
        env = tmp_path / "env.csv"
        env.write_bytes(write_envelope_csv(click_envelope(100), 0.01))
        assert main(["convert", str(a440), "--envelope", str(env)]) == 0
        out = capsys.readouterr().out
        bpm = float(out.split("bpm=")[1].split()[0])
        assert abs(bpm - 100) <= 1
        assert "bpm_source=envelope" in out

    def test_missing_file(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        assert main(["convert", str(missing), "--bpm", "120"]) == 1
        assert str(missing) in capsys.readouterr().err

    def test_malformed_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("time_sec,f0_hz,confidence\n0.0,abc,1\n")
        assert main(["convert", str(bad), "--bpm", "120"]) == 1
        assert "error" in capsys.readouterr().err

    def test_bpm_and_envelope_exclusive(self, a440):
        with pytest.raises(SystemExit) as exc:
            main(["convert", str(a440), "--bpm", "120", "--envelope", "x.csv"])
        assert exc.value.code == 2

    def test_bad_bpm(self, a440):
        assert main(["convert", str(a440), "--bpm", "0"]) == 2


class TestTempo:
    def test_envelope(self, tmp_path, capsys):
        env = tmp_path / "env.csv"
        env.write_bytes(write_envelope_csv(click_envelope(60), 0.01))
        assert main(["tempo", "--envelope", str(env)]) == 0
        assert abs(float(capsys.readouterr().out) - 60) <= 1

    def test_too_short(self, tmp_path, capsys):
        env = tmp_path / "env.csv"
        env.write_bytes(write_envelope_csv(click_envelope(120, seconds=2.0), 0.01))
        assert main(["tempo", "--envelope", str(env)]) == 1


class TestEval:
    @pytest.fixture
    def ref(self, tmp_path):
        path = tmp_path / "ref.notes.json"
        write_notes(path, NoteSequence((NoteEvent(0.0, 0.5, 60), NoteEvent(1.0, 1.5, 62))))
        return path

    def test_identical(self, ref, capsys):
        assert main(["eval", str(ref), str(ref)]) == 0
        report = json.loads(capsys.readouterr().out)
        for level in ("COn", "COnP", "COnPOff"):
            assert report[level]["f1"] == 1.0

    def test_shift_beyond_tolerance(self, ref, tmp_path, capsys):
        est = tmp_path / "est.notes.json"
        write_notes(est, read_notes(ref).shifted(0.06))
        assert main(["eval", str(ref), str(est)]) == 0
        assert json.loads(capsys.readouterr().out)["COn"]["f1"] == 0.0

    def test_looser_tolerance(self, ref, tmp_path, capsys):
        est = tmp_path / "est.notes.json"
        write_notes(est, read_notes(ref).shifted(0.06))
        assert main(["eval", str(ref), str(est), "--onset-tolerance", "0.1"]) == 0
        assert json.loads(capsys.readouterr().out)["COn"]["f1"] == 1.0

    def test_corpus(self, ref, tmp_path, capsys):
        empty = tmp_path / "empty.notes.json"
        write_notes(empty, NoteSequence())
        tsv = tmp_path / "pairs.tsv"
        tsv.write_text(f"{ref.name}\t{ref.name}\n{ref.name}\t{empty.name}\n")
        assert main(["eval", "--corpus", str(tsv)]) == 0
        assert json.loads(capsys.readouterr().out)["COn"]["f1"] == 0.5

    def test_usage(self, ref):
        assert main(["eval", str(ref)]) == 2


class TestExportMidi:
    def test_round_trip(self, tmp_path):
        notes = tmp_path / "n.notes.json"
        write_notes(notes, NoteSequence((NoteEvent(0.0, 0.5, 60), NoteEvent(0.5, 1.25, 67))))
        assert main(["export-midi", str(notes), "--bpm", "90"]) == 0
        seq, bpm = import_midi((tmp_path / "n.notes.mid").read_bytes())
        assert bpm == pytest.approx(90)
        assert [n.pitch for n in seq] == [60, 67]
        assert seq.notes[1].offset == pytest.approx(1.25, abs=1e-3)

    def test_bpm_required(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["export-midi", str(tmp_path / "x.json")])
        assert exc.value.code == 2


class TestSelftrain:
    def test_end_to_end(self, a440, tmp_path, capsys):
        gold = tmp_path / "gold.notes.json"
        write_notes(gold, NoteSequence((NoteEvent(0.0, 2.0, 69),)))
        (tmp_path / "data.json").write_text(json.dumps({"entries": [
            {"track_id": "a440", "audio_path": a440.name, "contour_path": a440.name, "gold_notes_path": gold.name},
        ]}))
        (tmp_path / "model.json").write_text(json.dumps({
            "name": "stub",
            "predict_command": stub_command("predict", "--list", "{input_list}", "--out", "{output_dir}",
                                            "--model", "{model}"),
            "train_command": stub_command("train", "--labels", "{label_manifest}", "--out", "{output_model}",
                                          "--seed", "{seed}"),
        }))
        argv = ["selftrain", "--data", str(tmp_path / "data.json"), "--model", str(tmp_path / "model.json"),
                "--mode", "TS", "--iterations", "2", "--bpm", "120",
                "--runs-root", str(tmp_path / "runs"), "--run-id", "exp"]
        assert main(argv) == 0
        lines = capsys.readouterr().out.splitlines()
        assert [ln.split()[0] for ln in lines] == ["iter0", "iter1", "iter2"]
        assert all("COnPOff_f1=1.000000" in ln for ln in lines)
        assert (tmp_path / "runs" / "exp" / "quality.json").is_file()

    def test_ns_needs_augmenter(self, tmp_path):
        argv = ["selftrain", "--data", "d.json", "--model", "m.json", "--mode", "NS", "--run-id", "x",
                "--runs-root", str(tmp_path)]
        assert main(argv) == 2
