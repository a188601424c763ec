#!/usr/bin/env python3
"""Regenerates the checked-in golden interchange and WAV fixtures.

Written independently of the C++ encoders so the readers are checked against a
second producer of the same byte layouts.
"""
import json
import struct
import wave
from pathlib import Path

HERE = Path(__file__).resolve().parent


def write_repr(path, utt, layer, rows):
    frames, dim = len(rows), len(rows[0])
    header = json.dumps(
        {"utterance_id": utt, "layer": layer, "frames": frames, "dim": dim, "dtype": "f32le"},
        separators=(",", ":"),
    ).encode("utf-8")
    payload = b"".join(struct.pack("<f", v) for row in rows for v in row)
    path.write_bytes(b"ASRREPR1" + struct.pack("<I", len(header)) + header + payload)


def main():
    # reference: two orthogonal unit frames; processed: one frame equal to the first
    write_repr(HERE / "golden_ref.repr", "S0001", "decoder", [[1.0, 0.0], [0.0, 1.0]])
    write_repr(HERE / "golden_proc.repr", "S0001", "decoder", [[1.0, 0.0]])
    write_repr(HERE / "golden_2x3.repr", "utt-2x3", "decoder.5", [[0.5, -1.25, 3.0], [0.0, 2.0, -0.125]])

    beams = {
        # stored worst-first on purpose: readers must re-sort
        "golden_beam_unsorted.json": {
            "utterance_id": "S0001",
            "hypotheses": [
                {"tokens": [5, 9], "score": -2.0},
                {"tokens": [5, 8], "score": -1.0, "token_scores": [-0.25, -0.75]},
            ],
        },
        "golden_beam_uniform4.json": {
            "utterance_id": "S0002",
            "hypotheses": [{"tokens": [i + 1], "score": -3.5} for i in range(4)],
        },
        "golden_beam_single.json": {
            "utterance_id": "S0003",
            "hypotheses": [{"tokens": [], "score": -1.5}],
        },
    }
    for name, doc in beams.items():
        (HERE / name).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    # PCM16 stereo: frames (16384, -16384) and (32767, 32767) -> mono mean 0.0 and 32767/32768
    with wave.open(str(HERE / "pcm16_stereo.wav"), "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(2)
        w.setframerate(16000)
        w.writeframes(struct.pack("<4h", 16384, -16384, 32767, 32767))


if __name__ == "__main__":
    main()
