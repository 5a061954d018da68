"""Smoke test for the `repetition` extension module.

Build and install it first:

    pip install -e crates/py --no-build-isolation
    python python/smoke_test.py
"""

import json

import repetition as r


def main():
    assert r.REPETITION_TYPES == ["StR", "TrR", "SuR", "HoR", "SyR"]

    fate = r.Motif.from_pitches([67, 67, 67, 63])
    c_minor = r.Key(0, "minor")
    assert r.classify(fate, fate) == ("StR", None)
    assert r.classify(fate, r.Motif.from_pitches([65, 65, 65, 62]), c_minor) == ("TrR", "diatonic:-1")
    assert r.classify(fate, r.Motif.from_pitches([67, 67, 67, 62]), c_minor)[0] == "SuR"
    assert r.classify(fate, r.Motif.from_pitches([68, 68, 68, 67]), c_minor)[0] == "HoR"
    e = r.Motif.from_pitches([64, 62, 64, 67])
    assert r.classify(e, r.Motif.from_pitches([64, 65, 64, 60]), r.Key(0)) == ("SyR", "horizontal")
    assert r.lcs_similarity([67, 67, 67, 63], [67, 67, 67, 62]) == 0.75

    tokens = fate.tokens(120.0)
    again = r.Tokens.from_json(tokens.to_json())
    assert again.rows() == tokens.rows()
    assert tokens.motif().pitches() == [67, 67, 67, 63]

    weights = r.repetition_weights(tokens, "SuR")
    assert len(weights) == tokens.valid_len and all(len(row) == 7 for row in weights)

    bars, verdicts, midi = r.generate(tokens, ["StR", "TrR"], seed=3, t=-2)
    assert len(bars) == 3 and verdicts[0] is None
    assert verdicts[1] == ("StR", None) and verdicts[2][0] == "TrR"
    assert bars[2].motif().pitches() == [65, 65, 65, 61]
    assert midi[:4] == b"MThd"

    parsed = r.midi_bars(midi)
    assert [b.motif().pitches() for b in parsed] == [b.motif().pitches() for b in bars]

    print("ok:", json.dumps({"verdicts": verdicts, "midi_bytes": len(midi)}))


if __name__ == "__main__":
    main()
