import csv

import numpy as np
import pytest

from saxdiff.features import encode, scheme_from_name, slot_names
from saxdiff.instrument import Transition, load_default_instrument
from saxdiff.models import TrillObservation
from saxdiff.trills import F0Track


@pytest.fixture(scope="session")
def instrument():
    return load_default_instrument()


@pytest.fixture(scope="session")
def key_table(instrument):
    return instrument[0]


@pytest.fixture(scope="session")
def chart(instrument):
    return instrument[1]


def fingering_for(chart, label):
    return next(f for f in chart.fingerings if f.label == label)


def random_transitions(chart, n, seed=0):
    rng = np.random.default_rng(seed)
    fs = chart.fingerings
    idx = rng.integers(0, len(fs), size=(n, 2))
    return [Transition(fs[i], fs[j]) for i, j in idx]


def synthetic_observations(
    key_table, chart, n, seed=0, scheme_name="E-HB(NoM&EW)", noise=0.2, intercept=4.0
):
    """Observations whose speed is linear in the scheme's features + noise."""
    rng = np.random.default_rng(seed)
    scheme = scheme_from_name(scheme_name, key_table)
    d = len(slot_names(scheme, key_table))
    w = rng.uniform(-0.35, 0.05, d)
    obs = []
    for t in random_transitions(chart, n, seed=seed + 1):
        speed = float(w @ encode(t, key_table, scheme) + intercept)
        speed += float(rng.normal(0, noise)) if noise else 0.0
        obs.append(TrillObservation(t, max(speed, 0.6), "p1", "s0"))
    return obs, w


def square_track(rate, duration, fps=100.0, f_lo=440.0, f_hi=493.88, t0=0.0):
    """Square-wave alternation at `rate` complete trills per second."""
    times = np.arange(0.0, duration, 1.0 / fps)
    phase = np.floor(times * 2 * rate).astype(int) % 2
    f0 = np.where(phase == 0, f_lo, f_hi)
    return F0Track(times + t0, f0, np.ones_like(times), source_id="synthetic")


def simple_musicxml(notes, tempo=120, divisions=2, beats_per_measure=4):
    """Minimal single-part MusicXML from (midi_or_None, duration_divisions)
    tuples; None means a rest. Durations are in `divisions` units
    (divisions per quarter note)."""
    step_names = {
        0: ("C", 0), 1: ("C", 1), 2: ("D", 0), 3: ("E", -1), 4: ("E", 0),
        5: ("F", 0), 6: ("F", 1), 7: ("G", 0), 8: ("A", -1), 9: ("A", 0),
        10: ("B", -1), 11: ("B", 0),
    }
    measure_len = beats_per_measure * divisions
    body = []
    pos = 0
    measure = 1
    body.append(f'<measure number="{measure}">')
    body.append(
        f"<attributes><divisions>{divisions}</divisions></attributes>"
        f'<direction><sound tempo="{tempo}"/></direction>'
    )
    for midi, dur in notes:
        if pos >= measure_len:
            body.append("</measure>")
            measure += 1
            pos -= measure_len
            body.append(f'<measure number="{measure}">')
        if midi is None:
            body.append(f"<note><rest/><duration>{dur}</duration></note>")
        else:
            step, alter = step_names[midi % 12]
            octave = midi // 12 - 1
            alter_el = f"<alter>{alter}</alter>" if alter else ""
            body.append(
                f"<note><pitch><step>{step}</step>{alter_el}"
                f"<octave>{octave}</octave></pitch>"
                f"<duration>{dur}</duration></note>"
            )
        pos += dur
    body.append("</measure>")
    return (
        '<?xml version="1.0" encoding="UTF-8"?>'
        '<score-partwise version="3.1">'
        '<part-list><score-part id="P1"><part-name>Sax</part-name>'
        "</score-part></part-list>"
        '<part id="P1">' + "".join(body) + "</part></score-partwise>"
    ).encode()


def write_track_csv(track, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "frequency", "confidence"])
        for t, f, c in zip(track.times, track.f0, track.confidence):
            w.writerow([repr(float(t)), repr(float(f)), repr(float(c))])
