"""Part-level difficulty: parsing, optimal fingering decoding, annotation.

A single-voice MusicXML part is parsed to a note/rest sequence with tempo,
the optimal fingering path is found by Viterbi decoding over each note's
fingering options (maximizing the summed predicted trill speeds), and each
transition is scored as required half-trill speed at the target tempo over
the predicted maximum trill speed. Note difficulty is the mean of a note's
incident transition ratios; noteheads are colored on a green-to-red ramp.
"""

from __future__ import annotations

import io
import json
import warnings
import zipfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace

import numpy as np

from .instrument import Fingering, FingeringChart, KeyTable, Transition
from .models import CostModel, predict

DEFAULT_TEMPO_BPM = 120.0

_STEP_TO_SEMITONE = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}


class PartError(ValueError):
    pass


class PolyphonyError(PartError):
    pass


@dataclass(frozen=True)
class Note:
    written_midi: int  # ignored for rests
    onset_beats: float
    duration_beats: float
    is_rest: bool = False


@dataclass(frozen=True)
class NotatedPart:
    notes: tuple[Note, ...]
    tempo_bpm: float
    source: str = ""

    def __post_init__(self):
        if self.tempo_bpm <= 0:
            raise PartError(f"tempo must be positive, got {self.tempo_bpm}")
        last = -np.inf
        for n in self.notes:
            if n.duration_beats <= 0:
                raise PartError("note durations must be positive")
            if n.onset_beats < last:
                raise PartError("note onsets must be non-decreasing")
            last = n.onset_beats

    @property
    def sounding(self) -> list[Note]:
        return [n for n in self.notes if not n.is_rest]


def _unwrap_container(data: bytes) -> bytes:
    """Extract the score document from a compressed (.mxl) container."""
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        try:
            container = ET.fromstring(zf.read("META-INF/container.xml"))
            rootfile = container.find(".//rootfile")
            if rootfile is not None and rootfile.get("full-path"):
                return zf.read(rootfile.get("full-path"))
        except KeyError:
            pass
        for name in zf.namelist():
            if name.endswith(".xml") and not name.startswith("META-INF"):
                return zf.read(name)
    raise PartError("compressed container holds no score document")


def _pitch_to_midi(pitch_el) -> int:
    step = pitch_el.findtext("step")
    octave = int(pitch_el.findtext("octave"))
    alter = float(pitch_el.findtext("alter", default="0"))
    return int(12 * (octave + 1) + _STEP_TO_SEMITONE[step] + alter)


def _parse_document(data: bytes):
    """Parse to (notes, tempo, elem_map).

    elem_map pairs every pitched <note> element with the index of the
    sounding note it contributes to (tied elements share an index).
    """
    if data[:2] == b"PK":
        data = _unwrap_container(data)
    try:
        root = ET.fromstring(data)
    except ET.ParseError as e:
        raise PartError(f"not a well-formed MusicXML document: {e}") from e
    if root.tag != "score-partwise":
        raise PartError(f"unsupported document root <{root.tag}>")
    parts = root.findall("part")
    if len(parts) != 1:
        raise PartError(f"expected exactly one part, found {len(parts)}")

    notes: list[Note] = []
    elem_map: list[tuple[ET.Element, int]] = []
    divisions = None
    tempo = None
    position = 0.0  # in beats
    voices_seen: set[str] = set()
    open_tie_index: int | None = None  # index into notes of an unclosed tie

    for measure in parts[0]:
        measure_no = measure.get("number", "?")
        for el in measure:
            if el.tag == "attributes":
                d = el.findtext("divisions")
                if d is not None:
                    divisions = float(d)
            elif el.tag == "direction":
                sound = el.find("sound")
                if sound is not None and sound.get("tempo") and tempo is None:
                    tempo = float(sound.get("tempo"))
            elif el.tag == "sound":
                if el.get("tempo") and tempo is None:
                    tempo = float(el.get("tempo"))
            elif el.tag == "backup":
                raise PolyphonyError(
                    f"measure {measure_no}: polyphony unsupported (backup element)"
                )
            elif el.tag == "forward":
                if divisions is None:
                    raise PartError(f"measure {measure_no}: no divisions declared")
                position += float(el.findtext("duration")) / divisions
            elif el.tag == "note":
                if el.find("chord") is not None:
                    raise PolyphonyError(
                        f"measure {measure_no}: polyphony unsupported (chord)"
                    )
                voice = el.findtext("voice")
                if voice is not None:
                    voices_seen.add(voice)
                    if len(voices_seen) > 1:
                        raise PolyphonyError(
                            f"measure {measure_no}: polyphony unsupported "
                            f"(multiple voices)"
                        )
                if el.find("grace") is not None:
                    warnings.warn(f"measure {measure_no}: grace note skipped")
                    continue
                if divisions is None:
                    raise PartError(f"measure {measure_no}: no divisions declared")
                beats = float(el.findtext("duration")) / divisions
                tie_types = {t.get("type") for t in el.findall("tie")}
                if el.find("rest") is not None:
                    notes.append(Note(0, position, beats, is_rest=True))
                    open_tie_index = None
                else:
                    midi = _pitch_to_midi(el.find("pitch"))
                    if (
                        "stop" in tie_types
                        and open_tie_index is not None
                        and notes[open_tie_index].written_midi == midi
                    ):
                        merged = notes[open_tie_index]
                        notes[open_tie_index] = replace(
                            merged, duration_beats=merged.duration_beats + beats
                        )
                        elem_map.append((el, open_tie_index))
                    else:
                        notes.append(Note(midi, position, beats))
                        elem_map.append((el, len(notes) - 1))
                    open_tie_index = (
                        elem_map[-1][1] if "start" in tie_types else None
                    )
                position += beats
    if tempo is None:
        warnings.warn(f"no tempo marking found; defaulting to {DEFAULT_TEMPO_BPM} BPM")
        tempo = DEFAULT_TEMPO_BPM
    return notes, tempo, elem_map


def parse_part(
    musicxml_bytes: bytes, chart: FingeringChart | None = None, source: str = ""
) -> NotatedPart:
    """Parse a single-part, single-voice MusicXML document (raw or .mxl)."""
    notes, tempo, _ = _parse_document(musicxml_bytes)
    part = NotatedPart(tuple(notes), tempo, source=source)
    if chart is not None:
        for n in part.sounding:
            if not chart.min_midi <= n.written_midi <= chart.max_midi:
                raise PartError(
                    f"written MIDI {n.written_midi} at beat {n.onset_beats} is "
                    f"outside the chart range [{chart.min_midi}, {chart.max_midi}]"
                )
    return part


def decode_fingerings(
    part: NotatedPart,
    chart: FingeringChart,
    model: CostModel,
    key_table: KeyTable,
    objective: str = "sum",
) -> list[Fingering]:
    """Optimal fingering per sounding note via Viterbi decoding.

    The default objective maximizes the sum of predicted trill speeds over
    consecutive sounding notes (rests do not break the chain); the
    "bottleneck" objective maximizes the slowest edge instead. Ties break
    toward the lower chart index at every backtrack step.
    """
    if objective not in ("sum", "bottleneck"):
        raise PartError(f"unknown path objective {objective!r}")
    sounding = part.sounding
    if not sounding:
        return []
    options = [chart.options_for_pitch(n.written_midi) for n in sounding]
    if len(sounding) == 1:
        return [options[0][0]]
    # forward pass: score[j] = best objective of any path ending in state j
    score = np.zeros(len(options[0]))
    if objective == "bottleneck":
        score[:] = np.inf
    back: list[np.ndarray] = []
    for i in range(1, len(options)):
        edge = np.array(
            [
                [
                    predict(model, Transition(a, b), key_table)
                    for a in options[i - 1]
                ]
                for b in options[i]
            ]
        )  # (n_curr, n_prev)
        if objective == "sum":
            cand = score[None, :] + edge
        else:
            cand = np.minimum(score[None, :], edge)
        prev = np.argmax(cand, axis=1)  # first max = lowest chart index
        back.append(prev)
        score = cand[np.arange(len(options[i])), prev]
    # backtrack, lowest index on ties
    path_idx = [int(np.argmax(score))]
    for prev in reversed(back):
        path_idx.append(int(prev[path_idx[-1]]))
    path_idx.reverse()
    return [options[i][j] for i, j in enumerate(path_idx)]


def transition_requirements(part: NotatedPart) -> list[float]:
    """Required half-trill speed (trills/s) for each adjacent note pair.

    The available time is the onset-to-onset gap (rests included); a
    complete trill is two transitions, so one transition every d seconds
    requires a trill speed of 1 / (2 d).
    """
    sounding = part.sounding
    out = []
    for a, b in zip(sounding, sounding[1:]):
        d = (b.onset_beats - a.onset_beats) * 60.0 / part.tempo_bpm
        out.append(1.0 / (2.0 * d))
    return out


@dataclass(frozen=True)
class TransitionDifficulty:
    required_speed: float
    predicted_max: float

    @property
    def ratio(self) -> float:
        return self.required_speed / self.predicted_max


@dataclass(frozen=True)
class DifficultyReport:
    path: tuple[Fingering, ...]
    transitions: tuple[TransitionDifficulty, ...]
    note_difficulties: tuple[float, ...]
    tempo_bpm: float

    @property
    def summary(self) -> dict:
        ratios = [t.ratio for t in self.transitions]
        return {
            "mean_ratio": float(np.mean(ratios)) if ratios else 0.0,
            "max_ratio": float(np.max(ratios)) if ratios else 0.0,
            "fraction_over_1": (
                float(np.mean([r > 1.0 for r in ratios])) if ratios else 0.0
            ),
        }


def annotate(
    part: NotatedPart,
    chart: FingeringChart,
    model: CostModel,
    key_table: KeyTable,
    objective: str = "sum",
) -> DifficultyReport:
    """Full difficulty pass: decode fingerings, score every transition,
    average incident ratios per note."""
    path = decode_fingerings(part, chart, model, key_table, objective)
    required = transition_requirements(part)
    transitions = tuple(
        TransitionDifficulty(
            required_speed=req,
            predicted_max=predict(model, Transition(a, b), key_table),
        )
        for req, a, b in zip(required, path, path[1:])
    )
    note_diffs = []
    for i in range(len(path)):
        incident = [
            transitions[j].ratio for j in (i - 1, i) if 0 <= j < len(transitions)
        ]
        note_diffs.append(float(np.mean(incident)) if incident else 0.0)
    return DifficultyReport(
        path=tuple(path),
        transitions=transitions,
        note_difficulties=tuple(note_diffs),
        tempo_bpm=part.tempo_bpm,
    )


def ramp_color(ratio: float) -> str:
    """Green (#00A000) at ratio 0 to red (#FF0000) at ratio >= 1, linear RGB."""
    t = min(max(ratio, 0.0), 1.0)
    r = round(255 * t)
    g = round(160 * (1.0 - t))
    return f"#{r:02X}{g:02X}00"


def render_annotations(
    report: DifficultyReport, musicxml_bytes: bytes
) -> tuple[bytes, dict]:
    """Color noteheads by difficulty and build the JSON report.

    Returns (annotated MusicXML bytes, report dict). Tied note elements
    receive the color of the note they merge into; rests are untouched.
    """
    if musicxml_bytes[:2] == b"PK":
        musicxml_bytes = _unwrap_container(musicxml_bytes)
    root = ET.fromstring(musicxml_bytes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        notes, _, elem_map = _parse_document(musicxml_bytes)
    # elem_map indexes the full note list (rests included); report indexes
    # sounding notes only
    sounding_index = {}
    for i, n in enumerate(notes):
        if not n.is_rest:
            sounding_index[i] = len(sounding_index)
    elem_map = [(el, sounding_index[i]) for el, i in elem_map]
    n_notes = len({i for _, i in elem_map})
    if n_notes != len(report.path):
        raise PartError(
            f"report has {len(report.path)} notes but the document has {n_notes}"
        )
    # _parse_document re-parses its own tree; recover the matching elements
    # in this tree by document order of pitched, non-grace note elements
    doc_notes = [
        el
        for el in root.iter("note")
        if el.find("rest") is None and el.find("grace") is None
    ]
    assert len(doc_notes) == len(elem_map)
    for el, (_, idx) in zip(doc_notes, elem_map):
        el.set("color", ramp_color(report.note_difficulties[idx]))
    out = ET.tostring(root, encoding="utf-8", xml_declaration=True)

    notes_json = []
    for i, f in enumerate(report.path):
        incident = [
            report.transitions[j].ratio
            for j in (i - 1, i)
            if 0 <= j < len(report.transitions)
        ]
        notes_json.append(
            {
                "index": i,
                "written_midi": f.written_midi,
                "fingering": f.label,
                "difficulty": report.note_difficulties[i],
                "incident_ratios": incident,
            }
        )
    doc = {
        "tempo_bpm": report.tempo_bpm,
        "summary": report.summary,
        "notes": notes_json,
        "transitions": [
            {
                "required_speed": t.required_speed,
                "predicted_max": t.predicted_max,
                "ratio": t.ratio,
            }
            for t in report.transitions
        ],
    }
    return out, doc


def summary_text(report: DifficultyReport) -> str:
    s = report.summary
    lines = [
        f"notes: {len(report.path)}  transitions: {len(report.transitions)}  "
        f"tempo: {report.tempo_bpm:g} BPM",
        f"mean ratio: {s['mean_ratio']:.3f}  max ratio: {s['max_ratio']:.3f}  "
        f"over 1.0: {s['fraction_over_1']:.1%}",
    ]
    return "\n".join(lines)
