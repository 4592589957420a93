"""Trill speed extraction from per-frame f0 tracks.

A recorded trill arrives as a pitch track (time, f0, confidence). The two
trilled notes are recovered by 1-D k-means (k=2) over the f0 values, with
one discard-and-rerun pass when a spurious small cluster (e.g. octave
over/underblowing) appears. Trill speed is the number of complete trills
(note1 -> note2 -> note1) per second, measured over the first half, middle
two quarters, and second half of the track; the fastest window wins.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

DEFAULT_MIN_CONFIDENCE = 0.3
MIN_FRAMES = 20
SMALL_CLUSTER_RATIO = 0.2
#: Tenor saxophone sounds this many semitones below written pitch.
TENOR_TRANSPOSITION = 14


class TrillExtractionError(ValueError):
    pass


class Segment(Enum):
    FIRST_HALF = "first_half"
    MIDDLE_HALF = "middle_half"
    SECOND_HALF = "second_half"


@dataclass(frozen=True)
class F0Track:
    times: np.ndarray
    f0: np.ndarray
    confidence: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        if not (len(self.times) == len(self.f0) == len(self.confidence)):
            raise TrillExtractionError("frame arrays must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise TrillExtractionError("frame times must be strictly increasing")

    @classmethod
    def from_csv(cls, path) -> "F0Track":
        """Read a `time,frequency,confidence` CSV (header row required)."""
        times, f0, conf = [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                times.append(float(row["time"]))
                f0.append(float(row["frequency"]))
                conf.append(float(row["confidence"]))
        return cls(np.array(times), np.array(f0), np.array(conf), source_id=str(path))

    def filtered(self, min_confidence: float = DEFAULT_MIN_CONFIDENCE) -> "F0Track":
        """Frames with usable pitch: positive f0 and sufficient confidence."""
        keep = (self.f0 > 0) & (self.confidence >= min_confidence)
        return replace(
            self,
            times=self.times[keep],
            f0=self.f0[keep],
            confidence=self.confidence[keep],
        )


@dataclass(frozen=True)
class TrillResult:
    midi_low: int
    midi_high: int
    trill_speed: float
    segment: Segment
    complete_trills_per_segment: tuple[int, int, int]
    cluster_rerun: bool = False
    interval_mismatch: bool = False


def hz_to_midi(f0: float) -> int:
    """Equal-tempered MIDI number at A4 = 440 Hz."""
    return round(69 + 12 * math.log2(f0 / 440.0))


def kmeans_1d_two(values: np.ndarray, max_iter: int = 100) -> np.ndarray:
    """Deterministic 1-D k-means with k=2.

    Centers start at the extreme values, so outlier bands (e.g. octave
    strays) reliably separate into their own cluster; iteration stops when
    assignments stabilize. Returns assignments with cluster 0 the lower
    center.
    """
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return np.zeros(len(values), dtype=int)
    centers = np.array([lo, hi], dtype=float)
    assign = None
    for _ in range(max_iter):
        new = (np.abs(values - centers[0]) > np.abs(values - centers[1])).astype(int)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for c in (0, 1):
            sel = values[assign == c]
            if len(sel):
                centers[c] = sel.mean()
    if centers[0] > centers[1]:
        assign = 1 - assign
    return assign


def cluster_pitches(
    track: F0Track, min_confidence: float = DEFAULT_MIN_CONFIDENCE
) -> tuple[F0Track, np.ndarray, tuple[int, int], bool]:
    """Identify the two trilled notes from the track's f0 distribution.

    Runs k-means (k=2) over the retained frames' f0 values. If the smaller
    cluster holds fewer than 20% of the larger's frames (typically octave
    over/underblowing detected as its own cluster), its frames are
    discarded and k-means reruns once. Cluster MIDI comes from the median
    f0 of each cluster.

    Returns (retained track, assignments, (midi_low, midi_high), rerun_flag).
    """
    kept = track.filtered(min_confidence)
    if len(kept.times) < MIN_FRAMES:
        raise TrillExtractionError(
            f"{track.source_id or 'track'}: only {len(kept.times)} usable frames "
            f"(need >= {MIN_FRAMES})"
        )
    assign = kmeans_1d_two(kept.f0)
    rerun = False
    sizes = np.bincount(assign, minlength=2)
    if sizes.min() < SMALL_CLUSTER_RATIO * sizes.max():
        keep = assign == int(np.argmax(sizes))
        kept = replace(
            kept,
            times=kept.times[keep],
            f0=kept.f0[keep],
            confidence=kept.confidence[keep],
        )
        if len(kept.times) < MIN_FRAMES:
            raise TrillExtractionError(
                f"{track.source_id or 'track'}: too few frames after discarding "
                f"spurious cluster"
            )
        assign = kmeans_1d_two(kept.f0)
        rerun = True
    midis = []
    for c in (0, 1):
        sel = kept.f0[assign == c]
        if not len(sel):
            raise TrillExtractionError("degenerate trill: a cluster is empty")
        midis.append(hz_to_midi(float(np.median(sel))))
    if midis[0] == midis[1]:
        raise TrillExtractionError(
            f"degenerate trill: both clusters resolve to MIDI {midis[0]}"
        )
    return kept, assign, (min(midis), max(midis)), rerun


def _visits(assignments: np.ndarray) -> list[tuple[int, int]]:
    """Debounced note visits as (cluster, n_frames) runs.

    A visit needs >= 2 consecutive frames; single-frame runs are absorbed
    into the surrounding visit so that isolated misassigned frames do not
    inflate the trill count.
    """
    runs: list[list[int]] = []
    for a in assignments:
        if runs and runs[-1][0] == a:
            runs[-1][1] += 1
        else:
            runs.append([int(a), 1])
    merged: list[list[int]] = []
    pending = 0  # leading blip frames waiting for the first real visit
    for c, n in runs:
        if n < 2:
            if merged:
                merged[-1][1] += n
            else:
                pending += n
        elif merged and merged[-1][0] == c:
            merged[-1][1] += n
        else:
            merged.append([c, n + pending])
            pending = 0
    return [(c, n) for c, n in merged]


def count_complete_trills(
    assignments: np.ndarray, times: np.ndarray, window: tuple[float, float]
) -> int:
    """Complete note1 -> note2 -> note1 cycles inside a time window.

    Note 1 is the cluster of the first visit in the window.
    """
    t0, t1 = window
    sel = (times >= t0) & (times <= t1)
    if not np.any(sel):
        return 0
    visits = _visits(assignments[sel])
    return max(0, (len(visits) - 1) // 2)


def extract_trill_speed(
    track: F0Track, min_confidence: float = DEFAULT_MIN_CONFIDENCE
) -> TrillResult:
    """Maximum sustained trill speed over three overlapping windows.

    The retained track's time span is divided into its first half, middle
    two quarters, and second half; each window's speed is complete trills
    per second of window duration, and the fastest window is reported.
    """
    kept, assign, (lo, hi), rerun = cluster_pitches(track, min_confidence)
    t0, t1 = float(kept.times[0]), float(kept.times[-1])
    span = t1 - t0
    if span <= 0:
        raise TrillExtractionError("track has zero duration")
    windows = [
        (Segment.FIRST_HALF, (t0, t0 + span / 2)),
        (Segment.MIDDLE_HALF, (t0 + span / 4, t0 + 3 * span / 4)),
        (Segment.SECOND_HALF, (t0 + span / 2, t1)),
    ]
    counts = []
    speeds = []
    eps = 1e-9 * max(abs(t0), abs(t1), 1.0)  # frame-on-boundary robustness
    for _, (a, b) in windows:
        n = count_complete_trills(assign, kept.times, (a - eps, b + eps))
        counts.append(n)
        speeds.append(n / (b - a))
    best = int(np.argmax(speeds))
    return TrillResult(
        midi_low=lo,
        midi_high=hi,
        trill_speed=float(speeds[best]),
        segment=windows[best][0],
        complete_trills_per_segment=tuple(counts),
        cluster_rerun=rerun,
    )


def verify_expected(
    result: TrillResult,
    expected_written_pair: tuple[int, int],
    transposition_semitones: int = TENOR_TRANSPOSITION,
) -> bool:
    """True when the detected interval mismatches the expected one.

    Comparison is by absolute interval, which is invariant under the
    instrument transposition; mismatches are only flagged for manual
    review, never auto-corrected.
    """
    del transposition_semitones  # intervals are transposition-invariant
    expected = abs(expected_written_pair[0] - expected_written_pair[1])
    return abs(result.midi_high - result.midi_low) != expected


def flag_mismatch(
    result: TrillResult,
    expected_written_pair: tuple[int, int],
    transposition_semitones: int = TENOR_TRANSPOSITION,
) -> TrillResult:
    """Result with its interval_mismatch flag filled in."""
    return replace(
        result,
        interval_mismatch=verify_expected(
            result, expected_written_pair, transposition_semitones
        ),
    )
