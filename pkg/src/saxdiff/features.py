"""Numeric encodings of fingering transitions.

Five schemes are supported, with MIDI and expert-weight toggles:

* ``R``        raw 46-bit concatenation of the two key masks
* ``F(PAF)``   per-finger movement flags, palm-as-a-finger inventory
* ``F(P2FM)``  per-finger movement flags, palm-to-finger inventory
* ``E-HB``     expert features + per-hand change counts
* ``E-FB``     expert features + per-finger change flags

Expert schemes accept ``NoM`` (drop MIDI slots) and ``NoEW`` (unit
weights) modifiers, giving the 11 named configurations
R, F(PAF), F(P2FM), E-HB, E-HB(NoM), E-HB(NoEW), E-HB(NoM&EW),
E-FB, E-FB(NoM), E-FB(NoEW), E-FB(NoM&EW).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .instrument import (
    LOW_NOTE_THRESHOLD,
    N_KEYS,
    OCTAVE_KEY,
    KeyTable,
    Mapping,
    Transition,
    moving_fingers,
)


class SchemeKind(Enum):
    RAW = "raw"
    FINGER = "finger"
    EXPERT_HB = "expert_hb"
    EXPERT_FB = "expert_fb"


class SchemeError(ValueError):
    """Unknown scheme name or inconsistent scheme configuration."""


#: The 11 configurations evaluated in the difficulty experiments.
SCHEME_NAMES = (
    "R",
    "F(PAF)",
    "F(P2FM)",
    "E-HB",
    "E-HB(NoM)",
    "E-HB(NoEW)",
    "E-HB(NoM&EW)",
    "E-FB",
    "E-FB(NoM)",
    "E-FB(NoEW)",
    "E-FB(NoM&EW)",
)


@dataclass(frozen=True)
class FeatureScheme:
    kind: SchemeKind
    mapping: Mapping | None = None  # FINGER only
    include_midi: bool = False  # expert kinds only
    expert_weights: tuple[float, ...] | None = None  # expert kinds only
    name: str = ""

    def __post_init__(self):
        if self.kind is SchemeKind.FINGER and self.mapping is None:
            raise SchemeError("finger scheme needs a palm mapping")
        if self.kind in (SchemeKind.RAW, SchemeKind.FINGER):
            if self.include_midi or self.expert_weights is not None:
                raise SchemeError(
                    f"{self.kind.value} scheme takes no MIDI/weight toggles"
                )


def expert_slot_names(kind: SchemeKind, include_midi: bool, key_table: KeyTable) -> list[str]:
    names = []
    if include_midi:
        names += ["midi_from", "midi_to"]
    names += [
        "same_finger_count",
        "palm_left",
        "palm_right",
        "octave_change",
        "low_note",
    ]
    if kind is SchemeKind.EXPERT_HB:
        names += ["left_hand_changes", "right_hand_changes"]
    else:
        names += [f"finger_{fg}" for fg in key_table.fingers(Mapping.P2FM)]
    return names


def slot_names(scheme: FeatureScheme, key_table: KeyTable) -> list[str]:
    """Stable, documented slot order for a scheme configuration."""
    if scheme.kind is SchemeKind.RAW:
        return [f"from_k{i:02d}" for i in range(1, N_KEYS + 1)] + [
            f"to_k{i:02d}" for i in range(1, N_KEYS + 1)
        ]
    if scheme.kind is SchemeKind.FINGER:
        return [f"move_{fg}" for fg in key_table.fingers(scheme.mapping)] + [
            "same_finger_any"
        ]
    return expert_slot_names(scheme.kind, scheme.include_midi, key_table)


def encode_raw(transition: Transition) -> np.ndarray:
    """Concatenated 23-bit key masks of both fingerings (46 binary slots)."""
    return np.array(
        [float(b) for b in transition.src.mask]
        + [float(b) for b in transition.dst.mask]
    )


def encode_finger(
    transition: Transition, key_table: KeyTable, mapping: Mapping
) -> np.ndarray:
    """Per-finger movement flags plus a same-finger-transition presence flag."""
    moving, same_finger = moving_fingers(transition, key_table, mapping)
    vals = [float(fg in moving) for fg in key_table.fingers(mapping)]
    vals.append(float(same_finger > 0))
    return np.array(vals)


def _palm_change_flags(transition: Transition, key_table: KeyTable) -> tuple[float, float]:
    left = right = 0.0
    changed = transition.src.pressed ^ transition.dst.pressed
    for idx in changed:
        k = key_table.key(idx)
        if k.is_palm:
            if k.hand == "L":
                left = 1.0
            else:
                right = 1.0
    return left, right


def encode_expert(
    transition: Transition, key_table: KeyTable, scheme: FeatureScheme
) -> np.ndarray:
    """Expert features: MIDI pair (optional), same-finger count, palm
    transitions per hand, octave key change, low-note presence, then either
    per-hand change counts (E-HB) or per-finger change flags (E-FB).
    Expert weights, when configured, scale each slot.
    """
    if scheme.kind not in (SchemeKind.EXPERT_HB, SchemeKind.EXPERT_FB):
        raise SchemeError(f"not an expert scheme: {scheme.kind}")
    vals: list[float] = []
    if scheme.include_midi:
        vals += [float(transition.src.written_midi), float(transition.dst.written_midi)]
    moving, same_finger = moving_fingers(transition, key_table, Mapping.P2FM)
    vals.append(float(same_finger))
    palm_l, palm_r = _palm_change_flags(transition, key_table)
    vals += [palm_l, palm_r]
    octave_changed = (
        transition.src.mask[OCTAVE_KEY - 1] != transition.dst.mask[OCTAVE_KEY - 1]
    )
    vals.append(float(octave_changed))
    low = (
        transition.src.written_midi < LOW_NOTE_THRESHOLD
        or transition.dst.written_midi < LOW_NOTE_THRESHOLD
    )
    vals.append(float(low))
    if scheme.kind is SchemeKind.EXPERT_HB:
        left = sum(1 for fg in moving if fg.startswith("L"))
        right = sum(1 for fg in moving if fg.startswith("R"))
        vals += [float(left), float(right)]
    else:
        vals += [float(fg in moving) for fg in key_table.fingers(Mapping.P2FM)]
    out = np.array(vals)
    if scheme.expert_weights is not None:
        w = np.asarray(scheme.expert_weights)
        if w.shape != out.shape:
            raise SchemeError(
                f"expert weight table has {w.size} entries, scheme has "
                f"{out.size} slots"
            )
        out = out * w
    return out


def encode(transition: Transition, key_table: KeyTable, scheme: FeatureScheme) -> np.ndarray:
    """Encode a transition under any scheme."""
    if scheme.kind is SchemeKind.RAW:
        return encode_raw(transition)
    if scheme.kind is SchemeKind.FINGER:
        return encode_finger(transition, key_table, scheme.mapping)
    return encode_expert(transition, key_table, scheme)


def default_weights_path() -> Path:
    return Path(resources.files("saxdiff") / "data" / "expert_weights.tsv")


def load_weight_table(path) -> dict[str, float]:
    """Load a slot_name -> weight table (tab or comma separated)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [
        ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")
    ]
    delim = "\t" if "\t" in lines[0] else ","
    reader = csv.DictReader(lines, delimiter=delim)
    out = {}
    for row in reader:
        w = float(row["weight"])
        if w <= 0:
            raise SchemeError(f"non-positive expert weight for {row['slot_name']}")
        out[row["slot_name"].strip()] = w
    return out


def _weights_for(
    kind: SchemeKind, include_midi: bool, key_table: KeyTable, table: dict[str, float]
) -> tuple[float, ...]:
    names = expert_slot_names(kind, include_midi, key_table)
    missing = [n for n in names if n not in table]
    if missing:
        raise SchemeError(f"expert weight table missing slots: {missing}")
    return tuple(table[n] for n in names)


def scheme_from_name(
    name: str, key_table: KeyTable, weight_table: dict[str, float] | None = None
) -> FeatureScheme:
    """Build a fully configured scheme from its experiment-table label."""
    if name == "R":
        return FeatureScheme(SchemeKind.RAW, name=name)
    if name == "F(PAF)":
        return FeatureScheme(SchemeKind.FINGER, mapping=Mapping.PAF, name=name)
    if name == "F(P2FM)":
        return FeatureScheme(SchemeKind.FINGER, mapping=Mapping.P2FM, name=name)

    base, _, mods = name.partition("(")
    kind = {"E-HB": SchemeKind.EXPERT_HB, "E-FB": SchemeKind.EXPERT_FB}.get(base)
    if kind is None or name not in SCHEME_NAMES:
        raise SchemeError(f"unknown scheme name {name!r}")
    mods = mods.rstrip(")")
    # "NoM&EW" disables both MIDI and expert weights
    disabled = set(mods[2:].split("&")) if mods.startswith("No") else set()
    include_midi = "M" not in disabled
    if "EW" in disabled:
        weights = None  # unit weights: identical to no weighting
    else:
        table = weight_table
        if table is None:
            table = load_weight_table(default_weights_path())
        weights = _weights_for(kind, include_midi, key_table, table)
    return FeatureScheme(
        kind, include_midi=include_midi, expert_weights=weights, name=name
    )


def encode_dataset(
    transitions, key_table: KeyTable, scheme: FeatureScheme
) -> np.ndarray:
    """Feature matrix for a sequence of transitions (rows in input order)."""
    return np.array([encode(t, key_table, scheme) for t in transitions])
