"""Instrument definition: keys, fingers, fingering chart, key->finger maps.

The tenor saxophone is described by 23 keys (index 1 is the octave key,
2-13 left hand, 14-23 right hand), a finger inventory of 9 playing fingers
(left thumb + index/middle/ring/pinky of each hand; the right thumb only
holds the hook), and a chart of fingerings per written pitch, including
the alternates used in practice (fork F#, bis/side Bb, front F/F#).

Palm/side keys can be attributed to fingers two ways:

* ``PAF`` (palm-as-a-finger): palm keys belong to a pseudo-finger per hand.
* ``P2FM`` (palm-key-to-finger-mapping): each palm key belongs to the real
  finger whose side plays it.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

N_KEYS = 23
OCTAVE_KEY = 1

#: Written MIDI below which a note counts as a "low note" (extra embouchure
#: and air support needed): anything below written C#4.
LOW_NOTE_THRESHOLD = 61

REAL_FINGERS = ("LT", "L1", "L2", "L3", "L4", "R1", "R2", "R3", "R4")
PALM_FINGERS = ("LP", "RP")
PAF_FINGERS = REAL_FINGERS + PALM_FINGERS

LEFT_FINGERS = frozenset({"LT", "L1", "L2", "L3", "L4", "LP"})


class Mapping(Enum):
    """How palm keys are attributed to fingers."""

    PAF = "PAF"
    P2FM = "P2FM"


class ChartError(ValueError):
    """Malformed or inconsistent key table / fingering chart."""


@dataclass(frozen=True)
class Key:
    index: int
    name: str
    hand: str  # "L" or "R"
    is_palm: bool
    is_bis: bool
    finger_paf: str
    finger_p2fm: str


@dataclass(frozen=True)
class KeyTable:
    keys: tuple[Key, ...]

    def __post_init__(self):
        indices = [k.index for k in self.keys]
        for i in range(1, N_KEYS + 1):
            if i not in indices:
                raise ChartError(f"missing key index {i}")
        if len(indices) != len(set(indices)):
            raise ChartError("duplicate key index")
        if len(self.keys) != N_KEYS:
            raise ChartError(f"expected {N_KEYS} keys, got {len(self.keys)}")
        for k in self.keys:
            want = "L" if k.index <= 13 else "R"
            if k.hand != want:
                raise ChartError(
                    f"key {k.index} has hand {k.hand}, expected {want}"
                )
            if k.is_palm:
                if k.finger_paf != ("LP" if k.hand == "L" else "RP"):
                    raise ChartError(
                        f"palm key {k.index} must map to its hand's palm "
                        f"pseudo-finger under PAF"
                    )
                if k.finger_p2fm not in REAL_FINGERS:
                    raise ChartError(
                        f"palm key {k.index} must map to a real finger under P2FM"
                    )
            else:
                if k.finger_paf != k.finger_p2fm:
                    raise ChartError(
                        f"non-palm key {k.index} must map identically under "
                        f"PAF and P2FM"
                    )
                if k.finger_paf not in REAL_FINGERS:
                    raise ChartError(f"key {k.index}: unknown finger {k.finger_paf}")
            if (k.finger_paf in LEFT_FINGERS) != (k.hand == "L"):
                raise ChartError(f"key {k.index} maps to a finger of the wrong hand")
            if (k.finger_p2fm in LEFT_FINGERS) != (k.hand == "L"):
                raise ChartError(f"key {k.index} maps to a finger of the wrong hand")
        n_bis = sum(k.is_bis for k in self.keys)
        if n_bis != 1:
            raise ChartError(f"expected exactly one bis key, got {n_bis}")

    def key(self, index: int) -> Key:
        return self.keys[index - 1]

    @property
    def bis_index(self) -> int:
        return next(k.index for k in self.keys if k.is_bis)

    def finger_of(self, index: int, mapping: Mapping) -> str:
        k = self.key(index)
        return k.finger_paf if mapping is Mapping.PAF else k.finger_p2fm

    def fingers(self, mapping: Mapping) -> tuple[str, ...]:
        """Finger inventory under the given mapping, in fixed order."""
        return PAF_FINGERS if mapping is Mapping.PAF else REAL_FINGERS


@dataclass(frozen=True)
class Fingering:
    """One way of sounding a written pitch: a 23-bit key mask."""

    mask: tuple[bool, ...]
    written_midi: int
    label: str

    def __post_init__(self):
        if len(self.mask) != N_KEYS:
            raise ChartError(f"mask must have {N_KEYS} bits, got {len(self.mask)}")

    @property
    def pressed(self) -> frozenset[int]:
        """Set of pressed key indices (1-based)."""
        return frozenset(i + 1 for i, b in enumerate(self.mask) if b)

    def mask_string(self) -> str:
        return "".join("1" if b else "0" for b in self.mask)


@dataclass(frozen=True)
class Transition:
    """Ordered pair of fingerings; the unit of difficulty cost."""

    src: Fingering
    dst: Fingering

    def reverse(self) -> "Transition":
        return Transition(self.dst, self.src)


@dataclass(frozen=True)
class FingeringChart:
    fingerings: tuple[Fingering, ...]
    min_midi: int = field(init=False)
    max_midi: int = field(init=False)

    def __post_init__(self):
        if not self.fingerings:
            raise ChartError("empty fingering chart")
        midis = [f.written_midi for f in self.fingerings]
        object.__setattr__(self, "min_midi", min(midis))
        object.__setattr__(self, "max_midi", max(midis))
        seen = set()
        for f in self.fingerings:
            k = (f.mask, f.written_midi)
            if k in seen:
                raise ChartError(
                    f"duplicate (mask, midi) entry for MIDI {f.written_midi}"
                )
            seen.add(k)
        for m in range(self.min_midi, self.max_midi + 1):
            if m not in midis:
                raise ChartError(f"no fingering for in-range written MIDI {m}")

    def options_for_pitch(self, written_midi: int) -> list[Fingering]:
        """All fingerings for a written pitch, in chart (file) order."""
        if not self.min_midi <= written_midi <= self.max_midi:
            raise ChartError(
                f"written MIDI {written_midi} outside chart range "
                f"[{self.min_midi}, {self.max_midi}]"
            )
        return [f for f in self.fingerings if f.written_midi == written_midi]

    def pair_count(self) -> int:
        """Number of unordered fingering pairs (distinct fingerings)."""
        n = len(self.fingerings)
        return n * (n - 1) // 2


def _read_table(path) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ChartError(f"{path}: empty file")
    delim = "\t" if "\t" in lines[0] else ","
    reader = csv.DictReader(io.StringIO("\n".join(lines)), delimiter=delim)
    return [row for row in reader]


def load_key_table(path) -> KeyTable:
    """Load and validate a 23-key table from a tab/comma separated file."""
    keys = []
    for row in _read_table(path):
        try:
            keys.append(
                Key(
                    index=int(row["index"]),
                    name=row["name"].strip(),
                    hand=row["hand"].strip(),
                    is_palm=bool(int(row["is_palm"])),
                    is_bis=bool(int(row["is_bis"])),
                    finger_paf=row["finger_paf"].strip(),
                    finger_p2fm=row["finger_p2fm"].strip(),
                )
            )
        except (KeyError, ValueError) as e:
            raise ChartError(f"{path}: malformed key table row {row}: {e}") from e
    return KeyTable(tuple(keys))


def parse_mask(s: str) -> tuple[bool, ...]:
    s = s.strip()
    if len(s) != N_KEYS or set(s) - {"0", "1"}:
        raise ChartError(f"bad mask string {s!r}")
    return tuple(c == "1" for c in s)


def load_chart(path, key_table: KeyTable) -> FingeringChart:
    """Load and validate a fingering chart against a key table."""
    del key_table  # validated independently; kept in the signature for symmetry
    fingerings = []
    for row in _read_table(path):
        try:
            fingerings.append(
                Fingering(
                    mask=parse_mask(row["mask"]),
                    written_midi=int(row["written_midi"]),
                    label=row["label"].strip(),
                )
            )
        except (KeyError, ValueError) as e:
            raise ChartError(f"{path}: malformed chart row {row}: {e}") from e
    return FingeringChart(tuple(fingerings))


def _finger_keysets(
    f: Fingering, key_table: KeyTable, mapping: Mapping, skip_bis: bool = False
) -> dict[str, frozenset[int]]:
    out: dict[str, set[int]] = {}
    for idx in f.pressed:
        if skip_bis and key_table.key(idx).is_bis:
            continue
        out.setdefault(key_table.finger_of(idx, mapping), set()).add(idx)
    return {k: frozenset(v) for k, v in out.items()}


def moving_fingers(
    transition: Transition, key_table: KeyTable, mapping: Mapping
) -> tuple[frozenset[str], int]:
    """Fingers whose key set changes across the transition, plus the number
    of same-finger transitions (a finger sliding from one pressed key to a
    different pressed key; the bis key is exempt by design).
    """
    a = _finger_keysets(transition.src, key_table, mapping)
    b = _finger_keysets(transition.dst, key_table, mapping)
    moving = frozenset(
        fg
        for fg in set(a) | set(b)
        if a.get(fg, frozenset()) != b.get(fg, frozenset())
    )
    a_nb = _finger_keysets(transition.src, key_table, mapping, skip_bis=True)
    b_nb = _finger_keysets(transition.dst, key_table, mapping, skip_bis=True)
    same_finger = sum(
        1
        for fg in set(a_nb) & set(b_nb)
        if not (a_nb[fg] & b_nb[fg])
    )
    return moving, same_finger


def default_key_table_path() -> Path:
    return Path(resources.files("saxdiff") / "data" / "key_table.tsv")


def default_chart_path() -> Path:
    return Path(resources.files("saxdiff") / "data" / "fingering_chart.tsv")


def load_default_instrument() -> tuple[KeyTable, FingeringChart]:
    """The bundled tenor saxophone key table and fingering chart."""
    kt = load_key_table(default_key_table_path())
    return kt, load_chart(default_chart_path(), kt)
