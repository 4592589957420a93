"""Tour of the instrument model: keys, fingerings, and feature encodings.

Run: python3 demos/01_instrument_and_features.py
"""

from saxdiff import (
    Mapping,
    Transition,
    encode,
    load_default_instrument,
    moving_fingers,
    scheme_from_name,
    slot_names,
)
from saxdiff.features import SCHEME_NAMES

key_table, chart = load_default_instrument()

print("== the bundled tenor saxophone ==")
print(f"{len(key_table.keys)} keys; palm keys:",
      [k.name for k in key_table.keys if k.is_palm])
print(f"{len(chart.fingerings)} fingerings covering written MIDI "
      f"{chart.min_midi}-{chart.max_midi} "
      f"({chart.pair_count()} unordered pairs)")

# pitches with alternate fingerings are where path optimization matters
alternates = {
    m: [f.label for f in chart.options_for_pitch(m)]
    for m in range(chart.min_midi, chart.max_midi + 1)
    if len(chart.options_for_pitch(m)) > 1
}
print("pitches with alternates:", alternates)

print("\n== what moves between two fingerings ==")
bb = next(f for f in chart.fingerings if f.label == "Bb4-bis")
b = next(f for f in chart.fingerings if f.label == "B4")
t = Transition(bb, b)
for mapping in Mapping:
    moving, same = moving_fingers(t, key_table, mapping)
    print(f"Bb4(bis) -> B4 under {mapping.value}: moving={sorted(moving)}, "
          f"same-finger transitions={same} (the bis key is exempt)")

print("\n== the same transition under every feature scheme ==")
for name in SCHEME_NAMES:
    scheme = scheme_from_name(name, key_table)
    vec = encode(t, key_table, scheme)
    print(f"{name:14s} dim={len(vec):2d}  {[round(float(v), 2) for v in vec[:8]]}"
          f"{' ...' if len(vec) > 8 else ''}")

print("\nslot names for E-HB:",
      slot_names(scheme_from_name("E-HB", key_table), key_table))
