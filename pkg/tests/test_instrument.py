import pytest

from saxdiff.instrument import (
    ChartError,
    Mapping,
    Transition,
    default_key_table_path,
    load_chart,
    load_key_table,
    moving_fingers,
)

from conftest import fingering_for, random_transitions


def test_default_key_table(key_table):
    assert len(key_table.keys) == 23
    first = key_table.key(1)
    assert first.name == "octave"
    assert first.hand == "L"
    assert all(key_table.key(i).hand == "L" for i in range(1, 14))
    assert all(key_table.key(i).hand == "R" for i in range(14, 24))
    assert sum(k.is_bis for k in key_table.keys) == 1


def test_key_table_missing_index(tmp_path):
    text = default_key_table_path().read_text()
    lines = [ln for ln in text.splitlines() if not ln.startswith("17\t")]
    p = tmp_path / "kt.tsv"
    p.write_text("\n".join(lines))
    with pytest.raises(ChartError, match="missing key index"):
        load_key_table(p)


def test_key_table_duplicate_bis(tmp_path):
    text = default_key_table_path().read_text()
    text = text.replace(
        "2\tfront_f\tL\t0\t0\tL1\tL1", "2\tfront_f\tL\t0\t1\tL1\tL1"
    )
    p = tmp_path / "kt.tsv"
    p.write_text(text)
    with pytest.raises(ChartError, match="bis"):
        load_key_table(p)


def test_chart_covers_range(chart):
    for midi in range(chart.min_midi, chart.max_midi + 1):
        assert len(chart.options_for_pitch(midi)) >= 1


def test_chart_pair_count(chart):
    assert chart.pair_count() == 741


def test_empty_chart_file(tmp_path, key_table):
    p = tmp_path / "chart.tsv"
    p.write_text("")
    with pytest.raises(ChartError):
        load_chart(p, key_table)


def test_fsharp5_has_alternate(chart):
    assert len(chart.options_for_pitch(78)) >= 2


def test_options_out_of_range(chart):
    with pytest.raises(ChartError, match=str(chart.max_midi + 1)):
        chart.options_for_pitch(chart.max_midi + 1)


def test_identity_transition_nothing_moves(key_table, chart):
    for f in chart.fingerings:
        for mapping in Mapping:
            moving, same = moving_fingers(Transition(f, f), key_table, mapping)
            assert moving == frozenset()
            assert same == 0


def test_octave_key_transition_is_left_thumb(key_table, chart):
    t = Transition(fingering_for(chart, "D4"), fingering_for(chart, "D5"))
    for mapping in Mapping:
        moving, same = moving_fingers(t, key_table, mapping)
        assert moving == frozenset({"LT"})
        assert same == 0


def test_pinky_slide_counts_as_same_finger(key_table, chart):
    # B3 holds low_b with the left pinky, C#4 holds low_csharp with it
    t = Transition(fingering_for(chart, "B3"), fingering_for(chart, "C#4"))
    _, same = moving_fingers(t, key_table, Mapping.P2FM)
    assert same == 1


def test_bis_key_excluded_from_same_finger(key_table, chart):
    # bis Bb vs B4: the index keeps b_main pressed either way
    t = Transition(fingering_for(chart, "Bb4-bis"), fingering_for(chart, "B4"))
    moving, same = moving_fingers(t, key_table, Mapping.P2FM)
    assert "L1" in moving
    assert same == 0


def test_movement_symmetric_under_reversal(key_table, chart):
    for t in random_transitions(chart, 300, seed=11):
        for mapping in Mapping:
            fwd = moving_fingers(t, key_table, mapping)
            rev = moving_fingers(t.reverse(), key_table, mapping)
            assert fwd == rev


def test_paf_palm_keys_never_on_real_fingers(key_table, chart):
    palms = {k.index for k in key_table.keys if k.is_palm}
    for t in random_transitions(chart, 200, seed=12):
        moving, _ = moving_fingers(t, key_table, Mapping.PAF)
        changed = t.src.pressed ^ t.dst.pressed
        if changed and changed <= palms:
            assert moving <= {"LP", "RP"}


def test_p2fm_every_key_maps_to_real_finger(key_table):
    for k in key_table.keys:
        assert k.finger_p2fm in (
            "LT", "L1", "L2", "L3", "L4", "R1", "R2", "R3", "R4"
        )
