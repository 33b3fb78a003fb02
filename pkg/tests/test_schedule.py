import pytest
from hypothesis import given
from hypothesis import strategies as st

from odoprime.schedule import EMPTY, WTYPE, AlphabetSchedule, DepthError, ScheduleError


def test_paper_sizes_and_qs():
    s = AlphabetSchedule.paper(120)
    assert s.sizes[1] == 8 and s.sizes[99] == 8
    assert s.sizes[100] == 2 and s.kind(100) == WTYPE
    assert s.qs[1] == 1 and s.qs[2] == 8 and s.qs[3] == 64
    assert s.qs[101] == 8**99 * 2


def test_paper_kinds_alternate():
    s = AlphabetSchedule.paper(1000)
    assert s.kind(100) == WTYPE and s.kind(1000) == EMPTY
    assert s.kind(5) is None
    assert s.e_positions == (100, 1000)


def test_presets_roundtrip():
    for name in ("desk", "desk2", "lab", "wide"):
        s = AlphabetSchedule.preset(name)
        assert AlphabetSchedule.from_dict(s.to_dict()) == s
        assert AlphabetSchedule.from_dict({"preset": name}) == s


def test_unknown_preset():
    with pytest.raises(ScheduleError):
        AlphabetSchedule.preset("nope")


@pytest.mark.parametrize("kw", [dict(base=7), dict(depth=0), dict(E=[(3, "Q", 5)]), dict(E=[(4, EMPTY, 5), (3, EMPTY, 5)])])
def test_bad_schedules(kw):
    with pytest.raises(ScheduleError):
        AlphabetSchedule(**kw)


def test_desk2_warns_about_absorbing_w():
    warnings = AlphabetSchedule.preset("desk2").validate()
    assert any("contains every deeper hole" in w for w in warnings)


@given(st.sampled_from(["desk", "desk2", "lab", "wide"]), st.data())
def test_encode_decode_inverse(name, data):
    s = AlphabetSchedule.preset(name)
    v = data.draw(st.integers(0, s.modulus - 1))
    d = s.encode(v)
    assert len(d) == s.depth
    assert s.decode(d) == v


def test_decode_rejects_bad_digit(desk):
    with pytest.raises(ScheduleError):
        desk.decode([8])


def test_encode_out_of_range(desk):
    with pytest.raises((ScheduleError, DepthError)):
        desk.encode(desk.modulus)
