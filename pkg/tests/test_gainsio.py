"""Gains-file serialization: round trips must be bit exact."""

import numpy as np
import pytest

from mgpnp import (CompensatorDesign, ControllerGains, GainsFile, InputError,
                   PrefilterEntry, RationalTf, dump_gains, load_gains,
                   parse_gains, save_gains)


def _sample_gains(ki=800.0):
    return ControllerGains(
        k=np.array([[-2.5, -0.4, ki]]),
        p=np.array([[1.1e-9, 2e-7, 3e-7],
                    [2e-7, 4.0, 5.0],
                    [3e-7, 5.0, 6.0]]),
        eta=1.1e-9, gamma=85.0, beta=1e6, delta=2e6,
        metadata={"solver": "CLARABEL", "pass": "recentered",
                  "a11_design": 9090.90909090909,
                  "weights": (1.0, 1.0, 1.0)})


def _sample_file(created="2026-08-18T00:00:00Z"):
    return GainsFile(
        gains={1: _sample_gains(), 2: _sample_gains(ki=900.0)},
        prefilters={1: PrefilterEntry(
            tf=RationalTf([2.0, 3.0], [1.0, 5.0]), bandwidth_hz=100.0, order=3)},
        compensators={1: CompensatorDesign(
            tf=RationalTf([1.8e-3, 0.6], [1.0]), approximate=False),
            2: CompensatorDesign(tf=RationalTf([1.0], [1e-4, 1.0]),
                                 approximate=True, fallback_bandwidth_hz=100.0)},
        created=created)


def test_round_trip_is_bit_exact():
    gf = _sample_file()
    back = parse_gains(dump_gains(gf))
    assert set(back.gains) == {1, 2}
    for i in (1, 2):
        assert np.array_equal(back.gains[i].k, gf.gains[i].k)
        assert np.array_equal(back.gains[i].p, gf.gains[i].p)
        for name in ("eta", "gamma", "beta", "delta"):
            assert getattr(back.gains[i], name) == getattr(gf.gains[i], name)
    assert back.created == gf.created
    pf = back.prefilters[1]
    assert np.array_equal(pf.tf.num, gf.prefilters[1].tf.num)
    assert np.array_equal(pf.tf.den, gf.prefilters[1].tf.den)
    assert pf.bandwidth_hz == 100.0 and pf.order == 3
    cd = back.compensators[2]
    assert cd.approximate and cd.fallback_bandwidth_hz == 100.0
    assert not back.compensators[1].approximate
    assert back.compensators[1].fallback_bandwidth_hz is None
    # and dumping the parse reproduces the text itself
    assert dump_gains(back) == dump_gains(gf)


def test_round_trip_of_solver_output(gains2):
    gf = GainsFile(gains=gains2)
    back = parse_gains(dump_gains(gf))
    for i, g in gains2.items():
        assert np.array_equal(back.gains[i].k, g.k)
        assert np.array_equal(back.gains[i].p, g.p)
    assert back.created is None


def test_metadata_value_types_round_trip():
    back = parse_gains(dump_gains(_sample_file()))
    md = back.gains[1].metadata
    assert md["solver"] == "CLARABEL"          # stays a string
    assert md["a11_design"] == 9090.90909090909  # single float
    assert md["weights"] == (1.0, 1.0, 1.0)    # tuple of floats


def test_p_reconstruction_is_symmetric():
    back = parse_gains(dump_gains(_sample_file()))
    p = back.gains[1].p
    assert np.array_equal(p, p.T)


def test_format_tag_enforced():
    with pytest.raises(InputError, match="format"):
        parse_gains("[meta]\nformat = something-else\n")
    with pytest.raises(InputError, match="format"):
        parse_gains("[gains.1]\nk = 1 2 3\n")


def _rewrite_line(text, prefix, replacement):
    lines = text.splitlines()
    i = next(k for k, ln in enumerate(lines) if ln.startswith(prefix))
    lines[i] = replacement
    return "\n".join(lines) + "\n"


@pytest.mark.parametrize("prefix, replacement, pattern", [
    ("k = ", "kk = 1 2 3", "missing key"),
    ("eta = ", "zeta = 1", "missing key"),
    ("[gains.1]", "[mystery.1]", "unknown section"),
    ("p = ", "p = 1 2 3", "6 entries"),
    ("k = ", "k = -2.5 0", "3 entries"),
    ("k = ", "k = one two three", "cannot parse"),
])
def test_malformed_rejections(prefix, replacement, pattern):
    text = dump_gains(_sample_file())
    with pytest.raises(InputError, match=pattern):
        parse_gains(_rewrite_line(text, prefix, replacement))


def test_unknown_filter_keys_rejected():
    text = dump_gains(_sample_file())
    bad = text.replace("order = 3", "order = 3\nextra = 1")
    with pytest.raises(InputError, match="unknown keys"):
        parse_gains(bad)
    bad2 = text.replace("approximate = false", "approximate = maybe")
    with pytest.raises(InputError, match="true or false"):
        parse_gains(bad2)


def test_file_io(tmp_path):
    gf = _sample_file()
    p = tmp_path / "unit.gains"
    save_gains(gf, p)
    back = load_gains(p)
    assert dump_gains(back) == dump_gains(gf)
    with pytest.raises(InputError, match="cannot read"):
        load_gains(tmp_path / "absent.gains")


def test_dump_is_deterministic():
    a = dump_gains(_sample_file())
    b = dump_gains(_sample_file())
    assert a == b
    # id-sorted sections regardless of insertion order
    gf = _sample_file()
    flipped = GainsFile(gains={2: gf.gains[2], 1: gf.gains[1]},
                        prefilters=gf.prefilters,
                        compensators=gf.compensators, created=gf.created)
    assert dump_gains(flipped) == a
