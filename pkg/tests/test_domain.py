import math

import pytest

from slipstokes.domain import Ball, Channel, SlipLength, make_domain, \
    parse_zeta


def test_slip_length_inverse():
    assert SlipLength(2.0).inv == 0.5
    assert SlipLength(0.1).inv == pytest.approx(10.0)


def test_complete_slip_is_exact_zero_friction():
    zeta = SlipLength.infinite()
    assert zeta.is_infinite
    assert zeta.inv == 0.0
    assert str(zeta) == "inf"


def test_slip_length_rejects_nonpositive():
    with pytest.raises(ValueError):
        SlipLength(0.0)
    with pytest.raises(ValueError):
        SlipLength(-1.0)


def test_parse_zeta():
    assert parse_zeta("1.5").value == 1.5
    assert parse_zeta("inf").is_infinite
    assert parse_zeta("INFINITY").is_infinite
    with pytest.raises(ValueError):
        parse_zeta("wide open")


def test_make_domain():
    ch = make_domain("channel")
    assert isinstance(ch, Channel)
    assert ch.volume == pytest.approx(4.0 * math.pi ** 2)
    ba = make_domain("ball", radius=2.0)
    assert isinstance(ba, Ball)
    assert ba.volume == pytest.approx(32.0 * math.pi / 3.0)
    with pytest.raises(ValueError):
        make_domain("torus")


def test_channel_wavevector():
    ch = Channel(lx=2.0 * math.pi, ly=math.pi)
    kx, ky = ch.wavevector(1, 1)
    assert kx == pytest.approx(1.0)
    assert ky == pytest.approx(2.0)
