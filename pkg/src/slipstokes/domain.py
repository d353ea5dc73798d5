"""Domain descriptors and the slip length parameter."""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class SlipLength:
    """Slip length zeta > 0, with complete slip (zeta = inf) explicit.

    `inv` is exactly 0.0 in the complete-slip case so that friction
    terms drop out of every formula identically rather than through a
    large-but-finite float.
    """

    value: float

    def __post_init__(self):
        if not (self.value > 0.0):
            raise ValueError("slip length must be positive")

    @classmethod
    def infinite(cls):
        return cls(math.inf)

    @property
    def is_infinite(self):
        return math.isinf(self.value)

    @property
    def inv(self):
        return 0.0 if self.is_infinite else 1.0 / self.value

    def __str__(self):
        return "inf" if self.is_infinite else repr(self.value)


def parse_zeta(text):
    """Parse a slip length from CLI/config text ('inf' allowed)."""
    s = str(text).strip().lower()
    if s in ("inf", "infinity", "+inf"):
        return SlipLength.infinite()
    return SlipLength(float(s))


@dataclass(frozen=True)
class Channel:
    """Periodic slab: [0,Lx) x [0,Ly) x [0,1] with walls z = 0, 1."""

    lx: float = 2.0 * math.pi
    ly: float = 2.0 * math.pi

    name = "channel"

    @property
    def volume(self):
        return self.lx * self.ly

    def wavevector(self, mi, ni):
        """Horizontal wavevector for integer lattice indices."""
        return 2.0 * math.pi * mi / self.lx, 2.0 * math.pi * ni / self.ly


@dataclass(frozen=True)
class Ball:
    """Ball of radius R centred at the origin."""

    radius: float = 1.0

    name = "ball"

    @property
    def volume(self):
        return 4.0 / 3.0 * math.pi * self.radius ** 3


def make_domain(name, **kwargs):
    name = name.lower()
    if name == "channel":
        return Channel(**kwargs)
    if name == "ball":
        return Ball(**kwargs)
    raise ValueError(f"unknown domain {name!r}")
