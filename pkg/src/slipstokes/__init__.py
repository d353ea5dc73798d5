"""Spectral Galerkin toolkit for incompressible flow with Navier slip walls."""

__version__ = "0.1.0"

from .domain import Ball, Channel, SlipLength, make_domain, parse_zeta

__all__ = ["Ball", "Channel", "SlipLength", "make_domain", "parse_zeta", "__version__"]
