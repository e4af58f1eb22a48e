"""Worked systems: heavy top, double spherical pendulum, rigid body, affine fluid."""

from relcrit.systems import adequacy, body, pendulum, riemann, top

__all__ = ["adequacy", "body", "pendulum", "riemann", "top"]
