"""Unit conversions between config-file units and internal SI quantities.

Internal convention: every frequency-like quantity is an angular frequency
in rad/s, every time is in seconds, every rate is in 1/s, flux is in units
of the flux quantum.  Config files use GHz/MHz/kHz, ns/us, and flux-quantum
fractions; conversion happens only here, at the ingestion boundary.
"""

import math

TWO_PI = 2.0 * math.pi


def ghz_to_rad(f_ghz: float) -> float:
    return TWO_PI * 1e9 * f_ghz


def mhz_to_rad(f_mhz: float) -> float:
    return TWO_PI * 1e6 * f_mhz


def rad_to_ghz(w: float) -> float:
    return w / (TWO_PI * 1e9)


def rad_to_mhz(w: float) -> float:
    return w / (TWO_PI * 1e6)


def ns_to_s(t_ns: float) -> float:
    return t_ns * 1e-9


def s_to_ns(t_s: float) -> float:
    return t_s * 1e9


def us_to_s(t_us: float) -> float:
    return t_us * 1e-6


def khz_rate(r_khz: float) -> float:
    """Plain (non-angular) rate given in kHz, returned in 1/s."""
    return r_khz * 1e3


def rate_to_khz(r: float) -> float:
    return r / 1e3


def inverse_ns_rate(t_ns: float) -> float:
    """Rate 1/t for a time constant given in ns, returned in 1/s."""
    return 1.0 / (t_ns * 1e-9)
