import numpy as np
import pytest

from fluxreset import (
    CouplingSpec,
    DeviceSpec,
    ResonatorSpec,
    ThermalSpec,
    TransmonSpec,
)
from fluxreset.units import ghz_to_rad, inverse_ns_rate, mhz_to_rad

# Thermal rates: total 86.6 kHz with a 2.38% steady excited fraction.
GAMMA_UP = 0.0238 * 86.6e3
GAMMA_DOWN = 86.6e3 - GAMMA_UP


def make_q1(kappa_inverse_ns=50.0, thermal=True):
    return DeviceSpec(
        transmon=TransmonSpec(omega_max=ghz_to_rad(5.784), eta=mhz_to_rad(-254.0)),
        resonator=ResonatorSpec(
            omega_r=ghz_to_rad(6.441), kappa_r=inverse_ns_rate(kappa_inverse_ns)
        ),
        coupling=CouplingSpec(g_qr=mhz_to_rad(78.0)),
        thermal=(
            ThermalSpec(gamma_up=GAMMA_UP, gamma_down=GAMMA_DOWN)
            if thermal
            else ThermalSpec()
        ),
    )


@pytest.fixture(scope="session")
def q1():
    """Q1 device with the tabulated resonator lifetime (50 ns) and thermal rates."""
    return make_q1()


@pytest.fixture(scope="session")
def q1_cold():
    """Q1 without thermal rates (coherent-protocol checks)."""
    return make_q1(thermal=False)


@pytest.fixture(scope="session")
def q1_fit():
    """Q1 with the trace-fitted resonator lifetime of 46 ns."""
    return make_q1(kappa_inverse_ns=46.0)


@pytest.fixture(scope="session")
def decoupled():
    """A device whose qubit-resonator coupling is negligible (1 Hz)."""
    return DeviceSpec(
        transmon=TransmonSpec(omega_max=ghz_to_rad(5.784), eta=mhz_to_rad(-254.0)),
        resonator=ResonatorSpec(omega_r=ghz_to_rad(6.441), kappa_r=inverse_ns_rate(50.0)),
        coupling=CouplingSpec(g_qr=2 * np.pi * 1.0),
        thermal=ThermalSpec(),
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)
