"""Physical device model: flux dispersion, drive synthesis, Fourier analysis.

The transmon dispersion follows the symmetric-junction relation
``w_q(phi) = (w_max + |eta|) * sqrt(|cos(pi*phi)|) - |eta|`` with ``phi`` in
flux-quantum units.  Drives are sums of cosine tones on top of a parking
flux, optionally shaped by a per-tone output-filter gain (zero-order hold
times a single real pole, the usual AWG reconstruction model).  The
modulated qubit frequency is decomposed into Fourier harmonics on the
common period of the (grid-snapped) tones; everything downstream of the
sideband theory consumes that decomposition.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, IntegrityError

FILTER_KINDS = ("none", "zero_order_hold_plus_pole")


@dataclass(frozen=True)
class TransmonSpec:
    """Flux-tunable transmon: sweet-spot frequency and anharmonicity (rad/s)."""

    omega_max: float
    eta: float
    flux_validity: float = 0.45

    def __post_init__(self):
        if self.omega_max <= 0:
            raise ValueError("omega_max must be positive")
        if self.eta >= 0:
            raise ValueError("eta must be negative for a transmon")
        if not 0 < self.flux_validity <= 0.5:
            raise ValueError("flux_validity must lie in (0, 0.5]")


@dataclass(frozen=True)
class ResonatorSpec:
    """Readout resonator: frequency (rad/s), decay rate (1/s), Fock truncation."""

    omega_r: float
    kappa_r: float
    fock_cutoff: int = 3

    def __post_init__(self):
        if self.omega_r <= 0:
            raise ValueError("omega_r must be positive")
        if self.kappa_r <= 0:
            raise ValueError("kappa_r must be positive")
        if self.fock_cutoff < 2:
            raise ValueError("fock_cutoff must be at least 2")


@dataclass(frozen=True)
class CouplingSpec:
    """Bare and modulation-averaged qubit-resonator coupling (rad/s)."""

    g_qr: float
    g_bar: float | None = None

    def __post_init__(self):
        if self.g_qr <= 0:
            raise ValueError("g_qr must be positive")
        if self.g_bar is not None and self.g_bar <= 0:
            raise ValueError("g_bar must be positive")

    @property
    def g_bar_effective(self) -> float:
        return self.g_qr if self.g_bar is None else self.g_bar


@dataclass(frozen=True)
class ThermalSpec:
    """Qubit excitation and relaxation rates (1/s); T1 = 1/(up + down)."""

    gamma_up: float = 0.0
    gamma_down: float = 0.0

    def __post_init__(self):
        if self.gamma_up < 0:
            raise ValueError("gamma_up must be nonnegative")
        if self.gamma_down < 0:
            raise ValueError("gamma_down must be nonnegative")

    @property
    def t1(self) -> float:
        total = self.gamma_up + self.gamma_down
        if total <= 0:
            raise ValueError("T1 undefined for zero thermal rates")
        return 1.0 / total

    @property
    def steady_excited_population(self) -> float:
        total = self.gamma_up + self.gamma_down
        return self.gamma_up / total if total > 0 else 0.0


@dataclass(frozen=True)
class DeviceSpec:
    """Full device parameterization handed to the theory and the engine."""

    transmon: TransmonSpec
    resonator: ResonatorSpec
    coupling: CouplingSpec
    thermal: ThermalSpec = ThermalSpec()


@dataclass(frozen=True)
class Tone:
    """One modulation tone: amplitude (flux quanta), angular frequency, phase.

    The waveform convention is ``amplitude * cos(omega*t + phase)``; a sine
    drive is a tone with phase -pi/2.
    """

    amplitude: float
    omega: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("tone amplitude must be nonnegative")
        if self.omega <= 0:
            raise ValueError("tone frequency must be positive")


@dataclass(frozen=True)
class OutputFilter:
    """Per-tone complex gain of the drive chain.

    ``zero_order_hold_plus_pole`` models a DAC at `sample_rate` (the sinc
    roll-off of the zero-order hold, including its half-sample delay) followed
    by a single real pole at `pole_frequency` (Hz).  Tones are narrowband, so
    a steady-state complex gain per tone is sufficient.
    """

    kind: str = "none"
    sample_rate: float | None = None
    pole_frequency: float | None = None

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"filter kind must be one of {FILTER_KINDS}")
        if self.kind != "none":
            if not self.sample_rate or self.sample_rate <= 0:
                raise ValueError("sample_rate must be positive for a filtering kind")
            if not self.pole_frequency or self.pole_frequency <= 0:
                raise ValueError("pole_frequency must be positive for a filtering kind")

    def response(self, omega: float) -> complex:
        """Complex gain at angular frequency `omega`."""
        if self.kind == "none":
            return 1.0 + 0.0j
        f = omega / (2.0 * math.pi)
        x = f / self.sample_rate
        zoh = np.sinc(x) * cmath.exp(-1j * math.pi * x)
        pole = 1.0 / (1.0 + 1j * f / self.pole_frequency)
        return zoh * pole


@dataclass(frozen=True)
class FluxDrive:
    """Parking flux plus modulation tones over a fixed duration (seconds)."""

    park_flux: float
    tones: tuple[Tone, ...]
    duration: float
    filter: OutputFilter = OutputFilter()

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("drive duration must be positive")
        object.__setattr__(self, "tones", tuple(self.tones))

    def effective_tones(self) -> list[tuple[float, float, float]]:
        """Tones after the output filter, as (amplitude, omega, phase) triples."""
        out = []
        for tone in self.tones:
            gain = self.filter.response(tone.omega)
            out.append(
                (tone.amplitude * abs(gain), tone.omega, tone.phase + cmath.phase(gain))
            )
        return out

    def max_excursion(self) -> float:
        """Upper bound on |flux| over the pulse (park plus filtered amplitudes)."""
        return abs(self.park_flux) + sum(a for a, _, _ in self.effective_tones())


def qubit_frequency(transmon: TransmonSpec, flux):
    """Qubit frequency (rad/s) at a flux bias given in flux-quantum units.

    Accepts scalars or arrays.  Raises DomainError outside the dispersion
    model's validity window.
    """
    flux_arr = np.asarray(flux)
    if np.any(np.abs(flux_arr) > transmon.flux_validity + 1e-12):
        raise DomainError(
            f"flux {np.max(np.abs(flux_arr)):.4g} outside validity window "
            f"|flux| <= {transmon.flux_validity}"
        )
    eta_abs = -transmon.eta
    w = (transmon.omega_max + eta_abs) * np.sqrt(
        np.abs(np.cos(np.pi * flux_arr))
    ) - eta_abs
    return float(w) if np.isscalar(flux) or flux_arr.ndim == 0 else w


def flux_waveform(drive: FluxDrive, t):
    """Flux (flux-quantum units) at time(s) `t` within the drive window."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-15) or np.any(t_arr > drive.duration * (1 + 1e-12)):
        raise DomainError("time outside the drive window [0, duration]")
    phi = np.full_like(t_arr, drive.park_flux, dtype=float)
    for amp, omega, phase in drive.effective_tones():
        phi = phi + amp * np.cos(omega * t_arr + phase)
    return float(phi) if np.isscalar(t) or t_arr.ndim == 0 else phi


@dataclass(frozen=True)
class SidebandDecomposition:
    """Fourier decomposition of the modulated qubit frequency.

    ``omega_bar`` is the period-averaged frequency; ``harmonics[k]`` is the
    complex amplitude A_k of the term ``Re[A_k * exp(i*k*omega_base*t)]``.
    """

    omega_bar: float
    harmonics: dict[int, complex] = field(default_factory=dict)
    omega_base: float = 0.0

    def harmonic(self, k: int) -> complex:
        return self.harmonics.get(k, 0.0 + 0.0j)

    def harmonic_at_frequency(self, omega: float, step_tol: float = 0.05) -> complex:
        """Harmonic amplitude at angular frequency `omega`.

        `omega` must land within `step_tol` grid steps of a multiple of
        omega_base; tone snapping moves frequencies by far less than this.
        """
        if self.omega_base <= 0:
            raise DomainError("decomposition has no harmonic content")
        ratio = omega / self.omega_base
        k = round(ratio)
        if k < 1 or abs(ratio - k) > step_tol:
            raise DomainError(
                f"frequency {omega:.6g} rad/s does not sit on the analysis grid "
                f"(base {self.omega_base:.6g} rad/s)"
            )
        return self.harmonic(k)

    def reconstruct(self, t):
        """Evaluate omega_bar + sum_k Re[A_k exp(i k omega_base t)]."""
        t_arr = np.asarray(t, dtype=float)
        w = np.full_like(t_arr, self.omega_bar, dtype=float)
        for k, amp in self.harmonics.items():
            w = w + (amp * np.exp(1j * k * self.omega_base * t_arr)).real
        return float(w) if np.isscalar(t) or t_arr.ndim == 0 else w

    def delta_bar(self, omega_r: float) -> float:
        """Mean detuning from a resonator at `omega_r` (rad/s)."""
        return self.omega_bar - omega_r

    def components(self, min_rel: float = 1e-6) -> list[tuple[float, float]]:
        """Significant harmonics as (|A_k|, k*omega_base) pairs, ascending in k."""
        if not self.harmonics:
            return []
        top = max(abs(a) for a in self.harmonics.values())
        return [
            (abs(a), k * self.omega_base)
            for k, a in sorted(self.harmonics.items())
            if abs(a) >= min_rel * top
        ]


def _snap_tones(drive: FluxDrive, base_grid_hz: float, snap_rel_tol: float):
    """Snap filtered tones onto an integer frequency grid; return (tones, indices)."""
    snapped = []
    indices = []
    for amp, omega, phase in drive.effective_tones():
        if amp == 0.0:
            continue
        f_hz = omega / (2.0 * math.pi)
        n = round(f_hz / base_grid_hz)
        if n < 1:
            raise ConfigError(
                f"tone at {f_hz:.6g} Hz is below the analysis grid "
                f"({base_grid_hz:.6g} Hz); use a finer base grid"
            )
        if abs(f_hz - n * base_grid_hz) > snap_rel_tol * f_hz:
            raise ConfigError(
                f"tone at {f_hz:.6g} Hz is incommensurate with the analysis grid "
                f"({base_grid_hz:.6g} Hz) beyond the snap tolerance {snap_rel_tol:g}"
            )
        snapped.append((amp, 2.0 * math.pi * n * base_grid_hz, phase))
        indices.append(n)
    return snapped, indices


def fourier_expand(
    transmon: TransmonSpec,
    drive: FluxDrive,
    *,
    base_grid_hz: float | None = None,
    n_samples: int | None = None,
    snap_rel_tol: float = 2e-2,
    keep_rel: float = 1e-12,
    recon_tol: float = 1e-9,
) -> SidebandDecomposition:
    """Decompose the modulated qubit frequency into Fourier harmonics.

    Tone frequencies are snapped onto an integer grid (default spacing
    1/duration) so that one common period exists and the DFT extraction is
    exact.  The returned decomposition is self-checked: re-synthesizing the
    waveform at points between the analysis samples must match the direct
    evaluation to `recon_tol` relative RMS, which guards against aliasing
    from an insufficient sample count.
    """
    base = base_grid_hz if base_grid_hz is not None else 1.0 / drive.duration
    snapped, indices = _snap_tones(drive, base, snap_rel_tol)

    if not snapped:
        return SidebandDecomposition(
            omega_bar=qubit_frequency(transmon, drive.park_flux),
            harmonics={},
            omega_base=0.0,
        )

    g = math.gcd(*indices)
    omega_base = 2.0 * math.pi * base * g
    period = 1.0 / (base * g)
    max_index = max(n // g for n in indices)
    if n_samples is None:
        n_samples = 1 << max(12, (32 * max_index - 1).bit_length())

    excursion = abs(drive.park_flux) + sum(a for a, _, _ in snapped)
    if excursion > transmon.flux_validity:
        raise DomainError(
            f"flux excursion bound {excursion:.4g} exceeds the validity window "
            f"|flux| <= {transmon.flux_validity}"
        )

    t = np.arange(n_samples) * (period / n_samples)
    phi = np.full(n_samples, drive.park_flux)
    for amp, omega, phase in snapped:
        phi += amp * np.cos(omega * t + phase)
    w = qubit_frequency(transmon, phi)

    spectrum = np.fft.rfft(w) / n_samples
    omega_bar = float(spectrum[0].real)
    mags = np.abs(spectrum[1:])
    cutoff = keep_rel * (mags.max() if mags.size else 0.0)
    harmonics = {
        k: 2.0 * spectrum[k]
        for k in range(1, len(spectrum))
        if abs(spectrum[k]) * 2.0 > cutoff
    }
    decomp = SidebandDecomposition(
        omega_bar=omega_bar, harmonics=harmonics, omega_base=omega_base
    )

    # Aliasing guard: compare at points offset from the analysis samples.
    t_mid = t + 0.5 * period / n_samples
    phi_mid = np.full(n_samples, drive.park_flux)
    for amp, omega, phase in snapped:
        phi_mid += amp * np.cos(omega * t_mid + phase)
    w_mid = qubit_frequency(transmon, phi_mid)
    err = np.sqrt(np.mean((decomp.reconstruct(t_mid) - w_mid) ** 2))
    scale = np.sqrt(np.mean(w_mid**2))
    if err > recon_tol * scale:
        raise IntegrityError(
            f"Fourier reconstruction error {err / scale:.3g} exceeds {recon_tol:g}; "
            "increase n_samples"
        )
    return decomp
