"""Experiment drivers: scan maps, time traces, repeated reset, rethermalization.

Every driver is a pure function of an ExperimentSpec; scan cells are
independent engine runs evaluated by a process pool.  Resonance targeting
accounts for the always-on carrier coupling, which dresses the
qubit-resonator gap by ~2*g0^2/|Delta|: strips in the simulated maps sit on
the dressed gap, so the helpers here compute it from the same static model
the engine integrates.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq
from scipy.stats import t as student_t

from . import __version__ as _pkg_version
from .analytics import (
    EffectiveModel,
    RateModel,
    fit_cascade,
    fit_exponential,
    fit_reset_trace,
    pe_closed_form,
    sideband_coupling,
    two_tone_couplings,
)
from .device import (
    DeviceSpec,
    FluxDrive,
    OutputFilter,
    Tone,
    fourier_expand,
    qubit_frequency,
)
from .errors import DomainError, FluxresetError
from .lindblad import (
    CollapseSet,
    HilbertConfig,
    Trajectory,
    apply_pi_pulse,
    basis_density,
    build_hamiltonian,
    dressing_shift,
    evolve,
)

EXPERIMENT_KINDS = (
    "single_tone_scan",
    "two_tone_scan",
    "time_trace",
    "two_tone_trace",
    "repeated_reset",
    "rethermalization",
)

SINE_PHASE = -math.pi / 2  # tones are A*sin(w t) in the protocol


@dataclass(frozen=True)
class EngineSettings:
    """Engine knobs shared by all experiment kinds."""

    qubit_levels: int = 2
    fock_cutoff: int = 3
    frame: str = "resonator_rotating"
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "auto"
    dressed_frequencies: bool = True

    def hilbert(self) -> HilbertConfig:
        return HilbertConfig(
            qubit_levels=self.qubit_levels,
            fock_cutoff=self.fock_cutoff,
            frame=self.frame,
        )


@dataclass(frozen=True)
class ScanAxis:
    name: str
    values: tuple[float, ...]
    unit: str

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: device, drive template, and what is swept.

    Scans sweep two placeholders (amplitude x frequency, or frequency x
    frequency at fixed amplitudes); traces carry a fully specified tone set.
    """

    kind: str
    device: DeviceSpec
    duration: float
    initial_state: str = "e"
    park_flux: float = 0.0
    filter: OutputFilter = OutputFilter()
    tones: tuple[Tone, ...] = ()
    amplitudes: tuple[float, ...] = ()
    frequencies: tuple[float, ...] = ()
    frequencies2: tuple[float, ...] = ()
    scan_amplitude: float = 0.0
    scan_amplitude2: float | None = None
    sample_points: int = 201
    repetitions: int = 1
    initial_excited_population: float = 0.0
    engine: EngineSettings = EngineSettings()

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"kind must be one of {EXPERIMENT_KINDS}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.initial_state not in ("g", "e", "f"):
            raise ValueError("initial_state must be g, e, or f")
        swept = {
            "single_tone_scan": bool(self.amplitudes) + bool(self.frequencies),
            "two_tone_scan": bool(self.frequencies) + bool(self.frequencies2),
            "time_trace": 0,
            "two_tone_trace": 0,
            "repeated_reset": 0,
            "rethermalization": 0,
        }[self.kind]
        if self.kind.endswith("_scan") and swept != 2:
            raise ValueError(f"{self.kind} requires two swept axes")
        if self.kind in ("time_trace", "two_tone_trace", "repeated_reset") and not self.tones:
            raise ValueError(f"{self.kind} requires a fully specified tone set")
        if self.kind == "two_tone_scan" and self.scan_amplitude <= 0:
            raise ValueError("two_tone_scan requires a positive scan_amplitude")
        if self.sample_points < 2:
            raise ValueError("sample_points must be at least 2")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")

    def qubit_level_index(self) -> int:
        return {"g": 0, "e": 1, "f": 2}[self.initial_state]


@dataclass
class CellResult:
    success: bool
    p_g: float = math.nan
    p_e: float = math.nan
    p_f: float = math.nan
    mean_photons: float = math.nan
    trace_error: float = math.nan
    hermiticity_error: float = math.nan
    min_eigenvalue: float = math.nan
    error: str = ""


@dataclass
class ScanGrid:
    """2-D grid of final populations; row i, column j is (y[i], x[j])."""

    x: ScanAxis
    y: ScanAxis
    p_e: np.ndarray
    p_g: np.ndarray
    p_f: np.ndarray | None
    mean_photons: np.ndarray
    success: np.ndarray
    errors: list[str]
    conservation: dict[str, float]
    metadata: dict

    def observable(self, name: str) -> np.ndarray:
        arr = {"p_e": self.p_e, "p_g": self.p_g, "p_f": self.p_f}[name]
        if arr is None:
            raise DomainError(f"scan does not carry {name}")
        return arr


@dataclass
class TraceResult:
    trajectory: Trajectory
    effective_model: EffectiveModel | None
    theory_pe: np.ndarray | None
    fit: dict
    metadata: dict


@dataclass
class RepeatedResetResult:
    residuals: np.ndarray
    cycle_duration: float
    slope: float
    slope_ci: tuple[float, float]
    burn_in: int
    metadata: dict


@dataclass
class RethermalizationResult:
    t: np.ndarray
    p_e: np.ndarray
    fitted_rate: float
    fitted_time_constant: float
    asymptote: float
    metadata: dict


# ---------------------------------------------------------------------------
# Resonance targeting: the carrier coupling g0 dresses the bare gaps.
# ---------------------------------------------------------------------------


def first_local_minimum(
    t: np.ndarray, y: np.ndarray, *, ceiling: float = 0.3, smooth: int = 5
) -> float:
    """Time of the first local minimum of `y` below `ceiling`.

    A short moving average suppresses micromotion ripple before the search;
    raises DomainError when no local minimum exists below the ceiling.
    """
    y = np.asarray(y, dtype=float)
    if smooth > 1:
        kernel = np.ones(smooth) / smooth
        y = np.convolve(y, kernel, mode="same")
    for i in range(1, y.size - 1):
        if y[i] < ceiling and y[i] < y[i - 1] and y[i] <= y[i + 1]:
            return float(t[i])
    raise DomainError("no local minimum below the ceiling")


def dressed_gaps(device: DeviceSpec, drive: FluxDrive, *, dressed: bool = True) -> dict:
    """Transition gaps of the modulated, carrier-dressed system (rad/s).

    ``gap_e`` is the |e,0> <-> |g,1> energy distance, ``gap_f`` the
    |f,0> <-> |e,1> one; both are eigenvalue gaps of the static
    Jaynes-Cummings sectors evaluated with the period-averaged qubit
    frequency and the J0-suppressed carrier coupling.
    """
    dec = fourier_expand(device.transmon, drive)
    g_bar = device.coupling.g_bar_effective
    comps = dec.components(min_rel=1e-4)
    g0 = abs(two_tone_couplings(comps, g_bar).g0)

    xi = dressing_shift(device, drive.park_flux) if dressed else 0.0
    w_q = dec.omega_bar + xi
    w_r = device.resonator.omega_r - xi
    eta = device.transmon.eta

    h_e = np.array([[w_q, g0], [g0, w_r]])
    ev_e = np.linalg.eigvalsh(h_e)
    gap_e = float(ev_e[1] - ev_e[0])

    s2 = math.sqrt(2.0) * g0
    h_f = np.array(
        [
            [2 * w_q + eta, s2, 0.0],
            [s2, w_q + w_r, s2],
            [0.0, s2, 2 * w_r],
        ]
    )
    ev, vec = np.linalg.eigh(h_f)
    idx_f0 = int(np.argmax(np.abs(vec[0, :])))
    idx_e1 = int(np.argmax(np.abs(vec[1, :])))
    gap_f = float(ev[idx_e1] - ev[idx_f0])

    return {
        "delta_bar": dec.delta_bar(device.resonator.omega_r),
        "omega_bar": dec.omega_bar,
        "g0": g0,
        "gap_e": gap_e,
        "gap_f": gap_f,
        "decomposition": dec,
    }


def single_tone_drive(
    amplitude: float,
    omega_m: float,
    duration: float,
    park_flux: float = 0.0,
    filter: OutputFilter = OutputFilter(),
) -> FluxDrive:
    """Sine-convention single-tone reset drive."""
    return FluxDrive(
        park_flux=park_flux,
        tones=(Tone(amplitude=amplitude, omega=omega_m, phase=SINE_PHASE),),
        duration=duration,
        filter=filter,
    )


def single_tone_resonance(
    device: DeviceSpec,
    amplitude: float,
    *,
    n: int = 1,
    alpha: int = 2,
    park_flux: float = 0.0,
    duration: float = 1000e-9,
    filter: OutputFilter = OutputFilter(),
    dressed: bool = True,
    iterations: int = 4,
) -> float:
    """Modulation frequency that puts the n-th sideband on the dressed gap."""
    dec0 = fourier_expand(
        device.transmon,
        FluxDrive(park_flux, (), duration, filter),
    )
    omega = -dec0.delta_bar(device.resonator.omega_r) / (n * alpha)
    for _ in range(iterations):
        drive = single_tone_drive(amplitude, omega, duration, park_flux, filter)
        gaps = dressed_gaps(device, drive, dressed=dressed)
        omega = gaps["gap_e"] / (n * alpha)
    return omega


def coupling_at_amplitude(
    device: DeviceSpec,
    amplitude: float,
    *,
    n: int = 1,
    alpha: int = 2,
    park_flux: float = 0.0,
    duration: float = 1000e-9,
    filter: OutputFilter = OutputFilter(),
    dressed: bool = True,
) -> tuple[float, float]:
    """(|g_n|, resonant omega_m) for a single-tone drive of given amplitude."""
    omega_m = single_tone_resonance(
        device,
        amplitude,
        n=n,
        alpha=alpha,
        park_flux=park_flux,
        duration=duration,
        filter=filter,
        dressed=dressed,
    )
    drive = single_tone_drive(amplitude, omega_m, duration, park_flux, filter)
    dec = fourier_expand(device.transmon, drive)
    g_n = sideband_coupling(
        n, dec, alpha, omega_m, SINE_PHASE, device.coupling.g_bar_effective
    )
    return abs(g_n), omega_m


def amplitude_for_coupling(
    device: DeviceSpec,
    target_g: float,
    *,
    n: int = 1,
    alpha: int = 2,
    park_flux: float = 0.0,
    duration: float = 1000e-9,
    filter: OutputFilter = OutputFilter(),
    bracket: tuple[float, float] = (1e-3, 0.3),
) -> tuple[float, float]:
    """Invert |g_n|(A) for the drive amplitude; returns (A, resonant omega_m)."""

    def mismatch(a):
        g_abs, _ = coupling_at_amplitude(
            device,
            a,
            n=n,
            alpha=alpha,
            park_flux=park_flux,
            duration=duration,
            filter=filter,
        )
        return g_abs - target_g

    a_star = brentq(mismatch, bracket[0], bracket[1], xtol=1e-8)
    g_abs, omega_m = coupling_at_amplitude(
        device,
        a_star,
        n=n,
        alpha=alpha,
        park_flux=park_flux,
        duration=duration,
        filter=filter,
    )
    return a_star, omega_m


# ---------------------------------------------------------------------------
# Scan execution.
# ---------------------------------------------------------------------------


def _run_cell(args) -> CellResult:
    spec, tones = args
    try:
        drive = FluxDrive(
            park_flux=spec.park_flux,
            tones=tones,
            duration=spec.duration,
            filter=spec.filter,
        )
        hilbert = spec.engine.hilbert()
        h = build_hamiltonian(
            spec.device,
            drive,
            hilbert,
            dressed_frequencies=spec.engine.dressed_frequencies,
        )
        collapse = CollapseSet.from_device(spec.device)
        rho0 = basis_density(hilbert, spec.qubit_level_index(), 0)
        traj = evolve(
            h,
            collapse,
            rho0,
            np.array([0.0, spec.duration]),
            rtol=spec.engine.rtol,
            atol=spec.engine.atol,
            method=spec.engine.method,
        )
        pops = traj.qubit_populations[:, -1]
        return CellResult(
            success=True,
            p_g=float(pops[0]),
            p_e=float(pops[1]),
            p_f=float(pops[2]) if hilbert.qubit_levels > 2 else math.nan,
            mean_photons=float(traj.mean_photons[-1]),
            trace_error=float(traj.trace_error.max()),
            hermiticity_error=float(traj.hermiticity_error.max()),
            min_eigenvalue=float(traj.min_eigenvalue.min()),
        )
    except FluxresetError as exc:
        return CellResult(success=False, error=f"{type(exc).__name__}: {exc}")


def _metadata(spec: ExperimentSpec, extra: dict | None = None) -> dict:
    device = spec.device
    meta = {
        "kind": spec.kind,
        "version": _pkg_version,
        "duration_s": spec.duration,
        "initial_state": spec.initial_state,
        "park_flux": spec.park_flux,
        "device": {
            "omega_max": device.transmon.omega_max,
            "eta": device.transmon.eta,
            "flux_validity": device.transmon.flux_validity,
            "omega_r": device.resonator.omega_r,
            "kappa_r": device.resonator.kappa_r,
            "g_qr": device.coupling.g_qr,
            "gamma_up": device.thermal.gamma_up,
            "gamma_down": device.thermal.gamma_down,
        },
        "engine": {
            "qubit_levels": spec.engine.qubit_levels,
            "fock_cutoff": spec.engine.fock_cutoff,
            "frame": spec.engine.frame,
            "rtol": spec.engine.rtol,
            "atol": spec.engine.atol,
            "method": spec.engine.method,
            "dressed_frequencies": spec.engine.dressed_frequencies,
        },
        "filter": {
            "kind": spec.filter.kind,
            "sample_rate": spec.filter.sample_rate,
            "pole_frequency": spec.filter.pole_frequency,
        },
    }
    if extra:
        meta.update(extra)
    return meta


def default_workers() -> int:
    env = os.environ.get("FLUXRESET_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parallel_map(fn, jobs, workers, progress):
    if workers is None:
        workers = default_workers()
    results = []
    if workers <= 1:
        for i, job in enumerate(jobs):
            results.append(fn(job))
            if progress:
                progress(i + 1, len(jobs))
        return results
    chunk = max(1, len(jobs) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i, res in enumerate(pool.map(fn, jobs, chunksize=chunk)):
            results.append(res)
            if progress:
                progress(i + 1, len(jobs))
    return results


def _assemble_grid(spec, x_axis, y_axis, cells, extra_meta) -> ScanGrid:
    nx, ny = len(x_axis), len(y_axis)
    shape = (ny, nx)
    p_e = np.full(shape, np.nan)
    p_g = np.full(shape, np.nan)
    p_f = np.full(shape, np.nan) if spec.engine.qubit_levels > 2 else None
    photons = np.full(shape, np.nan)
    success = np.zeros(shape, dtype=bool)
    errors = []
    cons = {"trace_error": 0.0, "hermiticity_error": 0.0, "min_eigenvalue": 0.0}
    for idx, cell in enumerate(cells):
        i, j = divmod(idx, nx)
        success[i, j] = cell.success
        if cell.success:
            p_e[i, j] = cell.p_e
            p_g[i, j] = cell.p_g
            if p_f is not None:
                p_f[i, j] = cell.p_f
            photons[i, j] = cell.mean_photons
            cons["trace_error"] = max(cons["trace_error"], cell.trace_error)
            cons["hermiticity_error"] = max(
                cons["hermiticity_error"], cell.hermiticity_error
            )
            cons["min_eigenvalue"] = min(cons["min_eigenvalue"], cell.min_eigenvalue)
        else:
            errors.append(f"({i},{j}): {cell.error}")
    return ScanGrid(
        x=x_axis,
        y=y_axis,
        p_e=p_e,
        p_g=p_g,
        p_f=p_f,
        mean_photons=photons,
        success=success,
        errors=errors,
        conservation=cons,
        metadata=_metadata(spec, extra_meta),
    )


def single_tone_scan(
    spec: ExperimentSpec,
    *,
    workers: int | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> ScanGrid:
    """Final populations after the reset pulse over amplitude x frequency."""
    if spec.kind != "single_tone_scan":
        raise DomainError("spec.kind must be single_tone_scan")
    max_amp = abs(spec.park_flux) + max(spec.amplitudes)
    if max_amp > spec.device.transmon.flux_validity:
        raise DomainError("amplitude range exceeds the flux validity window")

    jobs = []
    for omega in spec.frequencies:
        for amp in spec.amplitudes:
            tones = (
                (Tone(amplitude=amp, omega=omega, phase=SINE_PHASE),) if amp > 0 else ()
            )
            jobs.append((spec, tones))
    cells = _parallel_map(_run_cell, jobs, workers, progress)

    x_axis = ScanAxis("amplitude", tuple(spec.amplitudes), "phi0")
    y_axis = ScanAxis("mod_frequency", tuple(spec.frequencies), "rad/s")
    dec0 = fourier_expand(
        spec.device.transmon, FluxDrive(spec.park_flux, (), spec.duration, spec.filter)
    )
    extra = {"delta_bar_zero_amplitude": dec0.delta_bar(spec.device.resonator.omega_r)}
    return _assemble_grid(spec, x_axis, y_axis, cells, extra)


def two_tone_scan(
    spec: ExperimentSpec,
    *,
    workers: int | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> ScanGrid:
    """Final (P_g, P_e, P_f) after a two-tone pulse over frequency x frequency."""
    if spec.kind != "two_tone_scan":
        raise DomainError("spec.kind must be two_tone_scan")
    if spec.initial_state == "f" and spec.engine.qubit_levels != 3:
        raise DomainError("two_tone_scan from |f> requires qubit_levels = 3")
    amp1 = spec.scan_amplitude
    amp2 = spec.scan_amplitude2 if spec.scan_amplitude2 is not None else amp1
    if abs(spec.park_flux) + amp1 + amp2 > spec.device.transmon.flux_validity:
        raise DomainError("amplitudes exceed the flux validity window")

    jobs = []
    for omega2 in spec.frequencies2:
        for omega1 in spec.frequencies:
            tones = (
                Tone(amplitude=amp1, omega=omega1, phase=SINE_PHASE),
                Tone(amplitude=amp2, omega=omega2, phase=SINE_PHASE),
            )
            jobs.append((spec, tones))
    cells = _parallel_map(_run_cell, jobs, workers, progress)

    x_axis = ScanAxis("frequency_1", tuple(spec.frequencies), "rad/s")
    y_axis = ScanAxis("frequency_2", tuple(spec.frequencies2), "rad/s")
    # Representative probe for the metadata gaps: the mean shift and the
    # component magnitudes depend only on the amplitudes, but the two tones
    # must be distinct (degenerate tones coadd and double the shift).
    probe = FluxDrive(
        spec.park_flux,
        (
            Tone(amp1, 2.0 * math.pi * 301e6, SINE_PHASE),
            Tone(amp2, 2.0 * math.pi * 503e6, SINE_PHASE),
        ),
        spec.duration,
        spec.filter,
    )
    gaps = dressed_gaps(spec.device, probe, dressed=spec.engine.dressed_frequencies)
    extra = {
        "scan_amplitude": amp1,
        "scan_amplitude2": amp2,
        "delta_bar": gaps["delta_bar"],
        "gap_e": gaps["gap_e"],
        "gap_f": gaps["gap_f"],
    }
    return _assemble_grid(spec, x_axis, y_axis, cells, extra)


# ---------------------------------------------------------------------------
# Traces.
# ---------------------------------------------------------------------------


def _trace_trajectory(spec: ExperimentSpec) -> Trajectory:
    drive = FluxDrive(
        park_flux=spec.park_flux,
        tones=spec.tones,
        duration=spec.duration,
        filter=spec.filter,
    )
    hilbert = spec.engine.hilbert()
    h = build_hamiltonian(
        spec.device, drive, hilbert, dressed_frequencies=spec.engine.dressed_frequencies
    )
    collapse = CollapseSet.from_device(spec.device)
    rho0 = basis_density(hilbert, spec.qubit_level_index(), 0)
    t_grid = np.linspace(0.0, spec.duration, spec.sample_points)
    return evolve(
        h,
        collapse,
        rho0,
        t_grid,
        rtol=spec.engine.rtol,
        atol=spec.engine.atol,
        method=spec.engine.method,
    )


def _infer_alpha(decomposition, omega_m: float) -> int:
    """Pick the drive harmonic order from the decomposition's own parity."""
    if decomposition.omega_base <= 0:
        return 2
    a1 = abs(decomposition.harmonic_at_frequency(omega_m))
    a2 = abs(decomposition.harmonic_at_frequency(2 * omega_m))
    return 1 if a1 > a2 else 2


def time_trace(spec: ExperimentSpec, *, sideband_order: int = 1) -> TraceResult:
    """Reset trace plus the closed-form companion derived from the same drive."""
    if spec.kind != "time_trace":
        raise DomainError("spec.kind must be time_trace")
    if len(spec.tones) != 1:
        raise DomainError("time_trace expects a single tone")
    traj = _trace_trajectory(spec)

    tone = spec.tones[0]
    drive = FluxDrive(spec.park_flux, spec.tones, spec.duration, spec.filter)
    dec = fourier_expand(spec.device.transmon, drive)
    alpha = _infer_alpha(dec, tone.omega)
    g_n = sideband_coupling(
        sideband_order,
        dec,
        alpha,
        tone.omega,
        tone.phase,
        spec.device.coupling.g_bar_effective,
    )
    model = EffectiveModel(g_abs=abs(g_n), kappa_r=spec.device.resonator.kappa_r)
    theory = pe_closed_form(model, traj.t)

    fit = fit_reset_trace(
        traj.t,
        traj.p_e,
        g_guess=max(abs(g_n), 0.05 * model.kappa_r),
        kappa_guess=model.kappa_r,
    )
    return TraceResult(
        trajectory=traj,
        effective_model=model,
        theory_pe=theory,
        fit=fit,
        metadata=_metadata(
            spec,
            {
                "alpha": alpha,
                "sideband_order": sideband_order,
                "g_n_abs": abs(g_n),
                "delta_bar": dec.delta_bar(spec.device.resonator.omega_r),
            },
        ),
    )


def two_tone_trace(spec: ExperimentSpec) -> TraceResult:
    """Trace of (P_g, P_e, P_f) under a two-tone pulse, with a cascade fit."""
    if spec.kind != "two_tone_trace":
        raise DomainError("spec.kind must be two_tone_trace")
    if spec.engine.qubit_levels != 3:
        raise DomainError("two_tone_trace requires qubit_levels = 3")
    traj = _trace_trajectory(spec)

    span = traj.t[-1] - traj.t[0]
    g_fe, g_eg = fit_cascade(
        traj.t,
        traj.p_g,
        traj.p_e,
        traj.p_f,
        gamma_fe_guess=2.0 / span,
        gamma_eg_guess=2.0 / span,
    )
    fit = {"gamma_fe": g_fe, "gamma_eg": g_eg}
    return TraceResult(
        trajectory=traj,
        effective_model=None,
        theory_pe=None,
        fit=fit,
        metadata=_metadata(spec, {"cascade_fit": fit}),
    )


def repeated_reset(
    spec: ExperimentSpec, repetitions: int | None = None
) -> RepeatedResetResult:
    """Run excitation-reset cycles and regress the per-cycle residuals.

    Each cycle applies an idealized pi pulse (population swap from the
    ground state to the prepared level) followed by the reset drive.  The
    state is carried across cycles; the first `burn_in` cycles cover the
    approach to the steady cycle and are excluded from the drift fit.
    """
    if spec.kind != "repeated_reset":
        raise DomainError("spec.kind must be repeated_reset")
    reps = repetitions if repetitions is not None else spec.repetitions
    if reps < 1:
        raise DomainError("repetitions must be >= 1")

    drive = FluxDrive(spec.park_flux, spec.tones, spec.duration, spec.filter)
    hilbert = spec.engine.hilbert()
    h = build_hamiltonian(
        spec.device, drive, hilbert, dressed_frequencies=spec.engine.dressed_frequencies
    )
    collapse = CollapseSet.from_device(spec.device)
    level = spec.qubit_level_index()
    if level == 0:
        raise DomainError("repeated_reset needs an excited initial state")
    if level >= hilbert.qubit_levels:
        raise DomainError("initial state outside the configured qubit ladder")

    t_grid = np.array([0.0, spec.duration])
    rho = basis_density(hilbert, 0, 0)
    residuals = np.empty(reps)
    for cycle in range(reps):
        rho = apply_pi_pulse(rho, hilbert, levels=(0, level))
        traj = evolve(
            h,
            collapse,
            rho,
            t_grid,
            rtol=spec.engine.rtol,
            atol=spec.engine.atol,
            method=spec.engine.method,
        )
        rho = traj.final_state
        # Recondition between cycles: symmetrize and renormalize so solver
        # round-off cannot accumulate across hundreds of chained runs.
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        pops = traj.qubit_populations[:, -1]
        residuals[cycle] = 1.0 - pops[0] if level == 2 else pops[1]

    burn_in = min(10, reps // 5)
    slope, ci = _drift_statistics(residuals[burn_in:])
    return RepeatedResetResult(
        residuals=residuals,
        cycle_duration=spec.duration,
        slope=slope,
        slope_ci=ci,
        burn_in=burn_in,
        metadata=_metadata(spec, {"repetitions": reps, "burn_in": burn_in}),
    )


def _drift_statistics(residuals: np.ndarray) -> tuple[float, tuple[float, float]]:
    """OLS slope of residual vs cycle with a 95% confidence interval."""
    n = residuals.size
    if n < 3:
        return 0.0, (0.0, 0.0)
    x = np.arange(n, dtype=float)
    x_c = x - x.mean()
    y_c = residuals - residuals.mean()
    sxx = float(x_c @ x_c)
    slope = float(x_c @ y_c) / sxx
    resid = y_c - slope * x_c
    dof = n - 2
    var = float(resid @ resid) / dof
    se = math.sqrt(var / sxx)
    half = float(student_t.ppf(0.975, dof)) * se
    return slope, (slope - half, slope + half)


def rethermalization(spec: ExperimentSpec) -> RethermalizationResult:
    """Post-reset relaxation toward the thermal steady state.

    Follows the two-level rate picture (the protocol's own model for this
    stage): the engine's unfiltered resonator would add a spurious Purcell
    channel that the real device's Purcell filter suppresses.
    """
    if spec.kind != "rethermalization":
        raise DomainError("spec.kind must be rethermalization")
    thermal = spec.device.thermal
    if thermal.gamma_up + thermal.gamma_down <= 0:
        raise DomainError("rethermalization requires thermal rates")

    model = RateModel(gamma_up=thermal.gamma_up, gamma_down=thermal.gamma_down)
    t = np.linspace(0.0, spec.duration, spec.sample_points)
    p_e = model.population(t, spec.initial_excited_population)

    amp, rate, offset = fit_exponential(t, p_e)
    return RethermalizationResult(
        t=t,
        p_e=p_e,
        fitted_rate=rate,
        fitted_time_constant=1.0 / rate,
        asymptote=offset,
        metadata=_metadata(
            spec,
            {
                "gamma_total": model.total,
                "steady_state": model.steady_state(),
                "fit_amplitude": amp,
            },
        ),
    )


# ---------------------------------------------------------------------------
# Strip detection on scan grids.
# ---------------------------------------------------------------------------


@dataclass
class Strip:
    """One below-threshold strip of a scan map."""

    cells: list[tuple[int, int]]
    center_zero_amplitude: float  # rad/s, extrapolated to vanishing amplitude
    column_centers: list[tuple[float, float]]  # (amplitude, center rad/s)
    order: int | None = None


def amplitude_shift_function(transmon, park_flux: float = 0.0):
    """Mean qubit-frequency shift vs single-tone amplitude (rad/s).

    Used as the extrapolation regressor for strip centers: strips track
    the shifted mean detuning, so fitting centers against this shift (and
    reading off the intercept) removes the quartic bias a plain
    quadratic-in-amplitude fit would leave.
    """
    w0 = qubit_frequency(transmon, park_flux)
    probe_omega = 2.0 * math.pi * 250e6
    cache: dict[float, float] = {}

    def shift(amplitude: float) -> float:
        if amplitude not in cache:
            if amplitude <= 0:
                cache[amplitude] = 0.0
            else:
                dec = fourier_expand(
                    transmon,
                    FluxDrive(
                        park_flux,
                        (Tone(amplitude, probe_omega, SINE_PHASE),),
                        1e-6,
                    ),
                )
                cache[amplitude] = w0 - dec.omega_bar
        return cache[amplitude]

    return shift


def detect_strips(
    grid: ScanGrid,
    *,
    observable: str = "p_e",
    threshold: float = 0.5,
    min_cells: int = 2,
    merge_iterations: int = 2,
    shift_regressor=None,
) -> list[Strip]:
    """Strips of cells below `threshold`, with sub-cell center extrapolation.

    Components are labeled on a dilated copy of the thresholded mask so a
    strip whose track jumps a cell between amplitude columns stays one
    component.  Per-column centers come from a three-point parabola through
    the column minimum; the zero-amplitude center is the intercept of a
    linear fit against `shift_regressor(amplitude)` (default: amplitude
    squared, the small-drive limit of the mean-frequency shift).
    """
    values = grid.observable(observable)
    mask = (values < threshold) & grid.success
    if merge_iterations > 0:
        merged = ndimage.binary_dilation(
            mask, structure=np.ones((3, 3), dtype=bool), iterations=merge_iterations
        )
    else:
        merged = mask
    labels, count = ndimage.label(merged, structure=np.ones((3, 3), dtype=int))
    amplitudes = np.asarray(grid.x.values)
    freqs = np.asarray(grid.y.values)
    spacing = float(np.min(np.diff(freqs))) if freqs.size > 1 else 0.0
    if shift_regressor is None:
        shift_regressor = lambda a: a * a  # noqa: E731

    strips = []
    for lab in range(1, count + 1):
        cells = [tuple(c) for c in np.argwhere((labels == lab) & mask)]
        if len(cells) < min_cells:
            continue
        by_col: dict[int, list[int]] = {}
        for i, j in cells:
            by_col.setdefault(j, []).append(i)
        column_centers = []
        for j, rows in sorted(by_col.items()):
            if amplitudes[j] <= 0:
                continue
            imin = min(rows, key=lambda i: values[i, j])
            if imin == 0 or imin == freqs.size - 1:
                continue  # clipped at the scan edge; unusable for the fit
            left, mid, right = values[imin - 1, j], values[imin, j], values[imin + 1, j]
            curv = left - 2 * mid + right
            offset = 0.5 * (left - right) / curv if curv > 0 else 0.0
            offset = max(-0.5, min(0.5, offset))
            column_centers.append((amplitudes[j], freqs[imin] + offset * spacing))
        if not column_centers:
            continue
        if len(column_centers) >= 2:
            x = np.array([shift_regressor(a) for a, _ in column_centers])
            c = np.array([c for _, c in column_centers])
            center0 = float(np.polyfit(x, c, 1)[1])
        else:
            center0 = column_centers[0][1]
        strips.append(
            Strip(
                cells=cells,
                center_zero_amplitude=center0,
                column_centers=column_centers,
            )
        )
    strips.sort(key=lambda s: -s.center_zero_amplitude)
    return strips


def assign_strip_orders(
    strips: list[Strip], delta_bar: float, alpha: int = 2, max_order: int = 6
) -> None:
    """Label each strip with the sideband order n minimizing the center error."""
    for strip in strips:
        best, err = None, math.inf
        for n in range(1, max_order + 1):
            target = -delta_bar / (n * alpha)
            rel = abs(strip.center_zero_amplitude - target) / target
            if rel < err:
                best, err = n, rel
        strip.order = best


@dataclass
class LineFamily:
    """Straight strip lines in a two-tone map, by geometric family."""

    vertical: list[float]  # constants 2*w1
    horizontal: list[float]  # constants 2*w2
    antidiagonal: list[float]  # constants w1+w2


def _line_groups(fractions: np.ndarray, positions: np.ndarray, min_excess: float):
    """Excess-weighted centroids of contiguous groups above the median baseline.

    `fractions` is the hit fraction (hits / available cells) per column,
    row, or diagonal bin; weighting by the excess over the median keeps
    broad backgrounds (crossings, weaker line families) from biasing the
    centroids.
    """
    baseline = float(np.median(fractions))
    threshold = baseline + min_excess
    out = []
    current = []
    for idx, frac in enumerate(fractions):
        if frac >= threshold:
            current.append(idx)
        elif current:
            out.append(current)
            current = []
    if current:
        out.append(current)
    centroids = []
    for group in out:
        excess = fractions[group] - baseline
        centroids.append(float((excess * positions[group]).sum() / excess.sum()))
    return centroids


def detect_two_tone_lines(
    grid: ScanGrid,
    *,
    observable: str,
    threshold: float,
    min_excess: float = 0.15,
    exclude_degenerate_band: float = 0.0,
) -> LineFamily:
    """Classify below-threshold cells into vertical/horizontal/anti-diagonal lines.

    Vertical and horizontal lines show up as columns/rows whose hit
    fraction rises at least `min_excess` above the map's median background;
    anti-diagonals as peaks in the availability-normalized w1+w2 histogram.
    Cells with |w1 - w2| below `exclude_degenerate_band` (rad/s) can be
    masked out: near-degenerate tones coadd, which shifts and smears every
    line family in that band.  Each group is reduced to its excess-weighted
    constant (2*w1, 2*w2, or w1+w2).
    """
    values = grid.observable(observable)
    w1 = np.asarray(grid.x.values)
    w2 = np.asarray(grid.y.values)
    allowed = grid.success & (
        np.abs(w1[None, :] - w2[:, None]) >= exclude_degenerate_band
    )
    mask = (values < threshold) & allowed

    def fractions(hit_counts, avail_counts):
        return hit_counts / np.maximum(avail_counts, 1.0)

    vertical = [
        2.0 * c
        for c in _line_groups(
            fractions(mask.sum(axis=0), allowed.sum(axis=0)), w1, min_excess
        )
    ]
    horizontal = [
        2.0 * c
        for c in _line_groups(
            fractions(mask.sum(axis=1), allowed.sum(axis=1)), w2, min_excess
        )
    ]

    antidiagonal = []
    if mask.any():
        step = min(
            float(np.min(np.diff(w1))) if w1.size > 1 else math.inf,
            float(np.min(np.diff(w2))) if w2.size > 1 else math.inf,
        )
        sums = w1[None, :] + w2[:, None]
        s_min = sums.min()
        nbins = int(math.ceil((sums.max() - s_min) / step)) + 1
        bin_idx = np.floor((sums - s_min) / step + 0.5).astype(int)
        counts = np.zeros(nbins)
        avail = np.zeros(nbins)
        for (i, j), b in np.ndenumerate(bin_idx):
            if allowed[i, j]:
                avail[b] += 1.0
                if mask[i, j]:
                    counts[b] += 1.0
        positions = s_min + step * np.arange(nbins)
        antidiagonal = _line_groups(fractions(counts, avail), positions, min_excess)

    return LineFamily(
        vertical=vertical, horizontal=horizontal, antidiagonal=antidiagonal
    )
