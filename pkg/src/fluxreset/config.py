"""Run configuration: YAML ingestion, validation, and unit conversion.

Config files speak GHz/MHz/kHz, ns, and flux-quantum fractions; everything
internal is SI angular frequency / seconds / 1/s.  Conversion happens only
here.  Parsing is strict: unknown keys are rejected and every error names
the offending ``block.key`` path.
"""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass

import yaml

from .device import (
    CouplingSpec,
    DeviceSpec,
    OutputFilter,
    ResonatorSpec,
    ThermalSpec,
    Tone,
    TransmonSpec,
)
from .errors import ConfigError
from .experiments import EngineSettings, ExperimentSpec
from .units import ghz_to_rad, inverse_ns_rate, khz_rate, mhz_to_rad, ns_to_s

EXPERIMENT_KINDS = (
    "single_tone_scan",
    "two_tone_scan",
    "time_trace",
    "two_tone_trace",
    "repeated_reset",
    "rethermalization",
)

_SINE = -math.pi / 2.0


def _check_mapping(value, path):
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return value


def _no_unknown(d: dict, allowed: set[str], path: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _get(d: dict, key: str, path: str, kind, required=True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: required key missing")
        return default
    value = d[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}.{key}: expected a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}.{key}: expected an integer")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}.{key}: expected a boolean")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}.{key}: expected a string")
        return value
    return value


def _positive(value: float, path: str) -> float:
    if value <= 0:
        raise ConfigError(f"{path}: must be positive")
    return value


@dataclass(frozen=True)
class TransmonConfig:
    omega_max_ghz: float
    anharmonicity_mhz: float
    flux_validity: float = 0.45


@dataclass(frozen=True)
class ResonatorConfig:
    omega_ghz: float
    kappa_inverse_ns: float
    fock_cutoff: int = 3


@dataclass(frozen=True)
class CouplingConfig:
    g_mhz: float
    g_bar_mhz: float | None = None


@dataclass(frozen=True)
class ThermalConfig:
    gamma_up_khz: float = 0.0
    gamma_down_khz: float = 0.0


@dataclass(frozen=True)
class FilterConfig:
    kind: str = "none"
    sample_rate_gsps: float | None = None
    pole_mhz: float | None = None


@dataclass(frozen=True)
class ToneConfig:
    amplitude: float
    frequency_mhz: float
    phase: float = _SINE


@dataclass(frozen=True)
class ScanRange:
    start: float
    stop: float
    points: int

    def values(self) -> tuple[float, ...]:
        if self.points == 1:
            return (self.start,)
        step = (self.stop - self.start) / (self.points - 1)
        return tuple(self.start + i * step for i in range(self.points))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    duration_ns: float
    initial_state: str
    park_flux: float = 0.0
    filter: FilterConfig = FilterConfig()
    tones: tuple[ToneConfig, ...] = ()
    amplitude_scan: ScanRange | None = None
    frequency_scan_mhz: ScanRange | None = None
    frequency2_scan_mhz: ScanRange | None = None
    scan_amplitude: float = 0.0
    scan_amplitude2: float | None = None
    sample_points: int = 201
    repetitions: int = 1
    initial_excited_population: float = 0.0


@dataclass(frozen=True)
class EngineConfig:
    qubit_levels: int
    fock_cutoff: int
    frame: str = "resonator_rotating"
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "auto"
    dressed_frequencies: bool = True


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class RunConfig:
    transmon: TransmonConfig
    resonator: ResonatorConfig
    coupling: CouplingConfig
    thermal: ThermalConfig
    experiment: ExperimentConfig
    engine: EngineConfig
    output: OutputConfig

    def device(self) -> DeviceSpec:
        return DeviceSpec(
            transmon=TransmonSpec(
                omega_max=ghz_to_rad(self.transmon.omega_max_ghz),
                eta=mhz_to_rad(self.transmon.anharmonicity_mhz),
                flux_validity=self.transmon.flux_validity,
            ),
            resonator=ResonatorSpec(
                omega_r=ghz_to_rad(self.resonator.omega_ghz),
                kappa_r=inverse_ns_rate(self.resonator.kappa_inverse_ns),
                fock_cutoff=self.resonator.fock_cutoff,
            ),
            coupling=CouplingSpec(
                g_qr=mhz_to_rad(self.coupling.g_mhz),
                g_bar=(
                    mhz_to_rad(self.coupling.g_bar_mhz)
                    if self.coupling.g_bar_mhz is not None
                    else None
                ),
            ),
            thermal=ThermalSpec(
                gamma_up=khz_rate(self.thermal.gamma_up_khz),
                gamma_down=khz_rate(self.thermal.gamma_down_khz),
            ),
        )

    def output_filter(self) -> OutputFilter:
        f = self.experiment.filter
        if f.kind == "none":
            return OutputFilter()
        return OutputFilter(
            kind=f.kind,
            sample_rate=f.sample_rate_gsps * 1e9,
            pole_frequency=f.pole_mhz * 1e6,
        )

    def engine_settings(self) -> EngineSettings:
        return EngineSettings(
            qubit_levels=self.engine.qubit_levels,
            fock_cutoff=self.engine.fock_cutoff,
            frame=self.engine.frame,
            rtol=self.engine.rtol,
            atol=self.engine.atol,
            method=self.engine.method,
            dressed_frequencies=self.engine.dressed_frequencies,
        )

    def experiment_spec(self) -> ExperimentSpec:
        exp = self.experiment
        tones = tuple(
            Tone(
                amplitude=t.amplitude,
                omega=mhz_to_rad(t.frequency_mhz),
                phase=t.phase,
            )
            for t in exp.tones
        )
        amplitudes = exp.amplitude_scan.values() if exp.amplitude_scan else ()
        freqs = (
            tuple(mhz_to_rad(f) for f in exp.frequency_scan_mhz.values())
            if exp.frequency_scan_mhz
            else ()
        )
        freqs2 = (
            tuple(mhz_to_rad(f) for f in exp.frequency2_scan_mhz.values())
            if exp.frequency2_scan_mhz
            else ()
        )
        return ExperimentSpec(
            kind=exp.kind,
            device=self.device(),
            duration=ns_to_s(exp.duration_ns),
            initial_state=exp.initial_state,
            park_flux=exp.park_flux,
            filter=self.output_filter(),
            tones=tones,
            amplitudes=amplitudes,
            frequencies=freqs,
            frequencies2=freqs2,
            scan_amplitude=exp.scan_amplitude,
            scan_amplitude2=exp.scan_amplitude2,
            sample_points=exp.sample_points,
            repetitions=exp.repetitions,
            initial_excited_population=exp.initial_excited_population,
            engine=self.engine_settings(),
        )

    def to_dict(self) -> dict:
        """Config as a plain dict mirroring the file layout, defaults expanded."""
        d = asdict(self)
        return {
            "device": {
                "transmon": d["transmon"],
                "resonator": d["resonator"],
                "coupling": d["coupling"],
                "thermal": d["thermal"],
            },
            "experiment": {
                **d["experiment"],
                "tones": [asdict(t) for t in self.experiment.tones],
            },
            "engine": d["engine"],
            "output": {**d["output"], "formats": list(self.output.formats)},
        }


def _parse_transmon(d, path="device.transmon") -> TransmonConfig:
    _check_mapping(d, path)
    _no_unknown(d, {"omega_max_ghz", "anharmonicity_mhz", "flux_validity"}, path)
    omega = _positive(_get(d, "omega_max_ghz", path, float), f"{path}.omega_max_ghz")
    eta = _get(d, "anharmonicity_mhz", path, float)
    if eta >= 0:
        raise ConfigError(f"{path}.anharmonicity_mhz: must be negative for a transmon")
    validity = _get(d, "flux_validity", path, float, required=False, default=0.45)
    if not 0 < validity <= 0.5:
        raise ConfigError(f"{path}.flux_validity: must lie in (0, 0.5]")
    return TransmonConfig(omega, eta, validity)


def _parse_resonator(d, path="device.resonator") -> ResonatorConfig:
    _check_mapping(d, path)
    _no_unknown(d, {"omega_ghz", "kappa_inverse_ns", "fock_cutoff"}, path)
    omega = _positive(_get(d, "omega_ghz", path, float), f"{path}.omega_ghz")
    kappa_inv = _positive(
        _get(d, "kappa_inverse_ns", path, float), f"{path}.kappa_inverse_ns"
    )
    fock = _get(d, "fock_cutoff", path, int, required=False, default=3)
    if fock < 2:
        raise ConfigError(f"{path}.fock_cutoff: must be at least 2")
    return ResonatorConfig(omega, kappa_inv, fock)


def _parse_coupling(d, path="device.coupling") -> CouplingConfig:
    _check_mapping(d, path)
    _no_unknown(d, {"g_mhz", "g_bar_mhz"}, path)
    g = _positive(_get(d, "g_mhz", path, float), f"{path}.g_mhz")
    g_bar = _get(d, "g_bar_mhz", path, float, required=False)
    if g_bar is not None:
        _positive(g_bar, f"{path}.g_bar_mhz")
    return CouplingConfig(g, g_bar)


def _parse_thermal(d, path="device.thermal") -> ThermalConfig:
    if d is None:
        return ThermalConfig()
    _check_mapping(d, path)
    _no_unknown(d, {"gamma_up_khz", "gamma_down_khz"}, path)
    up = _get(d, "gamma_up_khz", path, float, required=False, default=0.0)
    down = _get(d, "gamma_down_khz", path, float, required=False, default=0.0)
    if up < 0 or down < 0:
        raise ConfigError(f"{path}: rates must be nonnegative")
    return ThermalConfig(up, down)


def _parse_filter(d, path="experiment.filter") -> FilterConfig:
    if d is None:
        return FilterConfig()
    _check_mapping(d, path)
    _no_unknown(d, {"kind", "sample_rate_gsps", "pole_mhz"}, path)
    kind = _get(d, "kind", path, str, required=False, default="none")
    if kind == "none":
        _no_unknown(d, {"kind"}, path)
        return FilterConfig()
    if kind != "zero_order_hold_plus_pole":
        raise ConfigError(
            f"{path}.kind: must be 'none' or 'zero_order_hold_plus_pole'"
        )
    rate = _positive(
        _get(d, "sample_rate_gsps", path, float), f"{path}.sample_rate_gsps"
    )
    pole = _positive(_get(d, "pole_mhz", path, float), f"{path}.pole_mhz")
    return FilterConfig(kind, rate, pole)


def _parse_tone(d, path) -> ToneConfig:
    _check_mapping(d, path)
    _no_unknown(d, {"amplitude", "frequency_mhz", "phase"}, path)
    amp = _get(d, "amplitude", path, float)
    if amp < 0:
        raise ConfigError(f"{path}.amplitude: must be nonnegative")
    freq = _positive(_get(d, "frequency_mhz", path, float), f"{path}.frequency_mhz")
    phase = d.get("phase", "sine")
    if phase == "sine":
        phase_val = _SINE
    elif phase == "cosine":
        phase_val = 0.0
    elif isinstance(phase, (int, float)) and not isinstance(phase, bool):
        phase_val = float(phase)
    else:
        raise ConfigError(f"{path}.phase: expected 'sine', 'cosine', or radians")
    return ToneConfig(amp, freq, phase_val)


def _parse_scan_range(d, path) -> ScanRange:
    _check_mapping(d, path)
    _no_unknown(d, {"start", "stop", "points"}, path)
    start = _get(d, "start", path, float)
    stop = _get(d, "stop", path, float)
    points = _get(d, "points", path, int)
    if points < 1:
        raise ConfigError(f"{path}.points: must be at least 1")
    if stop < start:
        raise ConfigError(f"{path}: stop must be >= start")
    return ScanRange(start, stop, points)


_DEFAULT_INITIAL = {
    "single_tone_scan": "e",
    "two_tone_scan": "f",
    "time_trace": "e",
    "two_tone_trace": "f",
    "repeated_reset": "e",
    "rethermalization": "g",
}

_EXPERIMENT_KEYS = {
    "kind",
    "duration_ns",
    "initial_state",
    "park_flux",
    "filter",
    "tones",
    "amplitude_scan",
    "frequency_scan_mhz",
    "frequency2_scan_mhz",
    "scan_amplitude",
    "scan_amplitude2",
    "sample_points",
    "repetitions",
    "initial_excited_population",
}


def _parse_experiment(d, path="experiment") -> ExperimentConfig:
    _check_mapping(d, path)
    _no_unknown(d, _EXPERIMENT_KEYS, path)
    kind = _get(d, "kind", path, str)
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"{path}.kind: must be one of {EXPERIMENT_KINDS}")
    duration = _positive(_get(d, "duration_ns", path, float), f"{path}.duration_ns")
    initial = _get(
        d, "initial_state", path, str, required=False, default=_DEFAULT_INITIAL[kind]
    )
    if initial not in ("g", "e", "f"):
        raise ConfigError(f"{path}.initial_state: must be g, e, or f")
    park = _get(d, "park_flux", path, float, required=False, default=0.0)
    filt = _parse_filter(d.get("filter"), f"{path}.filter")

    tones_raw = d.get("tones", [])
    if not isinstance(tones_raw, list):
        raise ConfigError(f"{path}.tones: expected a list")
    tones = tuple(
        _parse_tone(t, f"{path}.tones[{i}]") for i, t in enumerate(tones_raw)
    )

    amp_scan = (
        _parse_scan_range(d["amplitude_scan"], f"{path}.amplitude_scan")
        if "amplitude_scan" in d
        else None
    )
    if amp_scan and amp_scan.start < 0:
        raise ConfigError(f"{path}.amplitude_scan.start: must be nonnegative")
    freq_scan = (
        _parse_scan_range(d["frequency_scan_mhz"], f"{path}.frequency_scan_mhz")
        if "frequency_scan_mhz" in d
        else None
    )
    if freq_scan and freq_scan.start <= 0:
        raise ConfigError(f"{path}.frequency_scan_mhz.start: must be positive")
    freq2_scan = (
        _parse_scan_range(d["frequency2_scan_mhz"], f"{path}.frequency2_scan_mhz")
        if "frequency2_scan_mhz" in d
        else None
    )
    if freq2_scan and freq2_scan.start <= 0:
        raise ConfigError(f"{path}.frequency2_scan_mhz.start: must be positive")

    scan_amp = _get(d, "scan_amplitude", path, float, required=False, default=0.0)
    scan_amp2 = _get(d, "scan_amplitude2", path, float, required=False)
    sample_points = _get(d, "sample_points", path, int, required=False, default=201)
    if sample_points < 2:
        raise ConfigError(f"{path}.sample_points: must be at least 2")
    repetitions = _get(d, "repetitions", path, int, required=False, default=1)
    if repetitions < 1:
        raise ConfigError(f"{path}.repetitions: must be at least 1")
    p0 = _get(
        d, "initial_excited_population", path, float, required=False, default=0.0
    )
    if not 0 <= p0 <= 1:
        raise ConfigError(f"{path}.initial_excited_population: must lie in [0, 1]")

    cfg = ExperimentConfig(
        kind=kind,
        duration_ns=duration,
        initial_state=initial,
        park_flux=park,
        filter=filt,
        tones=tones,
        amplitude_scan=amp_scan,
        frequency_scan_mhz=freq_scan,
        frequency2_scan_mhz=freq2_scan,
        scan_amplitude=scan_amp,
        scan_amplitude2=scan_amp2,
        sample_points=sample_points,
        repetitions=repetitions,
        initial_excited_population=p0,
    )

    # Kind-specific completeness checks.
    if kind == "single_tone_scan" and (amp_scan is None or freq_scan is None):
        raise ConfigError(
            f"{path}: single_tone_scan requires amplitude_scan and frequency_scan_mhz"
        )
    if kind == "two_tone_scan":
        if freq_scan is None or freq2_scan is None:
            raise ConfigError(
                f"{path}: two_tone_scan requires frequency_scan_mhz and "
                "frequency2_scan_mhz"
            )
        if scan_amp <= 0:
            raise ConfigError(f"{path}.scan_amplitude: required and must be positive")
    if kind in ("time_trace", "two_tone_trace", "repeated_reset") and not tones:
        raise ConfigError(f"{path}.tones: required for {kind}")
    return cfg


def _parse_engine(d, kind: str, resonator: ResonatorConfig, path="engine") -> EngineConfig:
    defaults_levels = 3 if kind in ("two_tone_scan", "two_tone_trace") else 2
    if d is None:
        return EngineConfig(qubit_levels=defaults_levels, fock_cutoff=resonator.fock_cutoff)
    _check_mapping(d, path)
    _no_unknown(
        d,
        {
            "qubit_levels",
            "fock_cutoff",
            "frame",
            "rtol",
            "atol",
            "method",
            "dressed_frequencies",
        },
        path,
    )
    levels = _get(d, "qubit_levels", path, int, required=False, default=defaults_levels)
    if levels not in (2, 3):
        raise ConfigError(f"{path}.qubit_levels: must be 2 or 3")
    fock = _get(d, "fock_cutoff", path, int, required=False, default=resonator.fock_cutoff)
    if fock < 2:
        raise ConfigError(f"{path}.fock_cutoff: must be at least 2")
    frame = _get(
        d, "frame", path, str, required=False, default="resonator_rotating"
    )
    if frame not in ("lab", "resonator_rotating"):
        raise ConfigError(f"{path}.frame: must be 'lab' or 'resonator_rotating'")
    rtol = _positive(
        _get(d, "rtol", path, float, required=False, default=1e-8), f"{path}.rtol"
    )
    atol = _positive(
        _get(d, "atol", path, float, required=False, default=1e-10), f"{path}.atol"
    )
    method = _get(d, "method", path, str, required=False, default="auto")
    if method not in ("auto", "dp54", "DOP853", "RK45"):
        raise ConfigError(f"{path}.method: must be auto, dp54, DOP853, or RK45")
    dressed = _get(d, "dressed_frequencies", path, bool, required=False, default=True)
    return EngineConfig(levels, fock, frame, rtol, atol, method, dressed)


def _parse_output(d, path="output") -> OutputConfig:
    if d is None:
        return OutputConfig()
    _check_mapping(d, path)
    _no_unknown(d, {"directory", "formats"}, path)
    directory = _get(d, "directory", path, str, required=False, default="out")
    formats_raw = d.get("formats", ["csv"])
    if not isinstance(formats_raw, list) or not formats_raw:
        raise ConfigError(f"{path}.formats: expected a non-empty list")
    for f in formats_raw:
        if f not in ("csv", "json"):
            raise ConfigError(f"{path}.formats: entries must be 'csv' or 'json'")
    return OutputConfig(directory, tuple(formats_raw))


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        raw = yaml.safe_load(io.StringIO(text))
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = (
            f" at line {mark.line + 1}, column {mark.column + 1}"
            if mark is not None
            else ""
        )
        raise ConfigError(f"YAML parse error{where}: {exc.problem}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a mapping")
    _no_unknown(raw, {"device", "experiment", "engine", "output"}, "top level")
    if "device" not in raw:
        raise ConfigError("device: required block missing")
    if "experiment" not in raw:
        raise ConfigError("experiment: required block missing")

    device_raw = _check_mapping(raw["device"], "device")
    _no_unknown(device_raw, {"transmon", "resonator", "coupling", "thermal"}, "device")
    for block in ("transmon", "resonator", "coupling"):
        if block not in device_raw:
            raise ConfigError(f"device.{block}: required block missing")
    transmon = _parse_transmon(device_raw["transmon"])
    resonator = _parse_resonator(device_raw["resonator"])
    coupling = _parse_coupling(device_raw["coupling"])
    thermal = _parse_thermal(device_raw.get("thermal"))

    experiment = _parse_experiment(raw["experiment"])
    engine = _parse_engine(raw.get("engine"), experiment.kind, resonator)
    output = _parse_output(raw.get("output"))

    cfg = RunConfig(transmon, resonator, coupling, thermal, experiment, engine, output)
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: RunConfig) -> None:
    validity = cfg.transmon.flux_validity
    exp = cfg.experiment
    park = abs(exp.park_flux)
    if exp.amplitude_scan is not None:
        if park + exp.amplitude_scan.stop > validity:
            raise ConfigError(
                "experiment.amplitude_scan: range exceeds the transmon flux "
                f"validity window ({validity})"
            )
    total_amp = exp.scan_amplitude + (
        exp.scan_amplitude2 if exp.scan_amplitude2 is not None else exp.scan_amplitude
    )
    if exp.kind == "two_tone_scan" and park + total_amp > validity:
        raise ConfigError(
            "experiment.scan_amplitude: amplitudes exceed the transmon flux "
            f"validity window ({validity})"
        )
    if exp.tones and park + sum(t.amplitude for t in exp.tones) > validity:
        raise ConfigError(
            "experiment.tones: amplitudes exceed the transmon flux validity window"
        )
    if exp.kind in ("two_tone_scan", "two_tone_trace") and cfg.engine.qubit_levels != 3:
        raise ConfigError("engine.qubit_levels: two-tone experiments require 3 levels")
    if exp.kind == "rethermalization" and (
        cfg.thermal.gamma_up_khz + cfg.thermal.gamma_down_khz <= 0
    ):
        raise ConfigError("device.thermal: rethermalization requires thermal rates")
    # Oversized Hilbert spaces are rejected up front.
    if cfg.engine.qubit_levels * cfg.engine.fock_cutoff > 24:
        raise ConfigError("engine: qubit_levels * fock_cutoff exceeds the cap of 24")


def serialize_config(cfg: RunConfig) -> str:
    """Emit a YAML document that parses back to an equal RunConfig."""
    exp = cfg.experiment
    doc = {
        "device": {
            "transmon": asdict(cfg.transmon),
            "resonator": asdict(cfg.resonator),
            "coupling": {
                k: v for k, v in asdict(cfg.coupling).items() if v is not None
            },
            "thermal": asdict(cfg.thermal),
        },
        "experiment": {
            "kind": exp.kind,
            "duration_ns": exp.duration_ns,
            "initial_state": exp.initial_state,
            "park_flux": exp.park_flux,
            "sample_points": exp.sample_points,
            "repetitions": exp.repetitions,
            "initial_excited_population": exp.initial_excited_population,
            "scan_amplitude": exp.scan_amplitude,
        },
        "engine": asdict(cfg.engine),
        "output": {
            "directory": cfg.output.directory,
            "formats": list(cfg.output.formats),
        },
    }
    e = doc["experiment"]
    if exp.filter.kind != "none":
        e["filter"] = asdict(exp.filter)
    if exp.tones:
        e["tones"] = [asdict(t) for t in exp.tones]
    if exp.amplitude_scan:
        e["amplitude_scan"] = asdict(exp.amplitude_scan)
    if exp.frequency_scan_mhz:
        e["frequency_scan_mhz"] = asdict(exp.frequency_scan_mhz)
    if exp.frequency2_scan_mhz:
        e["frequency2_scan_mhz"] = asdict(exp.frequency2_scan_mhz)
    if exp.scan_amplitude2 is not None:
        e["scan_amplitude2"] = exp.scan_amplitude2
    return yaml.safe_dump(doc, sort_keys=False)
