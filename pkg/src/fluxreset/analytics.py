"""Closed-form reset theory for the driven qubit-resonator pair.

The single-excitation dynamics of a sideband-resonant drive reduce to a
non-Hermitian two-level model on {|e,0>, |g,1>} whose lower-right entry
carries the resonator decay.  Everything here is an exact consequence of
that 2x2 model (eigenvalues, reset rate, piecewise population law, first
minimum), plus the Bessel-function sideband couplings that feed it and a
few small rate/fit models used by the experiment drivers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq, least_squares
from scipy.special import jv

from .device import SidebandDecomposition
from .errors import DomainError

REGIME_TOL = 1e-9  # |g| within REGIME_TOL*kappa of kappa/4 counts as critical


@dataclass(frozen=True)
class EffectiveModel:
    """Non-Hermitian two-level model: coupling |g_n|, phase beta, resonator decay."""

    g_abs: float
    kappa_r: float
    beta: float = 0.0

    def __post_init__(self):
        if self.g_abs < 0:
            raise ValueError("g_abs must be nonnegative")
        if self.kappa_r <= 0:
            raise ValueError("kappa_r must be positive")

    def hamiltonian(self) -> np.ndarray:
        g = self.g_abs * cmath.exp(1j * self.beta)
        return np.array(
            [[0.0, g], [np.conj(g), -0.5j * self.kappa_r]], dtype=complex
        )


@dataclass(frozen=True)
class DampingRegime:
    """Branch label plus the rate M entering the piecewise population law."""

    kind: str  # "overdamped" | "critical" | "underdamped"
    m: float


@dataclass(frozen=True)
class TwoToneCouplings:
    """Leading-order couplings of a multi-tone frequency modulation."""

    g0: float
    g1: dict[int, float]


@dataclass(frozen=True)
class RateModel:
    """Two-level excitation/reset rate picture (rates in 1/s)."""

    gamma_up: float
    gamma_down: float

    def __post_init__(self):
        if self.gamma_up < 0 or self.gamma_down < 0:
            raise ValueError("rates must be nonnegative")
        if self.gamma_up + self.gamma_down <= 0:
            raise ValueError("total rate must be positive")

    @property
    def total(self) -> float:
        return self.gamma_up + self.gamma_down

    def steady_state(self) -> float:
        return self.gamma_up / self.total

    def population(self, t, p0: float):
        """Relaxation of the excited population from `p0` toward steady state."""
        t = np.asarray(t, dtype=float)
        p_inf = self.steady_state()
        return p_inf + (p0 - p_inf) * np.exp(-self.total * t)


def rate_model_steady_state(model: RateModel) -> float:
    """Residual excited population once excitation and reset balance."""
    return model.steady_state()


def classify_regime(model: EffectiveModel, tol: float = REGIME_TOL) -> DampingRegime:
    """Classify the model against the critical point |g| = kappa/4."""
    g, kappa = model.g_abs, model.kappa_r
    if abs(g - kappa / 4.0) <= tol * kappa:
        return DampingRegime("critical", 0.0)
    if g < kappa / 4.0:
        return DampingRegime("overdamped", math.sqrt(kappa**2 - 16.0 * g**2) / 4.0)
    return DampingRegime("underdamped", math.sqrt(16.0 * g**2 - kappa**2) / 4.0)


def sideband_coupling(
    n: int,
    decomposition: SidebandDecomposition,
    alpha: int,
    omega_m: float,
    theta_m: float,
    g_bar: float,
    convention: str = "scaled",
) -> complex:
    """Effective coupling g_n of the n-th sideband of an alpha-th harmonic drive.

    ``g_n = g_bar * J_n(y) * exp(i*beta_n)`` with ``y = A/(alpha*omega_m)``
    and ``beta_n = n*alpha*theta_m - y*sin(alpha*theta_m)`` in the default
    ("scaled") convention, which follows from the interaction-picture
    derivation.  ``convention="unscaled"`` is a compatibility variant seen
    in the literature that drops the harmonic-order scaling of the Bessel
    argument (``y = A/omega_m``) and of the phase term
    (``beta_n = n*theta_m - A/(alpha*omega_m)*sin(alpha*theta_m)``).
    """
    if alpha not in (1, 2):
        raise DomainError("alpha must be 1 (off sweet spot) or 2 (sweet spot)")
    if omega_m <= 0:
        raise DomainError("omega_m must be positive")
    if convention not in ("scaled", "unscaled"):
        raise DomainError("convention must be 'scaled' or 'unscaled'")

    if decomposition.omega_base == 0.0:
        a = 0.0
    else:
        amp = decomposition.harmonic_at_frequency(alpha * omega_m)
        # The decomposition is phase-referenced to t=0; rotate to the drive
        # phase so the cosine coefficient comes out as a signed real.
        a = (amp * cmath.exp(-1j * alpha * theta_m)).real

    if convention == "scaled":
        y = a / (alpha * omega_m)
        beta = n * alpha * theta_m - y * math.sin(alpha * theta_m)
    else:
        y = a / omega_m
        beta = n * theta_m - a / (alpha * omega_m) * math.sin(alpha * theta_m)
    return g_bar * jv(n, y) * cmath.exp(1j * beta)


def resonance_frequency(n: int, alpha: int, delta_bar: float) -> float:
    """Modulation frequency putting the n-th sideband on the resonator."""
    if n < 1:
        raise DomainError("sideband order n must be >= 1")
    if delta_bar >= 0:
        raise DomainError(
            "mean detuning must be negative (qubit parked below the resonator)"
        )
    return -delta_bar / (n * alpha)


def effective_eigenvalues(model: EffectiveModel) -> tuple[complex, complex]:
    """Both eigenvalues of the non-Hermitian two-level Hamiltonian."""
    g, kappa = model.g_abs, model.kappa_r
    root = cmath.sqrt(g**2 - kappa**2 / 16.0)
    center = -0.25j * kappa
    return center + root, center - root


def reset_rate(model: EffectiveModel) -> float:
    """Protocol reset rate: twice the slowest eigenvalue decay rate.

    Grows with |g| in the overdamped regime and saturates at kappa/2 from
    the critical point on.
    """
    g, kappa = model.g_abs, model.kappa_r
    if g < kappa / 4.0:
        return 0.5 * (kappa - math.sqrt(kappa**2 - 16.0 * g**2))
    return 0.5 * kappa


def pe_closed_form(model: EffectiveModel, t):
    """Excited-state population for the system prepared in |e,0>.

    Piecewise in the damping regime, continuous across the critical point:

    - critical:    exp(-kt/2) * (kt/4 + 1)^2
    - underdamped: exp(-kt/2) * (cos(Mt) + k/(4M) sin(Mt))^2,  M = sqrt(16g^2-k^2)/4
    - overdamped:  same with cosh/sinh,                        M = sqrt(k^2-16g^2)/4
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("time must be nonnegative")
    g, kappa = model.g_abs, model.kappa_r
    regime = classify_regime(model)
    if regime.kind == "critical":
        p = np.exp(-0.5 * kappa * t_arr) * (0.25 * kappa * t_arr + 1.0) ** 2
    elif regime.kind == "underdamped":
        m = regime.m
        bracket = np.cos(m * t_arr) + kappa / (4.0 * m) * np.sin(m * t_arr)
        p = np.exp(-0.5 * kappa * t_arr) * bracket**2
    else:
        # Overflow-safe form of exp(-kt/2)*(cosh(Mt) + k/(4M) sinh(Mt))^2.
        m = regime.m
        c = kappa / (4.0 * m)
        up = 0.5 * (1.0 + c) * np.exp((m - 0.25 * kappa) * t_arr)
        down = 0.5 * (1.0 - c) * np.exp(-(m + 0.25 * kappa) * t_arr)
        p = (up + down) ** 2
    return float(p) if np.isscalar(t) or t_arr.ndim == 0 else p


def evolve_effective(model: EffectiveModel, initial: str, t):
    """Populations (P_e0, P_g1) under the non-Hermitian model via expm.

    `initial` is "e0" or "g1".  The populations do not sum to one; the
    deficit is the photon already emitted by the resonator.
    """
    if initial not in ("e0", "g1"):
        raise DomainError("initial state must be 'e0' or 'g1'")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise DomainError("time must be nonnegative")
    h = model.hamiltonian()
    col = 0 if initial == "e0" else 1
    p_e0 = np.empty_like(t_arr)
    p_g1 = np.empty_like(t_arr)
    for i, ti in enumerate(t_arr):
        u = expm(-1j * h * ti)
        p_e0[i] = abs(u[0, col]) ** 2
        p_g1[i] = abs(u[1, col]) ** 2
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return float(p_e0[0]), float(p_g1[0])
    return p_e0, p_g1


def first_minimum_time(model: EffectiveModel) -> float:
    """Time of the first zero of the underdamped population law."""
    regime = classify_regime(model)
    if regime.kind != "underdamped":
        raise DomainError(
            "first minimum is only defined in the underdamped regime "
            f"(model is {regime.kind})"
        )
    m = regime.m
    return (math.pi - math.atan(4.0 * m / model.kappa_r)) / m


def coupling_for_first_minimum(t_star: float, kappa_r: float) -> float:
    """Invert the first-minimum time for the coupling magnitude |g_n|.

    The map M -> t*(M) is monotone decreasing with
    pi/(2M) <= t* <= pi/M, which brackets the root.
    """
    if t_star <= 0 or kappa_r <= 0:
        raise DomainError("t_star and kappa_r must be positive")

    def mismatch(m):
        return (math.pi - math.atan(4.0 * m / kappa_r)) / m - t_star

    m = brentq(mismatch, math.pi / (2.0 * t_star), math.pi / t_star, xtol=1e-30, rtol=1e-15)
    return math.sqrt(16.0 * m**2 + kappa_r**2) / 4.0


def two_tone_couplings(
    components: list[tuple[float, float]], g_bar: float
) -> TwoToneCouplings:
    """Leading-order couplings for a frequency modulation with several tones.

    `components` lists (amplitude, angular frequency) of the qubit-frequency
    Fourier terms.  The carrier keeps ``g0 = g_bar * prod_k J0(A_k/w_k)``;
    each component k contributes a first-order sideband
    ``g_bar * J1(A_k/w_k) * prod_{m != k} J0(A_m/w_m)``.
    """
    for _, omega in components:
        if omega <= 0:
            raise DomainError("component frequencies must be positive")
    y = [a / w for a, w in components]
    j0 = [float(jv(0, yk)) for yk in y]
    g0 = g_bar * math.prod(j0)
    g1 = {}
    for k, yk in enumerate(y):
        rest = math.prod(j0[m] for m in range(len(y)) if m != k)
        g1[k] = g_bar * float(jv(1, yk)) * rest
    return TwoToneCouplings(g0=g0, g1=g1)


def dispersive_shift(g_qr: float, delta: float, eta: float) -> float:
    """Dispersive shift chi = g^2 / (Delta * (1 + Delta/eta))."""
    if delta == 0:
        raise DomainError("dispersive shift undefined at qubit-resonator resonance")
    factor = 1.0 + delta / eta
    if factor == 0:
        raise DomainError(
            "dispersive shift undefined when the resonator straddles the e-f transition"
        )
    return g_qr**2 / (delta * factor)


def thermal_dephasing(n_bar: float, kappa: float, chi: float) -> float:
    """Dephasing rate from thermal resonator photons: n*kappa*chi^2/(chi^2+kappa^2)."""
    if n_bar < 0:
        raise DomainError("mean photon number must be nonnegative")
    denom = chi**2 + kappa**2
    if denom == 0:
        return 0.0
    return n_bar * kappa * chi**2 / denom


def three_level_decay(
    t,
    gamma_fe: float,
    gamma_eg: float,
    *,
    gamma_fg: float = 0.0,
    gamma_ge: float = 0.0,
    gamma_ef: float = 0.0,
    initial: tuple[float, float, float] = (0.0, 0.0, 1.0),
):
    """Populations (P_g, P_e, P_f) of the sequential three-level cascade.

    Default flow is f -> e -> g; a direct f -> g channel and thermal
    up-rates are optional.  Solved exactly through the matrix exponential
    of the rate generator, so populations sum to one.
    """
    rates = (gamma_fe, gamma_eg, gamma_fg, gamma_ge, gamma_ef)
    if any(r < 0 for r in rates):
        raise DomainError("rates must be nonnegative")
    q = np.array(
        [
            [-gamma_ge, gamma_eg, gamma_fg],
            [gamma_ge, -(gamma_eg + gamma_ef), gamma_fe],
            [0.0, gamma_ef, -(gamma_fe + gamma_fg)],
        ]
    )
    p0 = np.asarray(initial, dtype=float)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty((3, t_arr.size))
    for i, ti in enumerate(t_arr):
        out[:, i] = expm(q * ti) @ p0
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return float(out[0, 0]), float(out[1, 0]), float(out[2, 0])
    return out[0], out[1], out[2]


def ramsey_beating(
    t,
    t2: float,
    a1: float,
    omega1: float,
    a2: float,
    omega2: float,
    phi1: float = 0.0,
    offset: float = 0.0,
):
    """Two-frequency damped Ramsey fringe model (both terms share phi1)."""
    if t2 <= 0:
        raise DomainError("T2 must be positive")
    t_arr = np.asarray(t, dtype=float)
    signal = (
        np.exp(-t_arr / t2)
        * (a1 * np.cos(omega1 * t_arr + phi1) + a2 * np.cos(omega2 * t_arr + phi1))
        + offset
    )
    return float(signal) if np.isscalar(t) or t_arr.ndim == 0 else signal


def spam_rescale(p_e, lam: float, mu: float):
    """Affine readout map applied to a model population when fitting data."""
    return lam * p_e + mu


# ---------------------------------------------------------------------------
# Least-squares helpers used when matching traces against the closed forms.
# ---------------------------------------------------------------------------


def fit_reset_trace(
    t,
    signal,
    g_guess: float,
    kappa_guess: float,
    *,
    fit_spam: bool = True,
):
    """Fit the closed-form population law (plus affine readout) to a trace.

    Returns a dict with g_abs, kappa_r, lam, mu.  With ``fit_spam=False``
    the readout map is pinned to the identity.
    """
    t = np.asarray(t, dtype=float)
    signal = np.asarray(signal, dtype=float)

    def residual(x):
        g, kappa = x[0], x[1]
        lam, mu = (x[2], x[3]) if fit_spam else (1.0, 0.0)
        model = EffectiveModel(g_abs=g, kappa_r=kappa)
        return lam * pe_closed_form(model, t) + mu - signal

    x0 = [g_guess, kappa_guess] + ([1.0, 0.0] if fit_spam else [])
    lower = [0.0, 1e-3 * kappa_guess] + ([0.0, -0.5] if fit_spam else [])
    upper = [np.inf, 1e3 * kappa_guess] + ([2.0, 0.5] if fit_spam else [])
    res = least_squares(residual, x0, bounds=(lower, upper), xtol=1e-14, ftol=1e-14)
    lam, mu = (res.x[2], res.x[3]) if fit_spam else (1.0, 0.0)
    return {"g_abs": res.x[0], "kappa_r": res.x[1], "lam": lam, "mu": mu}


def fit_exponential(t, y):
    """Fit y = offset + amplitude*exp(-rate*t); returns (amplitude, rate, offset)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    offset0 = float(y[-1])
    amp0 = float(y[0] - offset0)
    span = t[-1] - t[0] if t[-1] > t[0] else 1.0
    rate0 = 1.0 / span

    def residual(x):
        return x[2] + x[0] * np.exp(-x[1] * t) - y

    res = least_squares(
        residual,
        [amp0 if amp0 != 0 else 1.0, rate0, offset0],
        xtol=1e-14,
        ftol=1e-14,
    )
    return res.x[0], res.x[1], res.x[2]


def fit_cascade(t, p_g, p_e, p_f, gamma_fe_guess: float, gamma_eg_guess: float):
    """Fit the two cascade rates to (P_g, P_e, P_f) series; returns (g_fe, g_eg)."""
    t = np.asarray(t, dtype=float)
    initial = (float(p_g[0]), float(p_e[0]), float(p_f[0]))

    def residual(x):
        pg, pe, pf = three_level_decay(t, x[0], x[1], initial=initial)
        return np.concatenate([pg - p_g, pe - p_e, pf - p_f])

    res = least_squares(
        residual,
        [gamma_fe_guess, gamma_eg_guess],
        bounds=([0.0, 0.0], [np.inf, np.inf]),
        xtol=1e-14,
        ftol=1e-14,
    )
    return res.x[0], res.x[1]


def fit_ramsey_beating(t, y, guess: dict):
    """Fit the two-frequency Ramsey model; `guess` and result share keys
    (t2, a1, omega1, a2, omega2, phi1, offset)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keys = ("t2", "a1", "omega1", "a2", "omega2", "phi1", "offset")

    def residual(x):
        return ramsey_beating(t, *x) - y

    res = least_squares(residual, [guess[k] for k in keys], xtol=1e-14, ftol=1e-14)
    return dict(zip(keys, res.x))
