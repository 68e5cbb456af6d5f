import math

import numpy as np
import pytest

from fluxreset import (
    CollapseSet,
    DomainError,
    FluxDrive,
    HilbertConfig,
    IntegrationError,
    Tone,
    apply_pi_pulse,
    basis_density,
    build_hamiltonian,
    evolve,
    fourier_expand,
    populations,
    qubit_frequency,
)
from fluxreset.lindblad import (
    destroy_op,
    dressed_basis_state,
    dressing_shift,
    qubit_lowering,
    validate_density_matrix,
)
from fluxreset.units import mhz_to_rad

SINE = -math.pi / 2


def single_tone_drive(amplitude, f_mhz, duration=1e-6, park=0.0):
    return FluxDrive(
        park_flux=park,
        tones=(Tone(amplitude, mhz_to_rad(f_mhz), SINE),),
        duration=duration,
    )


NO_DRIVE = FluxDrive(park_flux=0.0, tones=(), duration=50e-6)


class TestOperators:
    def test_destroy_matrix_elements(self):
        a = destroy_op(4)
        assert a[0, 1] == pytest.approx(1.0)
        assert a[1, 2] == pytest.approx(math.sqrt(2.0))
        assert a[2, 3] == pytest.approx(math.sqrt(3.0))
        assert np.count_nonzero(a) == 3

    def test_qubit_lowering_is_ladder(self):
        sm = qubit_lowering(3)
        assert sm[0, 1] == pytest.approx(1.0)
        assert sm[1, 2] == pytest.approx(math.sqrt(2.0))

    def test_collapse_operator_rates(self):
        hil = HilbertConfig(2, 2)
        ops = CollapseSet(kappa_r=4.0, gamma_down=9.0, gamma_up=16.0).operators(hil)
        assert len(ops) == 3
        norms = sorted(np.max(np.abs(op)) for op in ops)
        assert norms == pytest.approx([2.0, 3.0, 4.0])

    def test_hilbert_validation(self):
        with pytest.raises(ValueError):
            HilbertConfig(qubit_levels=4)
        with pytest.raises(ValueError):
            HilbertConfig(fock_cutoff=1)
        with pytest.raises(ValueError):
            HilbertConfig(qubit_levels=3, fock_cutoff=9)  # 27 > cap
        with pytest.raises(ValueError):
            HilbertConfig(frame="interaction")


class TestBuildHamiltonian:
    def test_flux_excursion_rejected_before_integration(self, q1):
        hil = HilbertConfig(2, 3)
        with pytest.raises(DomainError, match="validity"):
            build_hamiltonian(q1, single_tone_drive(0.46, 300.0), hil)

    @staticmethod
    def _single_excitation_gap(h):
        hm = h.h_static + h.frequency(0.0) * h.h_number
        evals, vecs = np.linalg.eigh(hm)
        nf = h.hilbert.fock_cutoff
        idx_e0 = int(np.argmax(np.abs(vecs[nf, :]) ** 2))  # |e,0>-like
        idx_g1 = int(np.argmax(np.abs(vecs[1, :]) ** 2))  # |g,1>-like
        return evals[idx_g1] - evals[idx_e0]

    def test_dressed_gap_matches_quoted_detuning(self, q1):
        # With the dressing inversion the static single-excitation splitting
        # reproduces the measured detuning up to second-order residuals.
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(q1, NO_DRIVE, hil)
        gap = self._single_excitation_gap(h)
        delta_meas = abs(qubit_frequency(q1.transmon, 0.0) - q1.resonator.omega_r)
        assert gap == pytest.approx(delta_meas, rel=1e-3)

    def test_bare_gap_without_calibration(self, q1):
        # Feeding the quoted values in as bare parameters leaves the dressed
        # gap at the exact pairwise splitting sqrt(Delta^2 + 4g^2).
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(q1, NO_DRIVE, hil, dressed_frequencies=False)
        gap = self._single_excitation_gap(h)
        delta = abs(qubit_frequency(q1.transmon, 0.0) - q1.resonator.omega_r)
        assert gap == pytest.approx(
            math.sqrt(delta**2 + 4 * q1.coupling.g_qr**2), rel=1e-12
        )

    def test_decoupled_block_diagonal_static(self, decoupled):
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(decoupled, single_tone_drive(0.05, 300.0), hil)
        rho0 = basis_density(hil, 1, 0)
        traj = evolve(h, CollapseSet(), rho0, np.linspace(0, 200e-9, 21))
        assert np.max(np.abs(traj.p_e - 1.0)) < 1e-8


class TestEvolve:
    def test_pure_relaxation(self, decoupled):
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(decoupled, NO_DRIVE, hil)
        gamma = 1e6
        t = np.linspace(0, 1e-6, 21)
        traj = evolve(h, CollapseSet(gamma_down=gamma), basis_density(hil, 1, 0), t)
        assert np.max(np.abs(traj.p_e - np.exp(-gamma * t))) < 1e-6

    def test_pure_photon_decay(self, decoupled):
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(decoupled, NO_DRIVE, hil)
        kappa = decoupled.resonator.kappa_r
        t = np.linspace(0, 200e-9, 21)
        traj = evolve(
            h, CollapseSet(kappa_r=kappa), basis_density(hil, 0, 1), t
        )
        assert np.max(np.abs(traj.mean_photons - np.exp(-kappa * t))) < 1e-6

    def test_dp54_agrees_with_scipy_reference(self, q1_cold):
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(q1_cold, single_tone_drive(0.08, 351.86), hil)
        collapse = CollapseSet(kappa_r=q1_cold.resonator.kappa_r)
        rho0 = basis_density(hil, 1, 0)
        t = np.array([0.0, 400e-9])
        fast = evolve(h, collapse, rho0, t, method="dp54")
        ref = evolve(h, collapse, rho0, t, method="DOP853")
        assert np.max(np.abs(fast.qubit_populations - ref.qubit_populations)) < 1e-6

    def test_frame_independence(self, q1_cold):
        hil_rot = HilbertConfig(2, 3, frame="resonator_rotating")
        hil_lab = HilbertConfig(2, 3, frame="lab")
        drive = single_tone_drive(0.08, 351.86, duration=150e-9)
        collapse = CollapseSet(kappa_r=q1_cold.resonator.kappa_r)
        t = np.linspace(0, 150e-9, 16)
        pops = {}
        for hil in (hil_rot, hil_lab):
            h = build_hamiltonian(q1_cold, drive, hil)
            traj = evolve(h, collapse, basis_density(hil, 1, 0), t)
            pops[hil.frame] = traj.qubit_populations
        assert np.max(np.abs(pops["lab"] - pops["resonator_rotating"])) < 1e-6

    def test_fock_cutoff_convergence(self, q1_cold):
        drive = single_tone_drive(0.08, 351.86, duration=300e-9)
        t = np.array([0.0, 300e-9])
        finals = {}
        for cutoff in (3, 4):
            hil = HilbertConfig(2, cutoff)
            h = build_hamiltonian(q1_cold, drive, hil)
            traj = evolve(
                h,
                CollapseSet(kappa_r=q1_cold.resonator.kappa_r),
                basis_density(hil, 1, 0),
                t,
            )
            finals[cutoff] = traj.qubit_populations[:, -1]
        assert np.max(np.abs(finals[3] - finals[4])) < 1e-4

    def test_conservation_metrics(self, q1):
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(q1, single_tone_drive(0.1, 365.0), hil)
        traj = evolve(
            h, CollapseSet.from_device(q1), basis_density(hil, 1, 0),
            np.linspace(0, 1e-6, 51),
        )
        assert traj.trace_error.max() <= 1e-8
        assert traj.hermiticity_error.max() <= 1e-10
        assert traj.min_eigenvalue.min() >= -1e-8
        assert np.max(np.abs(traj.qubit_populations.sum(axis=0) - 1.0)) < 1e-6

    def test_integration_failure_carries_time(self, q1):
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(q1, single_tone_drive(0.1, 365.0), hil)
        with pytest.raises(IntegrationError) as err:
            evolve(
                h,
                CollapseSet.from_device(q1),
                basis_density(hil, 1, 0),
                np.array([0.0, 1e-6]),
                max_steps=50,
            )
        assert err.value.t_reached is not None
        assert 0.0 <= err.value.t_reached < 1e-6

    def test_bad_time_grid(self, q1):
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(q1, single_tone_drive(0.1, 365.0), hil)
        rho0 = basis_density(hil, 1, 0)
        with pytest.raises(DomainError):
            evolve(h, CollapseSet(), rho0, np.array([0.0, 2e-6]))
        with pytest.raises(DomainError):
            evolve(h, CollapseSet(), rho0, np.array([0.0]))


class TestStatesAndHelpers:
    def test_basis_density(self):
        hil = HilbertConfig(2, 3)
        rho = basis_density(hil, 1, 2)
        assert rho[5, 5] == 1.0 and np.trace(rho) == 1.0
        with pytest.raises(DomainError):
            basis_density(hil, 2, 0)
        with pytest.raises(DomainError):
            basis_density(hil, 0, 3)

    def test_validate_density_matrix(self):
        hil = HilbertConfig(2, 2)
        good = basis_density(hil, 0, 0)
        validate_density_matrix(good, 4)
        bad = good.copy()
        bad[0, 1] = 0.5
        with pytest.raises(DomainError):
            validate_density_matrix(bad, 4)
        with pytest.raises(DomainError):
            validate_density_matrix(0.5 * good, 4)

    def test_pi_pulse_swaps_populations(self):
        hil = HilbertConfig(3, 2)
        rho = basis_density(hil, 0, 1)
        swapped = apply_pi_pulse(rho, hil, levels=(0, 2))
        expected = basis_density(hil, 2, 1)
        assert np.allclose(swapped, expected)

    def test_populations_accessor(self, decoupled):
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(decoupled, NO_DRIVE, hil)
        traj = evolve(
            h, CollapseSet(gamma_down=1e6), basis_density(hil, 1, 0),
            np.linspace(0, 1e-6, 5),
        )
        assert populations(traj, "qubit").shape == (2, 5)
        assert populations(traj, "photons").shape == (5,)
        with pytest.raises(DomainError):
            populations(traj, "environment")

    def test_mixed_state_populations(self, decoupled):
        hil = HilbertConfig(2, 3)
        h = build_hamiltonian(decoupled, FluxDrive(0.0, (), 1e-8), hil)
        rho0 = 0.5 * (basis_density(hil, 0, 0) + basis_density(hil, 1, 0))
        traj = evolve(h, CollapseSet(), rho0, np.array([0.0, 1e-8]))
        assert traj.p_g[-1] == pytest.approx(0.5, abs=1e-9)
        assert traj.p_e[-1] == pytest.approx(0.5, abs=1e-9)

    def test_dressed_state_overlap(self, q1):
        hil = HilbertConfig(2, 3)
        drive = single_tone_drive(0.06, 341.68)
        h = build_hamiltonian(q1, drive, hil)
        dec = fourier_expand(q1.transmon, drive)
        v = dressed_basis_state(h, dec.omega_bar, 1, 0)
        assert abs(v[hil.fock_cutoff]) ** 2 > 0.9  # dominated by bare |e,0>
        assert np.linalg.norm(v) == pytest.approx(1.0, rel=1e-12)
