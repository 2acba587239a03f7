"""Benchmark system models: spin-boson and a driven Frenkel exciton dimer.

Both models expose a common SystemModel container: Hamiltonian, one
dissipative coupling operator per bath, and the characteristic frequency
used by the accuracy criteria (the Rabi frequency 2 sqrt(eps^2 + V^2) for
the spin-boson model, sqrt((eps1-eps2)^2 + 4 V^2) for the dimer).

Unit conventions: all model energies are in one user-declared energy unit
with hbar = 1, so time is measured in 1/energy.  For wavenumber inputs,
1 cm^-1 corresponds to 5.3088 ps, and temperature converts through
k_B = 0.695035 cm^-1/K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

#: Time-unit conversion for wavenumber energies: one unit of 1/(cm^-1)
#: equals 5.3088 ps (hbar / (h c * 1 cm^-1)).
PS_PER_UNIT_CM = 5.3088
FS_PER_UNIT_CM = PS_PER_UNIT_CM * 1e3

#: Boltzmann constant in cm^-1 per kelvin.
KB_CM_PER_K = 0.695035

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def fs_to_unit_cm(t_fs: float) -> float:
    """Convert femtoseconds to propagation time units for cm^-1 energies."""
    return t_fs / FS_PER_UNIT_CM


def kelvin_to_beta_cm(temperature_k: float) -> float:
    """Inverse temperature in 1/cm^-1 for a temperature in kelvin."""
    if not (temperature_k > 0):
        raise ArgumentError(f"temperature must be positive, got {temperature_k}")
    return 1.0 / (KB_CM_PER_K * temperature_k)


@dataclass(frozen=True)
class SystemModel:
    """Propagation-facing system description.

    Attributes
    ----------
    hamiltonian : ndarray
        Static system Hamiltonian (drives are added separately).
    couplings : tuple of ndarray
        Dissipative coupling operator per independent bath.
    omega_s : float
        Characteristic frequency for the accuracy criteria.
    dipole_up : ndarray or None
        Excitation-raising part of the transition dipole (driven models).
    excitation_number : ndarray or None
        Diagonal excitation-counting operator (rotating-frame bookkeeping).
    labels : tuple of str
        Basis-state labels.
    """

    hamiltonian: np.ndarray
    couplings: tuple
    omega_s: float
    dipole_up: np.ndarray | None = None
    excitation_number: np.ndarray | None = None
    labels: tuple = ()

    @property
    def dimension(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def dipole(self) -> np.ndarray:
        if self.dipole_up is None:
            raise ArgumentError("model carries no transition dipole")
        return self.dipole_up + self.dipole_up.conj().T


@dataclass(frozen=True)
class SpinBosonModel:
    """Two-level system H = eps sigma_z + V sigma_x coupled through sigma_z."""

    epsilon: float
    v: float

    def __post_init__(self):
        if self.epsilon == 0 and self.v == 0:
            raise ArgumentError("epsilon and v cannot both vanish")

    @property
    def hamiltonian(self) -> np.ndarray:
        return self.epsilon * SIGMA_Z + self.v * SIGMA_X

    @property
    def coupling(self) -> np.ndarray:
        return SIGMA_Z.copy()

    @property
    def omega_s(self) -> float:
        """Rabi frequency 2 sqrt(eps^2 + V^2); equals the spectral gap of H."""
        return 2.0 * math.hypot(self.epsilon, self.v)


def build_spin_boson(epsilon: float, v: float) -> SystemModel:
    """SystemModel for the spin-boson benchmark (one bath, Q = sigma_z)."""
    model = SpinBosonModel(epsilon, v)
    return SystemModel(
        hamiltonian=model.hamiltonian,
        couplings=(model.coupling,),
        omega_s=model.omega_s,
        labels=("up", "down"),
    )


@dataclass(frozen=True)
class DimerModel:
    """Frenkel exciton dimer on the 4-state basis {g, 1, 2, f}.

    H = diag(0, eps1, eps2, eps1+eps2+u) + v (|1><2| + |2><1|); each site
    couples to its own bath through the occupation projector
    Q_j = |j><j| + |f><f| (the doubly excited state occupies both sites).
    The transition dipole raises site excitations with relative weight
    mu_ratio = mu_2z / mu_1z on site 2 (mu_1z normalized to 1).
    """

    eps1: float
    eps2: float
    v: float
    u: float
    mu_ratio: float

    @property
    def hamiltonian(self) -> np.ndarray:
        h = np.diag([0.0, self.eps1, self.eps2, self.eps1 + self.eps2 + self.u])
        h = h.astype(complex)
        h[1, 2] = h[2, 1] = self.v
        return h

    @property
    def couplings(self) -> tuple:
        q1 = np.diag([0.0, 1.0, 0.0, 1.0]).astype(complex)
        q2 = np.diag([0.0, 0.0, 1.0, 1.0]).astype(complex)
        return (q1, q2)

    @property
    def omega_s(self) -> float:
        return math.sqrt((self.eps1 - self.eps2) ** 2 + 4.0 * self.v ** 2)

    @property
    def dipole_up(self) -> np.ndarray:
        up = np.zeros((4, 4), dtype=complex)
        up[1, 0] = 1.0            # g -> 1 on site 1
        up[3, 2] = 1.0            # 2 -> f on site 1
        up[2, 0] = self.mu_ratio  # g -> 2 on site 2
        up[3, 1] = self.mu_ratio  # 1 -> f on site 2
        return up


def build_dimer(eps1: float, eps2: float, v: float, u: float,
                mu_ratio: float) -> SystemModel:
    """SystemModel for the exciton dimer (two site baths, dipole attached)."""
    model = DimerModel(eps1, eps2, v, u, mu_ratio)
    return SystemModel(
        hamiltonian=model.hamiltonian,
        couplings=model.couplings,
        omega_s=model.omega_s,
        dipole_up=model.dipole_up,
        excitation_number=np.diag([0.0, 1.0, 1.0, 2.0]).astype(complex),
        labels=("g", "1", "2", "f"),
    )


def characteristic_frequency(model: SystemModel) -> float:
    """Omega_s of a built model; input to the accuracy criteria."""
    return model.omega_s


@dataclass(frozen=True)
class GaussianPulse:
    """Transform-limited Gaussian drive pulse.

    The field amplitude envelope is
    E(t) = E_max exp(-4 ln2 (t - t0)^2 / fwhm_t^2), with fwhm_t the full
    width at half maximum of the amplitude in fs.  ``peak_rabi`` is
    mu_1z * E_max in energy units (the dipole is normalized to mu_1z = 1).
    Stating the width as an intensity FWHM instead widens the amplitude
    envelope by sqrt(2); use ``fwhm_convention="intensity"`` for that
    reading.
    """

    center_freq: float
    fwhm_t: float
    peak_rabi: float
    t0: float = 0.0
    fwhm_convention: str = "amplitude"

    def __post_init__(self):
        if not (self.fwhm_t > 0):
            raise ArgumentError(f"fwhm_t must be positive, got {self.fwhm_t}")
        if self.fwhm_convention not in ("amplitude", "intensity"):
            raise ArgumentError(
                f"unknown fwhm convention {self.fwhm_convention!r}"
            )

    @property
    def amplitude_fwhm_fs(self) -> float:
        if self.fwhm_convention == "intensity":
            return self.fwhm_t * math.sqrt(2.0)
        return self.fwhm_t

    def envelope(self, t: float, fs_per_unit: float = FS_PER_UNIT_CM) -> float:
        """mu_1z E(t) at propagation time t (internal units)."""
        tau = self.amplitude_fwhm_fs / fs_per_unit
        t0 = self.t0 / fs_per_unit
        return self.peak_rabi * math.exp(-4.0 * math.log(2.0) * (t - t0) ** 2 / tau ** 2)


class DrivenHamiltonian:
    """Time-dependent H(t) provider for a pulsed drive in rotating-wave form.

    In the lab frame,

        H(t) = H_sys - E(t)/2 (mu_up e^{-i w_c t} + mu_dn e^{+i w_c t}),

    and in the frame rotating at the pulse carrier w_c,

        H(t) = H_sys - w_c N_exc - E(t)/2 (mu_up + mu_dn),

    where N_exc counts excitations.  The two frames are related by the
    diagonal unitary e^{i w_c t N_exc}, which commutes with the site
    occupation couplings, so populations (and the dissipative dynamics)
    agree between frames.
    """

    def __init__(self, model: SystemModel, pulse: GaussianPulse,
                 frame: str = "rotating", fs_per_unit: float = FS_PER_UNIT_CM):
        if model.dipole_up is None:
            raise ArgumentError("driven propagation needs a model with a dipole")
        if frame not in ("rotating", "lab"):
            raise ArgumentError(f"unknown frame {frame!r}")
        if frame == "rotating" and model.excitation_number is None:
            raise ArgumentError("rotating frame needs an excitation-number operator")
        self.model = model
        self.pulse = pulse
        self.frame = frame
        self.fs_per_unit = fs_per_unit
        self._mu_up = model.dipole_up
        self._mu_dn = model.dipole_up.conj().T
        self._mu_total = self._mu_up + self._mu_dn
        if frame == "rotating":
            self._h_base = model.hamiltonian \
                - pulse.center_freq * model.excitation_number
        else:
            self._h_base = model.hamiltonian

    def __call__(self, t: float) -> np.ndarray:
        field = 0.5 * self.pulse.envelope(t, self.fs_per_unit)
        if self.frame == "rotating":
            return self._h_base - field * self._mu_total
        phase = np.exp(-1j * self.pulse.center_freq * t)
        return self._h_base - field * (phase * self._mu_up
                                       + np.conj(phase) * self._mu_dn)


def drive_rwa(model: SystemModel, pulse: GaussianPulse, frame: str = "rotating",
              fs_per_unit: float = FS_PER_UNIT_CM) -> DrivenHamiltonian:
    """Rotating-wave pulsed drive for a dipole-carrying model.

    With ``peak_rabi = 0`` the provider returns the bare system Hamiltonian
    (rotating frame included when selected).  Frame choice does not affect
    populations; the lab frame needs the absolute excitation energies to be
    physically meaningful, while the rotating frame only sees detunings.
    """
    return DrivenHamiltonian(model, pulse, frame=frame, fs_per_unit=fs_per_unit)
