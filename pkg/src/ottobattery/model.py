"""Hamiltonians, Gibbs states, and Landau-Zener data for the machine-battery setup.

The working fluid is a two-level system with a fixed tunnel splitting and a
linearly swept longitudinal field; the battery is an M-level ladder with
uniform level spacing.  The two couple through ``g * sigma_x (x) q`` during
the work strokes.  All energies are expressed in units of the battery level
spacing unless a different ``level_spacing`` is set.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import loggamma

from . import linalg

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

#: Largest joint dimension 2M the dense representation is allowed to build.
MAX_TOTAL_DIM = 4096

_STROKES = ("compression", "expansion")


@dataclass(frozen=True)
class MachineParams:
    """Physical parameters of one machine-battery configuration.

    Attributes
    ----------
    delta : float
        Tunnel splitting of the working fluid (cold-end gap is 2*delta with
        eigenvalues +-delta).
    sweep_rate : float
        Rate v of the linear field sweep during a work stroke.
    work_time : float
        Duration T1 of each work stroke.
    therm_time : float
        Duration T2 of each thermalization stroke (battery evolves freely).
    coupling : float
        Machine-battery coupling g, active only during work strokes.
    level_spacing : float
        Battery level spacing omega; the natural energy unit.
    levels : int
        Number of battery levels M.
    beta_hot, beta_cold : float
        Inverse temperatures of the hot and cold baths.
    """

    delta: float
    sweep_rate: float
    work_time: float
    therm_time: float
    coupling: float
    level_spacing: float
    levels: int
    beta_hot: float
    beta_cold: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.sweep_rate <= 0:
            raise ValueError("sweep_rate must be positive")
        if self.work_time <= 0:
            raise ValueError("work_time must be positive")
        if self.therm_time < 0:
            raise ValueError("therm_time must be non-negative")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")
        if self.level_spacing <= 0:
            raise ValueError("level_spacing must be positive")
        if self.levels < 1:
            raise ValueError("levels must be at least 1")
        if not (self.beta_cold > self.beta_hot > 0):
            raise ValueError("need beta_cold > beta_hot > 0")

    @property
    def eps_cold(self):
        """Half-splitting of the machine at the cold end of the cycle."""
        return self.delta

    @property
    def eps_hot(self):
        """Half-splitting at the hot end, sqrt(delta^2 + (v*T1)^2)."""
        return float(np.hypot(self.delta, self.sweep_rate * self.work_time))


@dataclass(frozen=True)
class LandauZenerData:
    """Transition probability, phase, and adiabaticity parameter of a sweep."""

    alpha: float
    phase: float
    delta_param: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")


def _check_stroke_time(t, p, stroke):
    if stroke not in _STROKES:
        raise ValueError(f"unknown stroke {stroke!r}")
    if t < -1e-12 or t > p.work_time * (1 + 1e-12):
        raise ValueError(f"stroke-local time {t} outside [0, {p.work_time}]")


def sweep_field(t, p, stroke):
    """Instantaneous longitudinal field xi(t) on the stroke-local clock."""
    _check_stroke_time(t, p, stroke)
    if stroke == "compression":
        return p.sweep_rate * t
    return p.sweep_rate * (p.work_time - t)


def machine_hamiltonian(t, p, stroke):
    """H_M(t) = delta*sigma_x + xi(t)*sigma_z on the stroke-local clock."""
    return p.delta * SIGMA_X + sweep_field(t, p, stroke) * SIGMA_Z


def battery_hamiltonian(p):
    """Equispaced ladder diag(0, w, 2w, ..., (M-1)w)."""
    return np.diag(p.level_spacing * np.arange(p.levels)).astype(complex)


def position_operator(m):
    """Ladder position q = sum_l sqrt(l+1)(|l><l+1| + h.c.), real tridiagonal."""
    q = np.zeros((m, m), dtype=complex)
    for l in range(m - 1):
        q[l, l + 1] = q[l + 1, l] = np.sqrt(l + 1.0)
    return q


def total_hamiltonian(t, p, stroke, coupling_on):
    """Joint 2M x 2M Hamiltonian, with or without the interaction term."""
    if 2 * p.levels > MAX_TOTAL_DIM:
        raise ValueError(
            f"joint dimension {2 * p.levels} exceeds the configured maximum {MAX_TOTAL_DIM}"
        )
    h = linalg.kron(machine_hamiltonian(t, p, stroke), np.eye(p.levels)) + linalg.kron(
        np.eye(2), battery_hamiltonian(p)
    )
    if coupling_on and p.coupling != 0.0:
        h += p.coupling * linalg.kron(SIGMA_X, position_operator(p.levels))
    return h


def gibbs_state(h, beta):
    """exp(-beta h)/Z computed in the eigenbasis of h for numerical stability."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    w, v = linalg.herm_eig(h)
    pops = np.exp(-beta * (w - w[0]))
    pops /= pops.sum()
    return (v * pops) @ v.conj().T


def landau_zener(p):
    """Transition probability and phase of one linear sweep.

    The adiabaticity parameter is delta = Delta^2 / (2 v); the probability of
    jumping between the instantaneous levels is alpha = exp(-2 pi delta), and
    the phase accumulated by the staying amplitude is
    phi = pi/4 - delta (log delta - 1) - arg Gamma(1 - i delta).
    """
    d = p.delta**2 / (2.0 * p.sweep_rate)
    alpha = float(np.exp(-2.0 * np.pi * d))
    phase = float(np.pi / 4 - d * (np.log(d) - 1.0) - loggamma(1.0 - 1j * d).imag)
    return LandauZenerData(alpha=alpha, phase=phase, delta_param=d)


def analytic_machine_unitary(lz, basis_cold, basis_hot):
    """Closed-form work-stroke unitary of the isolated two-level machine.

    Parameters
    ----------
    lz : LandauZenerData
    basis_cold, basis_hot : ndarray
        Eigenvector matrices of the machine Hamiltonian at the start and end
        of the compression stroke (columns ascending in energy, i.e. column 0
        is the lower level).

    Returns
    -------
    ndarray
        The 2x2 unitary in the standard basis:
        sqrt(1-a)(e^{-i phi}|+h><+c| + e^{+i phi}|-h><-c|)
        - sqrt(a)(|+h><-c| - |-h><+c|).
    """
    a = lz.alpha
    stay = np.sqrt(1.0 - a)
    jump = np.sqrt(a)
    ph = np.exp(-1j * lz.phase)
    # core matrix in the (lower, upper) eigenlevel ordering: rows hot, cols cold
    core = np.array(
        [
            [stay * np.conj(ph), jump],
            [-jump, stay * ph],
        ],
        dtype=complex,
    )
    return basis_hot @ core @ basis_cold.conj().T
