"""Null-charging check: a static two-level system with a periodically
switched battery coupling.

The coupling to the ladder battery is toggled on for ``on_time`` and off for
``off_time``, over and over, with nothing else driving the pair.  Because
both segment Hamiltonians are time independent, each segment is propagated
by one exact eigendecomposition exponential — there is no integrator error
to mistake for an energy drift.  Energies are in units of the battery level
spacing and times in its inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import linalg, model


@dataclass(frozen=True)
class SwitchingParams:
    """Parameters of the periodically coupled pair.

    delta and field set the static two-level Hamiltonian delta*sigma_x +
    field*sigma_z; coupling scales the ladder-position interaction while it
    is switched on.
    """

    delta: float
    field: float
    coupling: float
    on_time: float
    off_time: float
    levels: int
    beta: float
    periods: int

    def __post_init__(self):
        positive = {
            "delta": self.delta,
            "field": self.field,
            "on_time": self.on_time,
            "off_time": self.off_time,
            "beta": self.beta,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.coupling < 0:
            raise ValueError("coupling must be nonnegative")
        if self.levels < 2:
            raise ValueError("need at least a two-level battery")
        if self.periods < 1:
            raise ValueError("need at least one period")
        if 2 * self.levels > model.MAX_TOTAL_DIM:
            raise ValueError(
                f"joint dimension {2 * self.levels} exceeds {model.MAX_TOTAL_DIM}"
            )


@dataclass(frozen=True)
class SwitchingSeries:
    """Energies sampled at every switch instant (2*periods + 1 samples)."""

    times: np.ndarray
    battery_energy: np.ndarray
    system_energy: np.ndarray


_CONSERVATION_RTOL = 1e-10


def _segment_propagator(h, duration):
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * duration)) @ v.conj().T


def simulate_switching(p: SwitchingParams, coupling_operator=None) -> SwitchingSeries:
    """Alternate exact on/off propagation and sample energies at each switch.

    ``coupling_operator`` replaces the battery-side ladder position operator
    when given (a testing seam for commuting-limit checks).
    """
    m = p.levels
    q = model.position_operator(m) if coupling_operator is None else np.asarray(
        coupling_operator, dtype=complex
    )
    if q.shape != (m, m):
        raise ValueError(f"coupling operator must be {m}x{m}, got {q.shape}")

    h_sys = p.delta * model.SIGMA_X + p.field * model.SIGMA_Z
    h_batt = np.diag(np.arange(m, dtype=float)).astype(complex)
    eye_m = np.eye(m, dtype=complex)
    eye_2 = np.eye(2, dtype=complex)
    h_off = linalg.kron(h_sys, eye_m) + linalg.kron(eye_2, h_batt)
    h_on = h_off + p.coupling * linalg.kron(model.SIGMA_X, q)

    u_on = _segment_propagator(h_on, p.on_time)
    u_off = _segment_propagator(h_off, p.off_time)

    rho = linalg.kron(model.gibbs_state(p.delta * model.SIGMA_X, p.beta),
                      np.diag([1.0] + [0.0] * (m - 1)).astype(complex))

    n_samples = 2 * p.periods + 1
    times = np.empty(n_samples)
    e_batt = np.empty(n_samples)
    e_sys = np.empty(n_samples)

    def sample(k, t):
        times[k] = t
        rho_b = linalg.partial_trace_machine(rho, m)
        rho_s = linalg.partial_trace_battery(rho, m)
        e_batt[k] = np.real(np.trace(h_batt @ rho_b))
        e_sys[k] = np.real(np.trace(h_sys @ rho_s))

    def conserved(h, before, after):
        scale = max(abs(before), abs(after), 1.0)
        if abs(after - before) > _CONSERVATION_RTOL * scale:
            raise RuntimeError(
                "energy not conserved across a constant-Hamiltonian segment: "
                f"{before!r} -> {after!r}"
            )

    sample(0, 0.0)
    t = 0.0
    for n in range(p.periods):
        e_before = float(np.real(np.trace(h_on @ rho)))
        rho = u_on @ rho @ u_on.conj().T
        conserved(h_on, e_before, float(np.real(np.trace(h_on @ rho))))
        t += p.on_time
        sample(2 * n + 1, t)

        e_before = float(np.real(np.trace(h_off @ rho)))
        rho = u_off @ rho @ u_off.conj().T
        conserved(h_off, e_before, float(np.real(np.trace(h_off @ rho))))
        t += p.off_time
        sample(2 * n + 2, t)

    return SwitchingSeries(times=times, battery_energy=e_batt, system_energy=e_sys)


def drift_fit(times, values):
    """Least-squares drift (slope, standard error of the slope) of a series."""
    fit = stats.linregress(times, values)
    return float(fit.slope), float(fit.stderr)
