"""Per-cycle observables: heats, work, battery energy, ergotropy, efficiencies.

Sign conventions follow the machine's ledger: heats are positive when they
flow into the machine from the respective bath, work is positive when done
on the joint system.  An engine therefore shows work < 0 and q_hot > 0; a
refrigerator shows q_cold > 0.  Battery quantities are properties of the
reduced battery state at cycle boundaries, where the coupling is off.
"""

from dataclasses import dataclass

import numpy as np

from . import dynamics, linalg, model


@dataclass(frozen=True)
class ErgotropyBreakdown:
    """Unitary-extractable energy and its split against energy-basis dephasing.

    ``incoherent`` is the ergotropy of the dephased (population-only) state;
    ``coherent`` is the remainder, destroyed by a projective energy
    measurement.  ``passive_populations`` are the state's eigenvalues sorted
    descending, i.e. the populations of the zero-ergotropy reference state.
    """

    total: float
    incoherent: float
    coherent: float
    passive_populations: np.ndarray


@dataclass(frozen=True)
class CycleRecord:
    """Every scalar reported for one completed cycle."""

    cycle: int
    q_hot: float
    q_cold: float
    work: float
    e_battery: float
    variance: float
    coeff_var: float | None
    populations: np.ndarray
    ergotropy: float
    erg_incoherent: float
    erg_coherent: float
    speed_e: float
    speed_erg: float


#: Battery energies below this multiple of the level spacing make the
#: coefficient of variation undefined (explicit None, never NaN).
COEFF_VAR_FLOOR = 1e-12


def battery_energy(rho_b, level_spacing=1.0):
    """Tr[H_B rho_B] for a reduced battery state."""
    levels = level_spacing * np.arange(rho_b.shape[0])
    return float(np.real(np.diag(rho_b)) @ levels)


def energy_variance(rho_b, level_spacing=1.0):
    """<H_B^2> - <H_B>^2; needs only populations since H_B is diagonal."""
    levels = level_spacing * np.arange(rho_b.shape[0])
    pops = np.real(np.diag(rho_b))
    mean = pops @ levels
    return float(pops @ levels**2 - mean**2)


def coeff_variation(rho_b, level_spacing=1.0):
    """sigma_E / E, or None while the battery is uncharged."""
    e = battery_energy(rho_b, level_spacing)
    if e < COEFF_VAR_FLOOR * level_spacing:
        return None
    return float(np.sqrt(max(energy_variance(rho_b, level_spacing), 0.0)) / e)


def _passive_energy(weights, levels):
    """Energy of the passive rearrangement: weights sorted descending against
    ascending levels; ties keep their original index order (stable sort)."""
    order = np.argsort(-weights, kind="stable")
    return float(weights[order] @ levels)


def ergotropy(rho_b, level_spacing=1.0):
    """Ergotropy of a battery state and its coherent/incoherent split."""
    levels = level_spacing * np.arange(rho_b.shape[0])
    pops = np.real(np.diag(rho_b))
    eigs = np.linalg.eigvalsh(rho_b)

    energy = float(pops @ levels)
    total = energy - _passive_energy(eigs, levels)
    incoherent = energy - _passive_energy(pops, levels)
    # clamp pure roundoff; genuinely negative values indicate a broken state
    if total < -1e-10 or incoherent < -1e-10:
        raise ValueError("negative ergotropy beyond roundoff; state is not PSD")
    total = max(total, 0.0)
    incoherent = max(incoherent, 0.0)
    order = np.argsort(-eigs, kind="stable")
    return ErgotropyBreakdown(
        total=total,
        incoherent=incoherent,
        coherent=total - incoherent,
        passive_populations=eigs[order],
    )


def _machine_energy(rho, h_m, m):
    return float(np.real(np.trace(h_m @ linalg.partial_trace_battery(rho, m))))


def heats(state_pre, cp, p):
    """Average heats (q_hot, q_cold) of one cycle starting from ``state_pre``.

    Reconstructs the pre-thermalization states inside the cycle and applies
    the trace formulas over the machine factor alone; the battery exchanges
    no heat because it never touches the baths.
    """
    m = p.levels
    h_hot = model.machine_hamiltonian(p.work_time, p, "compression")
    h_cold = model.machine_hamiltonian(0.0, p, "compression")
    rho_t1m, _, rho_2t1m, _ = dynamics._cycle_stages(state_pre, cp)
    q_hot = float(np.real(np.trace(h_hot @ (cp.tau_hot - linalg.partial_trace_battery(rho_t1m, m)))))
    q_cold = float(np.real(np.trace(h_cold @ (cp.tau_cold - linalg.partial_trace_battery(rho_2t1m, m)))))
    return q_hot, q_cold


def total_work(state_pre, cp, p):
    """Average work of one cycle: joint energy change over both work strokes.

    Boundary Hamiltonians are taken at zero coupling (the interaction is off
    at the instants where energies are read).
    """
    m = p.levels
    h_cold = model.machine_hamiltonian(0.0, p, "compression")
    h_hot = model.machine_hamiltonian(p.work_time, p, "compression")
    rho_t1m, rho_t1p, rho_2t1m, _ = dynamics._cycle_stages(state_pre, cp)

    def joint_energy(rho, h_m):
        return _machine_energy(rho, h_m, m) + battery_energy(
            linalg.partial_trace_machine(rho, m), p.level_spacing
        )

    compression = joint_energy(rho_t1m, h_hot) - joint_energy(state_pre, h_cold)
    expansion = joint_energy(rho_2t1m, h_cold) - joint_energy(rho_t1p, h_hot)
    return compression + expansion


def charging_speed(records):
    """First differences of battery energy and ergotropy along a trajectory."""
    if len(records) < 2:
        raise ValueError("need at least two cycle records for speeds")
    e = np.array([r.e_battery for r in records])
    w = np.array([r.ergotropy for r in records])
    return np.diff(e), np.diff(w)


def efficiencies(record):
    """(engine efficiency, charging efficiency, heat ratio) of one cycle.

    eta_engine = -work/q_hot, eta_charge = speed_e/q_hot, r = q_cold/q_hot;
    they satisfy eta_engine + eta_charge = 1 + r identically by the per-cycle
    energy balance.
    """
    if record.q_hot == 0.0:
        raise ValueError("efficiencies undefined at q_hot = 0")
    eta_engine = -record.work / record.q_hot
    eta_charge = record.speed_e / record.q_hot
    heat_ratio = record.q_cold / record.q_hot
    return eta_engine, eta_charge, heat_ratio


def critical_cycles(records, mode="auto"):
    """First cycles at which the machine stops performing its design task.

    Engine mode: ``n_star`` is the first cycle with work >= 0 (no net output)
    and ``n_hash`` the first with q_hot <= 0 (stops absorbing hot heat).
    Refrigerator mode: ``n_star`` is the first cycle with q_cold <= 0 (stops
    extracting cold heat); ``n_hash`` is None.  Crossings that never happen
    within the horizon are reported as None.
    """
    if not records:
        return None, None
    if mode == "auto":
        first = records[0]
        mode = "refrigerator" if first.q_cold > 0 and first.work > 0 else "engine"
    if mode == "engine":
        n_star = next((r.cycle for r in records if r.work >= 0), None)
        n_hash = next((r.cycle for r in records if r.q_hot <= 0), None)
        return n_star, n_hash
    if mode == "refrigerator":
        n_star = next((r.cycle for r in records if r.q_cold <= 0), None)
        return n_star, None
    raise ValueError(f"unknown machine mode {mode!r}")


def compute_cycle_record(rho_start, cp, p, cycle, prev_energy, prev_ergotropy,
                         measured=False):
    """All observables of one cycle plus the next cycle-start state.

    Fused path used by trajectory runs: the intermediate states are computed
    once and shared between the heat, work, and end-of-cycle battery
    metrics.  In measured mode the battery metrics describe the
    post-measurement state (populations are unaffected; coherences vanish).
    """
    m = p.levels
    h_cold = model.machine_hamiltonian(0.0, p, "compression")
    h_hot = model.machine_hamiltonian(p.work_time, p, "compression")
    rho_t1m, rho_t1p, rho_2t1m, rho_next = dynamics._cycle_stages(rho_start, cp)
    if measured:
        rho_next = dynamics.measure_battery(rho_next)

    q_hot = float(np.real(np.trace(h_hot @ (cp.tau_hot - linalg.partial_trace_battery(rho_t1m, m)))))
    q_cold = float(np.real(np.trace(h_cold @ (cp.tau_cold - linalg.partial_trace_battery(rho_2t1m, m)))))

    def joint_energy(rho, h_m):
        return _machine_energy(rho, h_m, m) + battery_energy(
            linalg.partial_trace_machine(rho, m), p.level_spacing
        )

    work = (joint_energy(rho_t1m, h_hot) - joint_energy(rho_start, h_cold)) + (
        joint_energy(rho_2t1m, h_cold) - joint_energy(rho_t1p, h_hot)
    )

    rho_b = linalg.partial_trace_machine(rho_next, m)
    pops = np.real(np.diag(rho_b))
    if abs(pops.sum() - 1.0) > 1e-10 or pops.min() < -1e-12 or pops.max() > 1 + 1e-12:
        raise dynamics.StateInvariantError(
            f"cycle {cycle}: battery populations outside tolerance"
        )
    erg = ergotropy(rho_b, p.level_spacing)
    e_batt = battery_energy(rho_b, p.level_spacing)
    record = CycleRecord(
        cycle=cycle,
        q_hot=q_hot,
        q_cold=q_cold,
        work=work,
        e_battery=e_batt,
        variance=energy_variance(rho_b, p.level_spacing),
        coeff_var=coeff_variation(rho_b, p.level_spacing),
        populations=pops,
        ergotropy=erg.total,
        erg_incoherent=erg.incoherent,
        erg_coherent=erg.coherent,
        speed_e=e_batt - prev_energy,
        speed_erg=erg.total - prev_ergotropy,
    )
    return record, rho_next
