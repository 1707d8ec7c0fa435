import itertools

import numpy as np
import pytest

from ottobattery import analytic, dynamics, linalg, metrics, model

rng = np.random.default_rng(7)


def random_density(dim, r=rng):
    a = r.normal(size=(dim, dim)) + 1j * r.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def brute_force_passive(weights, levels):
    return min(
        float(np.dot(np.asarray(perm), levels))
        for perm in itertools.permutations(weights)
    )


# --------------------------------------------------------- battery observables


def test_battery_energy_variance_trivial_states():
    ground = np.diag([1.0, 0.0, 0.0]).astype(complex)
    assert metrics.battery_energy(ground) == 0.0
    assert metrics.energy_variance(ground) == 0.0
    assert metrics.coeff_variation(ground) is None

    one = np.diag([0.0, 1.0, 0.0]).astype(complex)
    assert metrics.battery_energy(one, level_spacing=2.5) == pytest.approx(2.5)
    assert metrics.energy_variance(one) == pytest.approx(0.0, abs=1e-15)
    assert metrics.coeff_variation(one) == pytest.approx(0.0, abs=1e-7)

    half = np.diag([0.5, 0.5, 0.0]).astype(complex)
    assert metrics.battery_energy(half) == pytest.approx(0.5)
    assert metrics.energy_variance(half) == pytest.approx(0.25)
    assert metrics.coeff_variation(half) == pytest.approx(1.0)


def test_energy_scaling_with_level_spacing():
    rho = random_density(5)
    e1 = metrics.battery_energy(rho, 1.0)
    e3 = metrics.battery_energy(rho, 3.0)
    assert e3 == pytest.approx(3 * e1)
    assert metrics.energy_variance(rho, 3.0) == pytest.approx(
        9 * metrics.energy_variance(rho, 1.0)
    )
    # relative spread is scale free
    assert metrics.coeff_variation(rho, 3.0) == pytest.approx(
        metrics.coeff_variation(rho, 1.0)
    )


# ------------------------------------------------------------------- ergotropy


def test_equal_superposition_is_fully_coherent():
    rho = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    out = metrics.ergotropy(rho)
    assert out.total == pytest.approx(0.5, abs=1e-12)
    assert out.incoherent == pytest.approx(0.0, abs=1e-12)
    assert out.coherent == pytest.approx(0.5, abs=1e-12)


def test_population_inverted_state():
    rho = np.diag([0.1, 0.2, 0.7]).astype(complex)
    out = metrics.ergotropy(rho)
    # best arrangement is the reversal: 0.7, 0.2, 0.1
    expected = (0.2 + 1.4) - (0.2 + 0.2)
    assert out.total == pytest.approx(expected, abs=1e-12)
    assert out.incoherent == pytest.approx(expected, abs=1e-12)
    assert out.coherent == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(out.passive_populations, [0.7, 0.2, 0.1])


def test_passive_states_have_zero_ergotropy():
    rho = np.diag([0.5, 0.3, 0.15, 0.05]).astype(complex)
    out = metrics.ergotropy(rho)
    assert out.total == pytest.approx(0.0, abs=1e-13)
    assert out.incoherent == pytest.approx(0.0, abs=1e-13)


def test_passive_energy_against_permutation_search():
    levels = np.arange(4.0)
    for _ in range(200):
        w = rng.dirichlet(np.ones(4))
        got = metrics._passive_energy(w, levels)
        assert got == pytest.approx(brute_force_passive(w, levels), abs=1e-10)


def test_total_ergotropy_against_permutation_search():
    for dim in (2, 3, 4, 5):
        levels = np.arange(float(dim))
        for _ in range(30):
            rho = random_density(dim)
            eigs = np.linalg.eigvalsh(rho)
            expected = metrics.battery_energy(rho) - brute_force_passive(eigs, levels)
            assert metrics.ergotropy(rho).total == pytest.approx(expected, abs=1e-10)


def test_ergotropy_ordering_and_positivity():
    for _ in range(50):
        rho = random_density(6)
        out = metrics.ergotropy(rho)
        assert out.total >= out.incoherent >= -1e-13
        assert out.coherent == pytest.approx(out.total - out.incoherent, abs=1e-12)


def test_diagonal_phases_leave_ergotropy_invariant():
    rho = random_density(5)
    d = np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, size=5)))
    rotated = d @ rho @ d.conj().T
    a, b = metrics.ergotropy(rho), metrics.ergotropy(rotated)
    assert b.total == pytest.approx(a.total, abs=1e-11)
    assert b.incoherent == pytest.approx(a.incoherent, abs=1e-11)


def test_dephasing_kills_coherent_part():
    rho = random_density(4)
    diag = np.diag(np.diag(rho))
    out = metrics.ergotropy(diag)
    assert out.coherent == pytest.approx(0.0, abs=1e-12)
    assert out.total == pytest.approx(metrics.ergotropy(rho).incoherent, abs=1e-12)


def test_roundoff_negativity_clamped():
    # diagonal populations majorized by the spectrum force a nonnegative
    # result up to roundoff; anything in (-1e-10, 0) must come out as 0.0
    rho = np.diag([1.0 + 1e-13, -1e-13]).astype(complex)
    out = metrics.ergotropy(rho)
    assert out.total == 0.0
    assert out.incoherent == 0.0
    assert out.coherent == 0.0


# --------------------------------------------------- heats, work, and balance


def decoupled_params(levels):
    return model.MachineParams(
        delta=2.0,
        sweep_rate=1.0,
        work_time=6.0,
        therm_time=0.0,
        coupling=0.0,
        level_spacing=1.0,
        levels=levels,
        beta_hot=0.05,
        beta_cold=0.5,
    )


@pytest.mark.parametrize("levels", [1, 5])
def test_decoupled_cycle_matches_closed_forms(levels):
    # with the interaction off, per-cycle heats and work have exact closed
    # forms in terms of the realized two-level jump probability; the
    # comparison is an identity, independent of integrator resolution
    p = decoupled_params(levels)
    cp = dynamics.build_cycle_propagators(p, tol=1e-7)
    alpha_eff = dynamics.machine_transition_probability(cp.u_comp, p)
    expected = analytic.isolated_cycle_averages(
        alpha_eff, p.eps_cold, p.eps_hot, p.beta_cold, p.beta_hot
    )

    rho = dynamics.initial_joint_state(cp, p)
    for _ in range(3):  # every cycle is identical when decoupled
        q_hot, q_cold = metrics.heats(rho, cp, p)
        work = metrics.total_work(rho, cp, p)
        assert q_hot == pytest.approx(expected.q_hot, abs=1e-9)
        assert q_cold == pytest.approx(expected.q_cold, abs=1e-9)
        assert work == pytest.approx(expected.work, abs=1e-9)
        rho = dynamics.cycle_map(rho, cp)


def test_cycle_record_consistent_and_balanced():
    p = model.MachineParams(
        delta=2.0, sweep_rate=1.0, work_time=8.0, therm_time=0.4, coupling=0.5,
        level_spacing=1.0, levels=4, beta_hot=0.05, beta_cold=0.5,
    )
    cp = dynamics.build_cycle_propagators(p, tol=1e-7)
    rho = dynamics.initial_joint_state(cp, p)
    prev_e = metrics.battery_energy(linalg.partial_trace_machine(rho, 4))
    prev_w = 0.0
    for cycle in range(1, 6):
        q_hot, q_cold = metrics.heats(rho, cp, p)
        work = metrics.total_work(rho, cp, p)
        rec, rho = metrics.compute_cycle_record(rho, cp, p, cycle, prev_e, prev_w)
        assert rec.cycle == cycle
        assert rec.q_hot == pytest.approx(q_hot, abs=1e-12)
        assert rec.q_cold == pytest.approx(q_cold, abs=1e-12)
        assert rec.work == pytest.approx(work, abs=1e-12)
        # first law bookkeeping: all energy entering the pair in one cycle
        # shows up as battery energy gain (the machine state is cyclic)
        assert q_hot + q_cold + work == pytest.approx(rec.speed_e, abs=1e-10)
        assert rec.populations.shape == (4,)
        assert rec.populations.sum() == pytest.approx(1.0, abs=1e-10)
        prev_e, prev_w = rec.e_battery, rec.ergotropy


def test_measured_record_has_no_coherent_ergotropy():
    p = model.MachineParams(
        delta=2.0, sweep_rate=1.0, work_time=8.0, therm_time=0.0, coupling=0.8,
        level_spacing=1.0, levels=4, beta_hot=0.05, beta_cold=0.5,
    )
    cp = dynamics.build_cycle_propagators(p, tol=1e-6)
    rho = dynamics.initial_joint_state(cp, p)
    prev_e, prev_w = 0.0, 0.0
    for cycle in range(1, 4):
        rec, rho = metrics.compute_cycle_record(
            rho, cp, p, cycle, prev_e, prev_w, measured=True
        )
        assert rec.erg_coherent == pytest.approx(0.0, abs=1e-10)
        assert rec.ergotropy == pytest.approx(rec.erg_incoherent, abs=1e-10)
        prev_e, prev_w = rec.e_battery, rec.ergotropy


# ----------------------------------------------------- trajectory diagnostics


def fake_record(cycle, q_hot, q_cold, work):
    return metrics.CycleRecord(
        cycle=cycle, q_hot=q_hot, q_cold=q_cold, work=work, e_battery=1.0,
        variance=0.1, coeff_var=0.3, populations=np.array([1.0]), ergotropy=0.5,
        erg_incoherent=0.5, erg_coherent=0.0, speed_e=0.0, speed_erg=0.0,
    )


def test_critical_cycles_engine():
    records = [fake_record(n, 3.0 if n < 9 else -0.1, -1.0, -1.0 if n < 7 else 0.2)
               for n in range(1, 12)]
    assert metrics.critical_cycles(records) == (7, 9)
    assert metrics.critical_cycles(records, mode="engine") == (7, 9)


def test_critical_cycles_refrigerator():
    records = [fake_record(n, -2.0, 0.5 if n < 5 else -0.3, 1.5)
               for n in range(1, 12)]
    assert metrics.critical_cycles(records) == (5, None)
    assert metrics.critical_cycles(records, mode="refrigerator") == (5, None)


def test_critical_cycles_no_crossing_or_empty():
    healthy = [fake_record(n, 3.0, -1.0, -2.0) for n in range(1, 5)]
    assert metrics.critical_cycles(healthy) == (None, None)
    assert metrics.critical_cycles([]) == (None, None)
    with pytest.raises(ValueError):
        metrics.critical_cycles(healthy, mode="oven")


def test_charging_speed_diffs():
    records = [fake_record(n, 1.0, -0.5, -0.5) for n in range(1, 4)]
    speeds_e, speeds_w = metrics.charging_speed(records)
    np.testing.assert_allclose(speeds_e, [0.0, 0.0])
    np.testing.assert_allclose(speeds_w, [0.0, 0.0])
    with pytest.raises(ValueError):
        metrics.charging_speed(records[:1])


def test_efficiency_identity_and_guard():
    rec = metrics.CycleRecord(
        cycle=3, q_hot=2.0, q_cold=-0.7, work=-1.1, e_battery=4.0, variance=0.2,
        coeff_var=0.1, populations=np.array([1.0]), ergotropy=3.0,
        erg_incoherent=2.5, erg_coherent=0.5, speed_e=0.2, speed_erg=0.1,
    )
    eta_engine, eta_charge, heat_ratio = metrics.efficiencies(rec)
    assert eta_engine == pytest.approx(0.55)
    assert eta_charge == pytest.approx(0.1)
    assert heat_ratio == pytest.approx(-0.35)
    bad = fake_record(1, 0.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        metrics.efficiencies(bad)
