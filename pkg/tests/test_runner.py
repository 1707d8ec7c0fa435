import dataclasses
import json

import numpy as np
import pytest

from ottobattery import analytic, cli, dynamics, model, runner


def desk_machine(**overrides):
    kw = dict(delta=2.0, sweep_rate=1.0, work_time=8.0, therm_time=0.0,
              coupling=0.5, level_spacing=1.0, levels=4, beta_hot=0.05,
              beta_cold=0.5)
    kw.update(overrides)
    return model.MachineParams(**kw)


def desk_config(**overrides):
    kw = dict(machine=desk_machine(), cycles=6,
              integrator=runner.IntegratorSettings(tol=1e-6))
    kw.update(overrides)
    return runner.ExperimentConfig(**kw)


def records_identical(a, b):
    for col in runner.TRAJECTORY_COLUMNS:
        if getattr(a, col) != getattr(b, col):
            return False
    return bool(np.array_equal(a.populations, b.populations))


DESK_TOML = """
mode = "custom"
cycles = 6

[machine]
delta = 2.0
sweep_rate = 1.0
work_time = 8.0
therm_time = 0.0
coupling = 0.5
level_spacing = 1.0
levels = 4
beta_hot = 0.05
beta_cold = 0.5

[integrator]
tol = 1e-6
"""


# ------------------------------------------------------------- configuration


def test_preset_parameter_values():
    eng = runner.preset_machine("engine_preset")
    assert eng.delta == 30.0
    assert eng.sweep_rate * eng.work_time == pytest.approx(200.0, rel=1e-15)
    assert eng.work_time == 40 * np.pi
    assert eng.coupling == 1.0 and eng.level_spacing == 1.0
    assert eng.levels == 300
    assert eng.beta_hot == 1 / 200.0 and eng.beta_cold == 1 / 20.0

    fri = runner.preset_machine("refrigerator_preset")
    assert fri.delta == 10.0
    assert fri.sweep_rate * fri.work_time == pytest.approx(300.0, rel=1e-15)
    assert fri.work_time == 10 * np.pi
    assert fri.levels == 300


def test_preset_work_time_rescales_rate():
    m = runner.preset_machine("engine_preset", work_time=20 * np.pi)
    assert m.sweep_rate * m.work_time == pytest.approx(200.0, rel=1e-15)
    assert m.eps_hot == pytest.approx(np.hypot(30.0, 200.0))


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "desk.toml"
    path.write_text(DESK_TOML)
    cfg = runner.load_config(path)
    assert cfg == desk_config()


def test_preset_config_defaults(tmp_path):
    path = tmp_path / "p.toml"
    path.write_text('mode = "engine_preset"\n')
    cfg = runner.load_config(path)
    assert cfg.cycles == 400
    assert cfg.machine.levels == 300
    assert cfg.integrator.tol == 1e-2
    assert cfg.integrator.initial_steps == 4096


@pytest.mark.parametrize("body,complaint", [
    ("frobnicate = 1\n" + DESK_TOML, "top-level"),
    (DESK_TOML.replace("[machine]", "[machine]\nwibble = 2.0"), "machine"),
    ('mode = "engine_preset"\n[machine]\ndelta = 31.0\n', "machine"),
    (DESK_TOML + "\n[sweep]\nname = 'work_time'\nstart = 1.0\nstop = 2.0\n"
     "count = 2\nextra = 1\n", "sweep"),
    (DESK_TOML + "\nfoo = 1\n", "integrator"),  # lands inside [integrator]
    (DESK_TOML + "\n[frob]\nbar = 1\n", "top-level"),
])
def test_unknown_config_keys_rejected(tmp_path, body, complaint):
    path = tmp_path / "bad.toml"
    path.write_text(body)
    with pytest.raises((ValueError, TypeError)) as err:
        runner.load_config(path)
    assert complaint.split()[0] in str(err.value)


def test_invalid_enums_and_outputs_rejected():
    with pytest.raises(ValueError):
        desk_config(mode="oven_preset")
    with pytest.raises(ValueError):
        desk_config(monitoring="hourly")
    with pytest.raises(ValueError):
        desk_config(outputs=("entropy",))
    with pytest.raises(ValueError):
        desk_config(cycles=0)
    with pytest.raises(ValueError):
        runner.SweepAxis(name="levels", start=1, stop=2, count=2)
    with pytest.raises(ValueError):
        runner.IntegratorSettings(method="rk4")


# --------------------------------------------------------------- trajectories


def test_inert_single_level_battery():
    cfg = desk_config(machine=desk_machine(levels=1, coupling=1.0), cycles=5)
    out = runner.run_trajectory(cfg)
    first = out.records[0]
    for rec in out.records:
        assert rec.e_battery == pytest.approx(0.0, abs=1e-14)
        assert rec.ergotropy == pytest.approx(0.0, abs=1e-14)
        assert rec.variance == pytest.approx(0.0, abs=1e-14)
        assert rec.coeff_var is None
        assert rec.speed_e == pytest.approx(0.0, abs=1e-14)
        np.testing.assert_allclose(rec.populations, [1.0])
        # no battery to interact with: every cycle repeats the first
        assert rec.q_hot == pytest.approx(first.q_hot, abs=1e-12)
        assert rec.work == pytest.approx(first.work, abs=1e-12)


def test_decoupled_records_constant_and_analytic():
    p = desk_machine(coupling=0.0, levels=3, work_time=6.0)
    cfg = desk_config(machine=p, cycles=4)
    out = runner.run_trajectory(cfg)
    cp = runner.cycle_propagators_for(p, cfg.integrator)
    alpha_eff = dynamics.machine_transition_probability(cp.u_comp, p)
    want = analytic.isolated_cycle_averages(
        alpha_eff, p.eps_cold, p.eps_hot, p.beta_cold, p.beta_hot
    )
    for rec in out.records:
        assert rec.q_hot == pytest.approx(want.q_hot, abs=1e-9)
        assert rec.q_cold == pytest.approx(want.q_cold, abs=1e-9)
        assert rec.work == pytest.approx(want.work, abs=1e-9)
        assert rec.e_battery == pytest.approx(0.0, abs=1e-12)


def test_trajectory_output_invariants():
    out = runner.run_trajectory(desk_config(cycles=3))
    assert [r.cycle for r in out.records] == [1, 2, 3]
    assert out.step_count > 0
    assert out.convergence_residual < 1e-6
    assert out.mode_detected == "engine"
    with pytest.raises(ValueError):
        dataclasses.replace(out, records=out.records[:-1])


def test_monitoring_changes_trajectory_but_not_first_cycle_populations():
    plain = runner.run_trajectory(desk_config(cycles=4))
    measured = runner.run_trajectory(desk_config(cycles=4, monitoring="per_cycle"))
    np.testing.assert_allclose(
        measured.records[0].populations, plain.records[0].populations, atol=1e-13
    )
    assert all(r.erg_coherent == pytest.approx(0.0, abs=1e-12)
               for r in measured.records)
    # later cycles genuinely differ once coherences have been erased
    assert abs(measured.records[3].e_battery - plain.records[3].e_battery) > 1e-6


def test_propagator_cache_shares_strokes():
    p0 = desk_machine(therm_time=0.0)
    p1 = desk_machine(therm_time=1.5)
    integ = runner.IntegratorSettings(tol=1e-6)
    cp0 = runner.cycle_propagators_for(p0, integ)
    cp1 = runner.cycle_propagators_for(p1, integ)
    assert cp0.u_comp is cp1.u_comp  # same cached stroke object
    assert not np.allclose(cp0.battery_free, cp1.battery_free)


# --------------------------------------------------------------------- sweeps


def test_single_point_sweep_equals_run(tmp_path):
    axis = runner.SweepAxis(name="work_time", start=8.0, stop=8.0, count=1)
    cfg = desk_config(sweep=axis)
    sweep_out = runner.run_sweep(cfg)
    direct = runner.run_trajectory(dataclasses.replace(cfg, sweep=None))
    assert len(sweep_out) == 1
    for a, b in zip(sweep_out[0].records, direct.records):
        assert records_identical(a, b)


def test_sweep_point_matches_isolated_rerun():
    axis = runner.SweepAxis(name="therm_time", start=0.0, stop=3.0, count=3)
    cfg = desk_config(sweep=axis, cycles=4)
    outs = runner.run_sweep(cfg, threads=2)
    assert [o.axis_value for o in outs] == [0.0, 1.5, 3.0]
    mid = runner.run_trajectory(dataclasses.replace(
        cfg, machine=desk_machine(therm_time=1.5), sweep=None
    ))
    for a, b in zip(outs[1].records, mid.records):
        assert records_identical(a, b)  # bit-identical, not merely close


def test_preset_sweep_keeps_product_pinned():
    cfg = runner.preset_config("engine_preset")
    cfg = dataclasses.replace(
        cfg, sweep=runner.SweepAxis("work_time", 2 * np.pi, 60 * np.pi, 3)
    )
    machines = [runner._machine_at(cfg, v) for v in cfg.sweep.values()]
    for m in machines:
        assert m.sweep_rate * m.work_time == pytest.approx(200.0, rel=1e-12)


def test_sweep_requires_axis():
    with pytest.raises(ValueError):
        runner.run_sweep(desk_config())


# -------------------------------------------------------------- serialization


def test_csv_determinism_and_row_count(tmp_path):
    cfg = desk_config(cycles=5, outputs=("populations",))
    a = runner.emit(runner.run_trajectory(cfg), out_dir=tmp_path / "a")
    b = runner.emit(runner.run_trajectory(cfg), out_dir=tmp_path / "b")
    ca, cb = a[0].read_bytes(), b[0].read_bytes()
    assert ca == cb
    lines = ca.decode().strip().split("\n")
    assert len(lines) == 1 + cfg.cycles
    header = lines[0].split(",")
    assert header[:12] == list(runner.TRAJECTORY_COLUMNS)
    assert header[12:] == [f"pop_{i}" for i in range(4)]


def test_sweep_csv_total_rows(tmp_path):
    axis = runner.SweepAxis(name="therm_time", start=0.0, stop=2.0, count=3)
    outs = runner.run_sweep(desk_config(sweep=axis, cycles=4))
    paths = runner.emit(outs, out_dir=tmp_path)
    rows = paths[0].read_text().strip().split("\n")
    assert len(rows) == 1 + 3 * 4
    assert rows[0].split(",")[0] == "therm_time"
    crit = paths[1].read_text().strip().split("\n")
    assert crit[0] == "therm_time,n_star,n_hash,mode"
    assert len(crit) == 4


def test_empty_sweep_gives_header_only_csv(tmp_path):
    paths = runner.emit([], out_dir=tmp_path)
    text = paths[0].read_text()
    assert text.strip() == ",".join(["axis"] + list(runner.TRAJECTORY_COLUMNS))


def test_json_round_trip_exact(tmp_path):
    cfg = desk_config(cycles=4, outputs=("populations",))
    out = runner.run_trajectory(cfg)
    path = runner.emit(out, fmt="json", out_dir=tmp_path)[0]
    payload = runner.read_json(path)
    assert payload["schema_version"] == runner.SCHEMA_VERSION
    assert payload["config"]["machine"]["delta"] == 2.0
    got = payload["trajectories"][0]
    assert got["n_star"] == out.n_star and got["n_hash"] == out.n_hash
    for rec, row in zip(out.records, got["records"]):
        for col in runner.TRAJECTORY_COLUMNS:
            assert getattr(rec, col) == row[col]  # exact, including None
        np.testing.assert_array_equal(rec.populations, row["populations"])


def test_csv_none_becomes_empty_field(tmp_path):
    cfg = desk_config(machine=desk_machine(levels=1), cycles=2)
    path = runner.emit(runner.run_trajectory(cfg), out_dir=tmp_path)[0]
    first_row = path.read_text().strip().split("\n")[1].split(",")
    assert first_row[6] == ""  # relative spread undefined for an empty battery


def test_portrait_emit(tmp_path):
    cells = analytic.phase_portrait([0.0, 0.4], [0.5, 1.5], x=2.0)
    path = runner.emit_portrait(cells, out_dir=tmp_path)[0]
    rows = path.read_text().strip().split("\n")
    assert rows[0] == ",".join(runner.PORTRAIT_COLUMNS)
    assert len(rows) == 5
    assert rows[1].split(",")[3] in {m.value for m in analytic.MachineMode}


# ------------------------------------------------------------------------ CLI


def test_cli_run_and_overrides(tmp_path, capsys):
    cfg_path = tmp_path / "desk.toml"
    cfg_path.write_text(DESK_TOML)
    rc = cli.main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o"),
                   "--monitoring", "per-cycle", "--cycles", "3"])
    assert rc == 0
    lines = (tmp_path / "o" / "trajectory.csv").read_text().strip().split("\n")
    assert len(lines) == 4
    assert "mode=engine" in capsys.readouterr().out


def test_cli_validate(capsys):
    assert cli.main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out


def test_cli_portrait_and_switching(tmp_path):
    assert cli.main(["phase-portrait", "--points", "8",
                     "--out", str(tmp_path)]) == 0
    assert (tmp_path / "portrait.csv").exists()
    assert cli.main(["switching", "--periods", "40", "--levels", "8",
                     "--out", str(tmp_path), "--format", "json"]) == 0
    payload = json.loads((tmp_path / "switching.json").read_text())
    assert len(payload["times"]) == 81
