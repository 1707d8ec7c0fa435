import dataclasses
import time

import numpy as np
import pytest

from ottobattery import runner


def _pair_of_runs(cfg, cycles):
    """Unmeasured and per-cycle-measured trajectories off one propagator build."""
    base = dataclasses.replace(cfg, cycles=cycles)
    cp = runner.cycle_propagators_for(base.machine, base.integrator)
    plain = runner.run_trajectory(base, propagators=cp)
    measured = runner.run_trajectory(
        dataclasses.replace(base, monitoring="per_cycle"), propagators=cp
    )
    return {"machine": base.machine, "cp": cp, "plain": plain, "measured": measured}


@pytest.fixture(scope="session")
def engine_full():
    """Full-scale engine preset (M=300): the expensive headline build."""
    return _pair_of_runs(runner.preset_config("engine_preset"), cycles=600)


@pytest.fixture(scope="session")
def fridge_full():
    """Full-scale refrigerator preset (M=300)."""
    return _pair_of_runs(runner.preset_config("refrigerator_preset"), cycles=700)


@pytest.fixture(scope="session")
def desk_engine():
    """Reduced battery (M=30), engine preset otherwise unchanged.

    Also carries the commensurate/incommensurate thermalization variants,
    which reuse the same work-stroke propagator via the runner cache.
    """
    started = time.perf_counter()
    machine = dataclasses.replace(
        runner.preset_machine("engine_preset"), levels=30
    )
    integ = runner.IntegratorSettings(tol=1e-4, initial_steps=4096)
    cfg = runner.ExperimentConfig(
        machine=machine, mode="custom", monitoring="unmeasured", cycles=260,
        outputs=("populations",), integrator=integ,
    )
    cp = runner.cycle_propagators_for(machine, integ)
    plain = runner.run_trajectory(cfg, propagators=cp)
    measured = runner.run_trajectory(
        dataclasses.replace(cfg, monitoring="per_cycle"), propagators=cp
    )

    def commensurate_variant(therm_time):
        m2 = dataclasses.replace(machine, therm_time=therm_time)
        return runner.run_trajectory(dataclasses.replace(cfg, machine=m2))

    full_period = commensurate_variant(2 * np.pi)
    half_period = commensurate_variant(np.pi)
    return {
        "machine": machine,
        "plain": plain,
        "measured": measured,
        "full_period": full_period,
        "half_period": half_period,
        "wall_time": time.perf_counter() - started,
    }
