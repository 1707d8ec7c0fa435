"""Experiment orchestration: configs, trajectory runs, sweeps, output files.

Everything here is seed-free and deterministic: identical configs produce
byte-identical CSV files, and any sweep grid point rerun on its own matches
the value it had inside the sweep.
"""

from __future__ import annotations

import dataclasses
import json
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import analytic, dynamics, linalg, metrics, model

SCHEMA_VERSION = 1

TRAJECTORY_COLUMNS = (
    "cycle", "q_hot", "q_cold", "work", "e_battery", "variance", "coeff_var",
    "ergotropy", "erg_incoherent", "erg_coherent", "speed_e", "speed_erg",
)
PORTRAIT_COLUMNS = ("alpha", "eta", "x", "mode", "w", "q_hot", "q_cold")

MODES = ("engine_preset", "refrigerator_preset", "custom")
MONITORING = ("unmeasured", "per_cycle")
KNOWN_OUTPUTS = ("populations",)

# sweep-grid defaults for the work-stroke duration, in battery periods
DEFAULT_T1_GRID = (2 * np.pi, 60 * np.pi, 30)


@dataclass(frozen=True)
class IntegratorSettings:
    """Stroke-integrator controls threaded through to the propagator build."""

    tol: float = 1e-9
    method: str = "split4"
    initial_steps: int | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.method not in ("split4", "midpoint"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.initial_steps is not None and self.initial_steps < 1:
            raise ValueError("initial_steps must be >= 1 when given")


@dataclass(frozen=True)
class SweepAxis:
    """One swept machine parameter: linspace(start, stop, count)."""

    name: str
    start: float
    stop: float
    count: int

    _SWEEPABLE = ("work_time", "therm_time", "delta", "sweep_rate", "coupling",
                  "beta_hot", "beta_cold", "level_spacing")

    def __post_init__(self):
        if self.name not in self._SWEEPABLE:
            raise ValueError(
                f"cannot sweep {self.name!r}; choose one of {self._SWEEPABLE}"
            )
        if self.count < 1:
            raise ValueError("sweep needs at least one point")
        if self.stop < self.start:
            raise ValueError("sweep stop must be >= start")

    def values(self):
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class ExperimentConfig:
    machine: model.MachineParams
    mode: str = "custom"
    monitoring: str = "unmeasured"
    cycles: int = 1
    sweep: SweepAxis | None = None
    outputs: tuple = ()
    output_path: str = "."
    integrator: IntegratorSettings = IntegratorSettings()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.monitoring not in MONITORING:
            raise ValueError(f"unknown monitoring scheme {self.monitoring!r}")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        for name in self.outputs:
            if name not in KNOWN_OUTPUTS:
                raise ValueError(f"unknown output {name!r}; known: {KNOWN_OUTPUTS}")


# ------------------------------------------------------------------- presets

# headline parameter sets: sweep-rate * work_time is pinned, so changing the
# stroke duration under a preset rescales the rate to keep the product fixed
_PRESETS = {
    "engine_preset": dict(
        delta=30.0, sweep_product=200.0, default_work_time=40 * np.pi,
        coupling=1.0, level_spacing=1.0, levels=300,
        beta_hot=1 / 200.0, beta_cold=1 / 20.0,
        default_cycles=400, integrator=IntegratorSettings(tol=1e-2, initial_steps=4096),
    ),
    "refrigerator_preset": dict(
        delta=10.0, sweep_product=300.0, default_work_time=10 * np.pi,
        coupling=1.0, level_spacing=1.0, levels=300,
        beta_hot=1 / 200.0, beta_cold=1 / 20.0,
        default_cycles=900, integrator=IntegratorSettings(tol=1e-2, initial_steps=2048),
    ),
}


def preset_machine(mode, work_time=None, therm_time=0.0):
    """Expand a preset to its pinned MachineParams.

    Only the stroke durations are adjustable; the pinned rate-duration
    product makes the sweep rate follow the chosen work_time.
    """
    spec_ = _PRESETS[mode]
    t1 = spec_["default_work_time"] if work_time is None else float(work_time)
    return model.MachineParams(
        delta=spec_["delta"],
        sweep_rate=spec_["sweep_product"] / t1,
        work_time=t1,
        therm_time=float(therm_time),
        coupling=spec_["coupling"],
        level_spacing=spec_["level_spacing"],
        levels=spec_["levels"],
        beta_hot=spec_["beta_hot"],
        beta_cold=spec_["beta_cold"],
    )


def preset_config(mode, monitoring="unmeasured", cycles=None, work_time=None,
                  therm_time=0.0, outputs=(), output_path="."):
    spec_ = _PRESETS[mode]
    return ExperimentConfig(
        machine=preset_machine(mode, work_time=work_time, therm_time=therm_time),
        mode=mode,
        monitoring=monitoring,
        cycles=spec_["default_cycles"] if cycles is None else int(cycles),
        outputs=tuple(outputs),
        output_path=output_path,
        integrator=spec_["integrator"],
    )


# -------------------------------------------------------------- config files

_TOP_KEYS = {"mode", "monitoring", "cycles", "outputs", "output_path",
             "machine", "sweep", "integrator"}
_MACHINE_KEYS = {f.name for f in dataclasses.fields(model.MachineParams)}
_PRESET_MACHINE_KEYS = {"work_time", "therm_time"}
_SWEEP_KEYS = {f.name for f in dataclasses.fields(SweepAxis)}
_INTEGRATOR_KEYS = {f.name for f in dataclasses.fields(IntegratorSettings)}


def _reject_unknown(given, allowed, where):
    unknown = set(given) - allowed
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}")


def load_config(path) -> ExperimentConfig:
    """Parse a TOML experiment file; unknown keys anywhere are hard errors."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw) -> ExperimentConfig:
    _reject_unknown(raw, _TOP_KEYS, "top-level")
    mode = raw.get("mode", "custom")
    machine_tbl = dict(raw.get("machine", {}))

    if mode in _PRESETS:
        _reject_unknown(machine_tbl, _PRESET_MACHINE_KEYS, f"{mode} machine")
        machine = preset_machine(mode, **machine_tbl)
        default_cycles = _PRESETS[mode]["default_cycles"]
        default_integrator = _PRESETS[mode]["integrator"]
    elif mode == "custom":
        _reject_unknown(machine_tbl, _MACHINE_KEYS, "machine")
        machine = model.MachineParams(**machine_tbl)
        default_cycles = None
        default_integrator = IntegratorSettings()
    else:
        raise ValueError(f"unknown mode {mode!r}")

    cycles = raw.get("cycles", default_cycles)
    if cycles is None:
        raise ValueError("custom-mode configs must set cycles")

    sweep = None
    if "sweep" in raw:
        _reject_unknown(raw["sweep"], _SWEEP_KEYS, "sweep")
        sweep = SweepAxis(**raw["sweep"])

    integrator = default_integrator
    if "integrator" in raw:
        _reject_unknown(raw["integrator"], _INTEGRATOR_KEYS, "integrator")
        integrator = IntegratorSettings(**raw["integrator"])

    return ExperimentConfig(
        machine=machine,
        mode=mode,
        monitoring=raw.get("monitoring", "unmeasured"),
        cycles=int(cycles),
        sweep=sweep,
        outputs=tuple(raw.get("outputs", ())),
        output_path=str(raw.get("output_path", ".")),
        integrator=integrator,
    )


# ------------------------------------------------------------ propagator cache

_CACHE_MAX = 8
_stroke_cache: OrderedDict = OrderedDict()
_cache_lock = threading.Lock()


def _stroke_key(p, integ):
    # therm_time and the bath temperatures do not enter the work stroke
    return (p.delta, p.sweep_rate, p.work_time, p.coupling, p.level_spacing,
            p.levels, integ.tol, integ.method, integ.initial_steps)


def cycle_propagators_for(p, integ=IntegratorSettings()):
    """Build (or fetch from the cache) everything reused every cycle."""
    key = _stroke_key(p, integ)
    with _cache_lock:
        if key in _stroke_cache:
            _stroke_cache.move_to_end(key)
            stroke = _stroke_cache[key]
        else:
            stroke = None
    if stroke is None:
        cp_full = dynamics.build_cycle_propagators(
            p, tol=integ.tol, method=integ.method,
            initial_steps=integ.initial_steps,
        )
        stroke = (cp_full.u_comp, cp_full.step_count, cp_full.convergence_residual)
        with _cache_lock:
            _stroke_cache[key] = stroke
            while len(_stroke_cache) > _CACHE_MAX:
                _stroke_cache.popitem(last=False)
        return cp_full
    return dynamics.build_cycle_propagators(p, stroke=stroke)


# ---------------------------------------------------------------- trajectories


@dataclass(frozen=True)
class TrajectoryOutput:
    config: dict
    records: list
    n_star: int | None
    n_hash: int | None
    mode_detected: str
    wall_time: float
    step_count: int
    convergence_residual: float
    axis_value: float | None = None

    def __post_init__(self):
        if len(self.records) != self.config["cycles"]:
            raise ValueError("record count does not match configured cycles")
        cycles = [r.cycle for r in self.records]
        if cycles != sorted(cycles) or len(set(cycles)) != len(cycles):
            raise ValueError("cycle indices must be strictly increasing")


def _config_echo(cfg):
    echo = {
        "mode": cfg.mode,
        "monitoring": cfg.monitoring,
        "cycles": cfg.cycles,
        "outputs": list(cfg.outputs),
        "machine": dataclasses.asdict(cfg.machine),
        "integrator": dataclasses.asdict(cfg.integrator),
    }
    if cfg.sweep is not None:
        echo["sweep"] = dataclasses.asdict(cfg.sweep)
    return echo


def run_trajectory(cfg: ExperimentConfig, propagators=None) -> TrajectoryOutput:
    """Iterate the cycle channel ``cfg.cycles`` times and record everything.

    ``propagators`` lets callers reuse one expensive build across several
    runs of the same machine (e.g. both monitoring schemes side by side).
    """
    p = cfg.machine
    started = time.perf_counter()
    cp = cycle_propagators_for(p, cfg.integrator) if propagators is None else propagators
    measured = cfg.monitoring == "per_cycle"

    rho = dynamics.initial_joint_state(cp, p)
    rho_b = linalg.partial_trace_machine(rho, p.levels)
    prev_e = metrics.battery_energy(rho_b, p.level_spacing)
    prev_w = metrics.ergotropy(rho_b, p.level_spacing).total

    # positivity is audited cheaply for small systems, sampled for big ones
    check_every = 1 if 2 * p.levels <= 128 else 16

    records = []
    for cycle in range(1, cfg.cycles + 1):
        rec, rho = metrics.compute_cycle_record(
            rho, cp, p, cycle, prev_e, prev_w, measured=measured
        )
        if cycle % check_every == 0 or cycle == cfg.cycles:
            rho, _ = dynamics.repair_psd(rho, context=f"cycle {cycle}")
        records.append(rec)
        prev_e, prev_w = rec.e_battery, rec.ergotropy

    first = records[0]
    mode_detected = (
        "refrigerator" if first.q_cold > 0 and first.work > 0 else "engine"
    )
    n_star, n_hash = metrics.critical_cycles(records, mode=mode_detected)
    return TrajectoryOutput(
        config=_config_echo(cfg),
        records=records,
        n_star=n_star,
        n_hash=n_hash,
        mode_detected=mode_detected,
        wall_time=time.perf_counter() - started,
        step_count=cp.step_count,
        convergence_residual=cp.convergence_residual,
    )


def _machine_at(cfg, value):
    """The machine of one sweep grid point."""
    if cfg.mode in _PRESETS and cfg.sweep.name == "work_time":
        # preset sweeps hold the rate-duration product fixed
        return preset_machine(cfg.mode, work_time=value,
                              therm_time=cfg.machine.therm_time)
    return dataclasses.replace(cfg.machine, **{cfg.sweep.name: float(value)})


def run_sweep(cfg: ExperimentConfig, threads=1) -> list:
    """One trajectory per grid point, in grid order regardless of threads."""
    if cfg.sweep is None:
        raise ValueError("run_sweep needs a config with a sweep table")
    values = cfg.sweep.values()
    points = [
        dataclasses.replace(cfg, machine=_machine_at(cfg, v), sweep=None)
        for v in values
    ]

    def one(idx):
        out = run_trajectory(points[idx])
        out.config["sweep"] = dataclasses.asdict(cfg.sweep)
        return dataclasses.replace(out, axis_value=float(values[idx]))

    if threads <= 1 or len(points) == 1:
        return [one(i) for i in range(len(points))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(len(points))))


# ------------------------------------------------------------- serialization


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _record_row(rec, with_pops):
    row = [rec.cycle, rec.q_hot, rec.q_cold, rec.work, rec.e_battery,
           rec.variance, rec.coeff_var, rec.ergotropy, rec.erg_incoherent,
           rec.erg_coherent, rec.speed_e, rec.speed_erg]
    if with_pops:
        row.extend(float(x) for x in rec.populations)
    return row


def _trajectory_header(out, with_pops):
    cols = list(TRAJECTORY_COLUMNS)
    if with_pops:
        m = len(out.records[0].populations)
        cols += [f"pop_{i}" for i in range(m)]
    return cols


def _record_dict(rec, with_pops):
    d = {
        "cycle": rec.cycle, "q_hot": rec.q_hot, "q_cold": rec.q_cold,
        "work": rec.work, "e_battery": rec.e_battery, "variance": rec.variance,
        "coeff_var": rec.coeff_var, "ergotropy": rec.ergotropy,
        "erg_incoherent": rec.erg_incoherent, "erg_coherent": rec.erg_coherent,
        "speed_e": rec.speed_e, "speed_erg": rec.speed_erg,
    }
    if with_pops:
        d["populations"] = [float(x) for x in rec.populations]
    return d


def _traj_json_payload(out, with_pops):
    return {
        "axis_value": out.axis_value,
        "n_star": out.n_star,
        "n_hash": out.n_hash,
        "mode_detected": out.mode_detected,
        "diagnostics": {
            "wall_time": out.wall_time,
            "step_count": out.step_count,
            "convergence_residual": out.convergence_residual,
        },
        "records": [_record_dict(r, with_pops) for r in out.records],
    }


def _write_lines(path, rows):
    with open(path, "w", newline="") as fh:
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def emit(outputs, fmt="csv", out_dir=".", stem=None):
    """Write one trajectory or a sweep to disk; returns the created paths.

    CSV trajectories use the fixed column schema (populations appended when
    requested); sweeps prepend the swept value column and add a companion
    ``*_critical.csv`` with the detected transition cycles per grid point.
    JSON mirrors the same records under a schema-version field.
    """
    single = isinstance(outputs, TrajectoryOutput)
    group = [outputs] if single else list(outputs)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or ("trajectory" if single else "sweep")
    with_pops = bool(group) and "populations" in group[0].config["outputs"]
    paths = []

    if fmt == "csv":
        path = out_dir / f"{stem}.csv"
        if single:
            out = group[0]
            rows = [_trajectory_header(out, with_pops)]
            rows += [_record_row(r, with_pops) for r in out.records]
            _write_lines(path, rows)
        else:
            axis = group[0].config.get("sweep", {}).get("name", "axis") if group else "axis"
            header = None
            rows = []
            for out in group:
                cols = [axis] + _trajectory_header(out, with_pops)
                header = header or cols
                rows += [[out.axis_value] + _record_row(r, with_pops)
                         for r in out.records]
            _write_lines(path, [header or ["axis"] + list(TRAJECTORY_COLUMNS)] + rows)
            crit = out_dir / f"{stem}_critical.csv"
            crit_rows = [[axis, "n_star", "n_hash", "mode"]]
            crit_rows += [[o.axis_value, o.n_star, o.n_hash, o.mode_detected]
                          for o in group]
            _write_lines(crit, crit_rows)
            paths.append(crit)
        paths.insert(0, path)
    elif fmt == "json":
        path = out_dir / f"{stem}.json"
        payload = {
            "schema_version": SCHEMA_VERSION,
            "config": group[0].config if group else {},
            "trajectories": [_traj_json_payload(o, with_pops) for o in group],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        paths.append(path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return paths


def emit_portrait(classifications, fmt="csv", out_dir=".", stem="portrait"):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = out_dir / f"{stem}.csv"
        rows = [list(PORTRAIT_COLUMNS)]
        rows += [[c.alpha, c.eta, c.x, c.mode.value, c.work, c.q_hot, c.q_cold]
                 for c in classifications]
        _write_lines(path, rows)
    elif fmt == "json":
        path = out_dir / f"{stem}.json"
        payload = {
            "schema_version": SCHEMA_VERSION,
            "points": [
                {"alpha": c.alpha, "eta": c.eta, "x": c.x, "mode": c.mode.value,
                 "w": c.work, "q_hot": c.q_hot, "q_cold": c.q_cold}
                for c in classifications
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return [path]


def read_json(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version in {path}")
    return payload


# ------------------------------------------------------------------ validation


def _check(name, fn, verbose=True):
    try:
        fn()
        ok = True
        detail = ""
    except Exception as exc:  # report, don't crash the suite
        ok = False
        detail = f" ({exc})"
    if verbose:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}{detail}")
    return ok


def validate(verbose=True):
    """Built-in oracle suite: closed forms against the simulation machinery."""

    def decoupled_forms():
        for levels in (1, 4):
            p = model.MachineParams(
                delta=2.0, sweep_rate=1.0, work_time=6.0, therm_time=0.0,
                coupling=0.0, level_spacing=1.0, levels=levels,
                beta_hot=0.05, beta_cold=0.5,
            )
            cp = cycle_propagators_for(p, IntegratorSettings(tol=1e-7))
            alpha_eff = dynamics.machine_transition_probability(cp.u_comp, p)
            want = analytic.isolated_cycle_averages(
                alpha_eff, p.eps_cold, p.eps_hot, p.beta_cold, p.beta_hot
            )
            rho = dynamics.initial_joint_state(cp, p)
            q_hot, q_cold = metrics.heats(rho, cp, p)
            work = metrics.total_work(rho, cp, p)
            for got, ref in ((q_hot, want.q_hot), (q_cold, want.q_cold),
                             (work, want.work)):
                if abs(got - ref) > 1e-9:
                    raise AssertionError(f"closed-form mismatch: {got} vs {ref}")

    def slow_sweep_probability():
        t1 = 40 * np.pi
        p = model.MachineParams(
            delta=30.0, sweep_rate=200.0 / t1, work_time=t1, therm_time=0.0,
            coupling=0.0, level_spacing=1.0, levels=1,
            beta_hot=1 / 200.0, beta_cold=1 / 20.0,
        )
        u = dynamics.compression_propagator(p, tol=1e-7)
        p_eff = dynamics.machine_transition_probability(u, p)
        alpha = model.landau_zener(p).alpha
        if abs(p_eff - alpha) > 1e-6:
            raise AssertionError(f"|{p_eff} - {alpha}| > 1e-6")

    def measurement_neutrality():
        rng = np.random.default_rng(20240817)
        h_b = model.battery_hamiltonian(dataclasses.replace(
            _desk_params(), levels=6))
        for _ in range(100):
            a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
            rho = a @ a.conj().T
            rho /= np.trace(rho).real
            before = linalg.partial_trace_machine(rho, 6)
            after = linalg.partial_trace_machine(dynamics.measure_battery(rho), 6)
            drift = abs(np.real(np.trace(h_b @ (after - before))))
            if drift > 1e-12:
                raise AssertionError(f"measurement moved battery energy by {drift}")

    def ergotropy_brute_force():
        import itertools
        rng = np.random.default_rng(5)
        levels = np.arange(4.0)
        for _ in range(50):
            a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            rho = a @ a.conj().T
            rho /= np.trace(rho).real
            eigs = np.linalg.eigvalsh(rho)
            passive = min(float(np.dot(perm, levels))
                          for perm in itertools.permutations(eigs))
            want = metrics.battery_energy(rho) - passive
            got = metrics.ergotropy(rho).total
            if abs(got - want) > 1e-10:
                raise AssertionError(f"ergotropy {got} vs brute force {want}")

    def reversed_stroke_identity():
        p = _desk_params()
        u = dynamics.compression_propagator(p, tol=1e-6)
        if np.max(np.abs(dynamics.reversed_propagator(u) - u.T)) != 0.0:
            raise AssertionError("reversed stroke is not the exact transpose")
        if linalg.unitarity_residual(u) > 1e-9:
            raise AssertionError("stroke propagator lost unitarity")

    def portrait_consistency():
        # classify() cross-checks sign triples against inequality thresholds
        # internally and raises on any disagreement
        alphas = np.linspace(0.0, 1.0, 40)
        etas = np.linspace(0.05, 1.95, 40)
        analytic.phase_portrait(alphas, etas, x=2.0)

    checks = [
        ("decoupled cycle matches closed forms", decoupled_forms),
        ("slow-sweep jump probability", slow_sweep_probability),
        ("measurement leaves battery energy", measurement_neutrality),
        ("ergotropy equals brute-force passive search", ergotropy_brute_force),
        ("reversed stroke is the transpose", reversed_stroke_identity),
        ("phase portrait internally consistent", portrait_consistency),
    ]
    return all([_check(name, fn, verbose) for name, fn in checks])


def _desk_params():
    return model.MachineParams(
        delta=2.0, sweep_rate=1.0, work_time=6.0, therm_time=0.0,
        coupling=0.5, level_spacing=1.0, levels=4, beta_hot=0.05, beta_cold=0.5,
    )
