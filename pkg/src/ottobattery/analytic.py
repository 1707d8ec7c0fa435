"""Closed-form per-cycle energetics of the isolated machine and the mode map.

With the battery decoupled, one Otto cycle of the two-level machine has
exact per-cycle averages in terms of the sweep transition probability
``alpha``, the end-point splittings ``eps_c``/``eps_h``, and the bath inverse
temperatures.  These expressions serve as the oracle for the full simulator
at g=0 and generate the operating-mode phase portrait in the
(alpha, eta) plane at fixed compression ratio x = eps_h/eps_c, with
eta = tanh(beta_h eps_h)/tanh(beta_c eps_c).

Sign conventions: heats are positive when absorbed by the machine, work is
positive when done on the machine, so an engine has work < 0, q_hot > 0,
q_cold < 0.
"""

import enum
from dataclasses import dataclass

import numpy as np

#: Relative scale below which a closed-form average counts as exactly zero
#: (boundary between operating modes).
BOUNDARY_TOL = 1e-14


class MachineMode(enum.Enum):
    ENGINE = "engine"
    REFRIGERATOR = "refrigerator"
    FAIL_EMIT_COLD = "fail_emit_cold"    # work in, heat absorbed hot, dumped cold
    FAIL_EMIT_BOTH = "fail_emit_both"    # work in, heat dumped into both baths


@dataclass(frozen=True)
class IsolatedCycleAverages:
    """Per-cycle work and heats of the isolated machine (battery decoupled)."""

    work: float
    q_hot: float
    q_cold: float

    def __post_init__(self):
        scale = max(1.0, abs(self.q_hot), abs(self.q_cold))
        if abs(self.work + self.q_hot + self.q_cold) > 1e-12 * scale:
            raise ValueError("cycle averages violate energy conservation")


@dataclass(frozen=True)
class MachineClassification:
    """Operating mode at one (alpha, x, eta) point of the phase portrait.

    work/q_hot/q_cold are the closed-form averages in normalized units of
    eps_c * tanh(beta_c eps_c); only their signs determine the mode.
    """

    mode: MachineMode
    x: float
    eta: float
    alpha: float
    boundary: bool
    work: float
    q_hot: float
    q_cold: float

    def __post_init__(self):
        if self.mode is MachineMode.ENGINE and not self.eta < 1.0:
            raise ValueError("engine classification requires eta < 1")
        if self.mode is MachineMode.REFRIGERATOR and not (
            self.eta > 1.0 and self.alpha < 0.5
        ):
            raise ValueError("refrigerator classification requires eta > 1 and alpha < 1/2")


def isolated_cycle_averages(alpha, eps_c, eps_h, beta_c, beta_h):
    """Exact per-cycle averages of the isolated machine.

    Parameters
    ----------
    alpha : float
        Sweep transition probability in [0, 1].
    eps_c, eps_h : float
        Machine half-splittings at the cold and hot ends, eps_h >= eps_c > 0.
    beta_c, beta_h : float
        Bath inverse temperatures, beta_c >= beta_h > 0.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not eps_h >= eps_c > 0:
        raise ValueError("need eps_h >= eps_c > 0")
    if not beta_c >= beta_h > 0:
        raise ValueError("need beta_c >= beta_h > 0")
    th_c = np.tanh(beta_c * eps_c)
    th_h = np.tanh(beta_h * eps_h)
    stay = 1.0 - 2.0 * alpha
    q_hot = eps_h * (stay * th_c - th_h)
    q_cold = eps_c * (stay * th_h - th_c)
    work = -(stay * eps_h - eps_c) * th_c - (stay * eps_c - eps_h) * th_h
    return IsolatedCycleAverages(work=float(work), q_hot=float(q_hot), q_cold=float(q_cold))


def _mode_from_signs(work, q_hot, q_cold, tol=0.0):
    """Map the sign triple (work, q_hot, q_cold) to an operating mode.

    Signs within ``tol`` of zero are resolved toward the failure labels so
    boundary points get a deterministic mode; callers flag them separately.
    """
    if work < -tol and q_hot > tol and q_cold < -tol:
        return MachineMode.ENGINE
    if work > tol and q_hot < -tol and q_cold > tol:
        return MachineMode.REFRIGERATOR
    if work >= -tol and q_hot >= -tol:
        # energy conservation forces q_cold <= 0 here
        return MachineMode.FAIL_EMIT_COLD
    if work >= -tol and q_hot < 0 and q_cold <= tol:
        return MachineMode.FAIL_EMIT_BOTH
    raise ValueError(
        f"sign triple (W={work}, Qh={q_hot}, Qc={q_cold}) matches no operating mode"
    )


def classify(alpha, x, eta):
    """Operating mode of the isolated machine at one phase-portrait point.

    Evaluates the closed-form averages in normalized units (energies in
    eps_c, temperatures folded into eta) and labels the point by the sign
    triple.  The equivalent inequality thresholds on alpha are evaluated as
    redundant assertions; disagreement raises an internal-consistency error.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not x > 1.0:
        raise ValueError("compression ratio x must exceed 1")
    if not eta > 0.0:
        raise ValueError("eta must be positive")
    stay = 1.0 - 2.0 * alpha
    # closed forms with eps_c = 1, tanh(beta_c eps_c) = 1, tanh(beta_h eps_h) = eta
    q_hot = x * (stay - eta)
    q_cold = stay * eta - 1.0
    work = -(q_hot + q_cold)
    scale = max(1.0, x)
    tol = BOUNDARY_TOL * scale
    boundary = abs(work) <= tol or abs(q_hot) <= tol or abs(q_cold) <= tol
    mode = _mode_from_signs(work, q_hot, q_cold, tol=tol)

    # redundant inequality checks on alpha (derived thresholds)
    if not boundary:
        work_thresh = 0.5 * (1.0 - (1.0 + x * eta) / (x + eta))
        hot_thresh = 0.5 * (1.0 - eta)
        cold_thresh = (eta - 1.0) / (2.0 * eta)
        is_engine = alpha < work_thresh and alpha < hot_thresh and alpha > cold_thresh
        is_fridge = alpha > work_thresh and alpha > hot_thresh and alpha < cold_thresh
        if is_engine != (mode is MachineMode.ENGINE) or is_fridge != (
            mode is MachineMode.REFRIGERATOR
        ):
            raise RuntimeError(
                "internal inconsistency between sign triple and inequality thresholds "
                f"at alpha={alpha}, x={x}, eta={eta}"
            )
    return MachineClassification(
        mode=mode, x=float(x), eta=float(eta), alpha=float(alpha), boundary=boundary,
        work=float(work), q_hot=float(q_hot), q_cold=float(q_cold),
    )


def phase_portrait(alphas, etas, x):
    """Classify every point of an (alpha, eta) grid at fixed x.

    Returns a flat list in alpha-major order (alpha outer loop), matching the
    serialization order used for portrait output files.
    """
    return [classify(float(a), x, float(e)) for a in np.asarray(alphas) for e in np.asarray(etas)]
