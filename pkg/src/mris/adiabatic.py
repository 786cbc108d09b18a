"""Slow driving of the chain: schedules interpolating two transition
matrices, the instantaneous generator family, and tracking of the evolved
extended state against the instantaneous steady state.
"""

from dataclasses import dataclass, field

import numpy as np

from . import extended
from .chains import ChainError, MarkovChain, stationary_vector
from .models import MrisModel
from .quantum import trace_norm
from .tolerances import DEFAULT, Tolerances


class AdiabaticError(ValueError):
    pass


def _smoothstep(s):
    return s * s * (3.0 - 2.0 * s)


@dataclass(frozen=True)
class AdiabaticSchedule:
    """Interpolation P(s) = (1 - f(s)) P_start + f(s) P_end on s in [0, 1];
    only the chain varies, the probes and channels stay fixed."""
    p_start: np.ndarray
    p_end: np.ndarray
    kind: str = "linear"           # "linear" | "smoothstep"

    def __post_init__(self):
        for name in ("p_start", "p_end"):
            p = np.asarray(getattr(self, name), dtype=float)
            if p.ndim != 2 or p.shape[0] != p.shape[1]:
                raise AdiabaticError(f"{name} must be square")
            if (p < 0).any() or np.abs(p.sum(axis=1) - 1.0).max() > 1e-12:
                raise AdiabaticError(f"{name} is not a stochastic matrix")
            object.__setattr__(self, name, p)
        if self.p_start.shape != self.p_end.shape:
            raise AdiabaticError("endpoint matrices differ in shape")
        if self.kind not in ("linear", "smoothstep"):
            raise AdiabaticError(f"unknown schedule kind {self.kind!r}")

    def fraction(self, s: float) -> float:
        if not 0.0 <= s <= 1.0:
            raise AdiabaticError(f"schedule parameter {s} outside [0, 1]")
        return float(s) if self.kind == "linear" else float(_smoothstep(s))

    def transition_matrix(self, s: float) -> np.ndarray:
        f = self.fraction(s)
        return (1.0 - f) * self.p_start + f * self.p_end


def schedule_generator(model: MrisModel, schedule: AdiabaticSchedule,
                       s: float) -> extended.ExtendedGenerator:
    """Instantaneous generator at schedule time s: the model's channels driven
    by the interpolated chain."""
    p_s = schedule.transition_matrix(s)
    if p_s.shape[0] != model.chain.n:
        raise AdiabaticError(
            f"schedule is {p_s.shape[0]}-state but the model has {model.chain.n}")
    pi_s, _ = stationary_vector(p_s)
    chain_s = MarkovChain(labels=model.labels, pi=pi_s, P=p_s)
    return extended.build_generator(chain_s, model.channels, model.tol)


@dataclass
class AdiabaticResult:
    n_steps: int
    kind: str
    s_grid: np.ndarray
    errors: np.ndarray              # trace-norm distance to R_+(s_k), per step
    plateau_error: float            # max over the final three quarters
    instantaneous_gap_min: float

    @property
    def epsilon(self):
        return 1.0 / self.n_steps


def adiabatic_evolve(model: MrisModel, schedule: AdiabaticSchedule,
                     n_steps: int, r0: extended.ExtendedState = None,
                     primitivity_points: int = 20) -> AdiabaticResult:
    """Run R_k = generator(k / N) R_{k-1} for k = 1..N and track the
    trace-norm error sum_w || R_k(w) - R_+(k/N)(w) ||_1.

    The instantaneous family must be primitive along the whole path (checked
    on a uniform grid); r0 defaults to the initial steady state R_+(0), so the
    reported error is pure lag, not transient decay.  The plateau error is the
    maximum over k >= N/4, by which point any admissible start has merged into
    the O(1/N) tracking regime.
    """
    if n_steps < 4:
        raise AdiabaticError("need at least 4 steps")
    tol = model.tol
    gap_min = np.inf
    for s in np.linspace(0.0, 1.0, primitivity_points):
        cls = extended.classify_generator(schedule_generator(model, schedule, s), tol)
        if cls.kind != "primitive":
            raise AdiabaticError(
                f"instantaneous generator at s={s:.3f} is {cls.kind}; the "
                "tracking bound needs a primitive family")
        gap_min = min(gap_min, cls.gap)

    if r0 is None:
        g0 = schedule_generator(model, schedule, 0.0)
        r0, _ = extended.find_ess(g0, tol)

    s_grid = np.arange(n_steps + 1) / n_steps
    errors = np.empty(n_steps + 1)
    r = r0
    ess0, _ = extended.find_ess(schedule_generator(model, schedule, 0.0), tol)
    errors[0] = sum(trace_norm(r.blocks[k] - ess0.blocks[k])
                    for k in range(model.chain.n))
    for k in range(1, n_steps + 1):
        g_k = schedule_generator(model, schedule, s_grid[k])
        r = g_k.apply(r)
        ess_k, _ = extended.find_ess(g_k, tol)
        errors[k] = sum(trace_norm(r.blocks[j] - ess_k.blocks[j])
                        for j in range(model.chain.n))
    plateau = float(errors[int(np.ceil(n_steps / 4)):].max())
    return AdiabaticResult(n_steps=n_steps, kind=schedule.kind, s_grid=s_grid,
                           errors=errors, plateau_error=plateau,
                           instantaneous_gap_min=float(gap_min))
