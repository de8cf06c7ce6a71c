"""Krotov's method for Lindblad dynamics with sequential control updates.

One iteration:

1. co-states are seeded from the objective at ``t = T`` and propagated back
   to ``t = 0`` with the adjoint of the current dynamics;
2. a forward sweep visits the control intervals in order; on interval
   ``i`` the update ``S(t)/lambda * sum_j Im Tr{sigma_j(t_i)^+ [H_c,
   rho_j(t_i)]}`` is computed from the states already propagated with the
   new controls, applied, and used at once to advance every state.

The step propagators produced by the sweep are exactly those of the new
control, so they are reused for the next backward pass.
"""
from __future__ import annotations

import enum
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm_frechet

from . import _kernels
from .core import LindbladGenerator, commutator, commutator_superop
from .dynamics import ControlField, TimeGrid
from .functionals import Gate, fidelity_from_final, initial_states, target_costates
from .spectral import SpectralFilter, filtered_update, spectral_penalty

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-12


class ShapeKind(enum.Enum):
    SIN_SQUARED = "sin2"
    FLAT_WITH_RAMPS = "flat"


@dataclass(frozen=True)
class ShapeFunction:
    """Update envelope ``0 <= S(t) <= 1``.

    ``sin2`` is ``sin^2(pi t / T)``. ``flat`` is 1 on a plateau with
    ``sin^2`` ramps of length ``ramp_fraction * T`` at both ends.
    """

    kind: ShapeKind = ShapeKind.SIN_SQUARED
    ramp_fraction: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        if not 0 < self.ramp_fraction <= 0.5:
            raise ValueError(f"ramp_fraction must be in (0, 0.5], got {self.ramp_fraction}")

    def __call__(self, t, t_final: float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind is ShapeKind.SIN_SQUARED:
            return np.sin(np.pi * t / t_final) ** 2
        t_rise = self.ramp_fraction * t_final
        s = np.ones_like(t)
        rising = t < t_rise
        falling = t > t_final - t_rise
        s[rising] = np.sin(0.5 * np.pi * t[rising] / t_rise) ** 2
        s[falling] = np.sin(0.5 * np.pi * (t_final - t[falling]) / t_rise) ** 2
        return np.clip(s, 0.0, 1.0)


class LambdaAdaptation(enum.Enum):
    FIXED = "fixed"
    # On a decrease of F, the iteration is discarded and repeated with
    # lambda doubled (half the step).
    HALVE_ON_NON_MONOTONE = "halve"


@dataclass(frozen=True)
class KrotovOptions:
    lambda_a: float = 1.0
    max_iterations: int = 100
    fidelity_goal: float = 0.999
    delta_f_tolerance: float = 0.0
    shape: ShapeFunction | Callable = field(default_factory=ShapeFunction)
    lambda_adaptation: LambdaAdaptation = LambdaAdaptation.FIXED
    u_max: float | None = None
    max_retries: int = 30

    def __post_init__(self):
        if not (np.isfinite(self.lambda_a) and self.lambda_a > 0):
            raise ValueError(f"lambda must be positive, got {self.lambda_a}")
        if not 0 < self.fidelity_goal <= 1:
            raise ValueError(f"fidelity_goal must be in (0, 1], got {self.fidelity_goal}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.delta_f_tolerance < 0:
            raise ValueError("delta_f_tolerance must be >= 0")
        if self.u_max is not None and not self.u_max > 0:
            raise ValueError("u_max must be positive")
        object.__setattr__(self, "lambda_adaptation", LambdaAdaptation(self.lambda_adaptation))

    def shape_samples(self, grid: TimeGrid) -> np.ndarray:
        s = np.asarray(self.shape(grid.control_times, grid.t_final), dtype=float)
        s = np.broadcast_to(s, (grid.n_steps,)).copy()
        if np.any(s < 0) or np.any(s > 1) or not np.all(np.isfinite(s)):
            raise ValueError("shape function must lie in [0, 1]")
        return s


@dataclass(frozen=True)
class IterationInfo:
    iteration: int
    fidelity: float
    delta_f: float
    j_spec: float
    max_du: float
    seconds: float
    lambda_a: float
    monotone: bool


@dataclass
class OptimizationRecord:
    iterations: list[IterationInfo]
    field: ControlField
    converged: bool
    reason: str
    spectral_warning: bool = False
    pulses: list[np.ndarray] = field(default_factory=list)

    @property
    def final_fidelity(self) -> float:
        return self.iterations[-1].fidelity

    @property
    def monotone(self) -> bool:
        return all(info.monotone for info in self.iterations)

    @property
    def n_iterations(self) -> int:
        """Number of update iterations, not counting the guess evaluation."""
        return self.iterations[-1].iteration

    def convergence_table(self) -> np.ndarray:
        """Rows ``(iter, F, dF, J_spec, max_du, seconds)``."""
        return np.array(
            [
                (i.iteration, i.fidelity, i.delta_f, i.j_spec, i.max_du, i.seconds)
                for i in self.iterations
            ],
            dtype=float,
        )


def local_update(sigma, rho, control_op, s_t: float, lambda_a: float) -> float:
    """Update of one control sample from one state/co-state pair.

    Returns ``(s_t / lambda_a) * Im Tr{sigma^+ [control_op, rho]}``.
    """
    if not lambda_a > 0:
        raise ValueError(f"lambda must be positive, got {lambda_a}")
    sigma = np.asarray(sigma, dtype=complex)
    value = np.vdot(sigma, commutator(np.asarray(control_op, dtype=complex), np.asarray(rho, dtype=complex)))
    return s_t / lambda_a * float(value.imag)


class _Problem:
    """Superoperators and boundary conditions for one (generator, objective) pair."""

    def __init__(self, gen: LindbladGenerator, objective):
        full_dim = objective.full_dim if isinstance(objective, Gate) else objective.dim
        if full_dim != gen.dim:
            raise ValueError(f"objective dimension {full_dim} does not match generator dimension {gen.dim}")
        self.gen = gen
        self.objective = objective
        d = gen.dim
        self.rho0 = np.array([r.reshape(-1) for r in initial_states(objective)], dtype=complex)
        self.sigma_t = np.array([s.reshape(-1) for s in target_costates(objective)], dtype=complex)
        self.l0 = gen.drift_superop()
        self.lcs = gen.control_superops()
        self.cmts = np.array([commutator_superop(h) for h in gen.controls], dtype=complex).reshape(
            gen.n_controls, d * d, d * d
        )

    def fidelity(self, finals: np.ndarray) -> float:
        d = self.gen.dim
        return fidelity_from_final(self.objective, [v.reshape(d, d) for v in finals])

    def forward(self, samples: np.ndarray, dt: float):
        return _kernels.forward(self.l0, self.lcs, samples, dt, self.rho0)


def _check_grid(gen, field_: ControlField):
    if field_.n_controls != gen.n_controls:
        raise ValueError(f"guess has {field_.n_controls} controls, generator has {gen.n_controls}")


def evaluate_objective(gen: LindbladGenerator, objective, field_: ControlField) -> float:
    """Propagate the objective's states under `field_` and return F_T."""
    _check_grid(gen, field_)
    prob = _Problem(gen, objective)
    states, _ = prob.forward(field_.samples, field_.grid.dt)
    return prob.fidelity(states[-1])


def _plateau_compatible(shape: np.ndarray) -> bool:
    return np.count_nonzero(np.abs(shape - 1.0) < 1e-12) >= 0.5 * shape.size


def krotov_iterate(
    gen: LindbladGenerator,
    objective,
    guess: ControlField,
    options: KrotovOptions,
    constraint: SpectralFilter | Sequence[SpectralFilter] | None = None,
    *,
    store_pulses: bool = False,
    callback: Callable[[IterationInfo], None] | None = None,
) -> OptimizationRecord:
    """Optimize `guess` until the goal, tolerance or iteration limit is hit.

    Iteration 0 is the evaluation of the guess. With a spectral `constraint`
    the sequential sweep yields the raw update, which is then filtered in
    frequency space and applied as a whole; monotonicity is then recorded
    but not guaranteed.
    """
    _check_grid(gen, guess)
    prob = _Problem(gen, objective)
    grid = guess.grid
    dt = grid.dt
    shape = options.shape_samples(grid)
    u_max = math.inf if options.u_max is None else float(options.u_max)
    filters = None
    spectral_warning = False
    if constraint is not None:
        filters = [constraint] if isinstance(constraint, SpectralFilter) else list(constraint)
        if not _plateau_compatible(shape):
            spectral_warning = True
            warnings.warn(
                "spectral constraint with a shape function lacking a plateau: "
                "the frequency-domain update is approximate",
                RuntimeWarning,
                stacklevel=2,
            )

    t0 = time.perf_counter()
    samples = np.clip(guess.samples, -u_max, u_max)
    states, props = prob.forward(samples, dt)
    fid = prob.fidelity(states[-1])
    infos = [IterationInfo(0, fid, 0.0, 0.0, 0.0, time.perf_counter() - t0, options.lambda_a, True)]
    pulses = [samples.copy()] if store_pulses else []
    if callback:
        callback(infos[0])
    lambda_a = options.lambda_a

    def finish(converged, reason):
        return OptimizationRecord(
            infos, guess.with_samples(samples), converged, reason, spectral_warning, pulses
        )

    if fid >= options.fidelity_goal:
        return finish(True, "fidelity goal reached")

    for iteration in range(1, options.max_iterations + 1):
        t0 = time.perf_counter()
        costates = _kernels.backward(props, prob.sigma_t)
        for attempt in range(options.max_retries + 1):
            new, raw, new_states, new_props = _kernels.sweep(
                prob.l0, prob.lcs, prob.cmts, samples, shape, 1.0 / lambda_a, u_max,
                costates, prob.rho0, dt,
            )
            if not (np.all(np.isfinite(raw)) and np.all(np.isfinite(new_states[-1]))):
                logger.error("non-finite control update in iteration %d", iteration)
                return finish(False, "non-finite update")
            if iteration == 1 and attempt == 0 and not np.any(raw):
                return finish(False, "stationary guess")
            j_spec = 0.0
            if filters is not None:
                du = filtered_update(filters, raw, grid)
                new = np.clip(samples + du, -u_max, u_max)
                j_spec = sum(f.alpha * spectral_penalty(f, du, grid) for f in filters)
                new_states, new_props = prob.forward(new, dt)
            new_fid = prob.fidelity(new_states[-1])
            delta = new_fid - fid
            monotone = delta >= -MONOTONE_TOL
            if monotone or options.lambda_adaptation is LambdaAdaptation.FIXED:
                break
            logger.info("iteration %d: F decreased by %.3g, doubling lambda", iteration, -delta)
            lambda_a *= 2.0
        else:
            return finish(False, "step size adaptation failed")
        if not monotone:
            logger.warning("iteration %d is not monotone: dF = %.3g", iteration, delta)
        max_du = float(np.max(np.abs(new - samples), initial=0.0))
        samples, states, props, fid = new, new_states, new_props, new_fid
        info = IterationInfo(
            iteration, fid, delta, j_spec, max_du, time.perf_counter() - t0, lambda_a, monotone
        )
        infos.append(info)
        if store_pulses:
            pulses.append(samples.copy())
        if callback:
            callback(info)
        if fid >= options.fidelity_goal:
            return finish(True, "fidelity goal reached")
        if options.delta_f_tolerance > 0 and abs(delta) < options.delta_f_tolerance:
            return finish(False, "delta F below tolerance")
    return finish(False, "maximum iterations reached")


def gradient(gen: LindbladGenerator, objective, field_: ControlField) -> np.ndarray:
    """Exact ``dF/du`` per control sample from the state/co-state pairing.

    ``dF/du_{j,i} = Re sum_m <sigma_m(t_{i+1}), dP_i rho_m(t_i)>`` where
    ``dP_i`` is the Frechet derivative of the step propagator along the
    control superoperator.
    """
    _check_grid(gen, field_)
    prob = _Problem(gen, objective)
    dt = field_.grid.dt
    states, props = prob.forward(field_.samples, dt)
    costates = _kernels.backward(props, prob.sigma_t)
    grad = np.empty(field_.samples.shape)
    for i in range(field_.grid.n_steps):
        gen_i = prob.l0 + np.tensordot(field_.samples[:, i], prob.lcs, axes=1)
        for j in range(gen.n_controls):
            dprop = expm_frechet(gen_i * dt, prob.lcs[j] * dt, compute_expm=False)
            grad[j, i] = np.vdot(costates[i + 1], states[i] @ dprop.T).real
    return grad


def krotov_direction(gen: LindbladGenerator, objective, field_: ControlField) -> np.ndarray:
    """First-order sensitivity ``Im sum_m <sigma_m(t_i), [H_j, rho_m(t_i)]>`` with the current control.

    Multiplied by ``dt`` this approximates `gradient` to first order in ``dt``;
    multiplied by ``S/lambda`` it is the update of a sweep in the limit of
    large lambda.
    """
    _check_grid(gen, field_)
    prob = _Problem(gen, objective)
    states, props = prob.forward(field_.samples, field_.grid.dt)
    costates = _kernels.backward(props, prob.sigma_t)
    out = np.empty(field_.samples.shape)
    for j in range(gen.n_controls):
        image = states[:-1] @ prob.cmts[j].T
        out[j] = np.einsum("tmk,tmk->t", costates[:-1].conj(), image).imag
    return out


@dataclass(frozen=True)
class ScanRow:
    t_final: float
    fidelity: float
    iterations: int
    reason: str


def rescale_guess(guess: ControlField, t_final: float) -> ControlField:
    """Stretch `guess` to duration `t_final` at constant pulse area."""
    grid = TimeGrid(t_final, guess.grid.n_steps)
    return ControlField(grid, guess.samples * (guess.grid.t_final / t_final))


def scan_duration(
    gen: LindbladGenerator,
    objective,
    t_list: Sequence[float],
    options: KrotovOptions,
    guess: ControlField,
) -> list[ScanRow]:
    """Optimize at each duration in `t_list` starting from the rescaled `guess`.

    Failed entries get ``NaN`` fidelity and the error message as reason;
    the scan carries on.
    """
    t_list = [float(t) for t in t_list]
    if not t_list:
        raise ValueError("T_list must not be empty")
    if len(set(t_list)) != len(t_list):
        raise ValueError("T_list contains duplicate durations")
    if any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ValueError("T_list must be increasing")
    rows = []
    for t_final in t_list:
        try:
            record = krotov_iterate(gen, objective, rescale_guess(guess, t_final), options)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.warning("scan entry T=%g failed: %s", t_final, exc)
            rows.append(ScanRow(t_final, math.nan, 0, str(exc)))
            continue
        rows.append(ScanRow(t_final, record.final_fidelity, record.n_iterations, record.reason))
    return rows

