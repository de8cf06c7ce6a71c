"""Forward and backward propagation under piecewise-constant controls.

States live on the grid ``t_i = i * dt`` (``N + 1`` points) and control
samples on the midpoints ``t_i + dt / 2`` (``N`` points); sample ``i``
governs the interval ``[t_i, t_{i+1}]`` and each step is the exact
exponential of the Liouvillian for that interval.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .core import LindbladGenerator, DimensionError, as_operator


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t_final) and self.t_final > 0):
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "t_final", float(self.t_final))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def state_times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def control_times(self) -> np.ndarray:
        return (np.arange(self.n_steps) + 0.5) * self.dt


@dataclass(frozen=True, eq=False)
class ControlField:
    """Real control samples, one row per control Hamiltonian."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2 or samples.shape[1] != self.grid.n_steps:
            raise ValueError(
                f"expected samples of shape (n_controls, {self.grid.n_steps}), got {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("control samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_controls(self) -> int:
        return self.samples.shape[0]

    @classmethod
    def zeros(cls, grid: TimeGrid, n_controls: int = 1) -> "ControlField":
        return cls(grid, np.zeros((n_controls, grid.n_steps)))

    @classmethod
    def from_function(cls, grid: TimeGrid, *funcs) -> "ControlField":
        """Sample callables ``f(t)`` on the midpoint grid, one per control."""
        t = grid.control_times
        return cls(grid, np.array([np.broadcast_to(f(t), t.shape) for f in funcs], dtype=float))

    def with_samples(self, samples) -> "ControlField":
        return ControlField(self.grid, samples)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States (or co-states) at every point of the state grid."""

    grid: TimeGrid
    states: np.ndarray  # (N + 1, d, d)

    def __post_init__(self):
        self.states.setflags(write=False)

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, i):
        return self.states[i]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _check_field(gen: LindbladGenerator, field: ControlField):
    if field.n_controls != gen.n_controls:
        raise ValueError(f"field has {field.n_controls} controls, generator has {gen.n_controls}")


def _stack(matrices, dim: int) -> np.ndarray:
    stack = np.array([np.asarray(m, dtype=complex) for m in matrices])
    if stack.ndim != 3 or stack.shape[1:] != (dim, dim):
        raise DimensionError(f"expected operators of shape ({dim}, {dim}), got {stack.shape[1:]}")
    return stack.reshape(len(stack), dim * dim)


def step_propagator(gen: LindbladGenerator, u: Sequence[float], dt: float) -> np.ndarray:
    """Return the ``d^2 x d^2`` map ``exp(L(u) dt)`` on row-major vectorized states."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    sup = gen.liouvillian(u)
    if not (np.all(np.isfinite(sup)) and np.isfinite(dt)):
        raise ValueError("non-finite generator or time step")
    return _kernels.expm(sup * dt)


def propagate_many(gen: LindbladGenerator, field: ControlField, rho0s) -> tuple[np.ndarray, np.ndarray]:
    """Propagate several initial operators at once.

    Returns the ``(N + 1, M, d^2)`` trajectory stack and the ``(N, d^2, d^2)``
    step propagators.
    """
    _check_field(gen, field)
    vecs = _stack(rho0s, gen.dim)
    return _kernels.forward(
        gen.drift_superop(), gen.control_superops(), field.samples, field.grid.dt, vecs
    )


def propagate_forward(gen: LindbladGenerator, field: ControlField, rho0) -> Trajectory:
    rho0 = as_operator(rho0, name="rho0")
    states, _ = propagate_many(gen, field, [rho0])
    d = gen.dim
    traj = states[:, 0, :].reshape(-1, d, d).copy()
    traj[0] = rho0
    return Trajectory(field.grid, traj)


def backward_many(props: np.ndarray, sigmas, dim: int) -> np.ndarray:
    """Propagate co-states backward through precomputed step propagators."""
    return _kernels.backward(props, _stack(sigmas, dim))


def propagate_backward(gen: LindbladGenerator, field: ControlField, sigma_final) -> Trajectory:
    """Propagate a co-state from ``t = T`` to ``t = 0`` under the adjoint generator.

    The adjoint dissipator is ``sum_k gamma_k (A_k^+ s A_k - 1/2 {A_k^+ A_k, s})``.
    It makes ``Tr{sigma(t)^+ rho(t)}`` constant along the grid, which is
    what turns the Krotov update into an ascent direction.
    """
    sigma_final = as_operator(sigma_final, name="sigma_final")
    _check_field(gen, field)
    d = gen.dim
    _, props = _kernels.forward(
        gen.drift_superop(),
        gen.control_superops(),
        field.samples,
        field.grid.dt,
        np.zeros((0, d * d), dtype=complex),
    )
    costates = backward_many(props, [sigma_final], d)
    traj = costates[:, 0, :].reshape(-1, d, d).copy()
    traj[-1] = sigma_final
    return Trajectory(field.grid, traj)


@dataclass(frozen=True, eq=False)
class Observables:
    t: np.ndarray
    populations: np.ndarray  # (N + 1, d)
    purity: np.ndarray
    fidelity: np.ndarray | None = None

    def to_csv(self) -> str:
        d = self.populations.shape[1]
        header = ["t", *(f"p_{k}" for k in range(d)), "purity"]
        columns = [self.t[:, None], self.populations, self.purity[:, None]]
        if self.fidelity is not None:
            header.append("fidelity")
            columns.append(self.fidelity[:, None])
        return format_csv(header, np.hstack(columns))


def observables(traj: Trajectory, target=None) -> Observables:
    """Populations, purity and (optionally) overlap with `target` at every grid point."""
    states = traj.states
    pops = np.real(np.einsum("tkk->tk", states))
    pur = np.real(np.einsum("tij,tji->t", states, states))
    fid = None
    if target is not None:
        target = as_operator(target, name="target")
        fid = np.real(np.einsum("tij,ji->t", states, target))
    return Observables(traj.grid.state_times, pops, pur, fid)


def format_csv(header: Sequence[str], rows: np.ndarray) -> str:
    """Write a numeric table with 15 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in np.atleast_2d(rows):
        writer.writerow([f"{x:.15g}" for x in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], np.ndarray]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [[float(x) for x in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def trajectory_csv(traj: Trajectory) -> str:
    """Full density matrices, one row per grid point (real and imaginary parts)."""
    d = traj.states.shape[1]
    header = ["t"]
    for k in range(d):
        for l in range(d):
            header += [f"re_{k}_{l}", f"im_{k}_{l}"]
    flat = traj.states.reshape(len(traj), d * d)
    body = np.empty((len(traj), 2 * d * d))
    body[:, 0::2] = flat.real
    body[:, 1::2] = flat.imag
    return format_csv(header, np.hstack([traj.grid.state_times[:, None], body]))
