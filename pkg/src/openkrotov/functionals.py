"""Figures of merit and the terminal co-states that go with them.

Every functional here is linear in the propagated states, so it can be
written as ``F = Re sum_j <sigma_j(T), D(rho_j)>`` with a fixed set of
co-states. `target_costates` returns exactly those, which keeps evaluation
and the optimizer's boundary condition consistent.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import DimensionError, as_operator, check_density, projector, transition


class BasisStrategy(enum.Enum):
    FULL = "full"
    REDUCED3 = "reduced3"
    DPLUS1 = "dplus1"
    DPLUS2 = "dplus2"  # d projectors, phase state and the maximally mixed state


@dataclass(frozen=True, eq=False)
class BasisSet:
    states: tuple[np.ndarray, ...]
    normalizations: tuple[float, ...]

    def __len__(self):
        return len(self.states)


def _basis(states) -> BasisSet:
    states = tuple(as_operator(s) for s in states)
    norms = tuple(float(np.real(np.vdot(s, s))) for s in states)
    return BasisSet(states, norms)


def full_basis(d: int) -> BasisSet:
    """The ``d^2`` matrix units ``|k><l|`` in row-major order.

    Off-diagonal units are not physical states; they enter only as an
    algebraic basis of Liouville space.
    """
    _check_dim(d)
    return _basis(transition(k, l, d) for k in range(d) for l in range(d))


def basis_spectrum(d: int) -> list[Fraction]:
    """Non-degenerate weights ``2 (d + 1 - i) / (d (d + 1))``, ``i = 1..d``."""
    return [Fraction(2 * (d + 1 - i), d * (d + 1)) for i in range(1, d + 1)]


def reduced3_states(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(rho_basis, rho_phase, rho_unital)``."""
    _check_dim(d)
    rho_basis = np.diag([float(x) for x in basis_spectrum(d)]).astype(complex)
    rho_phase = np.full((d, d), 1.0 / d, dtype=complex)
    rho_unital = np.eye(d, dtype=complex) / d
    return rho_basis, rho_phase, rho_unital


def reduced3_basis(d: int) -> BasisSet:
    return _basis(reduced3_states(d))


def dplus1_basis(d: int, *, include_unital: bool = False) -> BasisSet:
    """The ``d`` canonical projectors plus the uniform-superposition state.

    ``include_unital=True`` appends the maximally mixed state (``d + 2``
    states in total), which restores sensitivity to non-unital errors.
    """
    _check_dim(d)
    _, rho_phase, rho_unital = reduced3_states(d)
    states = [projector(i, d) for i in range(d)] + [rho_phase]
    if include_unital:
        states.append(rho_unital)
    return _basis(states)


def make_basis(strategy: BasisStrategy, d: int) -> BasisSet:
    strategy = BasisStrategy(strategy)
    if strategy is BasisStrategy.FULL:
        return full_basis(d)
    if strategy is BasisStrategy.REDUCED3:
        return reduced3_basis(d)
    return dplus1_basis(d, include_unital=strategy is BasisStrategy.DPLUS2)


def _check_dim(d):
    if int(d) != d or d < 2:
        raise ValueError(f"logical dimension must be an integer >= 2, got {d}")


@dataclass(frozen=True, eq=False)
class StateToState:
    initial: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        initial = check_density(self.initial, name="initial state")
        target = check_density(self.target, name="target state")
        if initial.shape != target.shape:
            raise DimensionError("initial and target states differ in dimension")
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "target", target)

    @property
    def dim(self) -> int:
        return self.initial.shape[0]


@dataclass(frozen=True, eq=False)
class Gate:
    """Unitary target on a logical subspace of the full Hilbert space.

    `subspace` lists the full-space basis indices spanning the logical
    subspace; ``None`` means the whole space is logical.
    """

    target: np.ndarray
    strategy: BasisStrategy = BasisStrategy.REDUCED3
    weights: tuple[float, ...] | None = None
    subspace: tuple[int, ...] | None = None
    full_dim: int | None = None

    def __post_init__(self):
        o = as_operator(self.target, name="gate")
        d = o.shape[0]
        if np.max(np.abs(o.conj().T @ o - np.eye(d))) > 1e-10:
            raise ValueError("gate target is not unitary")
        object.__setattr__(self, "target", o)
        object.__setattr__(self, "strategy", BasisStrategy(self.strategy))
        subspace = tuple(range(d)) if self.subspace is None else tuple(int(i) for i in self.subspace)
        if len(subspace) != d or len(set(subspace)) != d:
            raise ValueError(f"subspace must list {d} distinct indices")
        full_dim = d if self.full_dim is None else int(self.full_dim)
        if min(subspace) < 0 or max(subspace) >= full_dim:
            raise ValueError(f"subspace indices out of range for dimension {full_dim}")
        object.__setattr__(self, "subspace", subspace)
        object.__setattr__(self, "full_dim", full_dim)
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            m = len(make_basis(self.strategy, d))
            if len(w) != m:
                raise ValueError(f"expected {m} weights, got {len(w)}")
            if any(x < 0 or not np.isfinite(x) for x in w):
                raise ValueError("weights must be nonnegative")
            if abs(sum(w) - m) > 1e-9:
                raise ValueError(f"weights must sum to {m}")
            object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.target.shape[0]

    def basis(self) -> BasisSet:
        return make_basis(self.strategy, self.dim)

    def embed(self, op: np.ndarray) -> np.ndarray:
        """Place a logical-subspace operator into the full Hilbert space."""
        out = np.zeros((self.full_dim, self.full_dim), dtype=complex)
        idx = np.array(self.subspace)
        out[np.ix_(idx, idx)] = op
        return out

    def restrict(self, op: np.ndarray) -> np.ndarray:
        idx = np.array(self.subspace)
        return np.asarray(op)[np.ix_(idx, idx)]


def state_fidelity(final, target) -> float:
    """Return ``Re Tr{rho_final rho_target}``."""
    final = np.asarray(final, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if final.shape != target.shape:
        raise DimensionError(f"shape mismatch: {final.shape} vs {target.shape}")
    value = np.trace(final @ target)
    return float(value.real)


def _weights(objective: Gate, m: int) -> np.ndarray:
    return np.ones(m) if objective.weights is None else np.asarray(objective.weights)


def gate_fidelity(objective: Gate, evolved: Sequence[np.ndarray]) -> float:
    """Gate figure of merit from the images of the basis states.

    `evolved` holds the propagated basis states, either restricted to the
    logical subspace or in the full space.

    For the full matrix-unit basis the value is ``(1/d) sum_j Re Tr{O rho_j
    O^+ D(rho_j)}``. Pairing each unit with itself (not its adjoint) makes a
    perfect gate score 1 and the fully depolarizing map score ``1/d``. For a
    unitary map ``V`` the sum equals ``Re Tr{W conj(W)} / d`` with ``W = O^+
    V``, so it cannot tell apart targets related by a real orthogonal ``W``.
    The reduced bases use ``(1/M) sum_j w_j Re Tr{(O rho_j O^+)^+ D(rho_j)} /
    Tr{rho_j^2}``, which is 1 exactly for the target gate up to global phase.
    """
    sigmas = target_costates(objective, objective.basis(), full_space=False)
    if len(evolved) != len(sigmas):
        raise ValueError(f"expected {len(sigmas)} evolved states, got {len(evolved)}")
    total = 0.0
    for sigma, rho in zip(sigmas, evolved):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape[0] != objective.dim:
            rho = objective.restrict(rho)
        total += np.vdot(sigma, rho)
    if abs(total.imag) > 1e-10:
        raise ArithmeticError(f"fidelity has imaginary residue {total.imag:.3g}")
    return float(total.real)


def target_costates(objective, basis: BasisSet | None = None, *, full_space: bool = True) -> list[np.ndarray]:
    """Terminal co-states ``sigma_j(T)`` such that ``F = Re sum_j <sigma_j, D(rho_j)>``.

    Gate objectives give ``sigma_j = w_j / (M Tr{rho_j^2}) O rho_j O^+`` for
    the reduced bases and ``(O rho_j O^+)^+ / d`` for the matrix units. With
    ``full_space=True`` the co-states are embedded in the full Hilbert space.
    """
    if isinstance(objective, StateToState):
        return [objective.target]
    if basis is None:
        basis = objective.basis()
    o = objective.target
    m = len(basis)
    w = _weights(objective, m)
    sigmas = []
    for wj, rho, norm in zip(w, basis.states, basis.normalizations):
        image = o @ rho @ o.conj().T
        if objective.strategy is BasisStrategy.FULL:
            sigma = wj * image.conj().T / objective.dim
        else:
            sigma = wj / (m * norm) * image
        sigmas.append(objective.embed(sigma) if full_space else sigma)
    return sigmas


def initial_states(objective) -> list[np.ndarray]:
    """The states to propagate forward, in the full Hilbert space."""
    if isinstance(objective, StateToState):
        return [objective.initial]
    return [objective.embed(rho) for rho in objective.basis().states]


def fidelity_from_final(objective, finals: Sequence[np.ndarray]) -> float:
    """Evaluate the objective on forward-propagated states (full space)."""
    if isinstance(objective, StateToState):
        return state_fidelity(finals[0], objective.target)
    return gate_fidelity(objective, finals)
