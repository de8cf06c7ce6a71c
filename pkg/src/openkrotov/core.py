"""Operators, density matrices and the Lindblad generator.

States and operators are plain ``numpy`` complex arrays of shape ``(d, d)``.
The validators in this module check the physical invariants where a caller
needs them; nothing here wraps arrays in custom classes.

Liouville-space vectors use row-major vectorization, ``vec(rho) =
rho.reshape(-1)``, so that ``vec(A @ X @ B) = kron(A, B.T) @ vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
SPECTRUM_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class DimensionError(ValueError):
    """Operands do not share a Hilbert-space dimension."""


def as_operator(matrix, *, hermitian: bool = False, name: str = "operator") -> np.ndarray:
    """Return `matrix` as a read-only square complex array.

    With ``hermitian=True`` the Hermiticity invariant is enforced at
    tolerance 1e-12 (entrywise).
    """
    op = np.array(matrix, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or op.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {op.shape}")
    if not np.all(np.isfinite(op)):
        raise ValueError(f"{name} has non-finite entries")
    if hermitian and not is_hermitian(op):
        raise ValueError(f"{name} is not Hermitian")
    op.setflags(write=False)
    return op


def is_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= tol)


def check_density(rho, *, costate: bool = False, name: str = "rho") -> np.ndarray:
    """Validate a density operator (or, with ``costate=True``, a co-state).

    Physical states must be Hermitian, have unit trace and a spectrum that
    is nonnegative within 1e-10. Co-states only need to be Hermitian.
    """
    rho = as_operator(rho, hermitian=True, name=name)
    if costate:
        return rho
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise ValueError(f"{name} does not have unit trace (Tr = {np.trace(rho):.3g})")
    if np.min(np.linalg.eigvalsh(rho)) < -SPECTRUM_TOL:
        raise ValueError(f"{name} is not positive semidefinite")
    return rho


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(index: int, dim: int) -> np.ndarray:
    """Return ``|index><index|`` in dimension `dim`."""
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1.0
    return p


def transition(k: int, l: int, dim: int) -> np.ndarray:
    """Return the matrix unit ``|k><l|``."""
    e = np.zeros((dim, dim), dtype=complex)
    e[k, l] = 1.0
    return e


def hilbert_schmidt_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Return ``Tr{a^dagger b}``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def purity(rho: np.ndarray) -> float:
    """Return ``Tr{rho^2}`` of a physical state."""
    rho = check_density(rho)
    return float(np.real(np.vdot(rho, rho)))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class LindbladGenerator:
    """Drift Hamiltonian, control Hamiltonians and dissipative channels.

    The equation of motion is ``drho/dt = -i[H0 + sum_j u_j H_j, rho] +
    sum_k gamma_k (A_k rho A_k^+ - 1/2 {A_k^+ A_k, rho})`` with hbar = 1.
    """

    drift: np.ndarray
    controls: tuple[np.ndarray, ...] = ()
    channels: tuple[tuple[np.ndarray, float], ...] = ()
    _superops: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        drift = as_operator(self.drift, hermitian=True, name="drift")
        d = drift.shape[0]
        controls = tuple(
            as_operator(h, hermitian=True, name=f"control {j}") for j, h in enumerate(self.controls)
        )
        channels = []
        for k, (op, rate) in enumerate(self.channels):
            op = as_operator(op, name=f"channel {k}")
            rate = float(rate)
            if not np.isfinite(rate) or rate < 0:
                raise ValueError(f"channel {k} has invalid rate {rate}")
            channels.append((op, rate))
        for op in (*controls, *(op for op, _ in channels)):
            if op.shape != (d, d):
                raise DimensionError(f"operator of shape {op.shape} in a generator of dimension {d}")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "channels", tuple(channels))

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    def hamiltonian(self, u: Sequence[float]) -> np.ndarray:
        u = self._check_controls(u)
        h = self.drift.copy()
        for uj, hj in zip(u, self.controls):
            h = h + uj * hj
        return h

    def _check_controls(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.size != self.n_controls:
            raise ValueError(f"expected {self.n_controls} control values, got {u.size}")
        return u

    # Liouville-space matrices, built once per generator.
    def drift_superop(self) -> np.ndarray:
        """Return the ``d^2 x d^2`` matrix of the control-free generator."""
        if "drift" not in self._superops:
            sup = hamiltonian_superop(self.drift)
            for op, rate in self.channels:
                if rate > 0:
                    sup = sup + rate * dissipator_superop(op)
            sup.setflags(write=False)
            self._superops["drift"] = sup
        return self._superops["drift"]

    def control_superops(self) -> np.ndarray:
        """Return the stacked ``-i[H_j, .]`` matrices, shape ``(n_controls, d^2, d^2)``."""
        if "controls" not in self._superops:
            n = self.dim**2
            sup = np.array([hamiltonian_superop(h) for h in self.controls], dtype=complex)
            sup = sup.reshape(len(self.controls), n, n)
            sup.setflags(write=False)
            self._superops["controls"] = sup
        return self._superops["controls"]

    def liouvillian(self, u: Sequence[float]) -> np.ndarray:
        u = self._check_controls(u)
        sup = self.drift_superop().copy()
        for uj, lj in zip(u, self.control_superops()):
            sup += uj * lj
        return sup


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> -i[h, rho]`` acting on row-major vectorized rho."""
    eye = np.eye(h.shape[0], dtype=complex)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> [h, rho]``."""
    eye = np.eye(h.shape[0], dtype=complex)
    return np.kron(h, eye) - np.kron(eye, h.T)


def dissipator_superop(a: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> a rho a^+ - 1/2 {a^+ a, rho}`` (unit rate)."""
    eye = np.eye(a.shape[0], dtype=complex)
    ada = a.conj().T @ a
    return np.kron(a, a.conj()) - 0.5 * (np.kron(ada, eye) + np.kron(eye, ada.T))


def apply_dissipator(gen: LindbladGenerator, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (gen.dim, gen.dim):
        raise DimensionError(f"state of shape {rho.shape} for generator of dimension {gen.dim}")
    out = np.zeros_like(rho)
    for a, rate in gen.channels:
        if rate == 0:
            continue
        ada = a.conj().T @ a
        out += rate * (a @ rho @ a.conj().T - 0.5 * (ada @ rho + rho @ ada))
    return out


def apply_liouvillian(gen: LindbladGenerator, u: Sequence[float], rho: np.ndarray) -> np.ndarray:
    h = gen.hamiltonian(u)
    rho = np.asarray(rho, dtype=complex)
    return -1j * commutator(h, rho) + apply_dissipator(gen, rho)
