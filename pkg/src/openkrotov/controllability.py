"""Lie-rank controllability test for ``H = H0 + sum_j u_j H_j``.

The dynamical Lie algebra is built in the real vector space of traceless
skew-Hermitian matrices ``i H``; directions are kept orthonormal by SVD with
a singular-value cutoff of 1e-10.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import DimensionError, as_operator

SV_THRESHOLD = 1e-10

CLOSED_SYSTEM_CAVEAT = (
    "Lie rank decides controllability of the closed (Hamiltonian) system only; "
    "for open systems it is not sufficient to decide controllability."
)


@dataclass(frozen=True, eq=False)
class LieClosureReport:
    generated_dimension: int
    full_dimension: int
    generations: int
    converged: bool
    basis: tuple[np.ndarray, ...] = field(repr=False, default=())

    @property
    def controllable(self) -> bool:
        return self.generated_dimension == self.full_dimension

    def to_dict(self) -> dict:
        return {
            "generated_dimension": self.generated_dimension,
            "full_dimension": self.full_dimension,
            "controllable": self.controllable,
            "generations": self.generations,
            "converged": self.converged,
            "caveat": CLOSED_SYSTEM_CAVEAT,
        }

    def summary(self) -> str:
        verdict = "controllable" if self.controllable else "not controllable"
        status = "" if self.converged else " (depth cap reached before closure)"
        return (
            f"Lie algebra dimension {self.generated_dimension}/{self.full_dimension}: "
            f"{verdict} after {self.generations} generation(s){status}.\n{CLOSED_SYSTEM_CAVEAT}"
        )


def _to_real(x: np.ndarray) -> np.ndarray:
    return np.concatenate([x.real.ravel(), x.imag.ravel()])


def _from_real(v: np.ndarray, d: int) -> np.ndarray:
    n = d * d
    return (v[:n] + 1j * v[n:]).reshape(d, d)


def _orthonormal(vectors: np.ndarray) -> np.ndarray:
    """Rows spanning the same space as `vectors`, orthonormal."""
    if vectors.shape[0] == 0:
        return vectors
    u, s, vt = np.linalg.svd(vectors, full_matrices=False)
    rank = int(np.sum(s > SV_THRESHOLD * max(1.0, s[0])))
    return vt[:rank]


def _generators(h0, controls) -> tuple[int, list[np.ndarray]]:
    ops = [as_operator(h0, hermitian=True, name="drift")]
    ops += [as_operator(h, hermitian=True, name=f"control {j}") for j, h in enumerate(controls)]
    d = ops[0].shape[0]
    if any(op.shape != (d, d) for op in ops):
        raise DimensionError("all Hamiltonians must share one dimension")
    eye = np.eye(d)
    # i H with the identity component removed
    return d, [1j * (op - np.trace(op) / d * eye) for op in ops]


def lie_rank(h0, controls, *, max_depth: int | None = None) -> LieClosureReport:
    """Dimension of the Lie algebra generated by ``i H0`` and ``i H_j`` inside su(d).

    New directions are commutators of the generators with the current basis;
    the loop stops when a generation adds nothing or after `max_depth`
    generations (default ``2 d^2``).
    """
    d, gens = _generators(h0, controls)
    full = d * d - 1
    depth_cap = 2 * d * d if max_depth is None else int(max_depth)
    basis = _orthonormal(np.array([_to_real(g) for g in gens]))
    generations = 0
    converged = False
    while generations < depth_cap:
        mats = [_from_real(v, d) for v in basis]
        new = [_to_real(g @ b - b @ g) for g in gens for b in mats]
        grown = _orthonormal(np.vstack([basis, np.array(new)]))
        if grown.shape[0] == basis.shape[0]:
            converged = True
            break
        basis = grown
        generations += 1
        if basis.shape[0] == full:
            converged = True
            break
    return LieClosureReport(
        generated_dimension=int(basis.shape[0]),
        full_dimension=full,
        generations=generations,
        converged=converged,
        basis=tuple(_from_real(v, d) for v in basis),
    )


@dataclass(frozen=True)
class ConnectivityReport:
    edges: tuple[tuple[int, int], ...]
    components: tuple[tuple[int, ...], ...]

    @property
    def n_components(self) -> int:
        return len(self.components)


def connectivity_graph(h0, controls, *, tol: float = 1e-12) -> ConnectivityReport:
    """Graph on basis states with an edge wherever some generator couples them."""
    ops = [np.asarray(h0, dtype=complex)] + [np.asarray(h, dtype=complex) for h in controls]
    d = ops[0].shape[0]
    if any(op.shape != (d, d) for op in ops):
        raise DimensionError("all Hamiltonians must share one dimension")
    adjacency = np.zeros((d, d), dtype=bool)
    for op in ops:
        adjacency |= np.abs(op) > tol
    np.fill_diagonal(adjacency, False)
    adjacency |= adjacency.T
    edges = tuple((i, j) for i in range(d) for j in range(i + 1, d) if adjacency[i, j])
    _, labels = connected_components(csr_matrix(adjacency), directed=False)
    groups: dict[int, list[int]] = {}
    for node, label in enumerate(labels):
        groups.setdefault(int(label), []).append(node)
    components = tuple(tuple(g) for g in sorted(groups.values()))
    return ConnectivityReport(edges, components)
