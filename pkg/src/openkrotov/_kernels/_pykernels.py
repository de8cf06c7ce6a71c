"""Pure numpy implementation of the propagation kernels.

Mirrors ``_ckernels.pyx`` function for function; the two are checked
against each other in the test suite. ``num_threads`` is accepted for
signature parity and ignored: the state stacks are already vectorized.

Array conventions: superoperators are ``(n, n)`` complex with ``n = d**2``;
state stacks are ``(M, n)`` with one row-major vectorized density matrix per
row; trajectories are ``(N + 1, M, n)``; control samples are ``(nc, N)``.
"""
from __future__ import annotations

import math

import numpy as np

# Tail bound target for the truncated Taylor series, below double epsilon.
_TAYLOR_TOL = 2.0**-56
_THETA = 0.5
_MAX_DEGREE = 30


def _taylor_plan(norm: float) -> tuple[int, int]:
    """Return (number of squarings, Taylor degree) for a matrix of 1-norm `norm`."""
    s = 0
    if norm > _THETA:
        s = int(math.ceil(math.log2(norm / _THETA)))
    an = norm / 2.0**s
    m = 1
    tail = an * an / 2.0
    while tail > _TAYLOR_TOL and m < _MAX_DEGREE:
        m += 1
        tail *= an / (m + 1)
    return s, m


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series."""
    a = np.ascontiguousarray(a, dtype=complex)
    n = a.shape[0]
    norm = float(np.max(np.sum(np.abs(a), axis=0), initial=0.0))
    s, m = _taylor_plan(norm)
    scaled = a / 2.0**s
    eye = np.eye(n, dtype=complex)
    out = eye + scaled / m
    for k in range(m - 1, 0, -1):
        out = eye + (scaled @ out) / k
    for _ in range(s):
        out = out @ out
    return out


def _step(l0, lcs, u, dt):
    gen = l0.copy()
    for j in range(lcs.shape[0]):
        gen += u[j] * lcs[j]
    return expm(gen * dt)


def forward(l0, lcs, samples, dt, states0, num_threads=1):
    """Propagate every row of `states0` across the grid.

    Returns the trajectory stack and the per-step propagators. A step whose
    control values equal those of the previous step reuses its propagator.
    """
    nc, nsteps = samples.shape
    n_states, n = states0.shape
    states = np.empty((nsteps + 1, n_states, n), dtype=complex)
    props = np.empty((nsteps, n, n), dtype=complex)
    states[0] = states0
    for i in range(nsteps):
        if i > 0 and np.array_equal(samples[:, i], samples[:, i - 1]):
            props[i] = props[i - 1]
        else:
            props[i] = _step(l0, lcs, samples[:, i], dt)
        states[i + 1] = states[i] @ props[i].T
    return states, props


def backward(props, costates_final, num_threads=1):
    """Propagate co-states from T to 0 with the adjoint maps ``P_i^+``."""
    nsteps = props.shape[0]
    n_states, n = costates_final.shape
    costates = np.empty((nsteps + 1, n_states, n), dtype=complex)
    costates[nsteps] = costates_final
    for i in range(nsteps - 1, -1, -1):
        costates[i] = costates[i + 1] @ props[i].conj()
    return costates


def sweep(l0, lcs, cmts, samples, shape, inv_lambda, u_max, costates, states0, dt, num_threads=1):
    """One sequential Krotov sweep.

    At interval ``i`` the update ``shape[i] * inv_lambda * sum_m Im <sigma_m(t_i),
    [H_j, rho_m(t_i)]>`` is computed from the freshly propagated states, added
    to the old control, clipped to ``|u| <= u_max`` and used immediately to
    advance the states by one step.

    Returns ``(new_samples, raw_update, states, props)``; `raw_update` is the
    unclipped update.
    """
    nc, nsteps = samples.shape
    n_states, n = states0.shape
    new = np.empty_like(samples)
    raw = np.empty_like(samples)
    states = np.empty((nsteps + 1, n_states, n), dtype=complex)
    props = np.empty((nsteps, n, n), dtype=complex)
    states[0] = states0
    for i in range(nsteps):
        rho = states[i]
        sigma = costates[i]
        for j in range(nc):
            grad = np.vdot(sigma, rho @ cmts[j].T).imag
            du = shape[i] * inv_lambda * grad
            raw[j, i] = du
            new[j, i] = min(max(samples[j, i] + du, -u_max), u_max)
        props[i] = _step(l0, lcs, new[:, i], dt)
        states[i + 1] = rho @ props[i].T
    return new, raw, states, props
