"""Reference computations that share no code with the package."""
import itertools

import numpy as np
import sympy
from scipy.integrate import solve_ivp
from scipy.stats import unitary_group


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d, rng, scale=1.0):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (g + g.conj().T) / 2


def random_operator(d, rng, scale=1.0):
    return scale * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))


def haar_unitary(d, rng):
    return unitary_group.rvs(d, random_state=rng)


def master_rhs(h, channels, rho):
    """Right-hand side of the master equation in plain matrix form."""
    out = -1j * (h @ rho - rho @ h)
    for a, rate in channels:
        ad = a.conj().T
        out += rate * (a @ rho @ ad - 0.5 * (ad @ a @ rho + rho @ ad @ a))
    return out


def integrate_master(h0, controls, channels, samples, t_final, rho0):
    """Step-by-step ODE integration of piecewise-constant dynamics."""
    samples = np.atleast_2d(samples)
    n = samples.shape[1]
    dt = t_final / n
    d = rho0.shape[0]
    rho = np.array(rho0, dtype=complex)
    states = [rho]
    for i in range(n):
        h = h0 + sum(u * hc for u, hc in zip(samples[:, i], controls))

        def f(_, y):
            return master_rhs(h, channels, y.reshape(d, d)).ravel()

        sol = solve_ivp(f, (0, dt), rho.ravel(), method="DOP853", rtol=1e-12, atol=1e-13)
        rho = sol.y[:, -1].reshape(d, d)
        states.append(rho)
    return np.array(states)


def _sym(m):
    return sympy.Matrix(m)


def _real_vector(m):
    out = []
    for x in m:
        re, im = x.as_real_imag()
        out += [sympy.nsimplify(re), sympy.nsimplify(im)]
    return out


def brute_force_lie_dimension(hamiltonians, depth=6):
    """Exact dimension of the span of all nested commutators up to `depth`.

    Works in rational/Gaussian arithmetic on ``i H`` with the trace part
    removed; every commutator of a generator with an element already found
    is added at each level, which enumerates every bracket of length
    ``<= depth + 1`` up to linear combinations.
    """
    d = len(hamiltonians[0])
    eye = sympy.eye(d)
    gens = []
    for h in hamiltonians:
        m = _sym(h)
        m = sympy.I * (m - m.trace() / d * eye)
        gens.append(m.applyfunc(sympy.nsimplify))
    elements = []
    rows = []

    def try_add(m):
        vec = _real_vector(m)
        if all(v == 0 for v in vec):
            return False
        candidate = sympy.Matrix(rows + [vec])
        if candidate.rank() > len(rows):
            rows.append(vec)
            elements.append(m)
            return True
        return False

    for g in gens:
        try_add(g)
    frontier = list(elements)
    history = [len(rows)]
    for _ in range(depth):
        new = []
        for g, b in itertools.product(gens, frontier):
            c = (g * b - b * g).applyfunc(sympy.expand)
            if try_add(c):
                new.append(c)
        history.append(len(rows))
        if not new:
            break
        frontier = new
    return len(rows), history
