import numpy as np
import pytest

from openkrotov.core import SIGMA_X, SIGMA_Z, LindbladGenerator, projector, transition
from openkrotov.dynamics import (
    ControlField, TimeGrid, format_csv, observables, propagate_backward, propagate_forward,
    propagate_many, read_csv, step_propagator, trajectory_csv,
)
from openkrotov.models import build_model
from oracles import integrate_master, random_density, random_hermitian, random_operator


def test_grid():
    g = TimeGrid(2.0, 4)
    assert g.dt == 0.5
    np.testing.assert_allclose(g.state_times, [0, 0.5, 1, 1.5, 2])
    np.testing.assert_allclose(g.control_times, [0.25, 0.75, 1.25, 1.75])
    for bad in [(0.0, 4), (1.0, 0), (1.0, 2.5), (np.inf, 3)]:
        with pytest.raises(ValueError):
            TimeGrid(*bad)


def test_control_field_shape_checks():
    g = TimeGrid(1.0, 5)
    assert ControlField(g, np.ones(5)).samples.shape == (1, 5)
    with pytest.raises(ValueError):
        ControlField(g, np.ones(4))
    with pytest.raises(ValueError):
        ControlField(g, [np.nan] * 5)
    with pytest.raises(ValueError):
        ControlField(g, np.ones(5)).samples[0, 0] = 2.0


def test_step_propagator_zero_and_phase():
    zero = LindbladGenerator(np.zeros((2, 2)))
    np.testing.assert_allclose(step_propagator(zero, [], 0.37), np.eye(4), atol=1e-15)
    gen = LindbladGenerator(SIGMA_Z)
    p = step_propagator(gen, [], np.pi)
    coh = transition(0, 1, 2).reshape(-1)
    np.testing.assert_allclose(p @ coh, coh, atol=1e-13)
    with pytest.raises(ValueError):
        step_propagator(gen, [], np.inf)
    with pytest.raises(ValueError):
        step_propagator(gen, [], -1.0)


def test_zero_generator_constant_trajectory(rng):
    gen = LindbladGenerator(np.zeros((3, 3)), (np.zeros((3, 3)),))
    rho0 = random_density(3, rng)
    field = ControlField(TimeGrid(1.0, 10), rng.normal(size=10))
    traj = propagate_forward(gen, field, rho0)
    assert np.array_equal(traj[0], rho0)
    np.testing.assert_allclose(traj.states, np.broadcast_to(rho0, traj.states.shape), atol=1e-14)
    sigma = random_hermitian(3, rng)
    back = propagate_backward(gen, field, sigma)
    np.testing.assert_allclose(back.states, np.broadcast_to(sigma, back.states.shape), atol=1e-14)


def test_rabi_pi_pulse():
    gen = LindbladGenerator(np.zeros((2, 2)), (SIGMA_X,))
    t_final = 3.0
    field = ControlField(TimeGrid(t_final, 30), np.full(30, np.pi / (2 * t_final)))
    final = propagate_forward(gen, field, projector(0, 2)).final
    np.testing.assert_allclose(final, projector(1, 2), atol=1e-8)


def test_amplitude_damping_closed_form():
    gen = build_model("TwoLevelDamping", gamma=1.0)
    grid = TimeGrid(1.0, 100)
    traj = propagate_forward(gen, ControlField.zeros(grid), projector(1, 2))
    obs = observables(traj)
    np.testing.assert_allclose(obs.populations[:, 1], np.exp(-grid.state_times), atol=1e-6)


def test_damping_fixed_point():
    gamma = 2.0
    gen = build_model("TwoLevelDamping", gamma=gamma)
    field = ControlField.zeros(TimeGrid(20 / gamma, 200))
    final = propagate_forward(gen, field, np.eye(2) / 2).final
    assert np.real(final[0, 0]) > 1 - 1e-6


def test_against_ode_integration(rng):
    d = 3
    h0 = random_hermitian(d, rng)
    hc = [random_hermitian(d, rng)]
    channels = [(random_operator(d, rng, 0.5), 0.4)]
    gen = LindbladGenerator(h0, tuple(hc), tuple(channels))
    samples = rng.normal(size=(1, 8))
    rho0 = random_density(d, rng)
    ours = propagate_forward(gen, ControlField(TimeGrid(1.2, 8), samples), rho0).states
    ref = integrate_master(h0, hc, channels, samples, 1.2, rho0)
    np.testing.assert_allclose(ours, ref, atol=1e-9)


def test_step_composition(rng):
    gen = build_model("LambdaDecay", gamma0=0.3, gamma1=0.2, delta=0.4)
    rho0 = random_density(3, rng)
    u = rng.normal(size=2)
    coarse = ControlField(TimeGrid(2.0, 10), np.repeat(u[:, None], 10, axis=1))
    fine = ControlField(TimeGrid(2.0, 20), np.repeat(u[:, None], 20, axis=1))
    a = propagate_forward(gen, coarse, rho0).final
    b = propagate_forward(gen, fine, rho0).final
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_unital_backward_identity_fixed_point(rng):
    gen = build_model("TwoLevelDephasing", gamma_phi=0.5)
    field = ControlField(TimeGrid(2.0, 20), rng.normal(size=20))
    back = propagate_backward(gen, field, np.eye(2) / 2)
    np.testing.assert_allclose(back.states, np.broadcast_to(np.eye(2) / 2, back.states.shape), atol=1e-13)


def test_pairing_is_conserved_with_nonnormal_channels(rng):
    d = 4
    gen = LindbladGenerator(
        random_hermitian(d, rng),
        (random_hermitian(d, rng),),
        ((random_operator(d, rng, 0.4), 1.0), (transition(0, 3, d), 0.5)),
    )
    field = ControlField(TimeGrid(3.0, 60), rng.normal(size=60))
    rho = propagate_forward(gen, field, random_density(d, rng)).states
    sigma = propagate_backward(gen, field, random_hermitian(d, rng)).states
    pairing = np.einsum("tij,tij->t", sigma.conj(), rho)
    assert np.max(np.abs(pairing - pairing[0])) <= 1e-8 * abs(pairing[0])


def test_propagate_many_matches_single(rng):
    gen = build_model("AnharmonicLadder", n_levels=4, gamma=0.1)
    field = ControlField(TimeGrid(1.0, 25), rng.normal(size=25))
    rhos = [random_density(4, rng) for _ in range(3)]
    states, props = propagate_many(gen, field, rhos)
    assert states.shape == (26, 3, 16) and props.shape == (25, 16, 16)
    for m, rho in enumerate(rhos):
        single = propagate_forward(gen, field, rho).states.reshape(26, 16)
        np.testing.assert_allclose(states[1:, m], single[1:], atol=1e-14)


def test_observables_tables():
    grid = TimeGrid(1.0, 4)
    pure = propagate_forward(LindbladGenerator(np.zeros((2, 2))), ControlField.zeros(grid, 0), projector(0, 2))
    np.testing.assert_allclose(observables(pure).purity, 1.0)
    mixed = propagate_forward(LindbladGenerator(np.zeros((2, 2))), ControlField.zeros(grid, 0), np.eye(2) / 2)
    obs = observables(mixed, target=projector(0, 2))
    np.testing.assert_allclose(obs.purity, 0.5)
    np.testing.assert_allclose(obs.fidelity, 0.5)
    text = obs.to_csv()
    assert text.splitlines()[0] == "t,p_0,p_1,purity,fidelity"


def test_csv_round_trip_at_15_digits(rng):
    gen = build_model("TwoLevelDamping", gamma=0.7)
    field = ControlField(TimeGrid(1.0, 30), rng.normal(size=30))
    traj = propagate_forward(gen, field, random_density(2, rng))
    header, data = read_csv(trajectory_csv(traj))
    assert header[:3] == ["t", "re_0_0", "im_0_0"]
    restored = (data[:, 1::2] + 1j * data[:, 2::2]).reshape(-1, 2, 2)
    np.testing.assert_allclose(restored, traj.states, rtol=1e-14, atol=1e-15)
    x = rng.normal(size=(5, 3)) * 10.0 ** rng.integers(-8, 8, size=(5, 3))
    _, back = read_csv(format_csv(["a", "b", "c"], x))
    np.testing.assert_allclose(back, x, rtol=1e-14)
