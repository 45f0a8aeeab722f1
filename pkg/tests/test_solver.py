import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volfill.analysis import form_discrepancy
from volfill.coefficients import contraction_factor, from_pairs, random_admissible
from volfill.errors import AssumptionViolated, PicardDivergence, SimplexViolation, ValidationError
from volfill.fields import Grid, StateField, laplacian_neumann
from volfill.profiles import cosine_mixture, smoothed_step
from volfill.solver import (
    SolverConfig,
    advance,
    coupling_fluxes,
    default_dt,
    full_fluxes,
    heat_reference,
    laplacian_matrix,
    linearized_step,
    simulate,
)


def mixture(grid, n=2):
    base = np.full(n, 0.8 / (n + 1))
    amp = np.full(n, 0.1 / n) * np.where(np.arange(n) % 2, -1.0, 1.0)
    return StateField(grid, cosine_mixture(grid, base, amp))


def test_config_validation():
    with pytest.raises(ValidationError):
        SolverConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ValidationError):
        SolverConfig(dt=0.1, t_end=1.0, theta=1.5)
    with pytest.raises(ValidationError):
        SolverConfig(dt=0.1, t_end=1.0, picard_max=0)


def test_default_dt(margin_set):
    g = Grid.uniform(100)
    assert default_dt(margin_set, g) == g.h
    assert default_dt(margin_set, g, theta=0.5) == pytest.approx(0.5 * g.h ** 2 / 1.1)


def test_sparse_laplacian_matches_stencil(rng):
    for g in (Grid.uniform(9), Grid.uniform([5, 4])):
        f = rng.random(g.shape)
        np.testing.assert_allclose(
            (laplacian_matrix(g) @ f.ravel()).reshape(g.shape), laplacian_neumann(f, g), atol=1e-10
        )


def test_heat_reference_constant_stays_one():
    g = Grid.uniform(50)
    np.testing.assert_allclose(heat_reference(np.ones(50), 1.3, g, 0.01, 1.0), 1.0, atol=1e-14)


def test_heat_reference_linearity(rng):
    g = Grid.uniform(40)
    a, b = rng.random(40), rng.random(40)
    run = lambda f: heat_reference(f, 0.8, g, 0.01, 0.2)
    np.testing.assert_allclose(run(a + b), run(a) + run(b), atol=1e-14)


def test_heat_reference_cosine_decay():
    # backward Euler on an exact eigenvector: decay (1 + dt K lam)^-steps
    g = Grid.uniform(100)
    f = np.cos(math.pi * g.centers()[0])
    dt, steps, K = 0.01, 20, 0.7
    lam = (2 / g.h * math.sin(math.pi * g.h / 2)) ** 2
    out = heat_reference(f, K, g, dt, dt * steps)
    np.testing.assert_allclose(out, f * (1 + dt * K * lam) ** -steps, atol=1e-13)
    exact = f * math.exp(-K * math.pi ** 2 * dt * steps)
    finer = heat_reference(f, K, g, dt / 2, dt * steps)
    ratio = np.abs(out - exact).max() / np.abs(finer - exact).max()
    assert ratio == pytest.approx(2.0, rel=0.1)


def test_equal_rates_step_is_heat_step(equal_set, rng):
    g = Grid.uniform(60)
    s = mixture(g)
    lag = StateField(g, s.u + 0.05 * rng.standard_normal(s.u.shape))
    cfg = SolverConfig(dt=0.01, t_end=0.01)
    out = linearized_step(s, lag, equal_set, cfg)
    for i in range(3):
        np.testing.assert_allclose(out.u[i], heat_reference(s.u[i], 1.0, g, 0.01, 0.01), atol=1e-13)


@pytest.mark.parametrize("flux_form", [True, False])
def test_constant_state_is_fixed(margin_set, flux_form):
    g = Grid.uniform(30)
    s = StateField(g, np.tile([[0.2], [0.5], [0.3]], 30))
    out = linearized_step(s, s, margin_set, SolverConfig(dt=0.5, t_end=1, flux_form=flux_form))
    np.testing.assert_allclose(out.u, s.u, atol=1e-15)


def test_failing_set_refused():
    bad = from_pairs(2, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 2.0})
    g = Grid.uniform(20)
    s = mixture(g)
    with pytest.raises(AssumptionViolated):
        linearized_step(s, s, bad, SolverConfig(dt=0.1, t_end=0.1))
    with pytest.raises(AssumptionViolated):
        advance(s, bad, SolverConfig(dt=0.1, t_end=0.1))


def test_equal_rates_converge_in_one_sweep(equal_set):
    g = Grid.uniform(50)
    _, rec = advance(mixture(g), equal_set, SolverConfig(dt=0.02, t_end=0.02))
    assert rec.sweeps == 2
    assert rec.residuals[1] < 1e-14


def test_two_sweep_ratio_bounded(margin_set, rng):
    g = Grid.uniform(80)
    q = contraction_factor(margin_set)
    for _ in range(5):
        base = rng.uniform(0.2, 0.35, 2)
        amp = rng.uniform(-0.1, 0.1, 2)
        s = StateField(g, cosine_mixture(g, base, amp, rng.integers(1, 4, 2)))
        _, rec = advance(s, margin_set, SolverConfig(dt=0.02, t_end=0.02))
        assert rec.ratios[0] <= q + 0.05


def test_sweep_count_geometric_bound(margin_set):
    g = Grid.uniform(100)
    _, rec = advance(mixture(g), margin_set, SolverConfig(dt=0.01, t_end=0.01, picard_tol=1e-10))
    r0 = rec.residuals[0]
    bound = math.ceil(math.log(1e-10 / r0) / math.log(contraction_factor(margin_set) + 0.05))
    assert rec.sweeps - 1 <= bound


def test_picard_cap_raises(margin_set):
    g = Grid.uniform(50)
    with pytest.raises(PicardDivergence):
        advance(mixture(g), margin_set, SolverConfig(dt=0.05, t_end=0.05, picard_max=2, picard_tol=1e-15))


def test_flux_antisymmetry(margin_set, rng):
    g = Grid.uniform(40)
    for _ in range(10):
        u = rng.dirichlet(np.ones(3), size=40).T
        lag = rng.dirichlet(np.ones(3), size=40).T
        assert np.abs(coupling_fluxes(u, lag, margin_set, g).sum(axis=0)).max() < 1e-14
        assert np.abs(full_fluxes(u, margin_set, g).sum(axis=0)).max() < 1e-14


def test_mass_conservation_1000_steps(margin_set):
    g = Grid.uniform(50)
    s0 = StateField(g, smoothed_step(g, 2))
    traj = simulate(s0, margin_set, SolverConfig(dt=1e-3, t_end=1.0))
    assert len(traj.steps) == 1000
    masses = traj.diagnostics.arrays()["masses"]
    assert np.abs(masses - masses[0]).max() / masses[0].min() < 1e-11
    assert traj.diagnostics.arrays()["sum_deviation"].max() < 1e-13


def test_two_species_flux_form_is_heat_equation():
    c = from_pairs(1, {(0, 1): 0.6})
    errs = []
    for N in (50, 100, 200):
        g = Grid.uniform(N)
        u1 = 0.5 + 0.2 * np.cos(math.pi * g.centers()[0])
        s = StateField(g, np.vstack([1 - u1, u1]))
        dt = g.h ** 2
        traj = simulate(s, c, SolverConfig(dt=dt, t_end=0.05))
        exact = 0.5 + 0.2 * math.exp(-0.6 * math.pi ** 2 * traj.times[-1]) * np.cos(math.pi * g.centers()[0])
        errs.append(np.abs(traj.final.u[1] - exact).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.2)


def test_strong_and_flux_forms_agree(margin_set):
    # arithmetic face averages make both discrete operators identical at the fixed point
    for N in (25, 50, 100):
        assert form_discrepancy(margin_set, N, 0.02, 2e-3) < 1e-12


def test_explicit_coupling_theta_zero(margin_set):
    g = Grid.uniform(50)
    cfg = SolverConfig(dt=default_dt(margin_set, g, 0.0), t_end=0.01, theta=0.0)
    traj = simulate(mixture(g), margin_set, cfg)
    assert all(rec.sweeps <= 50 for rec in traj.steps)
    assert traj.diagnostics.arrays()["sum_deviation"].max() < 1e-13


def test_two_dimensional_run(margin_set):
    g = Grid.uniform([12, 10])
    x, y = g.mesh()
    u1 = 0.3 + 0.1 * np.cos(math.pi * x) * np.cos(math.pi * y / g.lengths[1])
    u2 = 0.3 - 0.05 * np.cos(2 * math.pi * x)
    s = StateField(g, np.stack([1 - u1 - u2, u1, u2]))
    traj = simulate(s, margin_set, SolverConfig(dt=0.01, t_end=0.05))
    d = traj.diagnostics.arrays()
    assert np.abs(d["masses"] - d["masses"][0]).max() < 1e-13
    assert np.all(np.diff(d["entropy"]) <= 1e-9)


def test_simulate_rejects_bad_initial(margin_set):
    g = Grid.uniform(10)
    with pytest.raises(SimplexViolation):
        simulate(StateField(g, np.full((3, 10), 0.4)), margin_set, SolverConfig(dt=0.1, t_end=0.1))


def test_output_times_are_snapped(margin_set):
    g = Grid.uniform(20)
    traj = simulate(mixture(g), margin_set, SolverConfig(dt=0.01, t_end=0.1), output_times=[0, 0.05, 0.1])
    np.testing.assert_allclose(traj.times, [0, 0.05, 0.1], atol=1e-12)
    assert traj.states.shape == (3, 3, 20)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_sets_conserve_and_dissipate(seed):
    rng = np.random.default_rng(seed)
    c = random_admissible(2, rng)
    g = Grid.uniform(40)
    base = rng.uniform(0.2, 0.35, 2)
    s = StateField(g, cosine_mixture(g, base, rng.uniform(-0.1, 0.1, 2)))
    traj = simulate(s, c, SolverConfig(dt=0.01, t_end=0.1))
    d = traj.diagnostics.arrays()
    assert d["sum_deviation"].max() < 1e-13
    assert np.all(np.diff(d["entropy"]) <= 1e-9)
    assert d["min_value"].min() >= -1e-9
    ratios = np.concatenate([r.ratios for r in traj.steps])
    assert np.all(ratios <= contraction_factor(c) + 0.05)
