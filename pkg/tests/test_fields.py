import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from volfill.errors import BoundaryPoint, ShapeMismatch, SimplexViolation, ValidationError
from volfill.fields import (
    Grid,
    StateField,
    clamp,
    entropy_density,
    entropy_field,
    entropy_variables,
    gradient_norm_sq,
    gradient_sup_norm,
    inverse_entropy_variables,
    laplacian_neumann,
    read_snapshot,
    species_masses,
    write_snapshot,
)
from volfill.profiles import cosine_mixture, make_profile, smoothed_step

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_grid_validation():
    with pytest.raises(ValidationError):
        Grid((2,), 0.1)
    with pytest.raises(ValidationError):
        Grid((10,), 0.0)
    with pytest.raises(ValidationError):
        Grid((4, 4, 4), 0.1)
    g = Grid.uniform([8, 4], 2.0)
    assert g.h == 0.25 and g.shape == (8, 4) and g.lengths == (2.0, 1.0)


@pytest.mark.parametrize("x, expected", [(0.5, 0.5), (-0.2, 0.0), (1.7, 1.0)])
def test_clamp_values(x, expected):
    assert clamp(x) == expected


@given(finite, finite)
def test_clamp_idempotent_and_lipschitz(x, y):
    assert clamp(clamp(x)) == clamp(x)
    assert abs(clamp(x) - clamp(y)) <= abs(x - y)


def test_entropy_density_values():
    assert entropy_density([1 / 3, 1 / 3]) == pytest.approx(-math.log(3), abs=1e-14)
    assert entropy_density([1.0]) == 0.0
    # 2 * 0.25 log 0.25 + 0.5 log 0.5
    assert entropy_density([0.25, 0.25]) == pytest.approx(-1.0397207708399179, abs=1e-12)
    with pytest.raises(SimplexViolation):
        entropy_density([0.8, 0.4])


@st.composite
def simplex_points(draw, n=None):
    n = n or draw(st.integers(1, 4))
    w = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=n + 1, max_size=n + 1)))
    if w.sum() == 0:
        w[0] = 1.0
    return (w / w.sum())[1:]


@given(st.integers(1, 4), st.data())
def test_entropy_minimum_at_uniform_point(n, data):
    u = data.draw(simplex_points(n))
    assert entropy_density(u) >= -math.log(n + 1) - 1e-12


@given(st.integers(1, 4), st.data())
def test_entropy_midpoint_convexity(n, data):
    a = data.draw(simplex_points(n))
    b = data.draw(simplex_points(n))
    mid = entropy_density(0.5 * (a + b))
    assert mid <= 0.5 * (entropy_density(a) + entropy_density(b)) + 1e-12


def test_entropy_variables_examples():
    np.testing.assert_allclose(entropy_variables([1 / 3, 1 / 3]), [0.0, 0.0], atol=1e-15)
    u1 = 1.0 / (1.0 + math.exp(-1.0))
    assert entropy_variables([u1])[0] == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(BoundaryPoint):
        entropy_variables([0.5, 0.5])
    with pytest.raises(BoundaryPoint):
        entropy_variables([0.0, 0.5])


def test_entropy_variables_round_trip(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        u = rng.dirichlet(np.ones(n + 1))[1:]
        np.testing.assert_allclose(inverse_entropy_variables(entropy_variables(u)), u, rtol=0, atol=1e-12)


def test_laplacian_of_constant_is_zero():
    g = Grid.uniform(20)
    assert np.all(laplacian_neumann(np.full(20, 0.3), g) == 0.0)


def test_laplacian_cosine_eigenmode():
    # cell-centred cosines are exact eigenvectors with eigenvalue -(2/h sin(pi h / 2L))^2
    errors = []
    for N in (50, 100, 200):
        g = Grid.uniform(N, 2.0)
        f = np.cos(math.pi * g.centers()[0] / 2.0)
        lap = laplacian_neumann(f, g)
        discrete = -(2 / g.h * math.sin(math.pi * g.h / 4.0)) ** 2
        np.testing.assert_allclose(lap, discrete * f, atol=1e-9)
        errors.append(np.abs(lap + (math.pi / 2.0) ** 2 * f).max())
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.01)
    assert errors[1] / errors[2] == pytest.approx(4.0, rel=0.01)


@settings(max_examples=50)
@given(arrays(float, st.integers(3, 40), elements=finite))
def test_laplacian_sums_to_zero(f):
    g = Grid.uniform(len(f))
    assert abs(laplacian_neumann(f, g).sum()) * g.h ** 2 <= 1e-13 * max(np.abs(f).max(), 1.0) * len(f)


def test_laplacian_2d_batch(rng):
    g = Grid.uniform([6, 5])
    f = rng.random((3, 6, 5))
    lap = laplacian_neumann(f, g)
    assert lap.shape == f.shape
    np.testing.assert_allclose(lap.sum(axis=(1, 2)), 0.0, atol=1e-10)
    with pytest.raises(ShapeMismatch):
        laplacian_neumann(np.ones(7), g)


def test_gradient_sup_norm_examples():
    g = Grid.uniform(100, 2.0)
    x = g.centers()[0]
    assert gradient_sup_norm(np.full(100, 0.5), g) == 0.0
    assert gradient_sup_norm(-3.5 * x + 1, g) == pytest.approx(3.5, rel=1e-12)
    errs = []
    for N in (50, 100, 200):
        g = Grid.uniform(N)
        errs.append(abs(gradient_sup_norm(np.cos(math.pi * g.centers()[0]), g) - math.pi))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_gradient_norm_matches_summation_by_parts(rng):
    g = Grid.uniform(30)
    f = rng.random(30)
    assert gradient_norm_sq(f, g) == pytest.approx(-np.sum(f * laplacian_neumann(f, g)) * g.h, rel=1e-12)


def test_state_validation():
    g = Grid.uniform(10)
    StateField(g, np.full((3, 10), 1 / 3)).validate()
    with pytest.raises(SimplexViolation):
        StateField(g, np.full((3, 10), 0.4)).validate()
    bad = np.full((2, 10), 0.5)
    bad[0, 3], bad[1, 3] = -0.1, 1.1
    with pytest.raises(SimplexViolation):
        StateField(g, bad).validate()


def test_entropy_field_boundary_values():
    u = np.array([[0.0, 0.5], [1.0, 0.5]])
    np.testing.assert_allclose(entropy_field(u), [0.0, math.log(0.5)])


def test_smoothed_step_partition():
    g = Grid.uniform(200)
    u = smoothed_step(g, 2, 0.1, 0.7, 0.05)
    np.testing.assert_allclose(u.sum(axis=0), 1.0, atol=1e-15)
    np.testing.assert_allclose(u[0], 0.2, atol=1e-15)
    assert u[1, 0] == pytest.approx(0.7) and u[2, -1] == pytest.approx(0.7)


def test_make_profile_rejects_bad_sums():
    g = Grid.uniform(10)
    with pytest.raises(SimplexViolation):
        make_profile(g, 2, {"kind": "uniform", "fractions": [0.7, 0.5]})
    with pytest.raises(ValidationError):
        make_profile(g, 2, {"kind": "spiral"})


def test_snapshot_round_trip(tmp_path):
    g = Grid.uniform(17, 3.0)
    s = StateField(g, cosine_mixture(g, [0.3, 0.3], [0.1, -0.05]), 0.5)
    path = tmp_path / "snap.csv"
    write_snapshot(path, s)
    back = read_snapshot(path)
    assert back.grid == g
    np.testing.assert_array_equal(back.u, s.u)
    np.testing.assert_allclose(species_masses(back.u, g), species_masses(s.u, g))
    assert path.read_text().splitlines()[0] == "x,u_0,u_1,u_2"


def test_snapshot_round_trip_2d(tmp_path):
    g = Grid.uniform([4, 5])
    s = make_profile(g, 1, {"kind": "cosine-mixture", "base": [0.5], "amplitude": [0.2]})
    write_snapshot(tmp_path / "s.csv", s)
    np.testing.assert_array_equal(read_snapshot(tmp_path / "s.csv", g).u, s.u)
