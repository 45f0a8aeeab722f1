import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volfill.coefficients import (
    assemble_A,
    assemble_PB,
    build_coefficients,
    check_closeness,
    coercivity_certificate,
    contraction_factor,
    from_pairs,
    min_symmetric_eigenvalue,
    random_admissible,
    uniform_coefficients,
)
from volfill.errors import NonPositiveRate, ShapeMismatch, SimplexViolation, SymmetryViolation


def test_equal_rates_constants(equal_set):
    c = equal_set
    assert (c.k_plus, c.k_minus, c.k_mean, c.kappa) == (1.0, 1.0, 1.0, 0.0)
    assert c.closeness_margin == 1.0
    assert check_closeness(c) == (True, 1.0)
    assert contraction_factor(c) == 0.0


def test_margin_set_constants(margin_set):
    c = margin_set
    assert c.k_plus == 1.1 and c.k_minus == 0.95 and c.alpha == 0.95
    assert c.k_mean == pytest.approx(1.025, abs=1e-15)
    assert c.kappa == pytest.approx(0.075, abs=1e-15)
    holds, margin = check_closeness(c)
    assert holds and margin == pytest.approx(0.725, abs=1e-14)
    assert contraction_factor(c) == pytest.approx(0.3 / 1.025, abs=1e-14)


def test_failing_set():
    c = from_pairs(2, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 2.0})
    assert (c.k_mean, c.kappa) == (1.5, 0.5)
    holds, margin = check_closeness(c)
    assert not holds and margin == pytest.approx(-0.5)
    assert contraction_factor(c) == pytest.approx(4 / 3)


def test_asymmetric_rejected():
    with pytest.raises(SymmetryViolation):
        build_coefficients(1, [[0, 1.0], [2.0, 0]])
    with pytest.raises(SymmetryViolation):
        from_pairs(1, {(0, 1): 1.0, (1, 0): 2.0})


def test_nonpositive_and_shape_rejected():
    with pytest.raises(NonPositiveRate):
        build_coefficients(1, [[0, 0.0], [0.0, 0]])
    with pytest.raises(ShapeMismatch):
        build_coefficients(2, np.ones((2, 2)))


def test_matrix_is_read_only(margin_set):
    with pytest.raises(ValueError):
        margin_set.k[0, 1] = 5.0


def test_assemble_A_hand_value():
    c = from_pairs(2, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.2})
    A = assemble_A(c, [0.3, 0.4])
    np.testing.assert_allclose(A, [[1.08, -0.06], [-0.08, 1.06]], atol=1e-15)


def test_assemble_A_scalar_case():
    c = from_pairs(1, {(0, 1): 0.7})
    for u in (0.0, 0.4, 1.0):
        np.testing.assert_array_equal(assemble_A(c, [u]), [[0.7]])


def test_assemble_A_outside_simplex():
    with pytest.raises(SimplexViolation):
        assemble_A(uniform_coefficients(2, 1.0), [0.7, 0.6])
    with pytest.raises(SimplexViolation):
        assemble_A(uniform_coefficients(2, 1.0), [-0.1, 0.6])


def _pb_oracle(c, u):
    """Dense loop construction of K I - B(u) straight from the row definition."""
    size = c.n + 1
    K = c.k_mean
    m = np.zeros((size, size))
    for i in range(size):
        m[i, i] = K - sum((c.k[i, j] - K) * u[j] for j in range(size) if j != i)
        for j in range(size):
            if j != i:
                m[i, j] = (c.k[i, j] - K) * u[i]
    return m


def test_assemble_PB_uniform_point(margin_set):
    u = np.full(3, 1 / 3)
    m = assemble_PB(margin_set, u)
    np.testing.assert_allclose(m, _pb_oracle(margin_set, u), atol=1e-15)
    sym_min = np.linalg.eigvalsh(0.5 * (m + m.T)).min()
    assert sym_min >= 0.725
    assert min_symmetric_eigenvalue(m) == pytest.approx(sym_min, abs=1e-14)


def test_assemble_PB_degenerate(margin_set, equal_set):
    np.testing.assert_allclose(assemble_PB(margin_set, np.zeros(3)), 1.025 * np.eye(3), atol=1e-15)
    np.testing.assert_array_equal(assemble_PB(equal_set, [0.2, 0.9, 0.5]), np.eye(3))


def test_coercivity_certificate_vertices(margin_set, rng):
    cert = coercivity_certificate(margin_set, n_random=1000, rng=rng)
    assert cert["bound"] == pytest.approx(0.725)
    assert cert["vertex_min"] >= cert["bound"] - 1e-10
    assert cert["interior_min"] >= cert["bound"] - 1e-10
    # the symmetric part is affine in u, so the minimum over the cube sits at a vertex
    vertices = [np.array(v, float) for v in itertools.product((0, 1), repeat=3)]
    brute = min(min_symmetric_eigenvalue(_pb_oracle(margin_set, v)) for v in vertices)
    assert cert["vertex_min"] == pytest.approx(brute, abs=1e-14)


def test_random_admissible_sets(rng):
    for n in (1, 2, 3):
        for _ in range(5):
            c = random_admissible(n, rng)
            assert c.holds and contraction_factor(c) < 1
            np.testing.assert_array_equal(c.k, c.k.T)


rate = st.floats(0.05, 5.0, allow_nan=False)


@st.composite
def coefficient_sets(draw):
    n = draw(st.integers(1, 4))
    pairs = {(i, j): draw(rate) for i in range(n + 1) for j in range(i + 1, n + 1)}
    return from_pairs(n, pairs)


@given(coefficient_sets())
def test_contraction_iff_closeness(c):
    assert (contraction_factor(c) < 1) == check_closeness(c)[0]


@given(coefficient_sets())
def test_rebuild_is_idempotent(c):
    again = build_coefficients(c.n, c.k)
    assert again.as_dict() == c.as_dict()


@given(coefficient_sets())
def test_rates_within_kappa_of_mean(c):
    off = c.k[~np.eye(c.size, dtype=bool)]
    assert np.all(np.abs(off - c.k_mean) <= c.kappa + 1e-15)


@given(st.integers(1, 4), rate, st.data())
def test_assemble_A_equal_rates_is_scaled_identity(n, K, data):
    w = np.array(data.draw(st.lists(st.floats(0, 1), min_size=n + 1, max_size=n + 1)))
    u = w[:n] / max(w.sum(), 1.0)
    np.testing.assert_array_equal(assemble_A(uniform_coefficients(n, K), u), K * np.eye(n))


@settings(max_examples=50)
@given(coefficient_sets(), st.data())
def test_coercivity_lower_bound(c, data):
    u = np.array(data.draw(st.lists(st.floats(0, 1), min_size=c.size, max_size=c.size)))
    lam = min_symmetric_eigenvalue(assemble_PB(c, u))
    assert lam >= c.k_mean - 2 * c.n * c.kappa - 1e-10
