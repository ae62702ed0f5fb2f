import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diraclab.algebra import det, operator_norm
from diraclab.potentials import bernoulli_potential, constant, two_valued
from diraclab.transfer import (DiracParams, cocycle, fit_growth, growth_exponent, kernel_constant,
                               log_window_norms, membership, perturbation_bound, perturbed_product,
                               step_matrix, transport, window_norm, window_norm_table)

M0 = DiracParams(0.0, 1.0)
ELL = np.array([[0, -1], [1, 1]], dtype=complex)


def recurrence(params, E, V, x, y, seed):
    """Iterate the two scalar recurrences from the pair (u+(y+1), u-(y))."""
    up, um = seed
    c, mc2 = params.c, params.mc2
    for n in range(y + 1, x + 1):
        um = um + (mc2 - E + V[n]) / c * up
        up = up + (E - V[n] + mc2) / c * um
    return np.array([up, um])


def brute_window_norm(params, E, V, N):
    return max(operator_norm(cocycle(params, E, V, x, y)) for x in range(N + 1) for y in range(N + 1))


def test_params_validation():
    with pytest.raises(ValueError):
        DiracParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        DiracParams(0.0, 0.0)
    assert DiracParams(2.0, 3.0).mc2 == 18.0


def test_step_matrix_examples():
    assert np.array_equal(step_matrix(M0, 0.7, 0.7), np.eye(2))
    assert np.array_equal(step_matrix(M0, 0.0, 1.0), ELL)
    assert np.array_equal(step_matrix(DiracParams(1, 1), 0.0, 0.0), [[2, 1], [1, 1]])
    T = step_matrix(DiracParams(0.3, 1.7), 0.4 + 0.2j, -1.1)
    assert abs(det(T) - 1) < 1e-12


def test_cocycle_conventions():
    V = bernoulli_potential(0, 1, 0.5, 3, 40)
    assert np.array_equal(cocycle(M0, 0.3, V, 7, 7), np.eye(2))
    A = cocycle(M0, 0.3, V, 20, 5)
    assert np.allclose(cocycle(M0, 0.3, V, 5, 20) @ A, np.eye(2), atol=1e-12)
    with pytest.raises(IndexError):
        cocycle(M0, 0.3, V, 41, 0)


def test_cocycle_is_power_of_elliptic_step():
    pattern = [0, 1, 1, 0, 1, 0, 0, 1, 1, 1]
    V = two_valued(0, 1, pattern)
    for y, x in [(0, 10), (2, 9), (3, 4)]:
        nb = sum(pattern[y:x])
        assert np.allclose(cocycle(M0, 0.0, V, x, y), np.linalg.matrix_power(ELL, nb), atol=1e-14)


def test_transport_matches_recurrence_oracle():
    p = DiracParams(0.4, 1.3)
    V = bernoulli_potential(-0.2, 0.5, 0.4, 9, 300)
    seed = np.array([0.3 - 0.1j, 1.2])
    E = 0.9
    for x, y in [(300, 0), (150, 30), (31, 30)]:
        got = transport(p, E, V, x, y, seed)
        want = recurrence(p, E, V, x, y, seed)
        assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want) * operator_norm(cocycle(p, E, V, x, y))


def test_window_norm_trivial_and_elliptic_bound():
    assert window_norm(M0, 0.5, constant(0.5, 64), 64) == pytest.approx(1.0, abs=1e-14)
    w, Q = np.linalg.eig(ELL)
    kappa = np.linalg.cond(Q)
    V = bernoulli_potential(0, 1, 0.5, 1, 256)
    vals = [window_norm(M0, 0.0, V, n) for n in (16, 64, 256)]
    assert max(vals) <= kappa + 1e-12
    assert brute_window_norm(M0, 0.0, V, 48) == pytest.approx(window_norm(M0, 0.0, V, 48), rel=1e-12)


def test_window_norm_matches_brute_force_hyperbolic_and_complex():
    V = bernoulli_potential(-1, 1, 0.3, 5, 30)
    for p, E in [(DiracParams(1, 1), 0.1), (M0, 0.2 + 0.05j), (DiracParams(0.5, 2), 3.0)]:
        assert window_norm(p, E, V, 30) == pytest.approx(brute_window_norm(p, E, V, 30), rel=1e-10)


def test_window_norm_upper_bound_mode():
    V = bernoulli_potential(0, 1, 0.5, 2, 64)
    exact = log_window_norms(M0, 0.3, V, [64])[0]
    upper = log_window_norms(M0, 0.3, V, [64], exact_limit=16)[0]
    assert upper >= exact - 1e-12


def test_parabolic_growth_is_linear():
    V = constant(2.0, 1024)
    L = window_norm_table(M0, 0.0, V, [256, 512, 1024]).entries
    assert L[1024] / 1024 == pytest.approx(L[512] / 512, rel=1e-2)
    assert L[1024] / 1024 == pytest.approx(4.0, rel=1e-2)


def test_table_invariants():
    V = bernoulli_potential(0, 1, 0.5, 6, 200)
    t = window_norm_table(M0, 0.7, V, [1, 10, 50, 100, 200])
    vals = [t.entries[n] for n in sorted(t.entries)]
    assert all(v >= 1.0 for v in vals)
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert t.mode == "exact"


def test_membership_examples():
    assert membership(M0, 0.5, constant(0.5, 100), 0.0, 1.5, 100)
    w, Q = np.linalg.eig(ELL)
    kappa = np.linalg.cond(Q)
    V = bernoulli_potential(0, 1, 0.5, 1, 512)
    assert all(membership(M0, 0.0, V, 0.0, kappa + 1e-9, n) for n in (8, 64, 512))
    assert not membership(M0, 0.0, constant(2.0, 512), 0.0, 100.0, 512)
    with pytest.raises(ValueError):
        membership(M0, 0.0, V, -1.0, 1.0, 8)


def test_perturbed_product_examples():
    V = bernoulli_potential(0, 1, 0.5, 12, 200)
    r0 = perturbed_product(M0, 0.0, 0.0, V, 40, 8)
    assert r0.residual == 0.0
    assert np.allclose(r0.matrix, cocycle(M0, 0.0, V, 40, 8), atol=1e-14)
    r = perturbed_product(M0, 0.0, 0.1 + 0.05j, V, 40, 8)
    assert r.residual <= 1e-10
    assert np.allclose(r.matrix, cocycle(M0, 0.1 + 0.05j, V, 40, 8), rtol=1e-12, atol=1e-12)
    r = perturbed_product(DiracParams(1, 2), 1.0, 1j / 50, V, 100, 36)
    assert r.residual <= 1e-10


def test_perturbation_bound_examples():
    V = bernoulli_potential(0, 1, 0.5, 13, 128)
    N = 128
    assert perturbation_bound(M0, 0.0, 0.0, V, N) == pytest.approx(window_norm(M0, 0.0, V, N), rel=1e-12)
    delta = 1j / 100
    bound = perturbation_bound(M0, 0.0, delta, V, N)
    actual = window_norm(M0, 0.0 + delta, V, N)
    assert actual <= bound
    bounds = [perturbation_bound(M0, 0.0, d, V, 32) for d in (0.001, 0.01, 0.1)]
    assert bounds[0] < bounds[1] < bounds[2]
    assert kernel_constant(M0, 0.0, V, N) >= 1.0


def test_growth_exponent_regimes():
    N = [2 ** k for k in range(6, 12)]
    V = bernoulli_potential(0, 1, 0.5, 21, N[-1])
    fit = growth_exponent(M0, 0.0, V, N)
    assert -0.02 <= fit.alpha <= 0.02 and fit.regime == "bounded"
    fit = growth_exponent(M0, 0.0, constant(2.0, N[-1]), N)
    assert 0.95 <= fit.alpha <= 1.05 and fit.regime == "power_law"
    fit = growth_exponent(DiracParams(1, 1), 0.0, constant(0.0, N[-1]), N)
    assert fit.regime == "exponential"
    assert fit.exp_rate == pytest.approx(np.log((3 + np.sqrt(5)) / 2), rel=1e-6)
    flat = fit_growth([1, 2, 4, 8], [0.5] * 4)
    assert flat.alpha == 0.0 and flat.stderr == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 2), st.floats(0.3, 3), st.floats(-4, 4), st.floats(0, 0.5),
       st.integers(0, 10_000), st.data())
def test_unimodular_and_cocycle_property(m, c, E, im, seed, data):
    p = DiracParams(m, c)
    V = bernoulli_potential(-1, 1.5, 0.5, seed, 60)
    y = data.draw(st.integers(0, 60))
    x = data.draw(st.integers(y, 60))
    w = data.draw(st.integers(y, x))
    z = E + 1j * im
    A = cocycle(p, z, V, x, y)
    B = cocycle(p, z, V, x, w) @ cocycle(p, z, V, w, y)
    scale = operator_norm(cocycle(p, z, V, x, w)) * operator_norm(cocycle(p, z, V, w, y))
    assert np.max(np.abs(A - B)) <= 1e-10 * scale
    assert abs(det(A) - 1) <= 1e-10 * max(1.0, operator_norm(A) ** 2)
