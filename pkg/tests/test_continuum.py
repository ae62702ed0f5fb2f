import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diraclab.algebra import det
from diraclab.continuum import (CaseTag, CompactState, admissibility, bracket, critical_family,
                                free_cell_matrices, free_cell_matrix, free_solutions, interference_state,
                                load_state, save_state, word_product, xi)
from diraclab.potentials import CellWord
from diraclab.transfer import DiracParams

M0 = DiracParams(0.0, 1.0)
M1 = DiracParams(1.0, 1.0)


def test_xi_branches():
    assert xi(M0, np.pi) == pytest.approx(np.pi)
    assert xi(M1, 2.0) == pytest.approx(np.sqrt(3))
    assert xi(M1, 0.5) == pytest.approx(1j * np.sqrt(0.75))


def test_free_cell_matrix_examples():
    assert np.allclose(free_cell_matrix(M0, np.pi), -np.eye(2), atol=1e-15)
    T = free_cell_matrix(M1, 2.0)
    s3 = np.sqrt(3)
    want = np.array([[np.cos(s3), 3j * np.sin(s3) / s3], [1j * np.sin(s3) / s3, np.cos(s3)]])
    assert np.allclose(T, want, atol=1e-15)
    assert np.allclose(T, [[-0.16055, 1.70956j], [0.56985j, -0.16055]], atol=1e-5)
    assert det(T) == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(free_cell_matrix(M1, 1.0), [[1, 2j], [0, 1]], atol=1e-15)


def test_gap_edge_continuity():
    # Taylor branch near xi = 0 agrees with the direct formula on both sides of the edge
    for E in (1 + 1e-6, 1 - 1e-6, -1 + 1e-7, 1 + 1e-9):
        T = free_cell_matrix(M1, E)
        T_edge = free_cell_matrix(M1, np.sign(E))
        assert np.max(np.abs(T - T_edge)) < 1e-5
    lo, hi = free_cell_matrix(M1, 1 - 1e-6), free_cell_matrix(M1, 1 + 1e-6)
    assert np.allclose(0.5 * (lo + hi), free_cell_matrix(M1, 1.0), atol=1e-8)
    # series side vs direct side at the branch boundary |xi| = 1e-4
    E_b = np.sqrt(1 + 1e-8)
    a, b = free_cell_matrix(M1, E_b * (1 - 1e-12)), free_cell_matrix(M1, E_b * (1 + 1e-12))
    assert np.max(np.abs(a - b)) < 1e-8


def test_determinant_across_gap():
    E = np.linspace(-3, 3, 2001)
    for p in (M1, DiracParams(0.7, 1.8)):
        for v in (0.0, 0.4):
            assert np.max(np.abs(det(free_cell_matrices(p, E, v)) - 1)) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("params", [M0, M1, DiracParams(0.5, 2.0)])
def test_critical_family_gives_scalar_cells(params, n):
    E = critical_family(params, n)
    sign = (-1) ** n
    assert np.max(np.abs(free_cell_matrix(params, E) - sign * np.eye(2))) < 1e-9
    assert np.max(np.abs(free_cell_matrix(params, -E) - sign * np.eye(2))) < 1e-9


def test_word_product_examples():
    w = CellWord(np.array([0, 1]), (0.0, 1.0))
    assert np.array_equal(word_product(M0, 0.3, w, 1, 1), np.eye(2))
    assert np.allclose(word_product(M0, np.pi, w, 2, 0), -free_cell_matrix(M0, np.pi - 1), atol=1e-14)
    w2 = CellWord(np.array([0, 1]), (0.0, 2 * np.pi))
    assert np.allclose(word_product(M0, 3 * np.pi, w2, 2, 0), np.eye(2), atol=1e-12)
    with pytest.raises(IndexError):
        word_product(M0, 0.3, w, 3, 0)


def test_free_solutions():
    x = np.linspace(0, 1, 101)
    uN, uD = free_solutions(M0, np.pi, x)
    assert np.array_equal(uN[:, 0], [1, 0]) and np.array_equal(uD[:, 0], [0, 1])
    assert np.allclose(uN, [np.cos(np.pi * x), 1j * np.sin(np.pi * x)], atol=1e-15)
    for p, E in [(M0, 2.3), (M1, 1.7), (DiracParams(0.4, 2.0), -3.0)]:
        uN, uD = free_solutions(p, E, x)
        assert np.allclose(uN[0] * uD[1] - uD[0] * uN[1], 1.0, atol=1e-10)
    with pytest.raises(ValueError):
        free_solutions(M1, 0.5, x)


def test_free_solutions_match_cell_matrix():
    # propagating the pair across one cell reproduces the solutions at x = 1
    for p, E in [(M0, 2.3), (M1, 1.7)]:
        uN, uD = free_solutions(p, E, np.array([0.0, 1.0]))
        T = free_cell_matrix(p, E)
        assert np.allclose(T @ uN[:, 0], uN[:, 1], atol=1e-14)
        assert np.allclose(T @ uD[:, 0], uD[:, 1], atol=1e-14)


def test_bracket_examples():
    one = CompactState.from_functions(lambda x: np.ones_like(x), None)
    zero = CompactState.from_functions(None, None)
    assert bracket(one, zero) == 0
    assert bracket(one, one) == pytest.approx(1.0, abs=1e-14)
    cosf = CompactState.from_functions(lambda x: np.cos(np.pi * x), None)
    assert bracket(cosf, cosf) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(ValueError):
        bracket(CompactState.from_functions(None, None, 1.0, 1 / 64), one)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False), min_size=4, max_size=4))
def test_bracket_conjugate_symmetry(coef):
    g = CompactState.from_functions(lambda x: coef[0] * np.sin(3 * x), lambda x: coef[1] * x)
    f = CompactState.from_functions(lambda x: coef[2] * np.cos(x), lambda x: coef[3] * x ** 2)
    assert bracket(g, f) == pytest.approx(np.conj(bracket(f, g)), abs=1e-12)


def test_admissibility_examples():
    E = np.pi
    f = CompactState.from_functions(lambda x: np.cos(np.pi * x), None)
    r = admissibility(M0, E, f)
    assert r.case_tag is CaseTag.PLUS_ONLY and r.admissible
    g = interference_state(M0, 1, 1)
    assert np.allclose(g.samples_plus, 1j * np.sin(np.pi * g.grid))
    r = admissibility(M0, E, g)
    assert r.case_tag is CaseTag.BOTH_COMPONENTS
    assert abs(r.pairing_w) <= 1e-10 and abs(r.pairing_v) <= 1e-10 and not r.admissible
    half = CompactState.from_functions(lambda x: (x <= 0.5).astype(float), None, 1.0, 1 / 256)
    r = admissibility(M0, E, half)
    assert r.admissible and abs(r.solution_pairings[0]) == pytest.approx(1 / np.pi, abs=1e-3)
    minus = CompactState.from_functions(None, lambda x: np.ones_like(x))
    r = admissibility(M0, E, minus)
    assert r.case_tag is CaseTag.MINUS_ONLY and r.admissible
    with pytest.raises(ValueError):
        admissibility(M0, E, CompactState.from_functions(None, None))


@pytest.mark.parametrize("params", [M0, M1])
@pytest.mark.parametrize("sign", [1, -1])
def test_interference_vanishes_for_both_signs(params, sign):
    f = interference_state(params, 1, 1, sign)
    r = admissibility(params, sign * critical_family(params, 1), f)
    assert abs(r.pairing_w) <= 1e-10 and abs(r.pairing_v) <= 1e-10
    assert not r.admissible


def test_admissibility_robust_to_tolerance():
    cases = [(interference_state(M0, 1, 1), False),
             (CompactState.from_functions(lambda x: np.cos(np.pi * x), None), True),
             (CompactState.from_functions(lambda x: np.sin(np.pi * x), lambda x: np.cos(2 * np.pi * x)), True)]
    for f, verdict in cases:
        for tol in (1e-10, 1e-9, 1e-8):
            assert admissibility(M0, np.pi, f, rel_tol=tol).admissible is verdict


def test_state_file_round_trip(tmp_path):
    f = interference_state(M1, 1, 2, grid_step=1 / 64)
    save_state(f, tmp_path / "s.txt")
    g = load_state(tmp_path / "s.txt")
    assert np.array_equal(f.samples_plus, g.samples_plus) and np.array_equal(f.samples_minus, g.samples_minus)
    (tmp_path / "bad.txt").write_text("grid_step 0.5\n1 2\n")
    with pytest.raises(ValueError):
        load_state(tmp_path / "bad.txt")
