import numpy as np
import pytest

from diraclab.potentials import (GOLDEN_RHO, PotentialSeq, bernoulli_potential, bernoulli_word, constant,
                                 load_potential, make_rng, rotation_phases, save_potential, sturmian,
                                 thue_morse, thue_morse_letters, two_valued)


def test_two_valued_examples():
    V = two_valued(0, 1, [0, 1, 1, 0])
    assert V.values.tolist() == [0, 1, 1, 0] and V.sup_norm == 1
    assert two_valued(5, 5, [0, 1, 1, 0, 1]).values.tolist() == [5] * 5
    assert two_valued(0, 2, [1] * 4).values.tolist() == [2, 2, 2, 2]
    assert two_valued(-3, 1, [0, 1]).sup_norm == 3


def test_one_based_indexing_and_truncate():
    V = two_valued(0, 1, [0, 1, 1, 0])
    assert V[1] == 0 and V[2] == 1
    with pytest.raises(IndexError):
        V[0]
    assert len(V.truncate(2)) == 2
    with pytest.raises(ValueError):
        PotentialSeq(np.array([0.0, 2.0]), 1.0)


def test_bernoulli_word_determinism_and_laws():
    a = bernoulli_word(0.5, 7, 1000)
    b = bernoulli_word(0.5, 7, 1000)
    assert np.array_equal(a.word, b.word)
    assert not np.array_equal(a.word, bernoulli_word(0.5, 8, 1000).word)
    w = bernoulli_word(0.999, 3, 10_000).word
    assert 0.995 <= np.mean(w == 0) <= 1.0
    assert abs(np.mean(bernoulli_word(0.5, 11, 100_000).word) - 0.5) <= 0.01
    for p in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            bernoulli_word(p, 1, 10)


def test_streams_are_independent_of_draw_order():
    x = make_rng(5, 2).random(4)
    make_rng(5, 1).random(100)
    assert np.array_equal(x, make_rng(5, 2).random(4))
    assert not np.array_equal(x, make_rng(5, 3).random(4))


def test_bernoulli_potential_levels():
    V = bernoulli_potential(0.0, 1.0, 0.5, 4, 50)
    assert set(np.unique(V.values)) <= {0.0, 1.0}
    assert V.provenance["seed"] == 4


def test_thue_morse_examples():
    assert thue_morse_letters(8).tolist() == [0, 1, 1, 0, 1, 0, 0, 1]
    assert thue_morse_letters(2).tolist() == [0, 1]
    n = np.arange(2 ** 14)
    parity = np.array([bin(k).count("1") % 2 for k in n])
    assert np.array_equal(thue_morse_letters(2 ** 14), parity)
    assert thue_morse(2, 5, 4).values.tolist() == [2, 5, 5, 2]


def test_sturmian_examples():
    V = sturmian(1.0, GOLDEN_RHO, 0.0, 5)
    assert V.values.tolist() == [1, 0, 1, 1, 0]
    long = sturmian(1.0, length=100_001)
    shifted = sturmian(1.0, theta=GOLDEN_RHO, length=100_000)
    assert np.array_equal(long.values[1:], shifted.values)
    assert abs(np.mean(long.values[:100_000]) - GOLDEN_RHO) <= 0.01
    with pytest.raises(ValueError):
        sturmian(0.0, length=5)
    with pytest.raises(ValueError):
        sturmian(1.0, rho=0.5, length=5)


def test_sturmian_balance():
    v = sturmian(1.0, length=10_000).values
    cs = np.concatenate([[0], np.cumsum(v)])
    for w in (1, 2, 3, 5, 8, 13, 50, 100):
        counts = cs[w:] - cs[:-w]
        assert counts.max() - counts.min() <= 1


def test_rotation_phases_match_exact_arithmetic():
    from fractions import Fraction
    rho = GOLDEN_RHO
    n = np.array([1, 17, 12345, 9_999_991])
    got = rotation_phases(rho, 0.25, 10_000_000)[n - 1]
    exact = [float((k * Fraction(rho) + Fraction(0.25)) % 1) for k in n]
    assert np.allclose(got, exact, atol=1e-15, rtol=0)


def test_file_round_trip(tmp_path):
    V = two_valued(-0.1, 0.7, [0, 1, 1, 0, 1])
    save_potential(V, tmp_path / "v.txt")
    W = load_potential(tmp_path / "v.txt")
    assert np.array_equal(W.values, V.values) and W.sup_norm == V.sup_norm
    (tmp_path / "w.txt").write_text("# comment\n1.5\n-2\n\n0\n")
    W = load_potential(tmp_path / "w.txt")
    assert W.values.tolist() == [1.5, -2, 0] and W.sup_norm == 2
    assert constant(3.0, 2).sup_norm == 3.0
