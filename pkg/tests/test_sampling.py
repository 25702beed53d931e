import numpy as np
import pytest

from unitarity.errors import DimensionMismatch, NumericalNegativeProbability
from unitarity.sampling import (
    FAILURE,
    RngStream,
    as_generator,
    clamp_probabilities,
    draw_categorical,
    ginibre,
    haar_unitary,
    measure_rotated_basis,
    outcome_counts,
    rotated_basis_probabilities,
    swap_test_probabilities,
    swap_test_sample,
    trivial_povm_sample,
)


def random_partial_state(d, gen):
    g = ginibre(gen, (d, int(gen.integers(1, d + 1))))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real * gen.uniform(0.3, 1.0)


def within(mean, target, se, k=5.0):
    return abs(mean - target) <= k * se + 1e-12


def test_stream_determinism_and_independence():
    a = RngStream(7, 3).generator().random(5)
    b = RngStream(7, 3).generator().random(5)
    c = RngStream(7, 4).generator().random(5)
    d = RngStream(7, 3, (1,)).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)
    assert RngStream(7, 3).child(1) == RngStream(7, 3, (1,))


def test_as_generator_inputs():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert np.array_equal(as_generator(5).random(3), RngStream(5).generator().random(3))
    assert isinstance(as_generator(None), np.random.Generator)


def test_haar_unitary_is_unitary():
    us = haar_unitary(5, RngStream(1), size=200)
    err = np.linalg.norm(np.swapaxes(us.conj(), -1, -2) @ us - np.eye(5), axis=(-2, -1))
    assert err.max() < 1e-10


def test_haar_d1_phase():
    phases = haar_unitary(1, RngStream(2), size=4000)[:, 0, 0]
    assert np.allclose(np.abs(phases), 1)
    angles = np.angle(phases)
    # uniform on the circle: mean resultant length close to zero
    assert abs(np.exp(1j * angles).mean()) < 5 / np.sqrt(4000)


def test_haar_first_moment_d2():
    x = np.abs(haar_unitary(2, RngStream(3), size=100_000)[:, 0, 0]) ** 2
    assert within(x.mean(), 0.5, x.std() / np.sqrt(x.size), k=3)


def test_haar_second_moment_d4():
    x = np.abs(haar_unitary(4, RngStream(4), size=100_000)[:, 0, 0]) ** 4
    assert within(x.mean(), 0.1, x.std() / np.sqrt(x.size), k=3)


def test_haar_left_invariance_ks():
    from scipy.stats import ks_2samp

    V = haar_unitary(4, RngStream(5))
    us = haar_unitary(4, RngStream(6), size=10_000)
    ws = haar_unitary(4, RngStream(7), size=10_000)
    a = np.abs(np.trace(V @ us, axis1=-2, axis2=-1)) ** 2
    b = np.abs(np.trace(ws, axis1=-2, axis2=-1)) ** 2
    assert ks_2samp(a, b).pvalue > 1e-3


def test_clamp_probabilities():
    assert np.allclose(clamp_probabilities([0.5, -1e-12, 0.5]), [0.5, 0, 0.5])
    assert np.allclose(clamp_probabilities([0.6, 0.6]), [0.5, 0.5])
    assert np.allclose(clamp_probabilities([0.2, 0.3]), [0.2, 0.3])
    with pytest.raises(NumericalNegativeProbability):
        clamp_probabilities([0.5, -0.1])


def test_draw_categorical_failure_mass():
    gen = np.random.default_rng(0)
    out = draw_categorical(gen, np.array([0.2, 0.3]), 100_000)
    assert set(np.unique(out)) == {FAILURE, 0, 1}
    assert within((out == FAILURE).mean(), 0.5, np.sqrt(0.25 / 1e5))
    counts = outcome_counts(out, 2)
    assert counts.sum() == (out != FAILURE).sum()


def test_measure_rotated_basis_examples():
    rho = np.diag([1.0, 0.0])
    assert all(measure_rotated_basis(rho, np.eye(2), RngStream(s)) == 0 for s in range(20))
    out = measure_rotated_basis(np.diag([0.5, 0.0]), np.eye(2), RngStream(1), size=20_000)
    assert within((out == FAILURE).mean(), 0.5, np.sqrt(0.25 / 2e4))
    U = haar_unitary(2, RngStream(8))
    out = measure_rotated_basis(np.eye(2) / 2, U, RngStream(2), size=20_000)
    assert not (out == FAILURE).any()
    assert within((out == 0).mean(), 0.5, np.sqrt(0.25 / 2e4))
    with pytest.raises(DimensionMismatch):
        measure_rotated_basis(rho, np.eye(3), RngStream(0))


def test_measure_rotated_basis_distribution():
    gen = np.random.default_rng(11)
    n = 100_000
    for i in range(50):
        d = int(gen.integers(2, 5))
        rho = random_partial_state(d, gen)
        U = haar_unitary(d, gen)
        p = rotated_basis_probabilities(rho, U)
        out = measure_rotated_basis(rho, U, RngStream(i), size=n)
        freq = outcome_counts(out, d) / n
        se = np.sqrt(p * (1 - p) / n)
        assert np.all(np.abs(freq - p) <= 5 * se + 1e-12)
        fail = 1 - np.trace(rho).real
        assert within((out == FAILURE).mean(), fail, np.sqrt(fail * (1 - fail) / n))


def test_swap_test_examples():
    zero, one = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    w = swap_test_sample(zero, zero, RngStream(0), size=1000)
    assert (w == 1).all()
    w = swap_test_sample(zero, one, RngStream(1), size=40_000)
    assert not (w == 0).any()
    assert within(w.mean(), 0.0, w.std() / np.sqrt(w.size))
    # tr(rho sigma) = tr(rho) tr(sigma) = 0.5: never -1, so that E[w] = 0.5
    plus, minus = swap_test_probabilities(0.5, 1.0, 0.5)
    assert (plus, minus) == pytest.approx((0.5, 0.0))
    w = swap_test_sample(0.5 * zero, zero, RngStream(2), size=100_000)
    assert within((w == 0).mean(), 0.5, np.sqrt(0.25 / 1e5))
    assert not (w == -1).any()
    assert within(w.mean(), 0.5, w.std() / np.sqrt(w.size))
    assert isinstance(swap_test_sample(zero, zero, RngStream(3)), int)


def test_swap_test_unbiased_random_pairs():
    gen = np.random.default_rng(12)
    for i in range(20):
        d = int(gen.integers(2, 5))
        rho, sigma = random_partial_state(d, gen), random_partial_state(d, gen)
        w = swap_test_sample(rho, sigma, RngStream(i), size=100_000)
        assert set(np.unique(w)) <= {-1, 0, 1}
        assert within(w.mean(), np.trace(rho @ sigma).real, w.std() / np.sqrt(w.size))


def test_trivial_povm():
    assert trivial_povm_sample(np.eye(2) / 2, RngStream(0), size=1000).all()
    assert not trivial_povm_sample(np.zeros((2, 2)), RngStream(0), size=1000).any()
    v = trivial_povm_sample(np.diag([0.3, 0.0]), RngStream(1), size=10_000)
    assert within(v.mean(), 0.3, np.sqrt(0.21 / 1e4), k=3)
