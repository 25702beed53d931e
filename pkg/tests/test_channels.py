import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unitarity.builtins import builtin_channel, shift_operator
from unitarity.channels import (
    PartialDensityOperator,
    apply_channel,
    block_decomposition,
    canonical_kraus,
    choi_matrix,
    jamiolkowski_fidelity,
    jamiolkowski_state,
    matrix_representation,
    state_fidelity,
    unvec,
    validate_channel,
    vec,
)
from unitarity.errors import DimensionMismatch, NotTraceNonincreasing, ValidationError
from unitarity.oracle import exact_unitarity, random_channel
from unitarity.sampling import RngStream, ginibre, haar_unitary

from reference import choi_by_definition

TOL = 1e-10


def random_state(d, gen, trace=1.0):
    g = ginibre(gen, (d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real * trace


def test_vec_convention_row_major():
    gen = np.random.default_rng(1)
    A, B, C = (ginibre(gen, (3, 3)) for _ in range(3))
    assert np.allclose(vec(A @ B @ C.conj().T), np.kron(A, C.conj()) @ vec(B))
    assert np.array_equal(unvec(vec(B)), B)
    assert np.array_equal(vec(np.array([[1, 2], [3, 4]])), [1, 2, 3, 4])


def test_validate_identity_and_scaled():
    ch = validate_channel([np.eye(2)])
    assert ch.dim == 2 and ch.num_kraus == 1
    half = validate_channel([np.sqrt(0.5) * np.eye(2)])
    assert np.allclose(apply_channel(half, np.eye(2) / 2).matrix, np.eye(2) / 4)


def test_validate_rejects_trace_increasing_with_eigenvalue():
    with pytest.raises(NotTraceNonincreasing) as info:
        validate_channel([1.1 * np.eye(2)])
    assert info.value.max_eigenvalue == pytest.approx(1.21)
    assert "1.21" in str(info.value)


def test_validate_shape_errors():
    with pytest.raises(ValidationError):
        validate_channel([])
    with pytest.raises(DimensionMismatch):
        validate_channel([np.eye(2)], dim=3)
    with pytest.raises(ValidationError):
        validate_channel([np.ones((2, 3))])


def test_zero_channel_is_valid():
    ch = validate_channel([np.zeros((3, 3))])
    assert np.allclose(apply_channel(ch, np.eye(3) / 3).matrix, 0)


def test_kraus_is_immutable():
    ch = validate_channel([np.eye(2)])
    with pytest.raises(ValueError):
        ch.kraus[0, 0, 0] = 5


def test_apply_channel_examples():
    ident = builtin_channel("identity", {}, 3)
    rho = random_state(3, np.random.default_rng(0))
    assert np.allclose(apply_channel(ident, rho).matrix, rho)
    dep = builtin_channel("depolarizing", {}, 3)
    psi = np.array([1, 1j, 0]) / np.sqrt(2)
    assert np.allclose(apply_channel(dep, np.outer(psi, psi.conj())).matrix, np.eye(3) / 3)
    half = builtin_channel("scaled_identity", {"c": 0.5}, 2)
    out = apply_channel(half, np.diag([1.0, 0.0]))
    assert np.allclose(out.matrix, np.diag([0.5, 0.0])) and out.trace == pytest.approx(0.5)


def test_partial_density_operator_validation():
    with pytest.raises(ValidationError):
        PartialDensityOperator.validated(np.diag([1.0, 0.5]))
    with pytest.raises(ValidationError):
        PartialDensityOperator.validated(np.diag([1.0, -0.5]))
    with pytest.raises(ValidationError):
        PartialDensityOperator.validated(np.array([[0.5, 0.1], [0.2, 0.5]]))
    assert PartialDensityOperator.validated(np.diag([0.3, 0.2])).trace == pytest.approx(0.5)


def test_matrix_representation_examples():
    assert np.allclose(matrix_representation(builtin_channel("identity", {}, 2)), np.eye(4))
    U = haar_unitary(3, RngStream(4))
    rep = matrix_representation(validate_channel([U]))
    assert np.allclose(rep, np.kron(U, U.conj()))
    dep = matrix_representation(builtin_channel("depolarizing", {}, 2))
    ket = vec(np.eye(2))
    assert np.allclose(dep, np.outer(ket, ket) / 2)
    assert np.linalg.matrix_rank(dep) == 1


def test_jamiolkowski_state_examples():
    phi = vec(np.eye(2)) / np.sqrt(2)
    J = jamiolkowski_state(builtin_channel("identity", {}, 2)).matrix
    assert np.allclose(J, np.outer(phi, phi))
    U = haar_unitary(3, RngStream(2))
    J = jamiolkowski_state(validate_channel([U])).matrix
    assert np.trace(J @ J).real == pytest.approx(1.0, abs=TOL)
    assert np.allclose(J, np.outer(vec(U), vec(U).conj()) / 3)
    assert np.allclose(jamiolkowski_state(builtin_channel("depolarizing", {}, 2)).matrix, np.eye(4) / 4)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_choi_matches_definition(d):
    ch = random_channel(d, RngStream(11, d))
    ref = choi_by_definition(list(ch.kraus), d)
    assert np.allclose(choi_matrix(ch), ref, atol=TOL)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_representation_independence(d):
    ch = random_channel(d, RngStream(5, d), rank=3)
    mix = haar_unitary(5, RngStream(6, d))[:, :3]  # isometry 3 -> 5
    mixed = validate_channel(np.einsum("ab,bij->aij", mix, ch.kraus))
    assert np.allclose(matrix_representation(ch), matrix_representation(mixed), atol=TOL)


def test_vec_identity_on_random_pairs():
    gen = np.random.default_rng(3)
    for i in range(100):
        d = int(gen.integers(2, 6))
        ch = random_channel(d, gen)
        rho = random_state(d, gen)
        lhs = matrix_representation(ch) @ vec(rho)
        assert np.linalg.norm(lhs - vec(apply_channel(ch, rho).matrix)) < TOL


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 5), seed=st.integers(0, 2**32 - 1))
def test_block_norms_and_jamiolkowski_trace(d, seed):
    ch = random_channel(d, RngStream(seed))
    rep = matrix_representation(ch)
    b = block_decomposition(ch)
    assert b.t**2 + b.sdl2 + b.n2 + b.u2 == pytest.approx(np.vdot(rep, rep).real, abs=TOL)
    assert b.total == pytest.approx(np.vdot(rep, rep).real, abs=TOL)
    J = jamiolkowski_state(ch).matrix
    assert np.trace(J).real == pytest.approx(b.t, abs=TOL)
    assert np.trace(J @ J).real == pytest.approx(exact_unitarity(ch), abs=TOL)


def test_block_decomposition_examples():
    U = validate_channel([haar_unitary(3, RngStream(9))])
    b = block_decomposition(U)
    assert (b.t, b.sdl2, b.n2, b.u2) == pytest.approx((1, 0, 0, 8), abs=TOL)
    b = block_decomposition(builtin_channel("scaled_identity", {"c": 0.5}, 2))
    assert (b.t, b.sdl2, b.n2, b.u2) == pytest.approx((0.5, 0, 0, 0.75), abs=TOL)
    b = block_decomposition(builtin_channel("amplitude_damping", {"gamma": 0.4}, 3))
    assert b.t == pytest.approx(1, abs=TOL) and b.sdl2 == pytest.approx(0, abs=TOL)
    assert b.n2 > 0.01  # non-unital


def test_canonical_kraus_orthogonal_and_sorted():
    ch = random_channel(3, RngStream(21), rank=4)
    w, ops = canonical_kraus(ch)
    gram = np.einsum("aij,bij->ab", ops.conj(), ops)
    assert np.allclose(gram, np.diag(np.diag(gram)), atol=TOL)
    assert np.all(np.diff(w) <= 0)
    assert np.allclose(matrix_representation(validate_channel(ops)), matrix_representation(ch), atol=TOL)


def test_state_fidelity_clamps():
    rho = np.diag([1.0, 0.0])
    assert state_fidelity(rho, rho) == pytest.approx(1.0)
    assert state_fidelity(rho, np.diag([0.0, 1.0])) == pytest.approx(0.0, abs=1e-7)
    with pytest.raises(DimensionMismatch):
        state_fidelity(rho, np.eye(3) / 3)


def test_jamiolkowski_fidelity_problem_pair():
    a, b, eps = 2 / 3, 1 / 3, 1 / 12
    for d in (2, 4):
        e1 = builtin_channel("shift_mixture", {"a": a, "b": b}, d)
        e2 = builtin_channel("shift_mixture", {"a": a + eps, "b": b - eps}, d)
        assert jamiolkowski_fidelity(e1, e1) == pytest.approx(1.0, abs=TOL)
        assert jamiolkowski_fidelity(e1, e2) == pytest.approx(np.sqrt(0.5) + np.sqrt(1 / 12), abs=TOL)
        # the commonly quoted 0.995784 is rounded; the closed form gives 0.9957819
        assert jamiolkowski_fidelity(e1, e2) == pytest.approx(0.995784, abs=1e-5)
    with pytest.raises(DimensionMismatch):
        jamiolkowski_fidelity(builtin_channel("identity", {}, 2), builtin_channel("identity", {}, 3))


def test_shift_operator():
    X = shift_operator(4)
    for i in range(4):
        assert np.allclose(X @ np.eye(4)[i], np.eye(4)[(i + 1) % 4])
