"""Randomness: Haar-random unitaries and exact simulation of the measurements used by the estimators.

Every measurement is simulated from its analytic outcome distribution; no
state vectors or ancillas are materialised. A partial density operator with
trace ``tr(rho) < 1`` yields the failure outcome :data:`FAILURE` with
probability ``1 - tr(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import TOL_PSD, as_matrix
from .errors import DimensionMismatch, NumericalNegativeProbability

FAILURE = -1
"""Outcome index used for the failure event of a partial density operator."""


@dataclass(frozen=True)
class RngStream:
    """A reproducible, splittable random stream.

    ``(seed, stream_id, path)`` fully determines the draws; distinct ids or
    paths give statistically independent counter-based (Philox) generators.
    Calling :meth:`generator` twice returns two generators at the same state.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept an :class:`RngStream`, a ``numpy`` Generator, an int seed or ``None``."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(0 if rng is None else int(rng)).generator()


def ginibre(gen: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / np.sqrt(2)


def haar_isometry(d: int, r: int, rng, size: tuple[int, ...] = ()) -> np.ndarray:
    """First ``r`` columns of Haar-random ``d x d`` unitaries, shape ``size + (d, r)``.

    QR decomposition of a complex Ginibre matrix, with the columns of ``Q``
    multiplied by the phases of ``diag(R)`` so that the law is exactly Haar.
    """
    gen = as_generator(rng)
    q, r_ = np.linalg.qr(ginibre(gen, tuple(size) + (d, r)))
    diag = np.diagonal(r_, axis1=-2, axis2=-1)
    phase = diag / np.abs(diag)
    return q * phase[..., None, :]


def haar_unitary(d: int, rng, size: tuple[int, ...] | int | None = None) -> np.ndarray:
    """Haar-random ``d x d`` unitary (or a stack of them if ``size`` is given)."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if size is None:
        size = ()
    elif isinstance(size, int):
        size = (size,)
    return haar_isometry(d, d, rng, size)


def clamp_probabilities(p: np.ndarray, tol: float = TOL_PSD) -> np.ndarray:
    """Clip sub-probabilities to ``[0, 1]`` and make them sum to at most one.

    The remaining mass ``1 - sum(p)`` belongs to the failure outcome.

    Raises:
        NumericalNegativeProbability: if an entry is below ``-tol``.
    """
    p = np.asarray(p, dtype=float)
    if p.size and p.min() < -tol:
        raise NumericalNegativeProbability(f"outcome probability {p.min():.3g} < 0")
    p = np.clip(p, 0.0, 1.0)
    total = p.sum(axis=-1, keepdims=True)
    return np.where(total > 1.0, p / np.where(total > 0, total, 1.0), p)


def draw_categorical(gen: np.random.Generator, p: np.ndarray, m: int) -> np.ndarray:
    """Draw ``m`` outcomes per row of sub-probabilities ``p`` (shape ``(..., d)``).

    Returns integer outcomes of shape ``(..., m)``; :data:`FAILURE` marks the
    leftover mass.
    """
    d = p.shape[-1]
    cum = np.cumsum(p, axis=-1)
    u = gen.random(p.shape[:-1] + (m,))
    idx = (u[..., :, None] >= cum[..., None, :]).sum(axis=-1)
    return np.where(idx >= d, FAILURE, idx)


def outcome_counts(outcomes: np.ndarray, d: int) -> np.ndarray:
    """Histogram of valid outcomes along the last axis: shape ``(..., d)``."""
    return (outcomes[..., None] == np.arange(d)).sum(axis=-2)


def rotated_basis_probabilities(rho, U: np.ndarray) -> np.ndarray:
    """``p_b = <b| U rho U^dag |b>`` for ``b = 0..d-1``, clamped."""
    m = as_matrix(rho)
    U = np.asarray(U)
    if m.shape != U.shape:
        raise DimensionMismatch(f"state shape {m.shape} vs unitary shape {U.shape}")
    p = np.einsum("bi,ij,bj->b", U, m, U.conj()).real
    return clamp_probabilities(p)


def measure_rotated_basis(rho, U: np.ndarray, rng, size: int | None = None):
    """Measure ``rho`` in the basis ``{U^dag |b><b| U}``.

    Returns an outcome index, or :data:`FAILURE` with probability
    ``1 - tr(rho)``; an array of ``size`` i.i.d. outcomes if ``size`` is given.
    """
    p = rotated_basis_probabilities(rho, U)
    out = draw_categorical(as_generator(rng), p, 1 if size is None else size)
    return int(out[0]) if size is None else out


def swap_test_probabilities(tr_rho, tr_sigma, overlap):
    """Probabilities of ``w = +1`` and ``w = -1`` for the SWAP test on partial states.

    ``w = 0`` (failure) takes the remaining ``1 - tr(rho) tr(sigma)``.
    """
    both = np.clip(np.asarray(tr_rho) * np.asarray(tr_sigma), 0.0, 1.0)
    ov = np.clip(overlap, -both, both)
    return (both + ov) / 2, (both - ov) / 2


def swap_test_batch(gen: np.random.Generator, tr_rho, tr_sigma, overlap) -> np.ndarray:
    plus, minus = swap_test_probabilities(tr_rho, tr_sigma, overlap)
    u = gen.random(np.shape(plus))
    return np.where(u < plus, 1, np.where(u < plus + minus, -1, 0)).astype(np.int8)


def swap_test_sample(rho, sigma, rng, size: int | None = None):
    """One run of the SWAP test extended to partial density operators.

    ``w`` is ``+1`` or ``-1`` for the two ancilla outcomes and ``0`` when
    either state fails, so that ``E[w] = tr(rho sigma)``.
    """
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"states have shapes {a.shape} and {b.shape}")
    overlap = float(np.einsum("ij,ji->", a, b).real)
    tr_a, tr_b = float(np.trace(a).real), float(np.trace(b).real)
    shape = () if size is None else (size,)
    w = swap_test_batch(
        as_generator(rng),
        np.full(shape, tr_a),
        np.full(shape, tr_b),
        np.full(shape, overlap),
    )
    return int(w) if size is None else w


def trivial_povm_sample(rho, rng, size: int | None = None):
    """Measure with the one-outcome POVM ``{I}``: valid with probability ``tr(rho)``."""
    tr = float(np.clip(np.trace(as_matrix(rho)).real, 0.0, 1.0))
    gen = as_generator(rng)
    if size is None:
        return bool(gen.random() < tr)
    return gen.random(size) < tr
