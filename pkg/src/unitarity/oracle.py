"""Exact values of every quantity the estimators target, and unitary-approximability bounds."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channels import (
    KrausChannel,
    block_decomposition,
    canonical_kraus,
    jamiolkowski_state,
    matrix_representation,
    validate_channel,
)
from .errors import DegenerateChannelWarning, DimensionMismatch, DimensionTooSmall
from .sampling import as_generator, ginibre


def exact_unitarity(ch: KrausChannel) -> float:
    """``u = tr(M^dag M) / d^2`` for the matrix representation ``M``."""
    rep = matrix_representation(ch)
    return float(np.vdot(rep, rep).real) / ch.dim**2


def jamiolkowski_purity(ch: KrausChannel) -> float:
    j = jamiolkowski_state(ch).matrix
    return float(np.einsum("ij,ji->", j, j).real)


def _alpha_beta(ch: KrausChannel) -> tuple[float, float]:
    # Haar twirl of M^dag M = alpha (1 - P0) + beta P0
    d = ch.dim
    out = np.einsum("kij,kmj->im", ch.kraus, ch.kraus.conj())  # E(I)
    beta = float(np.vdot(out, out).real) / d
    total = exact_unitarity(ch) * d**2
    alpha = (total - beta) / (d**2 - 1)
    return alpha, beta


def exact_pp_index(ch: KrausChannel) -> float:
    """Purity-preservation index ``p = E_psi tr(E(psi)^2)``."""
    if ch.dim < 2:
        raise DimensionTooSmall("the index decomposition needs d >= 2")
    d = ch.dim
    alpha, beta = _alpha_beta(ch)
    return (1 - 1 / d) * alpha + beta / d


def exact_op_index(ch: KrausChannel) -> float:
    """Orthogonality-preservation index ``o = E tr(E(psi) E(phi))`` over orthogonal pairs."""
    if ch.dim < 2:
        raise DimensionTooSmall("the index decomposition needs d >= 2")
    d = ch.dim
    alpha, beta = _alpha_beta(ch)
    return (beta - alpha) / d


def exact_t_index(ch: KrausChannel) -> float:
    """Trace-preservation index ``t = tr(E(I/d))``."""
    return float(np.einsum("kij,kij->", ch.kraus.conj(), ch.kraus).real) / ch.dim


def exact_s_index(ch: KrausChannel) -> float:
    """``s = t^2/d + |E_sdl|^2 / (d(d+1))``."""
    d = ch.dim
    blocks = block_decomposition(ch)
    return blocks.t**2 / d + blocks.sdl2 / (d * (d + 1))


def exact_alt_unitarity(ch: KrausChannel) -> float:
    """Normalised Frobenius norm of the unital block: ``u' = |E_u|^2 / (d^2 - 1)``."""
    if ch.dim < 2:
        raise DimensionTooSmall("the alternative unitarity needs d >= 2")
    return block_decomposition(ch).u2 / (ch.dim**2 - 1)


@dataclass(frozen=True)
class IndexReport:
    u: float
    u_alt: float
    p: float
    o: float
    s: float
    t: float
    alpha: float
    beta: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("u", "u_alt", "p", "o", "s", "t", "alpha", "beta")}


def index_report(ch: KrausChannel) -> IndexReport:
    alpha, beta = _alpha_beta(ch)
    return IndexReport(
        u=exact_unitarity(ch),
        u_alt=exact_alt_unitarity(ch),
        p=exact_pp_index(ch),
        o=exact_op_index(ch),
        s=exact_s_index(ch),
        t=exact_t_index(ch),
        alpha=alpha,
        beta=beta,
    )


def exact_avg_gate_fidelity(U: np.ndarray, ch: KrausChannel) -> float:
    """Average gate fidelity ``(sum_i |tr(U^dag E_i)|^2 + tr(E(I))) / (d(d+1))``."""
    U = np.asarray(U, dtype=complex)
    d = ch.dim
    if U.shape != (d, d):
        raise DimensionMismatch(f"unitary has shape {U.shape}, channel acts on d={d}")
    overlaps = np.einsum("ji,kji->k", U.conj(), ch.kraus)
    entangle = float((np.abs(overlaps) ** 2).sum())
    return (entangle + d * exact_t_index(ch)) / (d * (d + 1))


@dataclass(frozen=True, eq=False)
class ApproximabilityBounds:
    lower: float
    upper: float
    candidate_unitary: np.ndarray
    candidate_fidelity: float


def approximability_bounds(ch: KrausChannel, tol: float = 1e-12) -> ApproximabilityBounds:
    """Bounds on ``sup_U F_a(U, E)`` in terms of the unitarity, with a witness unitary.

    The witness is ``W V^dag`` from the SVD ``W D V^dag`` of the heaviest
    Kraus operator in a Hilbert-Schmidt-orthogonal Kraus representation.
    """
    d = ch.dim
    if d < 2:
        raise DimensionTooSmall("approximability bounds need d >= 2")
    u = exact_unitarity(ch)
    weights, ops = canonical_kraus(ch, tol)
    if len(weights) == 0:
        warnings.warn("channel is zero; candidate unitary defaults to identity", DegenerateChannelWarning)
        candidate = np.eye(d, dtype=complex)
        u = 0.0
    else:
        w, _, vh = np.linalg.svd(ops[0])
        candidate = w @ vh
    root = np.sqrt(max(u, 0.0))
    return ApproximabilityBounds(
        lower=(d * u**2 + root) / (d + 1),
        upper=(d * root + 1) / (d + 1),
        candidate_unitary=candidate,
        candidate_fidelity=exact_avg_gate_fidelity(candidate, ch),
    )


def random_channel(d: int, rng, rank: int | None = None) -> KrausChannel:
    """Random, generally trace-decreasing channel for property sweeps.

    ``rank`` Ginibre Kraus operators (uniform in ``1..d^2`` if omitted), jointly
    rescaled so that the top eigenvalue of ``sum E^dag E`` is uniform in ``[0.3, 1]``.
    """
    gen = as_generator(rng)
    k = int(gen.integers(1, d * d + 1)) if rank is None else rank
    ops = ginibre(gen, (k, d, d))
    top = np.linalg.eigvalsh(np.einsum("kji,kjl->il", ops.conj(), ops))[-1]
    ops *= np.sqrt(gen.uniform(0.3, 1.0) / top)
    return validate_channel(ops, d, name=f"random(k={k})")
