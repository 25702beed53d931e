"""Channel representations and the linear algebra shared by every other module.

Vectorisation is row-major throughout: ``vec(A) = A.reshape(-1)``, so that
``vec(A @ B @ C^dag) = kron(A, C.conj()) @ vec(B)`` and the matrix
representation of a channel with Kraus operators ``E_i`` is
``sum_i kron(E_i, E_i.conj())``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NotTraceNonincreasing, ValidationError

# exact algebraic identities at d <= 16
TOL_ALG = 1e-10
# user supplied matrices may be rounded
TOL_PSD = 1e-9
TOL_HERM = 1e-9


def vec(matrix: np.ndarray) -> np.ndarray:
    """Row-major flattening ``|A>>`` of a matrix."""
    return np.asarray(matrix).reshape(-1)


def unvec(vector: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec` for square matrices."""
    vector = np.asarray(vector)
    if dim is None:
        dim = int(round(np.sqrt(vector.size)))
    return vector.reshape(dim, dim)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A completely positive, trace-nonincreasing map ``rho -> sum_i E_i rho E_i^dag``.

    Build instances with :func:`validate_channel`; the constructor does not check
    trace-nonincrease.
    """

    kraus: np.ndarray  # shape (k, d, d)
    max_excess: float = 0.0  # largest eigenvalue of sum E^dag E, minus one
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kraus", _readonly(self.kraus))

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def num_kraus(self) -> int:
        return self.kraus.shape[0]

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<KrausChannel{label} d={self.dim} k={self.num_kraus}>"


@dataclass(frozen=True, eq=False)
class PartialDensityOperator:
    """Positive semidefinite matrix with trace at most one."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @classmethod
    def validated(cls, matrix, tol: float = TOL_PSD) -> "PartialDensityOperator":
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.size == 0:
            raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("matrix has non-finite entries")
        if np.abs(m - m.conj().T).max() > TOL_HERM:
            raise ValidationError("matrix is not Hermitian")
        evals = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if evals[0] < -tol:
            raise ValidationError(f"matrix has negative eigenvalue {evals[0]:.3g}")
        if evals.sum() > 1 + tol:
            raise ValidationError(f"trace {evals.sum():.12g} exceeds 1")
        return cls(m)


def as_matrix(state) -> np.ndarray:
    """Return the underlying array of a state (array or PartialDensityOperator)."""
    if isinstance(state, PartialDensityOperator):
        return state.matrix
    return np.asarray(state, dtype=complex)


def validate_channel(
    kraus: Sequence[np.ndarray] | np.ndarray,
    dim: int | None = None,
    *,
    tol: float = TOL_PSD,
    name: str = "",
) -> KrausChannel:
    """Check a list of Kraus operators and wrap it as a :class:`KrausChannel`.

    Args:
        kraus: non-empty sequence of ``d x d`` complex matrices.
        dim: expected dimension ``d``; inferred from the first operator if omitted.
        tol: slack allowed on ``sum_i E_i^dag E_i <= I``.

    Raises:
        DimensionMismatch: if any operator is not ``d x d``.
        NotTraceNonincreasing: if ``sum_i E_i^dag E_i`` has an eigenvalue above ``1 + tol``.
    """
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    if not ops:
        raise ValidationError("at least one Kraus operator is required")
    if dim is None:
        dim = ops[0].shape[0] if ops[0].ndim == 2 else -1
    for i, op in enumerate(ops):
        if op.shape != (dim, dim):
            raise DimensionMismatch(f"Kraus operator {i} has shape {op.shape}, expected {(dim, dim)}")
        if not np.all(np.isfinite(op)):
            raise ValidationError(f"Kraus operator {i} has non-finite entries")
    stack = np.stack(ops)
    gram = np.einsum("kji,kjl->il", stack.conj(), stack)
    top = float(np.linalg.eigvalsh((gram + gram.conj().T) / 2)[-1])
    if top > 1 + tol:
        raise NotTraceNonincreasing(top, tol)
    return KrausChannel(stack, max_excess=top - 1.0, name=name)


def apply_channel(ch: KrausChannel, rho) -> PartialDensityOperator:
    """``sum_i E_i rho E_i^dag``."""
    m = as_matrix(rho)
    if m.shape != (ch.dim, ch.dim):
        raise DimensionMismatch(f"state has shape {m.shape}, channel acts on d={ch.dim}")
    out = np.einsum("kij,jl,kml->im", ch.kraus, m, ch.kraus.conj())
    return PartialDensityOperator(out)


def matrix_representation(ch: KrausChannel) -> np.ndarray:
    """The ``d^2 x d^2`` matrix ``sum_i E_i (x) E_i^*`` acting on ``vec(rho)``."""
    d = ch.dim
    rep = np.einsum("kij,klm->iljm", ch.kraus, ch.kraus.conj())
    return rep.reshape(d * d, d * d)


def choi_matrix(ch: KrausChannel) -> np.ndarray:
    """Unnormalised Choi matrix ``sum_i |E_i>><<E_i|`` (``d`` times the Jamiolkowski state)."""
    flat = ch.kraus.reshape(ch.num_kraus, -1)
    return flat.T @ flat.conj()


def jamiolkowski_state(ch: KrausChannel) -> PartialDensityOperator:
    """``(E (x) I)(|Phi><Phi|) = (1/d) sum_i |E_i>><<E_i|``."""
    return PartialDensityOperator(choi_matrix(ch) / ch.dim)


def canonical_kraus(ch: KrausChannel, tol: float = TOL_ALG) -> tuple[np.ndarray, np.ndarray]:
    """Kraus operators that are mutually orthogonal in the Hilbert-Schmidt inner product.

    Returns ``(weights, ops)`` sorted by decreasing weight, where
    ``weights[i] = tr(F_i^dag F_i)`` and ``ops`` has shape ``(n, d, d)``.
    Zero-weight directions are dropped.
    """
    d = ch.dim
    evals, evecs = np.linalg.eigh(choi_matrix(ch))
    order = np.argsort(-evals, kind="stable")
    evals, evecs = evals[order], evecs[:, order]
    keep = evals > tol
    ops = (evecs[:, keep] * np.sqrt(evals[keep])).T.reshape(-1, d, d)
    return evals[keep], ops


@dataclass(frozen=True)
class BlockDecomposition:
    """Squared Frobenius norms of the blocks of the matrix representation.

    The basis is ``{|I/sqrt(d)>>}`` plus its traceless complement: ``t`` is the
    top-left entry, ``sdl2`` the top-right row (state-dependent leakage),
    ``n2`` the bottom-left column (non-unital part) and ``u2`` the traceless
    (unital) block.
    """

    t: float
    sdl2: float
    n2: float
    u2: float

    @property
    def total(self) -> float:
        return self.t**2 + self.sdl2 + self.n2 + self.u2


def block_decomposition(ch: KrausChannel) -> BlockDecomposition:
    d = ch.dim
    rep = matrix_representation(ch)
    e0 = vec(np.eye(d)) / np.sqrt(d)
    col = rep @ e0  # M |e0>>
    row = e0.conj() @ rep  # <<e0| M
    t = complex(row @ e0)
    sdl = row - t * e0.conj()  # <<e0| M P1
    n = col - t * e0  # P1 M |e0>>
    total = float(np.vdot(rep, rep).real)
    sdl2 = float(np.vdot(sdl, sdl).real)
    n2 = float(np.vdot(n, n).real)
    u2 = max(total - abs(t) ** 2 - sdl2 - n2, 0.0)
    return BlockDecomposition(t=float(t.real), sdl2=sdl2, n2=n2, u2=u2)


def _drop_rounding(evals: np.ndarray) -> np.ndarray:
    # eigenvalues within rounding of zero are zero; sqrt would amplify them
    floor = evals.size * np.finfo(float).eps * max(np.abs(evals).max(initial=0.0), 1e-300)
    return np.where(evals > floor, evals, 0.0)


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Square root of a (numerically) PSD Hermitian matrix, clamping tiny negative eigenvalues."""
    evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
    return (evecs * np.sqrt(_drop_rounding(evals))) @ evecs.conj().T


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``tr sqrt(sqrt(rho) sigma sqrt(rho))`` (not squared)."""
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"states have shapes {a.shape} and {b.shape}")
    root = psd_sqrt(a)
    inner = root @ b @ root
    evals = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(np.sqrt(_drop_rounding(evals)).sum())


def jamiolkowski_fidelity(ch1: KrausChannel, ch2: KrausChannel) -> float:
    if ch1.dim != ch2.dim:
        raise DimensionMismatch(f"channels act on d={ch1.dim} and d={ch2.dim}")
    return state_fidelity(jamiolkowski_state(ch1), jamiolkowski_state(ch2))
