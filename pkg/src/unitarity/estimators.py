"""Unitarity estimation from purity-, orthogonality-, leakage- and trace-preservation indices.

The index estimators average ``M`` independent rounds. Each round prepares
Haar-random input states, sends them through the channel and estimates an
output overlap ``tr(rho sigma)``. The SWAP test does this under coherent
access and distributed inner product estimation (DQIPE) under incoherent
access. Rounds are simulated in vectorised batches. One estimator call consumes
one random stream, so results depend only on ``(seed, stream, path)``.

Query accounting: one simulated copy of an output state costs one channel
call. A coherent round uses 2 calls and an incoherent round uses ``4 N m``
(``2 N m`` copies of each state).
"""

from __future__ import annotations

import math
import statistics
import time
import weakref
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .channels import KrausChannel, as_matrix, choi_matrix
from ._kernels import collision_rates
from .errors import DimensionMismatch, DimensionTooSmall, EmptyBatch, EmptyList, ValidationError
from .sampling import (
    FAILURE,
    RngStream,
    as_generator,
    ginibre,
    haar_isometry,
    haar_unitary,
    swap_test_batch,
)

COHERENT = "coherent"
INCOHERENT = "incoherent"
ACCESS_MODES = (COHERENT, INCOHERENT)

DEFAULT_N = 12
_CHUNK_ELEMENTS = 1 << 21
VARIANTS = ("u", "uprime")


def _ceil(x: float) -> int:
    # guards against 8 / 0.1**2 = 800.0000000001
    return int(math.ceil(x - 1e-9))


def default_rounds(epsilon: float, variant: str = "u") -> int:
    """Input settings ``M`` per index for a target precision ``epsilon`` on the assembled unitarity."""
    return _ceil((8.0 if variant == "u" else 24.0) / epsilon**2)


def default_measurements(d: int) -> int:
    """Measurements per basis setting, ``m = ceil(2 sqrt(d))``."""
    return _ceil(2.0 * math.sqrt(d))


def median_repetitions(delta: float) -> int:
    """Repetitions for the median trick: ``ceil(18 ln(1/delta))`` below the base confidence 1/3."""
    if delta >= 1.0 / 3.0:
        return 1
    return _ceil(18.0 * math.log(1.0 / delta))


def round_queries(access: str, N: int = 1, m: int = 1) -> int:
    return 2 if access == COHERENT else 4 * N * m


@dataclass(frozen=True)
class EstimatorConfig:
    M: int
    N: int = DEFAULT_N
    m: int = 1
    epsilon: float | None = None
    delta: float | None = None
    access: str = COHERENT
    seed: int = 0
    variant: str = "u"
    t_samples: int | None = None

    def __post_init__(self):
        if min(self.M, self.N, self.m) < 1:
            raise ValidationError("M, N and m must be at least 1")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ValidationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValidationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.access not in ACCESS_MODES:
            raise ValidationError(f"access must be one of {ACCESS_MODES}, got {self.access!r}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @classmethod
    def for_target(
        cls,
        epsilon: float,
        delta: float,
        d: int,
        access: str = COHERENT,
        variant: str = "u",
        seed: int = 0,
    ) -> "EstimatorConfig":
        M = default_rounds(epsilon, variant)
        return cls(
            M=M,
            N=DEFAULT_N,
            m=default_measurements(d),
            epsilon=epsilon,
            delta=delta,
            access=access,
            seed=seed,
            variant=variant,
            t_samples=M if variant == "uprime" else None,
        )


@dataclass
class EstimateRecord:
    """Result of one estimator call.

    For the index estimators ``rounds`` holds the per-round values ``z_i``;
    for :func:`estimate_unitarity` it holds one assembled value per median-trick
    repetition and ``components`` holds the per-index records.
    """

    value: float
    kind: str
    access: str
    total_queries: int
    rounds: list[float]
    config: EstimatorConfig | None = None
    wall_seconds: float = 0.0
    components: dict[str, "EstimateRecord"] = field(default_factory=dict)

    @property
    def standard_error(self) -> float:
        if len(self.rounds) < 2:
            return float("nan")
        return float(np.std(self.rounds, ddof=1) / math.sqrt(len(self.rounds)))

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "kind": self.kind,
            "access": self.access,
            "total_queries": self.total_queries,
            "rounds": list(self.rounds),
            "config": None if self.config is None else asdict(self.config),
            "wall_seconds": self.wall_seconds,
            "components": {k: v.to_dict() for k, v in self.components.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateRecord":
        cfg = data.get("config")
        return cls(
            value=data["value"],
            kind=data["kind"],
            access=data["access"],
            total_queries=data["total_queries"],
            rounds=list(data["rounds"]),
            config=None if cfg is None else EstimatorConfig(**cfg),
            wall_seconds=data.get("wall_seconds", 0.0),
            components={k: cls.from_dict(v) for k, v in data.get("components", {}).items()},
        )


# ---------------------------------------------------------------------------
# partial collision estimator and DQIPE


def partial_collision(X: Sequence, Y: Sequence) -> float:
    """Fraction of pairs ``(j, k)`` with ``x_j == y_k`` and neither a failure.

    Failures may be given as ``None`` or any negative index.
    """
    if len(X) == 0 or len(Y) == 0:
        raise EmptyBatch("partial collision needs non-empty batches")
    if len(X) != len(Y):
        raise ValidationError(f"batches have different sizes {len(X)} and {len(Y)}")
    xs = np.array([FAILURE if x is None else int(x) for x in X])
    ys = np.array([FAILURE if y is None else int(y) for y in Y])
    hits = (xs[:, None] == ys[None, :]) & (xs[:, None] >= 0)
    return float(hits.sum()) / (len(X) * len(Y))


def _psd_sqrt_batch(g: np.ndarray) -> np.ndarray:
    if g.shape[-1] == 1:
        return np.sqrt(np.clip(g.real, 0.0, None)).astype(complex)
    evals, evecs = np.linalg.eigh(g)
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))[..., None, :]) @ np.swapaxes(evecs.conj(), -1, -2)


def _dqipe_factored(gen, c_rho, c_sigma, vecs, mu_rho, mu_sigma, N: int, m: int) -> np.ndarray:
    """DQIPE on a batch of states given as ``c I + sum_k mu_k |v_k><v_k|``.

    ``vecs`` has shape ``(B, d, n)`` and is shared by both states; ``mu_rho``
    and ``mu_sigma`` (shape ``(B, n)``) select and weight its columns.
    Only ``U @ vecs`` matters for rotated-basis statistics. For a Haar ``U`` it
    has the law of ``S @ (vecs^dag vecs)^(1/2)`` with ``S`` a Haar isometry,
    which is far cheaper than a full unitary when ``n < d``.
    The per-basis work runs in a compiled kernel fed with bulk draws.
    """
    B, d, n = vecs.shape
    norms = np.einsum("bin,bin->bn", vecs.conj(), vecs).real
    tr_rho = np.clip(d * c_rho + (mu_rho * norms).sum(-1), 0.0, 1.0)
    tr_sigma = np.clip(d * c_sigma + (mu_sigma * norms).sum(-1), 0.0, 1.0)

    if 0 < n < d:
        right = _psd_sqrt_batch(np.einsum("bik,bil->bkl", vecs.conj(), vecs))
    else:
        right = vecs
    r = right.shape[1] if n else 0
    right = np.ascontiguousarray(right, dtype=complex)
    mu_rho = np.ascontiguousarray(mu_rho, dtype=float)
    mu_sigma = np.ascontiguousarray(mu_sigma, dtype=float)
    c_rho = np.ascontiguousarray(c_rho, dtype=float)
    c_sigma = np.ascontiguousarray(c_sigma, dtype=float)

    # bounded memory: draw and process the rounds in chunks
    chunk = max(1, _CHUNK_ELEMENTS // max(1, N * (d * r + m)))
    rates = np.empty(B)
    for lo in range(0, B, chunk):
        hi = min(B, lo + chunk)
        G = ginibre(gen, (hi - lo, N, d, r))
        ux = gen.random((hi - lo, N, m))
        uy = gen.random((hi - lo, N, m))
        rates[lo:hi] = collision_rates(
            G, right[lo:hi], c_rho[lo:hi], c_sigma[lo:hi], mu_rho[lo:hi], mu_sigma[lo:hi], ux, uy
        )
    w = (d + 1) * rates

    t1 = gen.binomial(N * m, tr_rho) / (N * m)
    t2 = gen.binomial(N * m, tr_sigma) / (N * m)
    return w - t1 * t2


def _cluster_value(evals: np.ndarray, tol: float) -> np.ndarray:
    """Per row, the eigenvalue with the most neighbours within ``tol`` (lowest wins ties)."""
    close = np.abs(evals[..., :, None] - evals[..., None, :]) <= tol
    idx = close.sum(-1).argmax(-1)
    return np.take_along_axis(evals, idx[..., None], -1)[..., 0]


def _factor_states(mats: np.ndarray, tol: float = 1e-11):
    evals, evecs = np.linalg.eigh(mats)
    c = _cluster_value(evals, tol)
    mu = evals - c[:, None]
    mu[np.abs(mu) <= tol] = 0.0
    return c, evecs, mu


def _compact(vecs, mu_rho, mu_sigma):
    """Drop columns with zero weight in both states (moved to the end, then cut)."""
    active = (mu_rho != 0) | (mu_sigma != 0)
    order = np.argsort(~active, axis=-1, kind="stable")
    n = int(active.sum(-1).max()) if active.size else 0
    order = order[:, :n]
    vecs = np.take_along_axis(vecs, order[:, None, :], -1)
    return vecs, np.take_along_axis(mu_rho, order, -1), np.take_along_axis(mu_sigma, order, -1)


def dqipe_batch(rhos, sigmas, N: int, m: int, rng) -> np.ndarray:
    """Independent DQIPE runs on a batch of state pairs (arrays of shape ``(B, d, d)``)."""
    a = np.asarray(rhos, dtype=complex)
    b = np.asarray(sigmas, dtype=complex)
    if a.shape != b.shape or a.ndim != 3:
        raise DimensionMismatch(f"state batches have shapes {a.shape} and {b.shape}")
    if N < 1 or m < 1:
        raise ValidationError("N and m must be at least 1")
    c_r, v_r, mu_r = _factor_states(a)
    c_s, v_s, mu_s = _factor_states(b)
    zeros = np.zeros_like(mu_r)
    vecs, w_r, w_s = _compact(
        np.concatenate([v_r, v_s], -1),
        np.concatenate([mu_r, zeros], -1),
        np.concatenate([zeros, mu_s], -1),
    )
    return _dqipe_factored(as_generator(rng), c_r, c_s, vecs, w_r, w_s, N, m)


def dqipe(rho, sigma, N: int, m: int, rng) -> float:
    """Estimate ``tr(rho sigma)`` of two partial density operators from single-copy measurements.

    For each of ``N`` Haar-random bases, ``m`` copies of each state are
    measured and ``(d + 1)`` times the partial collision rate is recorded. The
    product of the valid-outcome rates from ``N m`` further copies of each state
    is subtracted. Unbiased for ``tr(rho sigma)``.
    """
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"states have shapes {a.shape} and {b.shape}")
    return float(dqipe_batch(a[None], b[None], N, m, rng)[0])


# ---------------------------------------------------------------------------
# channel output model used by the incoherent estimators


@dataclass(frozen=True, eq=False)
class OutputModel:
    """``E(psi) = c <psi|psi> I + sum_k mu_k F_k |psi><psi| F_k^dag``.

    Obtained from an eigendecomposition of the Choi matrix after removing its
    most degenerate eigenvalue ``c`` (the map ``rho -> tr(rho) I`` has the
    identity as Choi matrix). The completely depolarizing channel has no
    remaining terms; a unitary channel has one.
    """

    c: float
    mu: np.ndarray
    ops: np.ndarray

    def images(self, psi: np.ndarray) -> np.ndarray:
        """``F_k psi`` as columns, shape ``(B, d, K)`` for ``psi`` of shape ``(B, d)``."""
        return np.einsum("kij,bj->bik", self.ops, psi)


_models: "weakref.WeakKeyDictionary[KrausChannel, OutputModel]" = weakref.WeakKeyDictionary()


def output_model(ch: KrausChannel, tol: float = 1e-11) -> OutputModel:
    model = _models.get(ch)
    if model is None:
        d = ch.dim
        evals, evecs = np.linalg.eigh(choi_matrix(ch))
        c = float(_cluster_value(evals, tol))
        keep = np.abs(evals - c) > tol
        ops = evecs[:, keep].T.reshape(-1, d, d)
        model = OutputModel(c=max(c, 0.0), mu=evals[keep] - c, ops=ops)
        _models[ch] = model
    return model


def _outputs(ch: KrausChannel, psi: np.ndarray) -> np.ndarray:
    """Dense output states ``E(|psi><psi|)`` for a batch of unit input vectors."""
    model = output_model(ch)
    images = model.images(psi)
    states = (images * model.mu) @ np.swapaxes(images.conj(), -1, -2)
    return states + model.c * np.eye(ch.dim)


def _traces(states: np.ndarray) -> np.ndarray:
    return np.trace(states, axis1=-2, axis2=-1).real


def _overlaps(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("bij,bji->b", a, b).real


def _require_dim(ch: KrausChannel) -> None:
    if ch.dim < 2:
        raise DimensionTooSmall("orthogonal input pairs need d >= 2")


def _record(kind, access, values, queries, config, start) -> EstimateRecord:
    values = np.asarray(values, dtype=float)
    return EstimateRecord(
        value=float(values.mean()),
        kind=kind,
        access=access,
        total_queries=int(queries),
        rounds=values.tolist(),
        config=config,
        wall_seconds=time.perf_counter() - start,
    )


def _seed_of(rng) -> int:
    return rng.seed if isinstance(rng, RngStream) else 0


def _index_rounds(kind: str, ch: KrausChannel, access: str, M: int, N: int, m: int, gen) -> np.ndarray:
    d = ch.dim
    if access == COHERENT:
        if kind == "o":
            inputs = haar_isometry(d, 2, gen, (M,))
            rho, sigma = _outputs(ch, inputs[..., 0]), _outputs(ch, inputs[..., 1])
        elif kind == "p":
            rho = _outputs(ch, haar_isometry(d, 1, gen, (M,))[..., 0])
            sigma = rho
        else:
            rho = _outputs(ch, haar_isometry(d, 1, gen, (M,))[..., 0])
            U = haar_unitary(d, gen, (M,))
            sigma = U @ rho @ np.swapaxes(U.conj(), -1, -2)
        return swap_test_batch(gen, _traces(rho), _traces(sigma), _overlaps(rho, sigma)).astype(float)

    model = output_model(ch)
    c = np.full(M, model.c)
    K = len(model.mu)
    mu = np.broadcast_to(model.mu, (M, K))
    zeros = np.zeros((M, K))
    if kind == "o":
        inputs = haar_isometry(d, 2, gen, (M,))
        vecs = np.concatenate([model.images(inputs[..., 0]), model.images(inputs[..., 1])], -1)
        w_r, w_s = np.concatenate([mu, zeros], -1), np.concatenate([zeros, mu], -1)
    elif kind == "p":
        vecs = model.images(haar_isometry(d, 1, gen, (M,))[..., 0])
        w_r = w_s = mu
    else:
        base = model.images(haar_isometry(d, 1, gen, (M,))[..., 0])
        if 0 < K < d:
            root = _psd_sqrt_batch(np.einsum("bik,bil->bkl", base.conj(), base))
            turned = haar_isometry(d, K, gen, (M,)) @ root
        else:
            turned = haar_unitary(d, gen, (M,)) @ base
        vecs = np.concatenate([base, turned], -1)
        w_r, w_s = np.concatenate([mu, zeros], -1), np.concatenate([zeros, mu], -1)
    return _dqipe_factored(gen, c, c, vecs, np.ascontiguousarray(w_r), np.ascontiguousarray(w_s), N, m)


def _estimate_index(kind, ch, access, M, N, m, rng) -> EstimateRecord:
    if M < 1:
        raise ValidationError("M must be at least 1")
    if access not in ACCESS_MODES:
        raise ValidationError(f"access must be one of {ACCESS_MODES}, got {access!r}")
    start = time.perf_counter()
    if access == COHERENT:
        N = m = 1
    values = _index_rounds(kind, ch, access, M, N, m, as_generator(rng))
    config = EstimatorConfig(M=M, N=N, m=m, access=access, seed=_seed_of(rng))
    return _record(kind, access, values, M * round_queries(access, N, m), config, start)


def estimate_o_coherent(ch: KrausChannel, M: int, rng) -> EstimateRecord:
    """Orthogonality-preservation index from ``M`` SWAP tests on ``E(U|0>), E(U|1>)``."""
    _require_dim(ch)
    return _estimate_index("o", ch, COHERENT, M, 1, 1, rng)


def estimate_p_coherent(ch: KrausChannel, M: int, rng) -> EstimateRecord:
    """Purity-preservation index; the two SWAP-test inputs are two calls on the same ``U|0>``."""
    return _estimate_index("p", ch, COHERENT, M, 1, 1, rng)


def estimate_o_incoherent(ch: KrausChannel, M: int, N: int, m: int, rng) -> EstimateRecord:
    _require_dim(ch)
    return _estimate_index("o", ch, INCOHERENT, M, N, m, rng)


def estimate_p_incoherent(ch: KrausChannel, M: int, N: int, m: int, rng) -> EstimateRecord:
    return _estimate_index("p", ch, INCOHERENT, M, N, m, rng)


def estimate_s(ch: KrausChannel, access: str, M: int, N: int, m: int, rng) -> EstimateRecord:
    """``E_{U,V} tr(rho U rho U^dag)`` with ``rho = E(V|0><0|V^dag)``."""
    return _estimate_index("s", ch, access, M, N, m, rng)


def estimate_t(ch: KrausChannel, samples: int, rng) -> EstimateRecord:
    """Fraction of valid outcomes when ``E(I/d)`` is measured with the trivial POVM."""
    if samples < 1:
        raise ValidationError("samples must be at least 1")
    start = time.perf_counter()
    d = ch.dim
    t = float(np.clip(np.einsum("kij,kij->", ch.kraus.conj(), ch.kraus).real / d, 0.0, 1.0))
    valid = as_generator(rng).random(samples) < t
    config = EstimatorConfig(M=samples, N=1, m=1, access=INCOHERENT, seed=_seed_of(rng))
    return _record("t", INCOHERENT, valid, samples, config, start)


# ---------------------------------------------------------------------------
# assembly


def assemble_u(p: float, o: float, d: int) -> float:
    """``u = p - (1 - 1/d) o``."""
    return p - (1.0 - 1.0 / d) * o


def assemble_u_alt(p: float, o: float, s: float, t: float, d: int) -> float:
    """``u' = p - o - d/(d-1) s + t^2/(d-1)``."""
    if d < 2:
        raise DimensionTooSmall("the alternative unitarity needs d >= 2")
    return p - o - d / (d - 1) * s + t**2 / (d - 1)


def median_of_runs(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise EmptyList("median of an empty list")
    return float(statistics.median(values))


def _as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, np.random.Generator):
        return RngStream(int(rng.integers(2**63)))
    return RngStream(0 if rng is None else int(rng))


def estimate_unitarity(
    ch: KrausChannel,
    access: str = COHERENT,
    epsilon: float = 0.1,
    delta: float = 1.0 / 3.0,
    variant: str = "u",
    rng=None,
    *,
    M: int | None = None,
    N: int | None = None,
    m: int | None = None,
    t_samples: int | None = None,
) -> EstimateRecord:
    """Estimate ``u`` (or ``u'`` with ``variant="uprime"``) to precision ``epsilon``.

    Runs the index estimators, assembles them, and for ``delta < 1/3`` repeats
    the whole pipeline ``ceil(18 ln(1/delta))`` times and returns the median.
    """
    _require_dim(ch)
    stream = _as_stream(rng)
    d = ch.dim
    config = EstimatorConfig.for_target(epsilon, delta, d, access, variant, stream.seed)
    config = EstimatorConfig(
        M=M or config.M,
        N=N or config.N,
        m=m or config.m,
        epsilon=epsilon,
        delta=delta,
        access=access,
        seed=stream.seed,
        variant=variant,
        t_samples=(t_samples or config.t_samples or config.M) if variant == "uprime" else None,
    )
    kinds = ("p", "o") if variant == "u" else ("p", "o", "s", "t")
    start = time.perf_counter()
    assembled: list[float] = []
    parts: dict[str, list[EstimateRecord]] = {k: [] for k in kinds}
    for rep in range(median_repetitions(delta)):
        sub = stream.child(rep)
        for code, kind in enumerate(kinds):
            if kind == "t":
                rec = estimate_t(ch, config.t_samples, sub.child(code))
            else:
                rec = _estimate_index(kind, ch, access, config.M, config.N, config.m, sub.child(code))
            parts[kind].append(rec)
        vals = {k: parts[k][-1].value for k in kinds}
        if variant == "u":
            assembled.append(assemble_u(vals["p"], vals["o"], d))
        else:
            assembled.append(assemble_u_alt(vals["p"], vals["o"], vals["s"], vals["t"], d))
    components = {
        k: EstimateRecord(
            value=median_of_runs([r.value for r in recs]),
            kind=k,
            access=recs[0].access,
            total_queries=sum(r.total_queries for r in recs),
            rounds=[r.value for r in recs],
            config=recs[0].config,
            wall_seconds=sum(r.wall_seconds for r in recs),
        )
        for k, recs in parts.items()
    }
    return EstimateRecord(
        value=median_of_runs(assembled),
        kind="u" if variant == "u" else "u'",
        access=access,
        total_queries=sum(c.total_queries for c in components.values()),
        rounds=assembled,
        config=config,
        wall_seconds=time.perf_counter() - start,
        components=components,
    )


def unitarity_queries(config: EstimatorConfig, d: int) -> int:
    """Closed-form channel-call count of :func:`estimate_unitarity` for ``config``."""
    per_index = config.M * round_queries(config.access, config.N, config.m)
    reps = median_repetitions(config.delta if config.delta is not None else 0.5)
    if config.variant == "u":
        return reps * 2 * per_index
    return reps * (3 * per_index + (config.t_samples or config.M))
