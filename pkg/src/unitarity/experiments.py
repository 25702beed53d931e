"""Experiment orchestration: repeated estimates, scaling sweeps and the distinguishing task.

Every repeat, grid cell or trial draws from its own stream
``RngStream(seed, index)``, so results do not depend on how work is split
across processes. Work runs in a process pool when ``workers > 1`` and is
merged in index order.
"""

from __future__ import annotations

import datetime as _dt
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import metadata
from typing import Callable, Sequence

import numpy as np

from .builtins import builtin_channel
from .channels import KrausChannel, validate_channel
from .errors import BadParams, ValidationError
from .estimators import (
    ACCESS_MODES,
    INCOHERENT,
    EstimateRecord,
    EstimatorConfig,
    estimate_unitarity,
    round_queries,
    unitarity_queries,
)
from .io import kraus_from_json, kraus_to_json
from .oracle import approximability_bounds, index_report
from .sampling import RngStream, haar_unitary

KINDS = ("estimate", "oracle", "bounds", "scaling", "distinguish")
ORACLE_MAX_DIM = 64
DISTINGUISH_THRESHOLD = 0.5
DEFAULT_EPSILON = 0.1
DEFAULT_DELTA = 1.0 / 3.0


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass(frozen=True)
class ChannelSpec:
    """A channel by builtin name and parameters, or by explicit Kraus data (``[re, im]`` lists)."""

    dim: int
    builtin: str | None = None
    params: dict = field(default_factory=dict)
    kraus: list | None = None

    def __post_init__(self):
        if (self.builtin is None) == (self.kraus is None):
            raise ValidationError("give exactly one of a builtin name or Kraus data")

    def build(self) -> KrausChannel:
        if self.builtin is not None:
            return builtin_channel(self.builtin, self.params, self.dim)
        return validate_channel(kraus_from_json(self.kraus), self.dim, name="explicit")

    def with_dim(self, d: int) -> "ChannelSpec":
        if self.builtin is None:
            raise BadParams("only builtin channels can be resized")
        return replace(self, dim=int(d))

    @classmethod
    def explicit(cls, kraus) -> "ChannelSpec":
        kraus = np.asarray(kraus, dtype=complex)
        return cls(dim=kraus.shape[-1], kraus=kraus_to_json(kraus))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelSpec":
        return cls(**data)


@dataclass(frozen=True)
class ExperimentConfig:
    """What to run. ``dims``/``epsilons`` drive sweeps, ``max_queries`` caps the distinguishing budget."""

    kind: str
    channel: ChannelSpec | None
    estimator: EstimatorConfig
    repeats: int = 1
    output: str | None = None
    format: str = "json"
    dims: tuple = ()
    epsilons: tuple = ()
    max_queries: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.repeats < 1:
            raise ValidationError("repeats must be at least 1")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))

    @classmethod
    def create(
        cls,
        kind: str = "estimate",
        channel: ChannelSpec | None = None,
        *,
        dim: int | None = None,
        access: str = INCOHERENT,
        epsilon: float = DEFAULT_EPSILON,
        delta: float = DEFAULT_DELTA,
        variant: str = "u",
        seed: int = 0,
        **kw,
    ) -> "ExperimentConfig":
        """Config with estimator defaults derived from the target precision."""
        d = dim if dim is not None else (channel.dim if channel is not None else 2)
        est = EstimatorConfig.for_target(epsilon, delta, d, access, variant, seed)
        return cls(kind=kind, channel=channel, estimator=est, **kw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["channel"] = None if self.channel is None else self.channel.to_dict()
        out["dims"] = list(self.dims)
        out["epsilons"] = list(self.epsilons)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        ch = data.get("channel")
        data["channel"] = None if ch is None else ChannelSpec.from_dict(ch)
        data["estimator"] = EstimatorConfig(**data["estimator"])
        return cls(**data)


@dataclass
class ResultRecord:
    config: ExperimentConfig
    records: list[EstimateRecord] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    oracle: dict | None = None
    rows: list[dict] = field(default_factory=list)
    version: str = field(default_factory=tool_version)
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "records": [r.to_dict() for r in self.records],
            "summary": dict(self.summary),
            "oracle": None if self.oracle is None else dict(self.oracle),
            "rows": [dict(r) for r in self.rows],
            "version": self.version,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResultRecord":
        return cls(
            config=ExperimentConfig.from_dict(data["config"]),
            records=[EstimateRecord.from_dict(r) for r in data["records"]],
            summary=dict(data["summary"]),
            oracle=data["oracle"],
            rows=[dict(r) for r in data["rows"]],
            version=data["version"],
            timestamp=data["timestamp"],
        )


def _map(fn: Callable, jobs: Sequence, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _run_pipeline(ch: KrausChannel, est: EstimatorConfig, stream: RngStream) -> EstimateRecord:
    return estimate_unitarity(
        ch,
        est.access,
        est.epsilon if est.epsilon is not None else DEFAULT_EPSILON,
        est.delta if est.delta is not None else DEFAULT_DELTA,
        est.variant,
        stream,
        M=est.M,
        N=est.N,
        m=est.m,
        t_samples=est.t_samples,
    )


def _repeat_job(job) -> EstimateRecord:
    spec, est, stream = job
    return _run_pipeline(spec.build(), est, stream)


def _oracle_values(ch: KrausChannel) -> dict | None:
    if ch.dim > ORACLE_MAX_DIM:
        return None
    return index_report(ch).as_dict()


def _target(oracle: dict | None, variant: str) -> float | None:
    if oracle is None:
        return None
    return oracle["u"] if variant == "u" else oracle["u_alt"]


def summarize(values: Sequence[float], target: float | None, epsilon: float) -> dict:
    """Mean, median, sample stddev and, given the exact value, errors and success fraction."""
    arr = np.asarray(values, dtype=float)
    out = {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
        "stddev": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
    }
    if target is not None:
        err = np.abs(arr - target)
        out.update(
            oracle=float(target),
            abs_error_mean=float(abs(arr.mean() - target)),
            abs_error_max=float(err.max()),
            success_fraction=float((err <= epsilon).mean()),
        )
    return out


def run_estimate(cfg: ExperimentConfig, workers: int = 1) -> ResultRecord:
    """``cfg.repeats`` independent end-to-end estimates; repeat ``r`` uses ``RngStream(seed, r)``."""
    if cfg.channel is None:
        raise ValidationError("estimate needs a channel")
    ch = cfg.channel.build()
    est = cfg.estimator
    if est.access not in ACCESS_MODES:
        raise ValidationError(f"access must be one of {ACCESS_MODES}")
    jobs = [(cfg.channel, est, RngStream(est.seed, r)) for r in range(cfg.repeats)]
    records = _map(_repeat_job, jobs, workers)
    oracle = _oracle_values(ch)
    eps = est.epsilon if est.epsilon is not None else DEFAULT_EPSILON
    summary = summarize([r.value for r in records], _target(oracle, est.variant), eps)
    summary["queries_per_repeat"] = records[0].total_queries
    return ResultRecord(config=cfg, records=records, summary=summary, oracle=oracle)


def run_oracle(cfg: ExperimentConfig) -> ResultRecord:
    if cfg.channel is None:
        raise ValidationError("oracle needs a channel")
    report = index_report(cfg.channel.build()).as_dict()
    return ResultRecord(config=cfg, oracle=report, rows=[report])


def run_bounds(cfg: ExperimentConfig) -> ResultRecord:
    if cfg.channel is None:
        raise ValidationError("bounds needs a channel")
    ch = cfg.channel.build()
    b = approximability_bounds(ch)
    row = {"lower": b.lower, "upper": b.upper, "candidate_fidelity": b.candidate_fidelity}
    summary = dict(row, candidate_unitary=kraus_to_json(b.candidate_unitary[None])[0])
    return ResultRecord(config=cfg, summary=summary, oracle=_oracle_values(ch), rows=[row])


def _scaling_job(job) -> dict:
    cell, spec, est, repeats = job
    ch = spec.build()
    oracle = _oracle_values(ch)
    target = _target(oracle, est.variant)
    values, queries = [], 0
    for r in range(repeats):
        rec = _run_pipeline(ch, est, RngStream(est.seed, cell, (r,)))
        values.append(rec.value)
        queries = rec.total_queries
    row = {
        "d": ch.dim,
        "epsilon": est.epsilon,
        "access": est.access,
        "queries": queries,
        "predicted_queries": unitarity_queries(est, ch.dim),
        "estimate_median": float(np.median(values)),
    }
    if target is not None:
        err = np.abs(np.asarray(values) - target)
        row.update(
            oracle=float(target),
            achieved_error=float(np.median(err)),
            success_fraction=float((err <= est.epsilon).mean()),
        )
    return row


def run_scaling(
    dims: Sequence[int],
    epsilons: Sequence[float],
    base: ExperimentConfig,
    workers: int = 1,
) -> ResultRecord:
    """Queries and achieved error on the grid ``dims x epsilons``.

    The base channel must be a builtin; it is re-instantiated at each ``d``.
    Achieved error is measured against the exact value, never another estimate.
    """
    if not dims or not epsilons:
        raise ValidationError("dims and epsilons must be non-empty")
    if base.channel is None:
        raise ValidationError("scaling needs a base channel")
    est0 = base.estimator
    jobs = []
    for d in dims:
        spec = base.channel.with_dim(d)
        for eps in epsilons:
            est = EstimatorConfig.for_target(eps, est0.delta, d, est0.access, est0.variant, est0.seed)
            jobs.append((len(jobs), spec, est, base.repeats))
    rows = _map(_scaling_job, jobs, workers)
    cfg = replace(base, kind="scaling", dims=tuple(dims), epsilons=tuple(epsilons))
    summary = {}
    if len(set(dims)) > 1:
        summary["slope_queries_vs_d"] = fit_slope(rows, "d", group="epsilon")
    if len(set(epsilons)) > 1:
        summary["slope_queries_vs_inv_epsilon"] = fit_slope(rows, "epsilon", group="d", invert=True)
    return ResultRecord(config=cfg, rows=rows, summary=summary)


def fit_slope(rows: Sequence[dict], x: str, y: str = "queries", group: str | None = None, invert: bool = False):
    """Least-squares slope of ``log y`` against ``log x`` (``log 1/x`` with ``invert``).

    With ``group`` the fit is done per value of that column and a dict keyed by
    it (as a string) is returned.
    """

    def slope(sel):
        xs = np.log([r[x] for r in sel])
        if invert:
            xs = -xs
        ys = np.log([r[y] for r in sel])
        return float(np.polyfit(xs, ys, 1)[0]) if len(sel) > 1 else float("nan")

    if group is None:
        return slope(list(rows))
    keys = sorted({r[group] for r in rows})
    return {str(k): slope([r for r in rows if r[group] == k]) for k in keys}


def _distinguish_job(job) -> dict:
    trial, d, est, stream = job
    gen = stream.child(0).generator()
    truth = "unitary" if gen.random() < 0.5 else "depolarizing"
    if truth == "unitary":
        ch = validate_channel([haar_unitary(d, stream.child(1))], d, name="haar_unitary")
    else:
        ch = builtin_channel("depolarizing", {"q": 1.0}, d)
    if est is None:
        # budget below one round: no information, guess
        estimate = float("nan")
        answer = "unitary" if gen.random() < 0.5 else "depolarizing"
        queries = 0
    else:
        rec = _run_pipeline(ch, est, stream.child(2))
        estimate = rec.value
        answer = "unitary" if estimate > DISTINGUISH_THRESHOLD else "depolarizing"
        queries = rec.total_queries
    return {
        "trial": trial,
        "truth": truth,
        "estimate": estimate,
        "answer": answer,
        "correct": answer == truth,
        "queries": queries,
    }


def budget_config(d: int, epsilon: float = 0.2, max_queries: int | None = None, seed: int = 0) -> EstimatorConfig | None:
    """Incoherent ``u`` estimator for the distinguishing task.

    Without a cap, defaults for precision ``epsilon`` at constant confidence.
    With ``max_queries``, the largest ``M`` whose pipeline fits in the cap;
    ``None`` if not even one round fits.
    """
    est = EstimatorConfig.for_target(epsilon, DEFAULT_DELTA, d, INCOHERENT, "u", seed)
    if max_queries is None:
        return est
    per_round = 2 * round_queries(INCOHERENT, est.N, est.m)
    M = max_queries // per_round
    if M < 1:
        return None
    return replace(est, M=int(M))


def run_distinguish(
    d: int,
    epsilon: float = 0.2,
    trials: int = 100,
    rng=0,
    max_queries: int | None = None,
    workers: int = 1,
) -> ResultRecord:
    """Tell the completely depolarizing channel from a Haar-random unitary channel.

    Each trial flips a fair coin for the hidden channel, estimates its
    unitarity with incoherent access and answers "unitary" iff the estimate
    exceeds 1/2.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    est = budget_config(d, epsilon, max_queries, stream.seed)
    jobs = [(t, d, est, RngStream(stream.seed, t)) for t in range(trials)]
    rows = _map(_distinguish_job, jobs, workers)
    shown = est or EstimatorConfig.for_target(epsilon, DEFAULT_DELTA, d, INCOHERENT, "u", stream.seed)
    cfg = ExperimentConfig(
        kind="distinguish",
        channel=None,
        estimator=shown,
        repeats=trials,
        dims=(d,),
        epsilons=(epsilon,),
        max_queries=max_queries,
    )
    correct = [r["correct"] for r in rows]
    summary = {
        "success_rate": float(np.mean(correct)),
        "binomial_stderr": float(math.sqrt(0.25 / trials)),
        "queries_per_trial": rows[0]["queries"],
        "total_queries": int(sum(r["queries"] for r in rows)),
        "threshold": DISTINGUISH_THRESHOLD,
    }
    return ResultRecord(config=cfg, rows=rows, summary=summary)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ResultRecord:
    if cfg.kind == "estimate":
        return run_estimate(cfg, workers)
    if cfg.kind == "oracle":
        return run_oracle(cfg)
    if cfg.kind == "bounds":
        return run_bounds(cfg)
    if cfg.kind == "scaling":
        return run_scaling(cfg.dims, cfg.epsilons, cfg, workers)
    est = cfg.estimator
    return run_distinguish(
        cfg.dims[0] if cfg.dims else cfg.channel.dim,
        cfg.epsilons[0] if cfg.epsilons else (est.epsilon or 0.2),
        cfg.repeats,
        est.seed,
        cfg.max_queries,
        workers,
    )
