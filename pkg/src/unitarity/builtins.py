"""Named channel families used by the CLI and the experiments."""

from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np

from .channels import KrausChannel, validate_channel
from .errors import BadParams, UnknownBuiltin
from .sampling import RngStream, haar_unitary


def shift_operator(d: int) -> np.ndarray:
    """Cyclic shift ``|i> -> |i+1 mod d>``."""
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def _unit_interval(params, key, default=None) -> float:
    value = params.get(key, default)
    if value is None:
        raise BadParams(f"missing parameter {key!r}")
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise BadParams(f"parameter {key}={value} must lie in [0, 1]")
    return value


def identity(d, params):
    return [np.eye(d)]


def depolarizing(d, params):
    """``(1-q) rho + q tr(rho) I/d``; ``q = 1`` is the completely depolarizing channel."""
    q = _unit_interval(params, "q", 1.0)
    ops = []
    if q < 1.0:
        ops.append(math.sqrt(1.0 - q) * np.eye(d))
    if q > 0.0:
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d))
                e[i, j] = math.sqrt(q / d)
                ops.append(e)
    return ops


def dephasing(d, params):
    p = _unit_interval(params, "p")
    ops = [math.sqrt(1.0 - p) * np.eye(d)]
    for i in range(d):
        e = np.zeros((d, d))
        e[i, i] = math.sqrt(p)
        ops.append(e)
    return ops


def amplitude_damping(d, params):
    # every excited level decays to |0> with probability gamma
    gamma = _unit_interval(params, "gamma")
    k0 = np.diag([1.0] + [math.sqrt(1.0 - gamma)] * (d - 1))
    ops = [k0]
    for i in range(1, d):
        e = np.zeros((d, d))
        e[0, i] = math.sqrt(gamma)
        ops.append(e)
    return ops


def shift_mixture(d, params):
    """``a * id + b * X . X^dag`` with ``X`` the cyclic shift; defaults ``a=2/3, b=1/3``."""
    a = _unit_interval(params, "a", 2.0 / 3.0)
    b = _unit_interval(params, "b", 1.0 / 3.0)
    if a + b > 1.0 + 1e-12:
        raise BadParams(f"a + b = {a + b} exceeds 1")
    return [math.sqrt(a) * np.eye(d), math.sqrt(b) * shift_operator(d)]


def random_unitary(d, params):
    seed = params.get("seed", 0)
    if float(seed) != int(seed) or int(seed) < 0:
        raise BadParams(f"seed must be a non-negative integer, got {seed}")
    return [haar_unitary(d, RngStream(int(seed)))]


def scaled_identity(d, params):
    """Kraus ``{sqrt(c) I}``: every output has trace ``c tr(rho)``."""
    c = _unit_interval(params, "c")
    return [math.sqrt(c) * np.eye(d)]


def zero(d, params):
    return [np.zeros((d, d))]


BUILTINS: dict[str, Callable[[int, Mapping], list]] = {
    "identity": identity,
    "depolarizing": depolarizing,
    "dephasing": dephasing,
    "amplitude_damping": amplitude_damping,
    "shift_mixture": shift_mixture,
    "random_unitary": random_unitary,
    "scaled_identity": scaled_identity,
    "zero": zero,
}


def builtin_channel(name: str, params: Mapping | None = None, d: int = 2) -> KrausChannel:
    if name not in BUILTINS:
        raise UnknownBuiltin(f"unknown builtin channel {name!r}; choose from {sorted(BUILTINS)}")
    if int(d) != d or d < 1:
        raise BadParams(f"dimension must be a positive integer, got {d}")
    params = dict(params or {})
    label = ",".join(f"{k}={v}" for k, v in sorted(params.items()))
    return validate_channel(BUILTINS[name](int(d), params), int(d), name=f"{name}({label})" if label else name)
