"""Discretised baseline bridge sampler (Euler-Maruyama), used to exhibit
the bias that the exact sampler removes.

The construction mirrors the exact one on a fixed grid: forward and
time-reversed backward Euler paths spliced at the first grid-detected sign
change of their difference, corrected by the same pseudo-marginal step with
an Euler auxiliary path.  Every first-passage decision is approximated by
adjacent-node sign checks, which is exactly where the discretisation bias
enters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import DiffusionSpec
from .rng import RngStream

__all__ = ["GridPath", "euler_path", "sdb_propose", "SdbState",
           "sdb_aux_crossing", "sdb_mh_update", "run_sdb", "snap_step"]


def snap_step(T: float, delta: float) -> tuple:
    """(n_steps, effective step) with T an exact multiple of the step."""
    n = max(1, int(round(T / delta)))
    return n, T / n


@dataclass
class GridPath:
    """Path values on the uniform grid {0, step, ..., T}."""

    step: float
    values: np.ndarray

    @property
    def T(self) -> float:
        return self.step * (len(self.values) - 1)

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(len(self.values))

    def midpoint(self) -> float:
        return float(self.values[(len(self.values) - 1) // 2])


def _euler_values(stream: RngStream, spec: DiffusionSpec, x0: float,
                  n: int, dt: float) -> np.ndarray:
    normals = stream.normals(n)
    if spec.fast_euler is not None:
        return spec.fast_euler(x0, dt, normals)
    out = np.empty(n + 1)
    out[0] = x0
    x = x0
    sq = math.sqrt(dt)
    alpha = spec.alpha
    for i in range(n):
        x = x + alpha(x) * dt + sq * normals[i]
        out[i + 1] = x
    return out


def euler_path(stream: RngStream, spec: DiffusionSpec, x0: float,
               T: float, delta: float) -> GridPath:
    """Euler-Maruyama path on [0, T]: X_{k+1} = X_k + alpha(X_k) dt + sqrt(dt) N."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    n, dt = snap_step(T, delta)
    return GridPath(dt, _euler_values(stream, spec, x0, n, dt))


def _first_crossing_index(diff: np.ndarray) -> Optional[int]:
    """Index i of the first adjacent-node sign change (diff_i * diff_{i+1} <= 0)."""
    prod = diff[:-1] * diff[1:]
    hits = np.nonzero(prod <= 0.0)[0]
    return int(hits[0]) if hits.size else None


def sdb_propose(stream: RngStream, spec: DiffusionSpec, x0: float, xT: float,
                T: float, delta: float) -> GridPath:
    """Spliced proposal on the grid: forward path from x0 and reversed
    backward path from xT, joined at the left node of the first sign change
    of their difference; pairs with no detected crossing are redrawn."""
    n, dt = snap_step(T, delta)
    while True:
        fwd = _euler_values(stream, spec, x0, n, dt)
        bwd = _euler_values(stream, spec, xT, n, dt)
        rev = bwd[::-1]
        idx = _first_crossing_index(rev - fwd)
        if idx is None:
            continue
        z = np.concatenate([fwd[:idx + 1], rev[idx + 1:]])
        return GridPath(dt, z)


@dataclass
class SdbState:
    path: GridPath
    trials: float


def sdb_aux_crossing(stream: RngStream, spec: DiffusionSpec, z: GridPath,
                     xT: float) -> int:
    """Grid-detected intersection of a fresh auxiliary Euler path (started
    at xT a bridge-length before time zero) with the proposal."""
    n = len(z.values) - 1
    aux = _euler_values(stream, spec, xT, 2 * n, z.step)
    diff = aux[n:] - z.values
    return 1 if _first_crossing_index(diff) is not None else 0


def sdb_mh_update(stream: RngStream, spec: DiffusionSpec, state: SdbState,
                  x0: float, xT: float, T: float, delta: float) -> SdbState:
    """Pseudo-marginal step with the grid machinery throughout."""
    prop = sdb_propose(stream, spec, x0, xT, T, delta)
    trials = 1
    while sdb_aux_crossing(stream, spec, prop, xT) == 0:
        trials += 1
    if stream.uniform() <= trials / state.trials:
        return SdbState(prop, float(trials))
    return state


def run_sdb(stream: RngStream, spec: DiffusionSpec, x0: float, xT: float,
            T: float, delta: float, n_mh: int) -> SdbState:
    """Chain of n_mh correction steps from a unit-weight initial proposal."""
    state = SdbState(sdb_propose(stream, spec, x0, xT, T, delta), 1.0)
    for _ in range(n_mh):
        state = sdb_mh_update(stream, spec, state, x0, xT, T, delta)
    return state
