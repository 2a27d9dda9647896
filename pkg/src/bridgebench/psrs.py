"""Exact simulation of unconditioned unit-volatility diffusions by rejection
on path space, returning skeletons that can be revealed retrospectively.

A segment on [0, delta] is accepted when no Poisson mark with rate Psi and
uniform height falls below phi(X) - Phi along a biased Brownian bridge
proposal, which happens with probability exp{-integral (phi - Phi)}.  Long
horizons are covered by chaining segments through the Markov property, so
the total cost grows linearly in T.
"""

from __future__ import annotations

import math
import time
from typing import List, Optional

import numpy as np

from .brownian import PathGrid
from .errors import EndpointStarvationError
from .models import DiffusionSpec
from .rng import RngStream, sample_poisson_count

__all__ = [
    "Skeleton", "sample_biased_endpoint", "psrs_segment", "psrs_unconditioned",
    "reveal_at", "UnconditionedPath", "psrs_bridge_reference", "default_delta_max",
]

# Unconditioned skeletons are unit-volatility paths.
Skeleton = PathGrid

# Consecutive-rejection ceiling for the flat-envelope endpoint sampler.
STARVATION_LIMIT = 1_000_000

# Below this predicted flat-envelope acceptance the endpoint draw switches
# to a tilted Gaussian envelope (still exact, see _endpoint_tilted).
TILT_THRESHOLD = 1e-3

# Tilted envelope needs segment length < 1/curvature_bound; keep a margin.
_TILT_DELTA_SAFETY = 0.45

_BATCH = 512


def sample_biased_endpoint(stream: RngStream, spec: DiffusionSpec,
                           x0: float, delta: float) -> float:
    """Draw from h(u) proportional to exp{A(u) - (u - x0)^2 / (2 delta)}.

    Rejection with a flat envelope: propose u ~ N(x0, delta), accept with
    probability exp{A(u) - A_sup}.  Raises a diagnostic after
    ``STARVATION_LIMIT`` consecutive rejections, which almost always means
    A_sup sits far above A on the proposal's effective support.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    sd = math.sqrt(delta)
    a_sup = spec.A_sup
    # scalar fast path, then batched proposals if acceptance is poor
    for _ in range(64):
        u = x0 + sd * stream.normal()
        if stream.uniform() < math.exp(min(spec.A(u) - a_sup, 0.0)):
            return u
    rejected = 64
    while rejected < STARVATION_LIMIT:
        us = x0 + sd * stream.normals(_BATCH)
        acc = np.exp(np.minimum([spec.A(float(v)) - a_sup for v in us], 0.0))
        hits = np.nonzero(stream.uniforms(_BATCH) < acc)[0]
        if hits.size:
            return float(us[hits[0]])
        rejected += _BATCH
    raise EndpointStarvationError(
        f"no endpoint accepted after {STARVATION_LIMIT} proposals at x0={x0}, "
        f"delta={delta}; A_sup={spec.A_sup} looks too loose for this region")


def _endpoint_tilted(stream: RngStream, spec: DiffusionSpec,
                     x0: float, delta: float) -> float:
    """Exact draw from the same density with a tilted Gaussian envelope.

    Bounding A(u) <= A(x0) + alpha(x0)(u - x0) + (c/2)(u - x0)^2 with
    c = max(2(Phi + Psi), 0) >= sup alpha' gives a Gaussian-integrable
    envelope whenever c < 1/delta; acceptance then stays O(1) even where
    exp{A - A_sup} is astronomically small.
    """
    c = max(spec.curvature_bound, 0.0)
    inv_s2 = 1.0 / delta - c
    if inv_s2 <= 0.0:
        # caller should have shortened the segment; flat envelope still exact
        return sample_biased_endpoint(stream, spec, x0, delta)
    s2 = 1.0 / inv_s2
    a0 = spec.alpha(x0)
    A0 = spec.A(x0)
    mean = x0 + s2 * a0
    sd = math.sqrt(s2)
    for _ in range(STARVATION_LIMIT):
        u = mean + sd * stream.normal()
        du = u - x0
        log_acc = spec.A(u) - A0 - a0 * du - 0.5 * c * du * du
        if stream.uniform() < math.exp(min(log_acc, 0.0)):
            return u
    raise EndpointStarvationError(
        f"tilted endpoint sampler starved at x0={x0}, delta={delta}")


def _draw_endpoint(stream: RngStream, spec: DiffusionSpec,
                   x0: float, delta: float) -> float:
    if math.exp(min(spec.A(x0) - spec.A_sup, 0.0)) >= TILT_THRESHOLD:
        return sample_biased_endpoint(stream, spec, x0, delta)
    return _endpoint_tilted(stream, spec, x0, delta)


def psrs_segment(stream: RngStream, spec: DiffusionSpec,
                 x0: float, delta: float) -> Skeleton:
    """One accepted rejection-sampler segment on [0, delta] started at x0.

    Endpoint from the biased density, Poisson(Psi) mark times with uniform
    heights on (0, Psi), bridge values revealed at the marks; the proposal
    is accepted iff no mark height falls below phi(value) - Phi.  Rejected
    proposals discard all their randomness.
    """
    psi = spec.Psi
    phi_floor = spec.Phi
    while True:
        u_end = _draw_endpoint(stream, spec, x0, delta)
        grid = PathGrid([0.0, delta], [x0, u_end], 1.0)
        if psi > 0.0:
            n_marks = sample_poisson_count(stream, psi * delta)
        else:
            n_marks = 0
        if n_marks == 0:
            return grid
        ts = sorted(delta * stream.uniform() for _ in range(n_marks))
        ok = True
        for t in ts:
            if not (0.0 < t < delta):
                continue
            v = grid.reveal_at(stream, t)
            height = psi * stream.uniform()
            if height < spec.phi(v) - phi_floor:
                ok = False
                break
        if ok:
            return grid


def default_delta_max(spec: DiffusionSpec, T: float) -> float:
    """min(T, 1/max(Psi, 1)): keeps the expected mark count per segment near
    one so the per-segment acceptance is bounded away from zero uniformly
    in T."""
    return min(T, 1.0 / max(spec.Psi, 1.0))


def _segment_delta(spec: DiffusionSpec, x: float, remaining: float,
                   delta_max: float) -> float:
    d = min(remaining, delta_max)
    if math.exp(min(spec.A(x) - spec.A_sup, 0.0)) < TILT_THRESHOLD:
        c = max(spec.curvature_bound, 0.0)
        if c > 0.0:
            d = min(d, _TILT_DELTA_SAFETY / c)
    return d


class UnconditionedPath:
    """Lazily extensible unconditioned diffusion path from (t_start, x_start).

    Segments are chained through the Markov property on demand; the
    skeleton grows as ``extend_until`` advances the frontier.  Consumers
    that only inspect a prefix of the horizon never pay for the rest.
    """

    __slots__ = ("stream", "spec", "skeleton", "t_limit", "delta_max")

    def __init__(self, stream: RngStream, spec: DiffusionSpec,
                 x_start: float, t_start: float, t_limit: float,
                 delta_max: Optional[float] = None):
        if t_limit <= t_start:
            raise ValueError("empty horizon")
        self.stream = stream
        self.spec = spec
        self.t_limit = t_limit
        self.delta_max = delta_max if delta_max is not None else \
            default_delta_max(spec, t_limit - t_start)
        self.skeleton = PathGrid([t_start], [x_start], 1.0)
        # PathGrid requires >= 1 point; a single point is a degenerate grid
        # only until the first extension.

    @property
    def frontier(self) -> float:
        return self.skeleton.t_end

    def extend_until(self, t: float) -> None:
        t = min(t, self.t_limit)
        while self.frontier < t - 1e-12:
            x = self.skeleton.values[-1]
            remaining = self.t_limit - self.frontier
            d = _segment_delta(self.spec, x, remaining, self.delta_max)
            seg = psrs_segment(self.stream, self.spec, x, d)
            base = self.frontier
            self.skeleton.times.extend(base + s for s in seg.times[1:])
            self.skeleton.values.extend(seg.values[1:])

    def finish(self) -> Skeleton:
        self.extend_until(self.t_limit)
        return self.skeleton


def psrs_unconditioned(stream: RngStream, spec: DiffusionSpec, x0: float,
                       T: float, delta_max: Optional[float] = None) -> Skeleton:
    """Skeleton of the unconditioned diffusion on [0, T] started at x0."""
    return UnconditionedPath(stream, spec, x0, 0.0, T, delta_max).finish()


def reveal_at(stream: RngStream, skel: Skeleton, t: float):
    """Retrospectively reveal the accepted path at t (Brownian bridge
    between the enclosing skeletal points).  Returns (value, skeleton)."""
    v = skel.reveal_at(stream, t)
    return v, skel


def psrs_bridge_reference(stream: RngStream, spec: DiffusionSpec,
                          x0: float, xT: float, T: float,
                          deadline: Optional[float] = None) -> Optional[Skeleton]:
    """Reference rejection sampler for the *bridge* measure, for timing
    comparisons only.  Both endpoints are pinned and the same Poisson
    thinning acceptance is reused, so the acceptance probability decays
    exponentially in T.  Returns None if ``deadline`` (perf_counter value)
    passes before a proposal is accepted.
    """
    psi = spec.Psi
    phi_floor = spec.Phi
    while True:
        if deadline is not None and time.perf_counter() > deadline:
            return None
        grid = PathGrid([0.0, T], [x0, xT], 1.0)
        n_marks = sample_poisson_count(stream, psi * T) if psi > 0.0 else 0
        ok = True
        if n_marks:
            ts = sorted(T * stream.uniform() for _ in range(n_marks))
            for t in ts:
                if not (0.0 < t < T):
                    continue
                v = grid.reveal_at(stream, t)
                if psi * stream.uniform() < spec.phi(v) - phi_floor:
                    ok = False
                    break
        if ok:
            return grid
