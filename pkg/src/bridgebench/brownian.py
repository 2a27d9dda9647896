"""Exact Brownian functionals: bridge reveals, first-passage times to zero,
sum/difference decomposition, 3-d Bessel bridge reconstruction, and sampling
of bridge pairs conditioned on not crossing.

Everything here works on scaled Brownian bridges, i.e. solutions of
dX = sigma dW pinned at both ends.  A difference of two independent unit
bridges is such a bridge with sigma^2 = 2, which is why that value appears
throughout the callers.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .rng import RngStream, sample_inverse_gaussian

__all__ = [
    "BridgeSegment", "FptOutcome", "PathGrid",
    "bb_sample_at", "no_cross_prob", "fpt_zero", "diff_sum_variance",
    "Bessel3BridgePath", "bessel3_bridge_at",
    "conditioned_pair_at", "PreCrossingPath", "pre_crossing_pair_at",
]


@dataclass(frozen=True)
class BridgeSegment:
    """A scaled Brownian bridge on [t0, t1] pinned at (x0, x1), with
    infinitesimal variance sigma2 (1 for a single path, 2 for the sum or
    difference of two independent paths)."""

    t0: float
    t1: float
    x0: float
    x1: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        if not self.sigma2 > 0.0:
            raise ValueError(f"need sigma2 > 0, got {self.sigma2}")

    @property
    def length(self) -> float:
        return self.t1 - self.t0


@dataclass(frozen=True)
class FptOutcome:
    """First passage to zero on a segment: either a finite time inside the
    segment or no passage at all."""

    tau: Optional[float]

    @property
    def finite(self) -> bool:
        return self.tau is not None


FPT_INFINITE = FptOutcome(None)


def bb_sample_at(stream: RngStream, seg: BridgeSegment, t: float) -> float:
    """Reveal the bridge at an interior time t.

    Mean is the linear interpolation of the pinned endpoints, variance is
    sigma2 (t - t0)(t1 - t)/(t1 - t0).
    """
    if not (seg.t0 < t < seg.t1):
        raise ValueError(f"t={t} outside ({seg.t0}, {seg.t1})")
    length = seg.length
    w = (t - seg.t0) / length
    mean = seg.x0 + w * (seg.x1 - seg.x0)
    var = seg.sigma2 * (t - seg.t0) * (seg.t1 - t) / length
    return mean + math.sqrt(var) * stream.normal()


def no_cross_prob(d0: float, dT: float, length: float, sigma2: float) -> float:
    """Probability that a sigma2-bridge from d0 to dT over ``length`` never
    hits zero: 1 - exp{-2 d0 dT / (length sigma2)}.  Requires same-sign
    nonzero endpoints; otherwise the crossing is almost sure and the caller
    must treat it as such."""
    if d0 * dT <= 0.0:
        raise ValueError("no_cross_prob needs same-sign nonzero endpoints")
    return -math.expm1(-2.0 * abs(d0 * dT) / (length * sigma2))


def fpt_zero(stream: RngStream, seg: BridgeSegment) -> FptOutcome:
    """Exact first passage time of the bridge to level zero.

    With endpoints of opposite sign the passage is almost sure.  With
    same-sign endpoints the no-passage event has probability
    1 - exp{-2 |d0 dT| / (T sigma^2)}; conditionally on passage the time has
    density proportional to t^{-3/2} (T-t)^{-1/2}
    exp{-dT^2/(2(T-t)sigma^2) - d0^2/(2 t sigma^2)} on (0, T), realised as
    T / (1/K + 1) with K inverse-Gaussian(|d0/dT|, d0^2/(T sigma^2)).
    """
    d0, dT = seg.x0, seg.x1
    if d0 == 0.0:
        return FptOutcome(seg.t0)
    if dT == 0.0:
        return FptOutcome(seg.t1)
    if d0 * dT > 0.0:
        if stream.uniform() < no_cross_prob(d0, dT, seg.length, seg.sigma2):
            return FPT_INFINITE
    length = seg.length
    k = sample_inverse_gaussian(stream, abs(d0 / dT), d0 * d0 / (length * seg.sigma2))
    tau_local = length / (1.0 / k + 1.0)
    return FptOutcome(seg.t0 + tau_local)


def diff_sum_variance(t: float, s: float, T: float) -> float:
    """Covariance Cov(S_t, S_s) = Cov(D_t, D_s) = 2 (T - t) s / T of the sum
    and difference of two independent unit bridges on [0, T], 0 < s <= t < T."""
    if not (0.0 < s <= t < T):
        raise ValueError("need 0 < s <= t < T")
    return 2.0 * (T - t) * s / T


# ---------------------------------------------------------------------------
# revealable path grids


class PathGrid:
    """A path revealed at finitely many times, conditionally a sigma2-bridge
    between consecutive revealed points.  Single-owner and mutable: reveals
    insert new points, keeping times sorted."""

    __slots__ = ("times", "values", "sigma2")

    def __init__(self, times: List[float], values: List[float], sigma2: float = 1.0):
        if len(times) != len(values):
            raise ValueError("times/values length mismatch")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        self.times = list(times)
        self.values = list(values)
        self.sigma2 = sigma2

    @property
    def t_start(self) -> float:
        return self.times[0]

    @property
    def t_end(self) -> float:
        return self.times[-1]

    def copy(self) -> "PathGrid":
        g = PathGrid.__new__(PathGrid)
        g.times = list(self.times)
        g.values = list(self.values)
        g.sigma2 = self.sigma2
        return g

    def value_at(self, t: float) -> Optional[float]:
        i = bisect.bisect_left(self.times, t)
        if i < len(self.times) and self.times[i] == t:
            return self.values[i]
        return None

    def reveal_at(self, stream: RngStream, t: float) -> float:
        """Reveal the path at t, inserting the new point.  Idempotent at
        already-revealed times."""
        if not (self.t_start <= t <= self.t_end):
            raise ValueError(f"t={t} outside [{self.t_start}, {self.t_end}]")
        i = bisect.bisect_left(self.times, t)
        if i < len(self.times) and self.times[i] == t:
            return self.values[i]
        seg = BridgeSegment(self.times[i - 1], self.times[i],
                            self.values[i - 1], self.values[i], self.sigma2)
        v = bb_sample_at(stream, seg, t)
        self.times.insert(i, t)
        self.values.insert(i, v)
        return v

    def bulk_reveal(self, stream: RngStream, ts) -> None:
        """Reveal at every time in sorted iterable ``ts`` in one linear merge
        (left-to-right nested bridge conditionals, same law as repeated
        reveal_at but without quadratic list insertion)."""
        ts = list(ts)
        for t in ts:
            if not (self.t_start <= t <= self.t_end):
                raise ValueError(f"t={t} outside [{self.t_start}, {self.t_end}]")
        new_times: List[float] = []
        new_values: List[float] = []
        n = len(self.times)
        prev_t = self.times[0]
        prev_v = self.values[0]
        sigma2 = self.sigma2
        it = iter(ts)
        t_next = next(it, None)
        new_times.append(prev_t)
        new_values.append(prev_v)
        j = 1
        while j < n or t_next is not None:
            right_t = self.times[j] if j < n else None
            if t_next is not None and (right_t is None or t_next < right_t):
                if t_next > prev_t:
                    # bridge between the last emitted point and the next
                    # original point to the right
                    seg = BridgeSegment(prev_t, self.times[j], prev_v,
                                        self.values[j], sigma2)
                    v = bb_sample_at(stream, seg, t_next)
                    new_times.append(t_next)
                    new_values.append(v)
                    prev_t, prev_v = t_next, v
                t_next = next(it, None)
            else:
                if t_next is not None and t_next == right_t:
                    t_next = next(it, None)
                    continue
                new_times.append(right_t)
                new_values.append(self.values[j])
                prev_t, prev_v = right_t, self.values[j]
                j += 1
        self.times = new_times
        self.values = new_values


# ---------------------------------------------------------------------------
# 3-d Bessel bridge


class Bessel3BridgePath:
    """Scaled 3-d Bessel bridge H on [0, length] with H_0 = 0 and
    H_length = terminal >= 0, supporting mutually consistent reveals.

    Uses the representation
    H_t = sqrt((sqrt2 B1_t + mu_t)^2 + (sqrt2 B2_t)^2 + (sqrt2 B3_t)^2),
    mu_t = terminal * t / length, with B1..B3 independent standard bridges
    pinned at zero at both ends.  The three scalar bridges are kept as state
    so repeated reveals agree with a single underlying path.
    """

    __slots__ = ("length", "terminal", "_b")

    def __init__(self, length: float, terminal: float):
        if length <= 0.0:
            raise ValueError("length must be positive")
        if terminal < 0.0:
            raise ValueError("terminal must be nonnegative")
        self.length = length
        self.terminal = terminal
        self._b = [PathGrid([0.0, length], [0.0, 0.0], 1.0) for _ in range(3)]

    def copy(self) -> "Bessel3BridgePath":
        h = Bessel3BridgePath.__new__(Bessel3BridgePath)
        h.length = self.length
        h.terminal = self.terminal
        h._b = [g.copy() for g in self._b]
        return h

    def reveal_at(self, stream: RngStream, t: float) -> float:
        if t == 0.0:
            return 0.0
        if t == self.length:
            return self.terminal
        if not (0.0 < t < self.length):
            raise ValueError(f"t={t} outside [0, {self.length}]")
        mu = self.terminal * t / self.length
        s2 = math.sqrt(2.0)
        b1 = self._b[0].reveal_at(stream, t)
        b2 = self._b[1].reveal_at(stream, t)
        b3 = self._b[2].reveal_at(stream, t)
        return math.sqrt((s2 * b1 + mu) ** 2 + (s2 * b2) ** 2 + (s2 * b3) ** 2)


def bessel3_bridge_at(stream: RngStream, length: float, terminal: float, t: float) -> float:
    """Single-point reveal of the scaled 3-d Bessel bridge (fresh path)."""
    return Bessel3BridgePath(length, terminal).reveal_at(stream, t)


# ---------------------------------------------------------------------------
# conditioned pair sampling


def conditioned_pair_at(stream: RngStream, seg1: BridgeSegment, seg2: BridgeSegment,
                        t: float) -> Tuple[float, float]:
    """Joint reveal at t of two independent unit bridges on a common interval,
    conditioned on never crossing each other over the whole interval.

    Requires strictly ordered endpoints (same-sign differences at both
    ends).  Rejection: draw both unconditionally, reject immediately if the
    ordering is violated at t, otherwise accept with the product of the two
    no-crossing coins for the sub-intervals left and right of t (difference
    process, sigma^2 = 2).
    """
    if seg1.t0 != seg2.t0 or seg1.t1 != seg2.t1:
        raise ValueError("segments must share the time interval")
    d_left = seg2.x0 - seg1.x0
    d_right = seg2.x1 - seg1.x1
    if d_left * d_right <= 0.0:
        raise ValueError("conditioned_pair_at needs same-sign endpoint differences")
    sgn = 1.0 if d_left > 0.0 else -1.0
    len_l = t - seg1.t0
    len_r = seg1.t1 - t
    while True:
        x1 = bb_sample_at(stream, seg1, t)
        x2 = bb_sample_at(stream, seg2, t)
        d = x2 - x1
        if sgn * d <= 0.0:
            continue
        if stream.uniform() >= no_cross_prob(d_left, d, len_l, 2.0):
            continue
        if stream.uniform() >= no_cross_prob(d, d_right, len_r, 2.0):
            continue
        return x1, x2


class PreCrossingPath:
    """Joint law of a pair of unit bridges on [left_time, tau] whose
    difference first hits zero exactly at tau (the right end).

    In reversed time u = tau - t the absolute difference is a scaled 3-d
    Bessel bridge H from 0 to |x2_left - x1_left|, independent of the sum
    process S, which is a sigma^2 = 2 bridge pinned at
    x1_left + x2_left and 2 z_tau.  Reveals return
    (z, x1, x2) = ((S - sgn H)/2 twice named, (S + sgn H)/2) consistently
    across multiple times.
    """

    __slots__ = ("left_time", "tau", "sgn", "_h", "_s")

    def __init__(self, left_time: float, tau: float,
                 x1_left: float, x2_left: float, z_tau: float):
        if tau <= left_time:
            raise ValueError("need tau > left_time")
        if x1_left == x2_left:
            raise ValueError("pair must be strictly ordered at the left end")
        self.left_time = left_time
        self.tau = tau
        self.sgn = 1.0 if x2_left > x1_left else -1.0
        self._h = Bessel3BridgePath(tau - left_time, abs(x2_left - x1_left))
        self._s = PathGrid([left_time, tau], [x1_left + x2_left, 2.0 * z_tau], 2.0)

    def copy(self) -> "PreCrossingPath":
        p = PreCrossingPath.__new__(PreCrossingPath)
        p.left_time = self.left_time
        p.tau = self.tau
        p.sgn = self.sgn
        p._h = self._h.copy()
        p._s = self._s.copy()
        return p

    def reveal_at(self, stream: RngStream, t: float) -> Tuple[float, float]:
        """(x1, x2) at t in [left_time, tau]."""
        if not (self.left_time <= t <= self.tau):
            raise ValueError(f"t={t} outside [{self.left_time}, {self.tau}]")
        h = self._h.reveal_at(stream, self.tau - t)
        s = self._s.reveal_at(stream, t) if self.left_time < t < self.tau else \
            self._s.value_at(t)
        x1 = 0.5 * (s - self.sgn * h)
        x2 = 0.5 * (s + self.sgn * h)
        return x1, x2


def pre_crossing_pair_at(stream: RngStream, left_time: float, tau: float,
                         x1_left: float, x2_left: float, z_tau: float,
                         t: float) -> Tuple[float, float, float]:
    """Single-point reveal of the pre-crossing pair (fresh path state).

    Returns (z, x1, x2) with z = x1 (the spliced path follows the first
    component up to the confluence).
    """
    if not (left_time < t < tau):
        raise ValueError(f"t={t} outside ({left_time}, {tau})")
    x1, x2 = PreCrossingPath(left_time, tau, x1_left, x2_left, z_tau).reveal_at(stream, t)
    return x1, x1, x2
