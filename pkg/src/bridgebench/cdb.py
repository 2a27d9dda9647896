"""Exact confluent-bridge sampler: spliced proposals from a forward and a
time-reversed backward unconditioned path, an auxiliary-crossing subroutine
built from exact crossing coins, and the pseudo-marginal independence
sampler that corrects the proposal law to the bridge law.

The proposal Z follows the forward path up to the confluence time tau_z
(the first meeting of the forward and time-reversed backward paths) and
the reversed backward path afterwards.  The number of auxiliary paths
needed to hit Z is a positive unbiased estimate of the reciprocal hitting
probability, which is all the Metropolis correction requires.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .brownian import (BridgeSegment, PathGrid, PreCrossingPath, bb_sample_at,
                       conditioned_pair_at, fpt_zero)
from .coins import RegimeCoinInput, p_A_cross_prob, toss_regime_coin
from .models import DiffusionSpec
from .psrs import UnconditionedPath, default_delta_max, psrs_unconditioned
from .rng import DEFAULT_COIN_CEILING, RngStream

__all__ = [
    "ConfluentProposal", "ChainState", "propose_confluent", "aux_crossing",
    "mh_update", "run_cdb", "switch_heuristic", "DEFAULT_GAMMA",
]

DEFAULT_GAMMA = 3.0

# relative nudge applied if a sampled confluence lands exactly on a grid
# point (probability-zero configuration, kept interior for simplicity)
_INTERIOR_NUDGE = 1e-12


@dataclass
class _PairState:
    """Mutable revealed state of the proposal pair on a common grid."""

    times: List[float]
    x1: List[float]      # forward path
    x2r: List[float]     # time-reversed backward path
    tau_z: float
    chi_left: float      # grid point from which the confluence interval runs
    precross: PreCrossingPath

    def copy(self) -> "_PairState":
        return _PairState(list(self.times), list(self.x1), list(self.x2r),
                          self.tau_z, self.chi_left, self.precross.copy())

    def index_of(self, t: float) -> Optional[int]:
        i = bisect.bisect_left(self.times, t)
        if i < len(self.times) and self.times[i] == t:
            return i
        return None

    def z(self, i: int) -> float:
        return self.x1[i] if self.times[i] <= self.tau_z else self.x2r[i]

    def reveal_pair(self, stream: RngStream, t: float) -> Tuple[float, float]:
        """Reveal (x1, x2r) at t with the conditioning appropriate to the
        zone: plain independent bridges right of tau_z, the confluence
        (Bessel) reconstruction on [chi_left, tau_z], and non-crossing
        conditioned pairs strictly left of chi_left."""
        i = bisect.bisect_left(self.times, t)
        if i < len(self.times) and self.times[i] == t:
            return self.x1[i], self.x2r[i]
        t_l, t_r = self.times[i - 1], self.times[i]
        if t_l >= self.tau_z:
            v1 = bb_sample_at(stream, BridgeSegment(t_l, t_r, self.x1[i - 1],
                                                    self.x1[i], 1.0), t)
            v2 = bb_sample_at(stream, BridgeSegment(t_l, t_r, self.x2r[i - 1],
                                                    self.x2r[i], 1.0), t)
        elif t >= self.chi_left:
            v1, v2 = self.precross.reveal_at(stream, t)
        else:
            v1, v2 = conditioned_pair_at(
                stream,
                BridgeSegment(t_l, t_r, self.x1[i - 1], self.x1[i], 1.0),
                BridgeSegment(t_l, t_r, self.x2r[i - 1], self.x2r[i], 1.0),
                t)
        self.times.insert(i, t)
        self.x1.insert(i, v1)
        self.x2r.insert(i, v2)
        return v1, v2


class ConfluentProposal:
    """A spliced proposal path revealed on a finite grid.

    Carries the co-revealed triple (Z, forward, reversed-backward) on the
    merged grid plus the confluence time; further reveals stay consistent
    with all conditioning accumulated during construction.
    """

    __slots__ = ("x0", "xT", "T", "_state")

    def __init__(self, x0: float, xT: float, T: float, state: _PairState):
        self.x0 = x0
        self.xT = xT
        self.T = T
        self._state = state

    @property
    def tau_z(self) -> float:
        return self._state.tau_z

    @property
    def grid(self) -> List[float]:
        return list(self._state.times)

    @property
    def x1_values(self) -> List[float]:
        return list(self._state.x1)

    @property
    def x2rev_values(self) -> List[float]:
        return list(self._state.x2r)

    @property
    def z_values(self) -> List[float]:
        s = self._state
        return [s.z(i) for i in range(len(s.times))]

    def z_at_grid(self, t: float) -> float:
        i = self._state.index_of(t)
        if i is None:
            raise KeyError(f"{t} not on the revealed grid")
        return self._state.z(i)

    def reveal_z(self, stream: RngStream, t: float) -> float:
        """Reveal Z at an arbitrary time in [0, T] (persistent: the new
        point joins the proposal's grid)."""
        if not (0.0 <= t <= self.T):
            raise ValueError(f"t={t} outside [0, {self.T}]")
        s = self._state
        i = s.index_of(t)
        if i is not None:
            return s.z(i)
        v1, v2 = s.reveal_pair(stream, t)
        return v1 if t <= s.tau_z else v2

    def reveal_z_many(self, stream: RngStream, ts) -> List[float]:
        return [self.reveal_z(stream, t) for t in sorted(ts)]

    def check_invariants(self) -> None:
        s = self._state
        assert all(b > a for a, b in zip(s.times, s.times[1:]))
        i_tau = s.index_of(s.tau_z)
        assert i_tau is not None, "confluence time must be on the grid"
        assert s.x1[i_tau] == s.x2r[i_tau]
        sign = None
        for i, t in enumerate(s.times):
            if t >= s.tau_z:
                break
            d = s.x1[i] - s.x2r[i]
            assert d != 0.0, "paths may not touch left of the confluence"
            if sign is None:
                sign = d > 0.0
            else:
                assert (d > 0.0) == sign, "difference changed sign left of the confluence"


@dataclass
class ChainState:
    """Pseudo-marginal chain state: the kept proposal and its trial weight
    (the geometric trial count, or the average of several)."""

    proposal: ConfluentProposal
    trials: float

    def __post_init__(self):
        if self.trials < 1.0:
            raise ValueError("trial weight must be >= 1")


def propose_confluent(stream: RngStream, spec: DiffusionSpec, x0: float,
                      xT: float, T: float,
                      delta_max: Optional[float] = None) -> ConfluentProposal:
    """Sample a spliced proposal: draw unconditioned forward and backward
    paths, merge their grids, sweep the sub-intervals left to right for the
    first passage of the difference to zero, and splice there.  Pairs that
    never meet are rejected wholesale and redrawn.
    """
    while True:
        skel1 = psrs_unconditioned(stream, spec, x0, T, delta_max)
        skel2 = psrs_unconditioned(stream, spec, xT, T, delta_max)
        # forward-time view of the reversed backward path; its revealed
        # points are a valid bridge grid because a reversed Brownian bridge
        # is again a Brownian bridge
        rev_times = [T - t for t in reversed(skel2.times)]
        rev_vals = list(reversed(skel2.values))
        # guard against floating-point ties in the reversal
        if any(b <= a for a, b in zip(rev_times, rev_times[1:])):
            continue
        skel2r = PathGrid(rev_times, rev_vals, 1.0)
        merged = sorted(set(skel1.times) | set(skel2r.times))
        skel1.bulk_reveal(stream, merged)
        skel2r.bulk_reveal(stream, merged)
        x1 = skel1.values
        x2r = skel2r.values

        degenerate = False
        tau_z = None
        for j in range(len(merged) - 1):
            d_l = x2r[j] - x1[j]
            d_r = x2r[j + 1] - x1[j + 1]
            if d_l == 0.0 or d_r == 0.0:
                degenerate = True
                break
            out = fpt_zero(stream, BridgeSegment(merged[j], merged[j + 1],
                                                 d_l, d_r, 2.0))
            if not out.finite:
                continue
            t_l, t_r = merged[j], merged[j + 1]
            tau_z = out.tau
            # keep the confluence strictly interior
            nudge = _INTERIOR_NUDGE * (t_r - t_l)
            tau_z = min(max(tau_z, t_l + nudge), t_r - nudge)
            s_tau = bb_sample_at(
                stream,
                BridgeSegment(t_l, t_r, x1[j] + x2r[j], x1[j + 1] + x2r[j + 1], 2.0),
                tau_z)
            z_tau = 0.5 * s_tau
            times = merged[:j + 1] + [tau_z] + merged[j + 1:]
            x1_full = x1[:j + 1] + [z_tau] + x1[j + 1:]
            x2r_full = x2r[:j + 1] + [z_tau] + x2r[j + 1:]
            precross = PreCrossingPath(t_l, tau_z, x1[j], x2r[j], z_tau)
            state = _PairState(times, x1_full, x2r_full, tau_z, t_l, precross)
            return ConfluentProposal(x0, xT, T, state)
        if degenerate or tau_z is None:
            continue


def aux_crossing(stream: RngStream, spec: DiffusionSpec,
                 proposal: ConfluentProposal, gamma: float = DEFAULT_GAMMA,
                 delta_max: Optional[float] = None,
                 ceiling: int = DEFAULT_COIN_CEILING,
                 trace: Optional[list] = None) -> int:
    """One auxiliary trial: does a fresh unconditioned path started at xT a
    bridge-length earlier intersect the proposal?  Returns 1 for an
    intersection, 0 otherwise.

    The auxiliary path is drawn over twice the horizon and only its second
    half is compared against Z.  All checks run from cheap to expensive:
    endpoint sign products while sweeping left to right (with the auxiliary
    path extended lazily, so a decided trial never pays for the rest of the
    horizon), then the independent-bridge coins right of the confluence,
    then the conditioned coins left of it, and last the single confluence
    coin.  The trial works on a copy of the proposal state, so repeated
    trials are independent and identically distributed given the state.
    """
    T = proposal.T
    dm = delta_max if delta_max is not None else default_delta_max(spec, T)
    pre = psrs_unconditioned(stream, spec, proposal.xT, T, dm)
    x3_start = pre.values[-1]
    aux = UnconditionedPath(stream, spec, x3_start, 0.0, T, dm)

    state = proposal._state.copy()
    tau_z = state.tau_z

    a_records = []   # (d_l, d_r, length)
    b_records = []   # RegimeCoinInput
    c_record = None  # RegimeCoinInput

    prop_times = list(state.times)
    prev_t = None
    prev_vals = None  # (x1, x2r, x3, z)

    def vals_at(t: float) -> Tuple[float, float, float, float]:
        v1, v2 = state.reveal_pair(stream, t)
        v3 = aux.skeleton.reveal_at(stream, t)
        z = v1 if t <= tau_z else v2
        return v1, v2, v3, z

    for idx in range(len(prop_times)):
        t_hi = prop_times[idx]
        aux.extend_until(t_hi)
        if prev_t is None:
            prev_t = t_hi
            prev_vals = vals_at(t_hi)
            continue
        lo_i = bisect.bisect_right(aux.skeleton.times, prev_t)
        hi_i = bisect.bisect_left(aux.skeleton.times, t_hi)
        interior = aux.skeleton.times[lo_i:hi_i]
        for t in interior + [t_hi]:
            cur = vals_at(t)
            d_prev = prev_vals[2] - prev_vals[3]
            d_cur = cur[2] - cur[3]
            if d_prev * d_cur <= 0.0:
                if trace is not None:
                    trace.append(("sign", prev_t, t))
                return 1
            length = t - prev_t
            if prev_t >= tau_z:
                a_records.append((d_prev, d_cur, length, prev_t, t))
            else:
                g0 = (prev_vals[0] - prev_vals[1], prev_vals[0] - prev_vals[2])
                gT = (cur[0] - cur[1], cur[0] - cur[2])
                if t == tau_z:
                    c_record = RegimeCoinInput(g0, (0.0, gT[1]), length)
                else:
                    b_records.append((RegimeCoinInput(g0, gT, length), prev_t, t))
            prev_t, prev_vals = t, cur

    for d_l, d_r, length, u, v in a_records:
        if trace is not None:
            trace.append(("A", u, v))
        if stream.uniform() < p_A_cross_prob(d_l, d_r, length):
            return 1
    for inp, u, v in b_records:
        if trace is not None:
            trace.append(("B", u, v))
        if toss_regime_coin(stream, inp, "B", gamma, ceiling) == 0:
            return 1
    if c_record is not None:
        if trace is not None:
            trace.append(("C", state.chi_left, tau_z))
        if toss_regime_coin(stream, c_record, "C", gamma, ceiling) == 0:
            return 1
    return 0


def sample_trial_count(stream: RngStream, spec: DiffusionSpec,
                       proposal: ConfluentProposal, gamma: float,
                       delta_max: Optional[float] = None,
                       ceiling: int = DEFAULT_COIN_CEILING) -> int:
    """Number of auxiliary trials until the first intersection (geometric)."""
    n = 1
    while aux_crossing(stream, spec, proposal, gamma, delta_max, ceiling) == 0:
        n += 1
    return n


def mh_update(stream: RngStream, spec: DiffusionSpec, state: ChainState,
              gamma: float = DEFAULT_GAMMA,
              delta_max: Optional[float] = None,
              ceiling: int = DEFAULT_COIN_CEILING,
              n_estimator_trials: int = 1) -> ChainState:
    """One pseudo-marginal independence-sampler step: fresh proposal, fresh
    trial weight, accept when U < new_weight / old_weight."""
    prop = propose_confluent(stream, spec, state.proposal.x0,
                             state.proposal.xT, state.proposal.T, delta_max)
    counts = [sample_trial_count(stream, spec, prop, gamma, delta_max, ceiling)
              for _ in range(n_estimator_trials)]
    weight = sum(counts) / len(counts)
    if stream.uniform() < weight / state.trials:
        return ChainState(prop, weight)
    return state


def run_cdb(stream: RngStream, spec: DiffusionSpec, x0: float, xT: float,
            T: float, n_mh: int, gamma: float = DEFAULT_GAMMA,
            delta_max: Optional[float] = None,
            ceiling: int = DEFAULT_COIN_CEILING,
            keep_chain: bool = True):
    """Run the sampler for n_mh correction steps.

    Returns the list of kept proposals (length n_mh + 1, starting from the
    initial draw with unit weight), or just the final state when
    ``keep_chain`` is false (long chains at large horizons).
    """
    if n_mh < 0:
        raise ValueError("n_mh must be >= 0")
    state = ChainState(propose_confluent(stream, spec, x0, xT, T, delta_max), 1.0)
    chain = [state.proposal] if keep_chain else None
    for _ in range(n_mh):
        state = mh_update(stream, spec, state, gamma, delta_max, ceiling)
        if keep_chain:
            chain.append(state.proposal)
    return chain if keep_chain else state


def switch_heuristic(theta1: float, delta_star1: float, theta2: float) -> float:
    """Transfer a calibrated horizon threshold between mean-reversion rates:
    the spectral gap of a linear-drift model scales linearly in the rate, so
    the critical horizon scales inversely."""
    if theta1 <= 0.0 or theta2 <= 0.0 or delta_star1 <= 0.0:
        raise ValueError("all inputs must be positive")
    return (theta1 / theta2) * delta_star1
