"""Reproducible random streams and the exact Bernoulli (p-coin) engine.

A stream is identified by a ``(seed, stream_id)`` pair fed into a Philox
counter-based generator, so distinct stream ids give statistically
independent sequences without any coordination between workers.  Draws are
served from internal buffers; a buffered scalar draw costs tens of
nanoseconds, which matters because the bridge samplers consume randomness
one scalar at a time.
"""

from __future__ import annotations

import math
from typing import Iterator, Tuple

import numpy as np

from .errors import PCoinCeilingError, PCoinPrecisionError

_BUF = 4096

# Iteration ceiling for toss_p_coin; beyond it the coin is declared
# pathological (slowly converging error band) and a diagnostic is raised.
DEFAULT_COIN_CEILING = 10_000

# Relative floating-point headroom below which an undecided coin aborts.
_EPS_FLOOR = 4.0 * np.finfo(float).eps


class RngStream:
    """Buffered wrapper around a Philox generator.

    Same ``(seed, stream_id)`` replays the identical draw sequence
    bit-for-bit.  Streams are single-owner: create one per logical thread
    of work and never share it concurrently.
    """

    __slots__ = ("seed", "stream_id", "_gen", "_u", "_iu", "_n", "_in")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF,
                        self.stream_id & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self._u = np.empty(0)
        self._iu = 0
        self._n = np.empty(0)
        self._in = 0

    def uniform(self) -> float:
        """One Uniform[0,1) draw."""
        if self._iu >= self._u.shape[0]:
            self._u = self._gen.random(_BUF)
            self._iu = 0
        v = self._u[self._iu]
        self._iu += 1
        return float(v)

    def normal(self) -> float:
        """One standard normal draw."""
        if self._in >= self._n.shape[0]:
            self._n = self._gen.standard_normal(_BUF)
            self._in = 0
        v = self._n[self._in]
        self._in += 1
        return float(v)

    def normals(self, n: int) -> np.ndarray:
        """Vector of ``n`` standard normals (bypasses the scalar buffer)."""
        return self._gen.standard_normal(n)

    def uniforms(self, n: int) -> np.ndarray:
        """Vector of ``n`` Uniform[0,1) draws (bypasses the scalar buffer)."""
        return self._gen.random(n)

    def spawn(self, stream_id: int) -> "RngStream":
        """Fresh stream with the same seed and a different id."""
        return RngStream(self.seed, stream_id)


def sample_uniform(stream: RngStream) -> float:
    """Uniform[0,1) draw; advances the stream."""
    return stream.uniform()


def sample_normal(stream: RngStream, mean: float, variance: float) -> float:
    """N(mean, variance) draw.  variance = 0 returns mean exactly."""
    if variance < 0.0:
        raise ValueError(f"negative variance {variance!r}")
    if variance == 0.0:
        return float(mean)
    return float(mean) + math.sqrt(variance) * stream.normal()


def sample_inverse_gaussian(stream: RngStream, mu: float, lam: float) -> float:
    """Inverse-Gaussian draw, density proportional to
    v^{-3/2} exp{-lam (v - mu)^2 / (2 mu^2 v)} on v > 0.

    Uses the squared-normal transformation with a closed-form root choice
    and one final uniform selection, so the cost is constant and no special
    functions are needed.
    """
    if mu <= 0.0 or lam <= 0.0:
        raise ValueError(f"inverse-Gaussian parameters must be positive, got mu={mu}, lam={lam}")
    y = stream.normal()
    y *= y
    x1 = mu + mu * mu * y / (2.0 * lam) - (mu / (2.0 * lam)) * math.sqrt(
        4.0 * mu * lam * y + mu * mu * y * y)
    if x1 <= 0.0:
        # extreme y can round x1 to 0-; the paired root is then the draw
        return mu * mu / max(x1, np.finfo(float).tiny)
    if stream.uniform() <= mu / (mu + x1):
        return x1
    return mu * mu / x1


def sample_poisson_count(stream: RngStream, lam: float) -> int:
    """Poisson(lam) count via inversion for small rates (the common case
    here), falling back to the generator for large ones."""
    if lam < 0.0:
        raise ValueError("negative rate")
    if lam == 0.0:
        return 0
    if lam > 12.0:
        return int(stream._gen.poisson(lam))
    thresh = math.exp(-lam)
    k = 0
    prod = stream.uniform()
    while prod >= thresh:
        prod *= stream.uniform()
        k += 1
    return k


def sample_poisson_times(stream: RngStream, rate: float, t0: float, t1: float) -> list:
    """Event times of a homogeneous Poisson process on (t0, t1), sorted."""
    if t1 <= t0:
        raise ValueError(f"empty interval ({t0}, {t1})")
    if rate < 0.0:
        raise ValueError("negative rate")
    n = sample_poisson_count(stream, rate * (t1 - t0))
    if n == 0:
        return []
    ts = sorted(t0 + (t1 - t0) * stream.uniform() for _ in range(n))
    return ts


# ---------------------------------------------------------------------------
# p-coins

# A PCoinApproximator is any iterator yielding (p_hat, eps) pairs with
# eps > 0, eps -> 0, and |p - p_hat| < eps for the target probability p.
PCoinApproximator = Iterator[Tuple[float, float]]


def constant_approximator(p: float) -> PCoinApproximator:
    """Synthetic approximator: p_hat = p with eps halving each call."""
    def gen():
        eps = 0.5
        while True:
            yield p, eps
            eps *= 0.5
    return gen()


def toss_p_coin(stream: RngStream, approx: PCoinApproximator,
                ceiling: int = DEFAULT_COIN_CEILING,
                u: float = None) -> int:
    """Exact Bernoulli(p) draw from a converging approximation sequence.

    Consumes exactly one uniform U, then refines (p_hat, eps) until U falls
    outside the error band: returns 1 if U < p_hat - eps, 0 if
    U >= p_hat + eps.  ``u`` can be injected for deterministic replay in
    tests.  Raises a diagnostic if the band underflows machine precision
    while still straddling U, or if ``ceiling`` refinements do not decide.
    """
    if u is None:
        u = stream.uniform()
    n = 0
    for p_hat, eps in approx:
        if u < p_hat - eps:
            return 1
        if u >= p_hat + eps:
            return 0
        if eps <= _EPS_FLOOR * max(1.0, abs(p_hat)):
            raise PCoinPrecisionError(
                f"p-coin undecided with eps={eps:.3e} at machine precision "
                f"(p_hat={p_hat!r}, u={u!r})")
        n += 1
        if n > ceiling:
            raise PCoinCeilingError(
                f"p-coin undecided after {ceiling} refinements "
                f"(p_hat={p_hat!r}, eps={eps:.3e}, u={u!r})")
    raise PCoinPrecisionError("approximator exhausted before deciding")
