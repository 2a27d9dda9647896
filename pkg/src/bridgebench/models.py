"""Unit-volatility diffusion models and their regularity checks.

A model is described after reduction to unit diffusion coefficient: a drift
``alpha``, its derivative, an antiderivative ``A`` with a finite upper bound
``A_sup`` (the endpoint sampler's envelope), and constants ``Phi``, ``Psi``
bounding phi(y) = (alpha(y)^2 + alpha'(y)) / 2 via
Phi <= phi <= Phi + Psi.  The built-in model is the Langevin diffusion
whose invariant law is a t-distribution with ``v`` degrees of freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

__all__ = [
    "DiffusionSpec", "RawSde", "AssumptionReport", "phi",
    "langevin_t_spec", "brownian_spec", "lamperti", "validate_assumptions",
]


@dataclass(frozen=True)
class DiffusionSpec:
    """Unit-volatility SDE description.  Immutable; safe to share."""

    alpha: Callable[[float], float]
    alpha_prime: Callable[[float], float]
    A: Callable[[float], float]
    Phi: float
    Psi: float
    A_sup: float
    speed_finite: bool = True
    # Optional fast Euler stepper (x0, dt, normals) -> path array, used by
    # the discretised baseline; the generic Python loop is the fallback.
    fast_euler: Optional[Callable] = field(default=None, compare=False)
    name: str = "custom"

    def phi(self, y: float) -> float:
        return 0.5 * (self.alpha(y) ** 2 + self.alpha_prime(y))

    @property
    def curvature_bound(self) -> float:
        """Upper bound on alpha'(y): alpha' = 2 phi - alpha^2 <= 2 (Phi + Psi).

        Used by the tilted-envelope endpoint sampler; follows from the
        phi bounds alone, so no extra user input is needed.
        """
        return 2.0 * (self.Phi + self.Psi)


def phi(spec: DiffusionSpec, y: float) -> float:
    """phi(y) = (alpha(y)^2 + alpha'(y)) / 2."""
    return spec.phi(y)


@dataclass(frozen=True)
class RawSde:
    """General scalar SDE dX = b(X) dt + sigma(X) dW before unit-volatility
    reduction.  sigma must stay positive on the working domain."""

    b: Callable[[float], float]
    sigma: Callable[[float], float]
    sigma_prime: Callable[[float], float]


def lamperti(raw: RawSde, x: float, reference: float = 0.0) -> tuple:
    """Map a state x of the raw SDE to the unit-volatility coordinate.

    Returns (y, alpha_at_y) with y = integral of 1/sigma from ``reference``
    to x (adaptive quadrature) and alpha(y) = b/sigma(x) - sigma'(x)/2.
    The reference point only shifts y by a constant, which cancels in every
    quantity the samplers use.
    """
    sig = raw.sigma(x)
    if sig <= 0.0:
        raise ValueError(f"sigma({x}) = {sig} <= 0")

    def integrand(u):
        s = raw.sigma(u)
        if s <= 0.0:
            raise ValueError(f"sigma({u}) = {s} <= 0 on the integration path")
        return 1.0 / s

    y, _ = integrate.quad(integrand, reference, x, limit=200)
    a = raw.b(x) / sig - 0.5 * raw.sigma_prime(x)
    return y, a


def _langevin_t_fast_euler(v: float):
    """Build a compiled Euler stepper for the t-model drift when numba is
    available; otherwise return None and let callers use the generic loop."""
    try:
        import numba
    except Exception:  # pragma: no cover - numba is normally installed
        return None

    @numba.njit(cache=True, fastmath=False)
    def kern(x0, dt, normals):  # pragma: no cover - exercised via wrapper
        n = normals.shape[0]
        out = np.empty(n + 1)
        out[0] = x0
        x = x0
        sq = math.sqrt(dt)
        for i in range(n):
            x = x + (-(v + 1.0) * x / (2.0 * (v + x * x))) * dt + sq * normals[i]
            out[i + 1] = x
        return out

    return kern


def langevin_t_spec(v: float) -> DiffusionSpec:
    """Langevin diffusion with a t(v) invariant distribution.

    alpha(x) = -(v+1) x / (2 (v + x^2));
    phi has minimum -(v+1)/(4v) at 0 and maximum (v+1)(v+3)^2 / (32 (v^2+5v))
    at +-sqrt((7v + v^2)/(v+3)), which give exact Phi and Psi.
    A(x) = -((v+1)/4) log(1 + x^2/v) <= 0, so A_sup = 0 exactly.
    """
    if v <= 0.0:
        raise ValueError(f"degrees of freedom must be positive, got {v}")
    v = float(v)

    def alpha(x: float) -> float:
        return -(v + 1.0) * x / (2.0 * (v + x * x))

    def alpha_prime(x: float) -> float:
        d = v + x * x
        return -(v + 1.0) * (v - x * x) / (2.0 * d * d)

    def A(x: float) -> float:
        return -0.25 * (v + 1.0) * math.log1p(x * x / v)

    Phi = -(v + 1.0) / (4.0 * v)
    phi_max = (v + 1.0) * (v + 3.0) ** 2 / (32.0 * (v * v + 5.0 * v))
    return DiffusionSpec(
        alpha=alpha, alpha_prime=alpha_prime, A=A,
        Phi=Phi, Psi=phi_max - Phi, A_sup=0.0, speed_finite=True,
        fast_euler=_langevin_t_fast_euler(v),
        name=f"langevin-t(v={v:g})",
    )


def brownian_spec() -> DiffusionSpec:
    """Zero-drift model (standard Brownian motion).  phi == 0, so the
    rejection machinery degenerates to pure Brownian sampling; the speed
    measure is Lebesgue, hence not finite."""
    zero = lambda _x: 0.0

    def fast_euler(x0, dt, normals):
        out = np.empty(normals.shape[0] + 1)
        out[0] = x0
        np.cumsum(normals, out=out[1:])
        out[1:] *= math.sqrt(dt)
        out[1:] += x0
        return out

    return DiffusionSpec(alpha=zero, alpha_prime=zero, A=zero,
                         Phi=0.0, Psi=0.0, A_sup=0.0, speed_finite=False,
                         fast_euler=fast_euler, name="brownian")


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""
    worst_point: Optional[float] = None


@dataclass
class AssumptionReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def default_validation_grid(half_width: float = 50.0, n: int = 10_001) -> np.ndarray:
    return np.linspace(-half_width, half_width, n)


def validate_assumptions(spec: DiffusionSpec, grid) -> AssumptionReport:
    """Best-effort numerical check of the model's regularity conditions on a
    grid.  Failures are report entries, never exceptions.

    Checked: smooth drift (alpha' consistent with finite differences of
    alpha), integrability of the endpoint tilt exp{A(u) - (u-x)^2/(2T)},
    the lower and upper phi bounds, finiteness of the speed measure
    integral exp{2A}, and the envelope A <= A_sup.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("validation grid must be non-empty")
    checks = []

    # smooth drift: central finite difference of alpha vs alpha_prime
    h = max(1e-6, 1e-7 * float(np.max(np.abs(grid)) or 1.0))
    worst_rel, worst_x, ok = 0.0, None, True
    for x in grid:
        fd = (spec.alpha(x + h) - spec.alpha(x - h)) / (2.0 * h)
        ap = spec.alpha_prime(x)
        rel = abs(fd - ap) / max(1.0, abs(ap))
        if rel > worst_rel:
            worst_rel, worst_x = rel, float(x)
    ok = worst_rel <= 1e-4
    checks.append(AssumptionCheck(
        "smooth_drift", ok,
        f"max relative gap alpha' vs finite difference = {worst_rel:.2e}", worst_x))

    # endpoint tilt integrability, probed at a few centres and horizons
    ok, detail = True, "integrals finite"
    for x in (float(grid[0]), 0.0, float(grid[-1])):
        for T in (0.5, 4.0):
            val, _ = integrate.quad(
                lambda u, x=x, T=T: math.exp(min(spec.A(u) - (u - x) ** 2 / (2.0 * T), 700.0)),
                -np.inf, np.inf, limit=200)
            if not math.isfinite(val):
                ok, detail = False, f"divergent tilt integral at x={x}, T={T}"
                break
    checks.append(AssumptionCheck("endpoint_tilt_integrable", ok, detail))

    phis = np.array([spec.phi(float(x)) for x in grid])
    slack = 1e-12 + 1e-9 * max(1.0, abs(spec.Phi), spec.Psi)

    i_lo = int(np.argmin(phis))
    lo_ok = phis[i_lo] >= spec.Phi - slack
    checks.append(AssumptionCheck(
        "phi_lower_bound", bool(lo_ok),
        f"min phi on grid = {phis[i_lo]:.6g} vs Phi = {spec.Phi:.6g}",
        float(grid[i_lo])))

    i_hi = int(np.argmax(phis))
    hi_ok = phis[i_hi] <= spec.Phi + spec.Psi + slack
    checks.append(AssumptionCheck(
        "phi_upper_bound", bool(hi_ok),
        f"max phi on grid = {phis[i_hi]:.6g} vs Phi + Psi = {spec.Phi + spec.Psi:.6g}",
        float(grid[i_hi])))

    # finite speed measure
    val, _ = integrate.quad(lambda y: math.exp(min(2.0 * spec.A(y), 700.0)),
                            -np.inf, np.inf, limit=200)
    sp_ok = math.isfinite(val)
    if spec.speed_finite and not sp_ok:
        detail = "speed measure integral diverged but spec claims finite"
    elif not spec.speed_finite:
        sp_ok, detail = not spec.speed_finite or sp_ok, "spec does not claim a finite speed measure"
        sp_ok = True
    else:
        detail = f"integral of exp(2A) = {val:.6g}"
    checks.append(AssumptionCheck("finite_speed_measure", bool(sp_ok), detail))

    As = np.array([spec.A(float(x)) for x in grid])
    i_a = int(np.argmax(As))
    a_ok = As[i_a] <= spec.A_sup + 1e-12
    checks.append(AssumptionCheck(
        "A_sup_envelope", bool(a_ok),
        f"max A on grid = {As[i_a]:.6g} vs A_sup = {spec.A_sup:.6g}",
        float(grid[i_a])))

    return AssumptionReport(checks)
