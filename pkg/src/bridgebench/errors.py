"""Diagnostic error types raised by the samplers.

Every error here signals a detectable numerical or configuration problem,
never a random failure of a correct sampler: correct runs terminate almost
surely and raise nothing.
"""


class BridgeBenchError(RuntimeError):
    """Base class for all diagnostics raised by this package."""


class PCoinPrecisionError(BridgeBenchError):
    """The p-coin error band shrank below machine epsilon while the decision
    uniform was still inside it.  Indicates insufficient floating-point
    headroom in the approximating sequence, not a sampler bug."""


class PCoinCeilingError(BridgeBenchError):
    """The p-coin loop exceeded its iteration ceiling before deciding.
    Turns a pathological slowly-converging coin into an observable failure
    instead of a hang."""


class EndpointStarvationError(BridgeBenchError):
    """The biased-endpoint rejection sampler saw too many consecutive
    rejections.  The configured envelope constant (A_sup) is the usual
    suspect: if it sits far above A on the proposal's effective support the
    acceptance rate collapses."""


class SeriesOverflowError(BridgeBenchError):
    """A regime-B/C series constant or term overflowed despite log-space
    accumulation.  Callers treat this like the gamma-fallback trigger."""
