"""Exception types shared across the toolkit.

Every failure mode that a caller can meaningfully react to gets its own
class; generic programming errors stay plain ValueError/TypeError.
"""

from __future__ import annotations


class NullraysError(Exception):
    """Base class for all toolkit-specific errors."""


class OutOfDomain(NullraysError):
    """A chart point lies outside the model's domain box / predicate,
    or within the exclusion radius of an excluded point."""


class SignatureError(NullraysError):
    """Metric evaluation produced a matrix without Lorentz signature
    (expected exactly one negative eigenvalue)."""


class NotNull(NullraysError):
    """A vector required to be lightlike has |g(v,v)| above tolerance."""


class NotFuture(NullraysError):
    """A causal vector points into the past half of the cone
    (g(v, T) >= 0 against the future-timelike reference field T)."""


class NotPregeodesic(NullraysError):
    """Sampled curve does not satisfy the proportional-acceleration
    condition D_t xdot = f * xdot within tolerance."""


class GridMismatch(NullraysError):
    """Field propagation requested on a trajectory whose dense grid is
    missing or incompatible (e.g. resampled/non-integrated nodes)."""


class NotNormalized(NullraysError):
    """Geodesic tangent at the base event is not normalized to
    g(v, T) = -1."""


class NotLightRayField(NullraysError):
    """Jacobi data whose pairing with the tangent is not constant in the
    affine parameter (slope |b| above tolerance), so it does not come
    from a variation by light rays."""


class BaseMismatch(NullraysError):
    """Two objects that must share a base point/state do not."""


class NotSpacelike(NullraysError):
    """Candidate time slice fails the induced-metric positivity check."""


class SliceOutsideBox(NullraysError):
    """Requested slice level or chart sub-box is not contained in the
    model domain."""


class NoCrossing(NullraysError):
    """Trajectory never meets the chart slice."""


class MultipleCrossings(NullraysError):
    """Trajectory meets the chart slice more than once; the slice does
    not act as a Cauchy surface for it."""


class WrongMetric(NullraysError):
    """Scenario requested on a metric it is not defined for."""


class ParseError(NullraysError):
    """Scenario file or expression text failed to parse.

    Carries optional location info so the CLI can point at the
    offending field.
    """

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        loc = []
        if field is not None:
            loc.append(f"field={field}")
        if line is not None:
            loc.append(f"line={line}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)
        self.field = field
        self.line = line
