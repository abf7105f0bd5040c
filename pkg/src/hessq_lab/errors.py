"""Exception types shared across the library."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class UnsupportedRegimeError(DomainError):
    """The (n, k) regime is outside what the operation supports."""


class InfeasibleError(RuntimeError):
    """A requested completion / root-finding target cannot be met."""


class ConditioningError(RuntimeError):
    """A finite-difference step is too small or too close to a singularity."""


class StencilError(IndexError):
    """A grid stencil would reach outside the sampled domain."""


class SingularPointError(DomainError):
    """Second derivatives were requested at a point where they blow up."""


class InsufficientDataError(ValueError):
    """Too few samples to run the requested estimate."""


class EmptyDomainError(RuntimeError):
    """No admitted grid points remain after filtering."""
