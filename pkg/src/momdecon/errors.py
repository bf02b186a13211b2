"""Exception hierarchy shared by the estimation pipeline."""


class DeconvolutionError(Exception):
    """Base class for every error raised by momdecon."""


class AssumptionBViolation(DeconvolutionError):
    """A moment of the known component vanishes, so moment division is undefined."""

    def __init__(self, order: int):
        super().__init__(f"moment of order {order} of the known component is zero")
        self.order = order


class MomentOrderError(DeconvolutionError, IndexError):
    """A moment of an order that the provider or sequence cannot supply was requested."""


class EstimationError(DeconvolutionError):
    """The moment method could not produce a distribution for this sample.

    This is a legitimate statistical outcome for noisy moments, not a bug.
    """


class NonPositiveDeterminantError(EstimationError):
    def __init__(self, order: int, value: float):
        super().__init__(f"Hankel determinant D_{order} = {value!r} is not positive")
        self.order = order
        self.value = value


class ComplexRootError(EstimationError):
    pass


class DegeneratePolynomialError(EstimationError):
    pass


class NegativeSupportError(EstimationError):
    pass


class ComponentCollapseError(EstimationError):
    def __init__(self, component: int, reason: str):
        super().__init__(f"mixture component {component} collapsed: {reason}")
        self.component = component
