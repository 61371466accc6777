"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not agree with a network or schema."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during a forward pass or training."""

    def __init__(self, message, layer=None, epoch=None):
        super().__init__(message)
        self.layer = layer
        self.epoch = epoch


class ContractError(ValueError):
    """An input violates a documented precondition."""


class PrerequisiteError(RuntimeError):
    """A pipeline step was invoked before the step it depends on."""
