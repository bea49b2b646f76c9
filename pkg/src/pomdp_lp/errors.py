"""Exception hierarchy shared by every module of the package."""


class PomdpLpError(Exception):
    """Base class for all package errors."""


class InvalidInstance(PomdpLpError, ValueError):
    pass


class NonStochasticRow(InvalidInstance):
    def __init__(self, tensor, index, row_sum):
        self.tensor = tensor
        self.index = tuple(index)
        self.row_sum = float(row_sum)
        super().__init__(
            f"{tensor} row {self.index} sums to {self.row_sum!r}, expected 1"
        )


class NegativeProbability(InvalidInstance):
    def __init__(self, tensor, index, value):
        self.tensor = tensor
        self.index = tuple(index)
        self.value = float(value)
        super().__init__(f"{tensor}{list(self.index)} = {self.value!r} is negative")


class DimensionMismatch(InvalidInstance):
    pass


class NonFiniteReward(InvalidInstance):
    pass


class ImpossibleObservation(InvalidInstance):
    """Conditioning on an observation that has probability zero."""


class ProductTooLarge(PomdpLpError):
    pass


class SearchSpaceTooLarge(PomdpLpError):
    pass


class MissingVariable(PomdpLpError, KeyError):
    pass


class BasisSingular(PomdpLpError, ArithmeticError):
    pass


class NonIntegralIncumbent(PomdpLpError):
    pass
