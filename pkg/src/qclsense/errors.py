class DivergenceError(ArithmeticError):
    """The response slope vanishes, so the uncertainty estimate diverges."""


class DegenerateRangeError(ValueError):
    """The response curve is flat everywhere; no dynamic range exists."""


class TrainingError(RuntimeError):
    """Every optimization restart failed."""
