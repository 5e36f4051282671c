class SingularDesignError(ValueError):
    """The training design leaves the stacked estimation problem unidentifiable."""


class DegenerateDesignError(SingularDesignError):
    """The Schur scalar alpha vanishes, so the closed-form blocks do not exist."""
