"""Two-stage channel estimation for RIS-assisted uplinks with MDFT training."""

from .exceptions import DegenerateDesignError, SingularDesignError

__version__ = "0.1.0"

__all__ = ["DegenerateDesignError", "SingularDesignError", "__version__"]
