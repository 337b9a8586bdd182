"""Extended hierarchical equations of motion for input-output observables of open quantum systems."""

__version__ = "0.1.0"
