"""Fourth-order polarization interference and preselected Bell tests with linear optics."""

__version__ = "0.1.0"
