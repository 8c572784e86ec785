"""statlin-access: accessibility analysis for statistically linearized controlled SDEs."""

__version__ = "0.1.0"
