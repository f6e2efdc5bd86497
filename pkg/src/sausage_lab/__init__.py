"""Simulation and potential theory for sausages of rotationally invariant stable processes."""

__version__ = "0.1.0"
