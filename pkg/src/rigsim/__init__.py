"""Deterministic multi-sensor recording-rig simulator and analysis toolkit."""

__version__ = "0.1.0"
