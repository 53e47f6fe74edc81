"""EMFI rig orchestration: motion, pulse, trigger/power, simulated DUT, campaigns."""

__version__ = "0.1.0"
