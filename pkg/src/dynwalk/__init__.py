"""Simulation and verification toolkit for the dynamical Gaussian random walk.

Modules
-------
analytic
    Gaussian tails, tail bands, concentration bounds, growth envelopes,
    the Erdős sequence and integral tests.
clocks
    Poisson clock logs and changed-coordinate counts.
walk
    Event-driven path simulation, path functionals and quenched ensembles.
ou
    The stationary Ornstein-Uhlenbeck process and the sheet-based field.
experiments
    Monte Carlo suites with band verdicts and deterministic sharding.
report, cli
    JSON/CSV artifacts and the ``dynwalk`` command.
"""

from .analytic import DomainError, GrowthEnvelope, TailBand, normal_sf, tail_band, tail_f
from .clocks import ClockEventLog, sample_clocks
from .estimate import ConfigMismatch, Estimate, merge, wilson_interval
from .walk import WalkPath, brute_force_path, path_sup, simulate_path

__version__ = "0.1.0"

__all__ = [
    "DomainError", "GrowthEnvelope", "TailBand", "normal_sf", "tail_band", "tail_f",
    "ClockEventLog", "sample_clocks", "ConfigMismatch", "Estimate", "merge",
    "wilson_interval", "WalkPath", "brute_force_path", "path_sup", "simulate_path",
]
