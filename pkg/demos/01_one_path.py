"""One dynamical path, step by step.

Every coordinate of an n-step Gaussian walk carries its own rate-one Poisson
clock.  When a clock rings, that coordinate is replaced by a fresh standard
normal.  The sum S_n(t) / sqrt(n) is piecewise constant in t and, for each
fixed t, a standard normal.

Run with ``python3 demos/01_one_path.py``.
"""

import math

import numpy as np

from dynwalk import brute_force_path, path_sup, sample_clocks, simulate_path
from dynwalk.clocks import count_changed, expected_changed
from dynwalk.walk import occupation_time

n = 2000
log = sample_clocks(n, horizon=1.0, seed=11)

# %% The clock log
# Roughly n clocks ring on [0, 1], so about n(1 - 1/e) distinct coordinates change.
print(f"events: {log.times.size}")
print(f"changed on (0, 1]: {count_changed(log, 0.0, 1.0)}  expected: {expected_changed(n, 0.0, 1.0):.0f}")

# %% The path
# Path values are the raw sums S_n(t); divide by sqrt(n) for the rescaled walk.
path = simulate_path(n, log, deviate_seed=5)
root = math.sqrt(n)
print(f"segments: {path.times.size}  start value: {path.values[0] / root:.3f}")
print(f"sup over [0, 1]: {path_sup(path) / root:.3f}")
print(f"sup over [0.25, 0.5): {path_sup(path, (0.25, 0.5)) / root:.3f}")
print(f"time spent below zero: {1 - occupation_time(path, 0.0):.3f}")

# %% The reference implementation agrees
small = sample_clocks(30, 1.0, seed=2)
fast, slow = simulate_path(30, small, 9), brute_force_path(30, small, 9)
print(f"fast vs brute force, max |diff|: {np.max(np.abs(fast.values - slow.values)):.1e}")
