"""Which growth envelopes does the path eventually stay below?

An envelope H is exceeded at arbitrarily large n exactly when the integral
of H(t)^3 Phibar(H(t)) dt / t diverges.  A fixed time walk has the same test
with H(t) in place of H(t)^3, so its threshold sits lower.  The family
sqrt(2 ln ln t + a ln ln ln t) therefore switches at a = 5 for the dynamical
walk and at a = 3 for a fixed time.

Run with ``python3 demos/03_integral_tests.py``.
"""

from dynwalk import GrowthEnvelope
from dynwalk.analytic import erdos_sequence, integral_test, static_erdos_test, sum_test

seq = erdos_sequence(20_000)

# %% The corollary family
for a in (2.5, 3.5, 4.5, 5.5):
    H = GrowthEnvelope.corollary(a)
    print(f"a={a}: dynamical {integral_test(H).classification:<10} "
          f"fixed time {static_erdos_test(H).classification:<10} "
          f"sum test {sum_test(H, seq).classification}")

# %% Scaled law of the iterated logarithm
for c in (0.9, 1.2):
    H = GrowthEnvelope.scaled_lil(c)
    print(f"c={c}: dynamical {integral_test(H).classification}")

# %% The Erdős sequence used by the sum test
print(f"e_20={seq[20]}  e_30={seq[30]}")
