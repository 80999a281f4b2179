"""How often does the path cross a high level?

For 1 <= z << sqrt(n / ln n) the probability that the rescaled walk exceeds z
somewhere on [0, 1] is comparable to f(z) = z^2 Phibar(z), where Phibar is the
standard normal tail.  The sweep below estimates it with a 99% Wilson
interval, compares it with the band [f/18, 4f], and then repeats the question
for one frozen clock log and for the Ornstein-Uhlenbeck limit.

Run with ``python3 demos/02_tail_probabilities.py`` (about a minute on one core).
"""

from dynwalk import experiments as ex
from dynwalk import tail_f

n, M = 2000, 20_000

# %% Annealed sweep: clocks and deviates both random
sweep = ex.run_tail_sweep(n, [1.5, 2.0, 2.5], M, seed=1)
for b in sweep.bands:
    e = b.estimate
    print(f"{b.parameter}: p={e.p_hat:.4f} [{e.ci_low:.4f}, {e.ci_high:.4f}]  "
          f"band [{b.band[0]:.4f}, {b.band[1]:.4f}]  {b.verdict}")

# %% Quenched: one clock log, only the deviates resampled
q = ex.run_quenched_tail(n, 2.0, clock_seed=3, M=M, seed=1)
print(f"quenched z=2.0: p={q.bands[0].estimate.p_hat:.4f}  verdicts {[b.verdict for b in q.bands]}")

# %% The Ornstein-Uhlenbeck limit
ou = ex.run_ou_tail(2.0, h=1e-3, M=M, seed=1, halving=False)
p = ou.bands[0].estimate.p_hat
print(f"OU z=2.0: p={p:.4f}  p/f={p / tail_f(2.0):.2f}")
