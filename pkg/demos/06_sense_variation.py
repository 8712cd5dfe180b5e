"""Monte Carlo SA offset: decision error rate versus sigma for both mappings."""

from pscnn import monte_carlo_error_rate

print(" sigma   TWM      BWM")
for sigma, twm, bwm in monte_carlo_error_rate(1024, [0, 0.5, 1, 2, 4, 8], trials=10_000, seed=1):
    print(f"{sigma:6.1f}  {twm:.4f}   {bwm:.4f}")
