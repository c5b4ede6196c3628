"""Heavy-tailed gradient noise: tail-index fits and the matched Gaussian scale.

Minibatch gradient noise is not always Gaussian; a symmetric alpha-stable
law with tail index alpha < 2 fits the heavy-tailed case. The estimator
uses log-absolute block sums (stability under summation makes 1/alpha the
slope), and the matched Gaussian scale comes from equating the stable and
Gaussian characteristic functions at the Parseval-optimal frequency r,
which stays near 1/sqrt(2) across the whole alpha range.

Run:  python3 demos/04_heavy_tails.py
"""

import numpy as np

from artifact.stable import (expected_exp_term, fit_alpha_stable,
                             matched_sigma, optimal_r)

rng = np.random.default_rng(0)
n = 500_000

print("fits on synthetic draws (n = 5e5)")
print("true law                alpha-hat   c-hat    matched sigma")
gauss = rng.normal(0.0, 2.0, size=n)
fit = fit_alpha_stable(gauss)
print(f"Gaussian sigma=2         {fit.alpha:7.3f}  {fit.c:7.3f}  {fit.sigma:9.3f}"
      f"   (c should be sigma/sqrt2 = {2/np.sqrt(2):.3f})")
cauchy = rng.standard_cauchy(n) * 0.5
fit = fit_alpha_stable(cauchy)
print(f"Cauchy scale=0.5         {fit.alpha:7.3f}  {fit.c:7.3f}  {fit.sigma:9.3f}")
mix = np.where(rng.uniform(size=n) < 0.9, rng.normal(0, 1, n),
               rng.normal(0, 10, n))
fit = fit_alpha_stable(mix)
print(f"90/10 Gaussian mixture   {fit.alpha:7.3f}  {fit.c:7.3f}  {fit.sigma:9.3f}"
      "   (tails drag alpha below 2)")

print("\nParseval-optimal matching frequency r(alpha)")
print("alpha    r_opt     vs 1/sqrt(2)")
for alpha in (2.0, 1.5, 1.0, 0.6, 0.5):
    r = optimal_r(alpha)
    print(f"{alpha:4.1f}  {r:8.6f}   {r * np.sqrt(2.0):+7.4f}x")
print("the optimum drifts by only a few percent, which is why the fast "
      "path\nsigma = sqrt(2) c is a serviceable approximation:")
for alpha in (1.5, 1.0, 0.6):
    exact = matched_sigma(1.0, alpha)
    fast = matched_sigma(1.0, alpha, fast=True)
    print(f"  alpha {alpha}: exact {exact:.4f}  fast {fast:.4f}  "
          f"({abs(fast / exact - 1) * 100:.1f}% apart)")

print("\nclosed-form anchor at alpha = 2: E(r, 2) = 1/sqrt(1 + 2 r^2)")
for r in (0.25, 1.0 / np.sqrt(2.0), 2.0):
    got = expected_exp_term(r, 2.0)
    want = 1.0 / np.sqrt(1.0 + 2.0 * r * r)
    print(f"  r = {r:5.3f}: quadrature {got:.10f}  closed form {want:.10f}")
