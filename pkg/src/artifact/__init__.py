"""Stochastic-gradient MCMC laboratory.

Modules:
  model    - log-joints, gradients, datasets (trig regression, quadratic, logistic)
  noise    - diagonal SG-noise covariance and layer-wise lambda estimation (Gaussian route)
  stable   - alpha-stable tail fits and the Parseval-matched Gaussian scale (alpha route)
  samplers - SGD/SGLD/SGHMC/i-SGD steps and the chain-running loop
  oracle   - conjugate and grid posteriors, KL, chain moments, predictive laws,
             Fokker-Planck residual verifier
  harness  - experiment configs, orchestration, metrics, file outputs
  cli      - command line entry points (estimate/sample/evaluate/toy-demo/stable-fit/fpe-check)
"""

from artifact import harness, model, noise, oracle, samplers, stable

__all__ = ["model", "noise", "stable", "samplers", "oracle", "harness"]
__version__ = "0.1.0"
