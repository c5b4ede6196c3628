"""Verifying stationary densities with the Fokker-Planck residual.

A candidate density rho is stationary for the SDE with drift s and
diffusion D exactly when div(-s rho + eta * div(D rho)) vanishes. On a
grid, the finite-difference residual of the true stationary density decays
as O(h^2) under refinement, while a wrong candidate's residual converges
to a nonzero function. This separates "looks close" from "is stationary".

The positive case is the preconditioned quadratic: drift -P grad f,
diffusion P^2 Sigma with eta P = 1/Sigma, whose stationary density is
exp(-f). The negative control doubles P, which doubles the effective
temperature, so exp(-f) is no longer stationary.

Run:  python3 demos/05_stationarity_check.py
"""

import numpy as np

from artifact.oracle import fpe_residual

eta, sigma = 0.1, 1.0
p = 1.0 / (eta * sigma)

print("1-D preconditioned quadratic, phi = x^2/2")
print("grid    residual (eta P = 1/Sigma)   residual (eta P = 2/Sigma)")
norms = []
for n in (201, 401, 801):
    x = np.linspace(-6.0, 6.0, n)
    _, good = fpe_residual(-p * x, np.full(n, p * p * sigma),
                           0.5 * x * x, (x,), eta=eta)
    _, bad = fpe_residual(-2 * p * x, np.full(n, 4 * p * p * sigma),
                          0.5 * x * x, (x,), eta=eta)
    norms.append(good)
    print(f"{n:5d}   {good:24.3e}   {bad:26.3e}")
print(f"refinement ratios for the true density: "
      f"{norms[0] / norms[1]:.2f}, {norms[1] / norms[2]:.2f} "
      "(~4 = second order)")
print("the wrong-temperature control plateaus instead of vanishing.\n")

# 2-D anisotropic case: drift -H x with H = diag(1, 4). The candidate
# density exp(-0.5 x' H x) = N(0, H^-1) is stationary exactly when
# eta D H = H, i.e. unit diffusion at eta = 1; inflating D on one axis
# overheats that axis and the residual stops converging.
h1, h2 = 1.0, 4.0
n = 161
x1 = np.linspace(-6.0, 6.0, n)
x2 = np.linspace(-3.5, 3.5, n)
g1, g2 = np.meshgrid(x1, x2, indexing="ij")
phi = 0.5 * (h1 * g1 ** 2 + h2 * g2 ** 2)
drift = np.stack([-h1 * g1, -h2 * g2], axis=-1)
diffusion = np.zeros((n, n, 2, 2))
diffusion[..., 0, 0] = 1.0
diffusion[..., 1, 1] = 1.0
_, ok = fpe_residual(drift, diffusion, phi, (x1, x2), eta=1.0)
diffusion[..., 1, 1] = 4.0           # one axis runs 4x too hot
_, broken = fpe_residual(drift, diffusion, phi, (x1, x2), eta=1.0)
print("2-D anisotropic Gaussian, unit diffusion vs one axis overheated:")
print(f"  residual matched:    {ok:.3e}")
print(f"  residual mismatched: {broken:.3e}  ({broken / ok:.0f}x larger)")
