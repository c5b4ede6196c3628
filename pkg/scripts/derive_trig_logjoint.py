"""Straight-line recomputation of the trig-regression negative log-joint.

Independent of the library on purpose: everything is spelled out inline
(dataset generation, feature map, Gaussian log-densities) so the value it
prints can be frozen into tests/test_model.py as a cross-check against
model.neg_log_joint. Run: python3 scripts/derive_trig_logjoint.py
"""

import numpy as np

SEED = 123
W_TRUE = np.array([0.5, -0.3])
OMEGA = np.array([1.0, 2.0])
NOISE_VAR = 0.1
N = 5
THETA = np.array([0.2, -0.1])


def main():
    # data generation, same protocol as model.make_toy_dataset
    rng = np.random.default_rng(SEED)
    x = rng.uniform(-1.0, 1.0, size=N)
    y = np.empty(N)
    eps = rng.normal(0.0, np.sqrt(NOISE_VAR), size=N)
    for i in range(N):
        y[i] = (W_TRUE[0] * np.cos(OMEGA[0] * x[i] - np.pi / 4)
                + W_TRUE[1] * np.cos(OMEGA[1] * x[i] - np.pi / 4)
                + eps[i])

    # negative log-joint, term by term
    total = 0.0
    for i in range(N):
        mean_i = (THETA[0] * np.cos(OMEGA[0] * x[i] - np.pi / 4)
                  + THETA[1] * np.cos(OMEGA[1] * x[i] - np.pi / 4))
        log_lik_i = (-0.5 * (y[i] - mean_i) ** 2 / NOISE_VAR
                     - 0.5 * np.log(2 * np.pi * NOISE_VAR))
        total -= log_lik_i
    log_prior = (-0.5 * (THETA[0] ** 2 + THETA[1] ** 2)
                 - 0.5 * 2 * np.log(2 * np.pi))
    total -= log_prior

    print("x =", repr(x))
    print("y =", repr(y))
    print("neg_log_joint(theta=[0.2, -0.1]) =", format(total, ".17g"))


if __name__ == "__main__":
    main()
