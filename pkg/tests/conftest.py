import numpy as np

from artifact.model import Dataset, LayerPartition, QuadraticPotential


class SyntheticNoiseQuadratic(QuadraticPotential):
    """Quadratic potential whose minibatch gradients carry exact N(0, 2B) noise.

    The noise is injected through grad_log_prior (called once, unscaled, by
    grad_minibatch), so g = H(theta - mu) + eps with eps ~ N(0, 2*b_diag)
    regardless of the batch actually drawn. Stateful on purpose: each call
    advances the internal rng. Test double for the synthetic-noise oracles.
    """

    def __init__(self, mu, hessian, b_diag, seed, partition=None):
        super().__init__(mu, hessian, partition)
        self.b_diag = np.asarray(b_diag, dtype=float)
        if self.b_diag.shape != (self.d,):
            raise ValueError("b_diag length must match dimension")
        self._rng = np.random.default_rng(seed)

    def grad_log_prior(self, theta):
        eps = self._rng.normal(0.0, np.sqrt(2.0 * self.b_diag))
        return super().grad_log_prior(theta) - eps


def dummy_dataset(n=4):
    """Placeholder records for potentials that ignore their data term."""
    return Dataset(np.zeros((n, 1)))


def two_layer_partition():
    return LayerPartition.from_sizes([3, 2])
