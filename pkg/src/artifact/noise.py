"""Diagonal SG-noise covariance and layer-wise preconditioner estimation.

The minibatch gradient is modeled as g(theta) ~ N(grad f, 2B(theta)) with B
diagonal. This module estimates the per-layer isotropic level lambda^(p)
(Gaussian route) and the diagonal of B itself, with EMA filtering, the three
estimation schemes (a: estimate while training from scratch, b: continue
training from a pre-trained point, c: freeze theta), and the single-learning-
rate collapse. The heavy-tailed (alpha-stable) route lives in
artifact.stable; collect_noise_samples below feeds it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from artifact import jsonio
from artifact.model import Dataset, LayerPartition, ModelSpec, grad_minibatch

__all__ = [
    "LAMBDA_FLOOR",
    "NoiseEstimatorState",
    "LambdaSpec",
    "lambda_gaussian_instant",
    "lambda_naive_max",
    "ema_update",
    "ema_arrays",
    "empirical_b_diag",
    "estimate_lambdas",
    "collect_noise_samples",
    "slr_collapse",
    "layerwise_spec",
    "state_to_json",
    "state_from_json",
]

# floor for lambda^(p): avoids division by zero at exact critical points,
# where the instantaneous estimators return 0
LAMBDA_FLOOR = 1e-12


@dataclass(frozen=True)
class NoiseEstimatorState:
    """Filtered per-layer lambda^(p), diagonal B estimate, and EMA bookkeeping."""

    lam: np.ndarray        # one positive entry per partition group
    b_diag: np.ndarray     # length-d non-negative diagonal of B-hat
    mu: float              # EMA momentum in [0, 1)
    step_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "b_diag", np.asarray(self.b_diag, dtype=float))
        if not 0.0 <= self.mu < 1.0:
            raise ValueError("mu must lie in [0, 1)")
        if np.any(self.b_diag < 0):
            raise ValueError("b_diag must be non-negative")
        if self.step_count >= 1 and np.any(self.lam <= 0):
            raise ValueError("lambda entries must be positive once estimation has run")


@dataclass(frozen=True)
class LambdaSpec:
    """Preconditioner levels: one lambda per layer, or a single collapsed scalar."""

    mode: str              # "layerwise" | "slr"
    values: np.ndarray

    def __post_init__(self):
        if self.mode not in ("layerwise", "slr"):
            raise ValueError(f"unknown lambda mode {self.mode!r}")
        values = np.asarray(self.values, dtype=float)
        if self.mode == "slr" and values.size != 1:
            raise ValueError("slr mode carries a single scalar")
        object.__setattr__(self, "values", values)


def lambda_gaussian_instant(g: np.ndarray, partition: LayerPartition) -> np.ndarray:
    """Safe Gaussian-route estimate lambda^(p) = ||g^(p)||^2 / 2 per group."""
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient contains non-finite entries")
    return 0.5 * np.bincount(partition.group_of, weights=g * g,
                             minlength=partition.n_groups)


def lambda_naive_max(g: np.ndarray, partition: LayerPartition) -> np.ndarray:
    """Naive estimate lambda^(p) = max_{j in I_p} g_j^2 per group."""
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient contains non-finite entries")
    out = np.zeros(partition.n_groups)
    np.maximum.at(out, partition.group_of, g * g)  # g^2 >= 0, so 0 init is safe
    return out


def ema_arrays(old: np.ndarray, fresh: np.ndarray, mu: float) -> np.ndarray:
    """Convex combination mu*old + (1-mu)*fresh."""
    if not 0.0 <= mu < 1.0:
        raise ValueError("mu must lie in [0, 1)")
    return mu * np.asarray(old, dtype=float) + (1.0 - mu) * np.asarray(fresh, dtype=float)


def ema_update(state: NoiseEstimatorState, fresh: np.ndarray,
               mu: float | None = None) -> NoiseEstimatorState:
    """One EMA step on lambda: lambda^(p) <- mu*lambda^(p) + (1-mu)*fresh^(p)."""
    mu = state.mu if mu is None else mu
    lam = ema_arrays(state.lam, fresh, mu)
    return replace(state, lam=lam, step_count=state.step_count + 1)


def _draw_batch(rng: np.random.Generator, n: int, batch_size: int, replace: bool) -> np.ndarray:
    if batch_size < 1 or (not replace and batch_size > n):
        raise ValueError("batch size out of range")
    if replace:
        return rng.integers(0, n, size=batch_size)
    # subsets are unordered; sorting makes the full-batch case bit-deterministic
    return np.sort(rng.choice(n, size=batch_size, replace=False))


def empirical_b_diag(model: ModelSpec, theta: np.ndarray, data: Dataset,
                     m_draws: int, batch_size: int, seed: int = 0,
                     replace: bool = False) -> np.ndarray:
    """Diagonal of B-hat = half the per-coordinate sample variance of g at fixed theta.

    Minibatches default to without-replacement subsets, so batch_size == n
    gives exactly zero (no minibatch randomness); pass replace=True for the
    i.i.d. sampling-time noise model.
    """
    if m_draws < 2:
        raise ValueError("need at least 2 draws to estimate a variance")
    rng = np.random.default_rng(seed)
    draws = np.empty((m_draws, model.d))
    for k in range(m_draws):
        batch = _draw_batch(rng, data.n, batch_size, replace)
        draws[k] = grad_minibatch(model, theta, data, batch)
    # shift by the first draw: identical draws then give exactly zero variance
    return 0.5 * (draws - draws[0]).var(axis=0, ddof=1)


def estimate_lambdas(scheme: str, model: ModelSpec, data: Dataset,
                     theta0: np.ndarray, *, steps: int, batch_size: int,
                     mu: float = 0.5, step_size: float | None = None,
                     seed: int = 0, estimator: str = "gaussian",
                     replace: bool = False) -> tuple[NoiseEstimatorState, np.ndarray]:
    """Run estimation scheme a/b/c and return (state, final theta).

    a: estimate while training from scratch (theta0 is the fresh init);
    b: continue training from a pre-trained theta0 (inherited EMA state is
       reset, so a and b coincide when given the same theta0 and seed);
    c: freeze theta0 and average over `steps` minibatches.

    Schemes a/b take plain SGD steps of the supplied step_size. Both lambda
    and the diagonal B proxy (g_j^2/2) are EMA-filtered with momentum mu,
    seeded by the first fresh estimate. Lambda is floored at LAMBDA_FLOOR.
    """
    if scheme not in ("a", "b", "c"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if steps < 1:
        raise ValueError("estimation budget must be at least one step")
    if scheme in ("a", "b") and step_size is None:
        raise ValueError(f"scheme {scheme!r} trains, so step_size is required")
    if estimator == "gaussian":
        est = lambda_gaussian_instant
    elif estimator == "naive":
        est = lambda_naive_max
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    rng = np.random.default_rng(seed)
    theta = np.asarray(theta0, dtype=float).copy()
    partition = model.partition
    lam = None
    b = None
    for _ in range(steps):
        batch = _draw_batch(rng, data.n, batch_size, replace)
        g = grad_minibatch(model, theta, data, batch)
        fresh_lam = est(g, partition)
        fresh_b = 0.5 * g * g
        if lam is None:
            lam, b = fresh_lam, fresh_b
        else:
            lam = ema_arrays(lam, fresh_lam, mu)
            b = ema_arrays(b, fresh_b, mu)
        if scheme in ("a", "b"):
            theta = theta - step_size * g
    lam = np.maximum(lam, LAMBDA_FLOOR)
    return NoiseEstimatorState(lam=lam, b_diag=b, mu=mu, step_count=steps), theta


def collect_noise_samples(model: ModelSpec, data: Dataset, theta0: np.ndarray, *,
                          scheme: str, draws: int, batch_size: int,
                          mean_mu: float = 0.99, step_size: float | None = None,
                          seed: int = 0, replace: bool = False,
                          ) -> tuple[list[np.ndarray], np.ndarray]:
    """Pool centered gradient-noise samples per partition group.

    Feeds the alpha-stable route: the first gradient seeds an EMA running
    mean; every later draw contributes g - mean (evaluated before the mean
    absorbs it) for each coordinate, pooled over draws and coordinates within
    each group. Returns (per-group pools, final theta).

    mean_mu is the momentum of the centering mean, not the lambda filter.
    It defaults high: subtracting a noisy mean inflates the pooled variance
    by 1 + (1-mu)/(1+mu), which at 0.99 is a negligible 0.5%.
    """
    if scheme not in ("a", "b", "c"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if draws < 2:
        raise ValueError("need at least 2 draws to observe noise")
    if scheme in ("a", "b") and step_size is None:
        raise ValueError(f"scheme {scheme!r} trains, so step_size is required")

    rng = np.random.default_rng(seed)
    theta = np.asarray(theta0, dtype=float).copy()
    partition = model.partition
    mean = None
    pools: list[list[np.ndarray]] = [[] for _ in range(partition.n_groups)]
    for _ in range(draws):
        batch = _draw_batch(rng, data.n, batch_size, replace)
        g = grad_minibatch(model, theta, data, batch)
        if mean is None:
            mean = g.copy()
        else:
            noise = g - mean
            for p, group in enumerate(partition.groups):
                pools[p].append(noise[group])
            mean = ema_arrays(mean, g, mean_mu)
        if scheme in ("a", "b"):
            theta = theta - step_size * g
    return [np.concatenate(chunks) for chunks in pools], theta


def slr_collapse(state: NoiseEstimatorState) -> LambdaSpec:
    """Collapse layer-wise lambdas into the single learning rate sum_p lambda^(p)."""
    return LambdaSpec(mode="slr", values=np.array([float(np.sum(state.lam))]))


def layerwise_spec(state: NoiseEstimatorState) -> LambdaSpec:
    return LambdaSpec(mode="layerwise", values=state.lam.copy())


def state_to_json(state: NoiseEstimatorState) -> str:
    return jsonio.dumps({
        "lambda": state.lam,
        "b_diag": state.b_diag,
        "mu": state.mu,
        "step_count": state.step_count,
    })


def state_from_json(text: str) -> NoiseEstimatorState:
    raw = jsonio.loads(text)
    return NoiseEstimatorState(
        lam=np.asarray(raw["lambda"], dtype=float),
        b_diag=np.asarray(raw["b_diag"], dtype=float),
        mu=float(raw["mu"]),
        step_count=int(raw["step_count"]),
    )
