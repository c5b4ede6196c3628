"""Probabilistic models: log-joints, gradients, and datasets.

The negative log-joint is f(theta) = -sum_i log p(U_i | theta) - log p(theta).
Built-in models:

  TrigRegression     1-D regression on D cosine features with a Gaussian
                     likelihood and N(0, I) prior; conjugate, so the exact
                     posterior is Gaussian (see oracle.conjugate_posterior).
  QuadraticPotential f(theta) = 0.5 (theta - mu)^T H (theta - mu); the exact
                     target is N(mu, H^-1) by construction.
  LogisticRegression small binary classifier; non-conjugate target for the
                     grid oracle.

All gradients are hand coded (no autodiff); finite-difference tests guard them.
Models and datasets are immutable after construction and safe to share between
concurrently running chains.
"""

from __future__ import annotations

import abc
import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LayerPartition",
    "Dataset",
    "ModelSpec",
    "TrigRegression",
    "QuadraticPotential",
    "LogisticRegression",
    "features",
    "neg_log_joint",
    "grad_full",
    "grad_minibatch",
    "make_toy_dataset",
    "dataset_to_csv",
    "dataset_from_csv",
    "central_difference_grad",
]


@dataclass(frozen=True)
class LayerPartition:
    """Ordered disjoint index groups I_p covering {0..d-1}.

    Layer-wise quantities (lambda^(p), per-group noise pools) are indexed by
    these groups. Groups must be non-empty, disjoint, and cover every
    coordinate exactly once.
    """

    groups: tuple[np.ndarray, ...]

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=np.intp) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise ValueError("partition needs at least one group")
        for g in groups:
            if g.size == 0:
                raise ValueError("empty group in partition")
        flat = np.concatenate(groups)
        if flat.size != np.unique(flat).size:
            raise ValueError("partition groups overlap")
        d = flat.size
        if not np.array_equal(np.sort(flat), np.arange(d)):
            raise ValueError("partition groups must cover exactly 0..d-1")
        # coordinate -> group lookup, used on every i-SGD step
        idx = np.empty(d, dtype=np.intp)
        for p, g in enumerate(groups):
            idx[g] = p
        object.__setattr__(self, "_group_of", idx)

    @property
    def d(self) -> int:
        return self._group_of.size

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def group_of(self) -> np.ndarray:
        """Length-d array mapping coordinate j to its group index p."""
        return self._group_of

    @staticmethod
    def single(d: int) -> "LayerPartition":
        return LayerPartition((np.arange(d),))

    @staticmethod
    def from_sizes(sizes) -> "LayerPartition":
        """Contiguous groups of the given sizes, e.g. (3, 2) -> {0,1,2},{3,4}."""
        edges = np.concatenate([[0], np.cumsum(sizes)])
        return LayerPartition(
            tuple(np.arange(a, b) for a, b in zip(edges[:-1], edges[1:]))
        )


@dataclass(frozen=True)
class Dataset:
    """N observations U_i, each an m-dimensional record (rows of `records`)."""

    records: np.ndarray

    def __post_init__(self):
        rec = np.atleast_2d(np.asarray(self.records, dtype=float))
        if rec.ndim != 2:
            raise ValueError("records must be a 2-D array (N, m)")
        object.__setattr__(self, "records", rec)

    @property
    def n(self) -> int:
        return self.records.shape[0]

    @property
    def m(self) -> int:
        return self.records.shape[1]


class ModelSpec(abc.ABC):
    """Interface for a differentiable log-joint.

    Subclasses expose per-record log-likelihoods/gradients plus vectorized
    sums over a record matrix (the sums are what samplers actually call).
    """

    d: int
    partition: LayerPartition

    @abc.abstractmethod
    def log_prior(self, theta: np.ndarray) -> float: ...

    @abc.abstractmethod
    def grad_log_prior(self, theta: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def log_lik(self, theta: np.ndarray, record: np.ndarray) -> float: ...

    @abc.abstractmethod
    def grad_log_lik(self, theta: np.ndarray, record: np.ndarray) -> np.ndarray: ...

    def log_lik_sum(self, theta: np.ndarray, records: np.ndarray) -> float:
        return float(sum(self.log_lik(theta, r) for r in records))

    def grad_log_lik_sum(self, theta: np.ndarray, records: np.ndarray) -> np.ndarray:
        out = np.zeros(self.d)
        for r in records:
            out += self.grad_log_lik(theta, r)
        return out

    def _check_theta(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.d,):
            raise ValueError(f"theta has shape {theta.shape}, model expects ({self.d},)")
        return theta


def features(x, omega: np.ndarray) -> np.ndarray:
    """Cosine feature map phi(x) = cos(omega x - pi/4), one row per input."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.cos(np.outer(x, omega) - np.pi / 4.0)


class TrigRegression(ModelSpec):
    """y = w^T cos(omega x - pi/4) + eps with eps ~ N(0, lik_var), prior N(0, I_D).

    Records are (x, y) pairs. The likelihood variance is fixed (0.1 unless
    stated otherwise), not inferred.
    """

    def __init__(self, omega: np.ndarray, lik_var: float = 0.1,
                 partition: LayerPartition | None = None):
        if lik_var <= 0:
            raise ValueError("lik_var must be positive")
        self.omega = np.asarray(omega, dtype=float)
        self.lik_var = float(lik_var)
        self.d = self.omega.size
        self.partition = partition if partition is not None else LayerPartition.single(self.d)
        if self.partition.d != self.d:
            raise ValueError("partition does not match feature dimension")

    def log_prior(self, theta):
        theta = self._check_theta(theta)
        return float(-0.5 * theta @ theta - 0.5 * self.d * np.log(2.0 * np.pi))

    def grad_log_prior(self, theta):
        return -self._check_theta(theta)

    def log_lik(self, theta, record):
        theta = self._check_theta(theta)
        x, y = record
        mean = features(x, self.omega)[0] @ theta
        return float(-0.5 * (y - mean) ** 2 / self.lik_var
                     - 0.5 * np.log(2.0 * np.pi * self.lik_var))

    def grad_log_lik(self, theta, record):
        theta = self._check_theta(theta)
        x, y = record
        phi = features(x, self.omega)[0]
        return (y - phi @ theta) / self.lik_var * phi

    def log_lik_sum(self, theta, records):
        theta = self._check_theta(theta)
        if len(records) == 0:
            return 0.0
        phi = features(records[:, 0], self.omega)
        resid = records[:, 1] - phi @ theta
        return float(-0.5 * resid @ resid / self.lik_var
                     - 0.5 * len(records) * np.log(2.0 * np.pi * self.lik_var))

    def grad_log_lik_sum(self, theta, records):
        theta = self._check_theta(theta)
        if len(records) == 0:
            return np.zeros(self.d)
        phi = features(records[:, 0], self.omega)
        resid = records[:, 1] - phi @ theta
        return phi.T @ resid / self.lik_var


class QuadraticPotential(ModelSpec):
    """Pure potential f(theta) = 0.5 (theta - mu)^T H (theta - mu), no data term.

    Implemented as a prior-only model: the whole potential sits in the
    (unnormalized) prior, and the likelihood is identically zero, so
    neg_log_joint == f for any dataset.
    """

    def __init__(self, mu: np.ndarray, hessian: np.ndarray,
                 partition: LayerPartition | None = None):
        mu = np.asarray(mu, dtype=float)
        hessian = np.asarray(hessian, dtype=float)
        if hessian.shape != (mu.size, mu.size):
            raise ValueError("hessian shape does not match mu")
        if not np.allclose(hessian, hessian.T, atol=1e-12):
            raise ValueError("hessian must be symmetric")
        np.linalg.cholesky(hessian)  # SPD check
        self.mu = mu
        self.hessian = hessian
        self.d = mu.size
        self.partition = partition if partition is not None else LayerPartition.single(self.d)
        if self.partition.d != self.d:
            raise ValueError("partition does not match dimension")

    def log_prior(self, theta):
        theta = self._check_theta(theta)
        delta = theta - self.mu
        return float(-0.5 * delta @ self.hessian @ delta)

    def grad_log_prior(self, theta):
        theta = self._check_theta(theta)
        return -self.hessian @ (theta - self.mu)

    def log_lik(self, theta, record):
        return 0.0

    def grad_log_lik(self, theta, record):
        return np.zeros(self.d)

    def log_lik_sum(self, theta, records):
        return 0.0

    def grad_log_lik_sum(self, theta, records):
        return np.zeros(self.d)

    def exact_posterior(self):
        """The target N(mu, H^-1) this potential encodes (ground truth)."""
        return self.mu.copy(), np.linalg.inv(self.hessian)


class LogisticRegression(ModelSpec):
    """Binary logistic model: p(t=1 | z, theta) = sigmoid(theta^T z), prior N(0, prior_var I).

    Records are (z_1..z_m, label) rows with labels in {0, 1}.
    """

    def __init__(self, n_features: int, prior_var: float = 1.0,
                 partition: LayerPartition | None = None):
        if not 2 <= n_features <= 10:
            raise ValueError("n_features must be in [2, 10]")
        if prior_var <= 0:
            raise ValueError("prior_var must be positive")
        self.d = int(n_features)
        self.prior_var = float(prior_var)
        self.partition = partition if partition is not None else LayerPartition.single(self.d)
        if self.partition.d != self.d:
            raise ValueError("partition does not match dimension")

    def log_prior(self, theta):
        theta = self._check_theta(theta)
        return float(-0.5 * theta @ theta / self.prior_var
                     - 0.5 * self.d * np.log(2.0 * np.pi * self.prior_var))

    def grad_log_prior(self, theta):
        return -self._check_theta(theta) / self.prior_var

    def log_lik(self, theta, record):
        theta = self._check_theta(theta)
        z, t = record[:-1], record[-1]
        a = z @ theta
        # t log sigmoid(a) + (1-t) log sigmoid(-a), stable via logaddexp
        return float(-t * np.logaddexp(0.0, -a) - (1.0 - t) * np.logaddexp(0.0, a))

    def grad_log_lik(self, theta, record):
        theta = self._check_theta(theta)
        z, t = record[:-1], record[-1]
        p = 1.0 / (1.0 + np.exp(-(z @ theta)))
        return (t - p) * z

    def log_lik_sum(self, theta, records):
        theta = self._check_theta(theta)
        if len(records) == 0:
            return 0.0
        z, t = records[:, :-1], records[:, -1]
        a = z @ theta
        return float(np.sum(-t * np.logaddexp(0.0, -a) - (1.0 - t) * np.logaddexp(0.0, a)))

    def grad_log_lik_sum(self, theta, records):
        theta = self._check_theta(theta)
        if len(records) == 0:
            return np.zeros(self.d)
        z, t = records[:, :-1], records[:, -1]
        p = 1.0 / (1.0 + np.exp(-(z @ theta)))
        return z.T @ (t - p)


def neg_log_joint(model: ModelSpec, theta: np.ndarray,
                  data: Dataset | None) -> float:
    """f(theta) = -sum_i log p(U_i | theta) - log p(theta).

    data=None means prior-only (the likelihood sum is empty)."""
    lik = 0.0 if data is None else model.log_lik_sum(theta, data.records)
    return -lik - model.log_prior(theta)


def grad_full(model: ModelSpec, theta: np.ndarray,
              data: Dataset | None) -> np.ndarray:
    """Exact gradient of neg_log_joint over the full dataset."""
    if data is None:
        return -model.grad_log_prior(theta)
    return -model.grad_log_lik_sum(theta, data.records) - model.grad_log_prior(theta)


def grad_minibatch(model: ModelSpec, theta: np.ndarray, data: Dataset,
                   batch: np.ndarray) -> np.ndarray:
    """Minibatch gradient g(theta) = -(N/N_b) sum_{i in batch} grad log p(U_i|theta) - grad log p(theta).

    `batch` is an index set into the dataset; duplicates are allowed (sampling
    with replacement keeps the estimate unbiased). Scaling by N/N_b makes
    E[g] = grad_full.
    """
    batch = np.asarray(batch, dtype=np.intp)
    if batch.size == 0:
        raise ValueError("empty minibatch")
    if batch.min() < 0 or batch.max() >= data.n:
        raise ValueError("minibatch index out of range")
    scale = data.n / batch.size
    return (-scale * model.grad_log_lik_sum(theta, data.records[batch])
            - model.grad_log_prior(theta))


def make_toy_dataset(n: int, w_true: np.ndarray, omega: np.ndarray,
                     noise_var: float = 0.1, seed: int = 0) -> Dataset:
    """Synthetic trig-regression data: x ~ U[-1, 1], y = w^T phi(x) + N(0, noise_var).

    Deterministic for a fixed seed. n = 0 yields an empty dataset (the
    posterior then equals the prior).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    w_true = np.asarray(w_true, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if w_true.shape != omega.shape:
        raise ValueError("w_true and omega must have the same length")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n)
    y = features(x, omega) @ w_true + rng.normal(0.0, np.sqrt(noise_var), size=n)
    return Dataset(np.column_stack([x, y]).reshape(n, 2))


def dataset_to_csv(data: Dataset, path) -> None:
    """Write records as CSV: header `x,y` for 2 columns, else `x1..xm,label`."""
    if data.m == 2:
        header = ["x", "y"]
    else:
        header = [f"x{j + 1}" for j in range(data.m - 1)] + ["label"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in data.records:
            writer.writerow([format(v, ".17g") for v in row])


def dataset_from_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    records = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return Dataset(records)


def central_difference_grad(fn, theta: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function, the gradient oracle."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for j in range(theta.size):
        hi = theta.copy()
        lo = theta.copy()
        hi[j] += step
        lo[j] -= step
        out[j] = (fn(hi) - fn(lo)) / (2.0 * step)
    return out
