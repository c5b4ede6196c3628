"""Ground-truth machinery the samplers are judged against.

Three independent routes to the same posteriors: the conjugate closed form
(regression with trigonometric features), brute-force quadrature on a grid,
and exact draws from a GaussianDist. Chain summaries (batch-means standard
errors, autocorrelation, ESS), predictive distributions, and a finite
difference Fokker-Planck residual complete the toolbox.

The FPE residual evaluates div(-s*rho + eta*div(D*rho)) for a drift field s,
diffusion field D, and candidate stationary log-density phi (rho = exp(-phi),
grid-normalized). A true stationary pair drives the interior L2 norm to zero
at second order in the mesh width; a violated stationarity condition leaves
it O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from artifact.model import (Dataset, ModelSpec, TrigRegression, features,
                            neg_log_joint)

__all__ = [
    "GaussianDist",
    "GridDensity",
    "conjugate_posterior",
    "grid_posterior",
    "laplace_axes",
    "gaussian_kl",
    "chain_moments",
    "autocorrelation",
    "effective_sample_size",
    "predictive_mc",
    "predictive_analytic",
    "fpe_residual",
]


@dataclass(frozen=True, eq=False)
class GaussianDist:
    """Multivariate Gaussian given by mean and SPD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be a vector and cov d x d")
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=0.0):
            raise ValueError("covariance must be symmetric within 1e-12")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        object.__setattr__(self, "_chol", chol)

    @property
    def d(self) -> int:
        return self.mean.size

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.d))
        return self.mean + z @ self._chol.T

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        dev = x - self.mean
        half = np.linalg.solve(self._chol, dev.T)
        quad = np.sum(half * half, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        out = -0.5 * (quad + logdet + self.d * math.log(2.0 * math.pi))
        return out if out.size > 1 else float(out[0])


def _trapz_nd(values: np.ndarray, axes) -> float:
    out = values
    for ax in reversed(axes):
        out = np.trapezoid(out, x=ax, axis=-1)
    return float(out)


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Normalized density tabulated on a uniform rectangular grid.

    log_density holds log rho on the grid; log_evidence is the log of the
    normalizer of exp(-f), i.e. the model evidence when f is the negative
    log-joint.
    """

    axes: tuple
    log_density: np.ndarray
    log_evidence: float

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        object.__setattr__(self, "axes", axes)
        if not 1 <= len(axes) <= 3:
            raise ValueError("grid densities support 1 to 3 dimensions")
        for a in axes:
            if a.size < 5:
                raise ValueError("need at least 5 points per axis")
            steps = np.diff(a)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise ValueError("axes must be uniform")
        if self.log_density.shape != tuple(a.size for a in axes):
            raise ValueError("log_density shape does not match axes")
        total = _trapz_nd(np.exp(self.log_density), axes)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"density integrates to {total}, not 1")

    @property
    def density(self) -> np.ndarray:
        return np.exp(self.log_density)

    def moments(self):
        """Trapezoid-rule mean vector and covariance matrix."""
        rho = self.density
        mesh = np.meshgrid(*self.axes, indexing="ij")
        d = len(self.axes)
        mean = np.array([_trapz_nd(m * rho, self.axes) for m in mesh])
        cov = np.empty((d, d))
        for i in range(d):
            for j in range(i, d):
                cij = _trapz_nd((mesh[i] - mean[i]) * (mesh[j] - mean[j]) * rho,
                                self.axes)
                cov[i, j] = cov[j, i] = cij
        return mean, cov


# ------------------------------------------------------------ exact posterior

def conjugate_posterior(data: Dataset, omega: np.ndarray, lik_var: float,
                        prior: GaussianDist) -> GaussianDist:
    """Closed-form Gaussian posterior for y = phi(x)'theta + N(0, lik_var)."""
    if lik_var <= 0:
        raise ValueError("lik_var must be positive")
    if data.n == 0:
        return prior
    phi = features(data.records[:, 0], np.asarray(omega, dtype=float))
    y = data.records[:, 1]
    prec_prior = np.linalg.inv(prior.cov)
    prec = prec_prior + phi.T @ phi / lik_var
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ (phi.T @ y / lik_var + prec_prior @ prior.mean)
    return GaussianDist(mean=mean, cov=cov)


def grid_posterior(model: ModelSpec, data: Dataset | None, axes) -> GridDensity:
    """Brute-force quadrature posterior: exp(-f) normalized on the grid."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    if len(axes) > 3:
        raise ValueError("grids beyond 3 dimensions are not supported")
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    f = np.fromiter((neg_log_joint(model, th, data) for th in points),
                    dtype=float, count=points.shape[0])
    f = f.reshape(mesh[0].shape)
    fmin = float(f.min())
    scaled = np.exp(fmin - f)
    norm = _trapz_nd(scaled, axes)
    log_evidence = -fmin + math.log(norm)
    return GridDensity(axes=axes, log_density=(fmin - f) - math.log(norm),
                       log_evidence=log_evidence)


def laplace_axes(model: ModelSpec, data: Dataset | None, n_points: int = 301,
                 width: float = 8.0, theta0: np.ndarray | None = None):
    """Per-dimension grids centered at the MAP, spanning +-width Laplace sigmas.

    The MAP comes from scipy's BFGS on the negative log-joint; curvature from
    central second differences. Independent of the conjugate formulas, so the
    two posterior oracles never share inputs.
    """
    d = model.partition.d
    x0 = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float)
    fn = lambda th: neg_log_joint(model, th, data)
    res = optimize.minimize(fn, x0, method="BFGS")
    mode = res.x
    f0 = res.fun
    h = 1e-4
    # full Hessian so correlated posteriors get their marginal widths: the
    # per-axis curvature alone understates sigma by 1/sqrt(1 - rho^2)
    hess = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        hess[i, i] = (fn(mode + ei) - 2.0 * f0 + fn(mode - ei)) / (h * h)
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h
            hess[i, j] = hess[j, i] = (
                fn(mode + ei + ej) - fn(mode + ei - ej)
                - fn(mode - ei + ej) + fn(mode - ei - ej)) / (4.0 * h * h)
    try:
        var = np.diag(np.linalg.inv(hess))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("singular curvature at the mode") from exc
    if np.any(var <= 0):
        raise RuntimeError("non-convex curvature at the mode")
    sig = np.sqrt(var)
    return tuple(np.linspace(mode[i] - width * sig[i],
                             mode[i] + width * sig[i], n_points)
                 for i in range(d))


def gaussian_kl(p: GaussianDist, q: GaussianDist) -> float:
    """KL(p || q) in closed form; non-negative, zero iff p = q."""
    if p.d != q.d:
        raise ValueError("dimension mismatch")
    cho = cho_factor(q.cov)
    dev = q.mean - p.mean
    tr = float(np.trace(cho_solve(cho, p.cov)))
    quad = float(dev @ cho_solve(cho, dev))
    logdet_q = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    logdet_p = float(np.linalg.slogdet(p.cov)[1])
    return 0.5 * (tr + quad - p.d + logdet_q - logdet_p)


# ------------------------------------------------------------ chain summaries

def _chain_array(chain) -> np.ndarray:
    x = chain.samples if hasattr(chain, "samples") else np.asarray(chain)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.ndim != 2:
        raise ValueError("chain must be a 2-D sample matrix")
    return x


def chain_moments(chain, burn: int = 0):
    """(mean, covariance, batch-means standard errors) after burn-in.

    Standard errors use floor(sqrt(n)) batches, which stay valid under the
    autocorrelation a Markov chain carries; trailing rows that do not fill
    the last batch are dropped from the SE computation only.
    """
    x = _chain_array(chain)
    if burn < 0 or x.shape[0] - burn < 2:
        raise ValueError("need at least 2 post-burn samples")
    x = x[burn:]
    n = x.shape[0]
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    n_batches = max(2, math.isqrt(n))
    bs = n // n_batches
    means = x[: n_batches * bs].reshape(n_batches, bs, -1).mean(axis=1)
    se = means.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return mean, cov, se


def autocorrelation(x: np.ndarray, lag: int) -> float:
    """Sample autocorrelation of a scalar series at the given lag."""
    x = np.asarray(x, dtype=float).ravel()
    if not 0 <= lag < x.size:
        raise ValueError("lag out of range")
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        return 1.0 if lag == 0 else 0.0
    return float(np.dot(x[lag:], x[: x.size - lag]) / denom)


def effective_sample_size(x: np.ndarray) -> float:
    """ESS = n / (1 + 2 sum rho_k), truncating at the first non-positive
    autocorrelation (initial positive sequence rule)."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 2:
        return float(n)
    acc = 0.0
    for k in range(1, n):
        rho = autocorrelation(x, k)
        if rho <= 0.0:
            break
        acc += rho
    return n / (1.0 + 2.0 * acc)


# ----------------------------------------------------------------- predictive

def predictive_mc(chain, x_star: np.ndarray, model: TrigRegression,
                  lik_var: float, y: np.ndarray | None = None):
    """Monte-Carlo predictive over a posterior sample chain.

    Each sample theta_i contributes a Gaussian N(phi(x)'theta_i, lik_var);
    the predictive is their equal-weight mixture. Returns (mean, variance)
    per test point, plus the per-point negative log mixture density at y
    when y is given.
    """
    theta = _chain_array(chain)
    phi = features(np.asarray(x_star, dtype=float), model.omega)
    m = phi @ theta.T                      # n_test x n_samples member means
    mean = m.mean(axis=1)
    var = lik_var + m.var(axis=1)
    if y is None:
        return mean, var
    y = np.asarray(y, dtype=float)
    log_members = (-0.5 * (y[:, None] - m) ** 2 / lik_var
                   - 0.5 * math.log(2.0 * math.pi * lik_var))
    nll = -(logsumexp(log_members, axis=1) - math.log(theta.shape[0]))
    return mean, var, nll


def predictive_analytic(post: GaussianDist, phi: np.ndarray, lik_var: float):
    """Exact Gaussian predictive: mean phi'mu, variance phi'Sigma phi + lik_var."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.shape[1] != post.d:
        raise ValueError("feature dimension mismatch")
    mean = phi @ post.mean
    var = np.einsum("ij,jk,ik->i", phi, post.cov, phi) + lik_var
    return mean, var


# --------------------------------------------------------------- FPE residual

def fpe_residual(drift, diffusion, log_density, axes, eta: float = 1.0):
    """Pointwise stationarity residual and its interior L2 norm.

    1-D: drift and diffusion are arrays on the grid (shape (n,)).
    2-D: drift has shape (n1, n2, 2) and diffusion (n1, n2, 2, 2).
    log_density holds phi with rho = exp(-phi) normalized on the grid.

    Derivatives are second-order central differences (one-sided second-order
    at the boundary); two boundary layers are excluded from the norm so the
    interior stencils dominate. The norm is sqrt(prod(h) * sum r^2).
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    d = len(axes)
    if d not in (1, 2):
        raise ValueError("residuals are implemented for d in {1, 2}")
    steps = []
    for a in axes:
        if a.size < 5:
            raise ValueError("need at least 5 points per axis")
        df = np.diff(a)
        if not np.allclose(df, df[0], rtol=1e-9, atol=0.0):
            raise ValueError("axes must be uniform")
        steps.append(float(df[0]))

    phi = np.asarray(log_density, dtype=float)
    if phi.shape != tuple(a.size for a in axes):
        raise ValueError("log_density shape does not match the grid")
    rho = np.exp(-(phi - phi.min()))
    rho /= _trapz_nd(rho, axes)

    if d == 1:
        s = np.asarray(drift, dtype=float)
        dmat = np.asarray(diffusion, dtype=float)
        if dmat.ndim == 0:
            dmat = np.full_like(rho, float(dmat))
        flux = -s * rho + eta * np.gradient(dmat * rho, steps[0], edge_order=2)
        r = np.gradient(flux, steps[0], edge_order=2)
        interior = r[2:-2]
    else:
        s = np.asarray(drift, dtype=float)
        dmat = np.asarray(diffusion, dtype=float)
        if s.shape != rho.shape + (2,) or dmat.shape != rho.shape + (2, 2):
            raise ValueError("field shapes must be (n1,n2,2) and (n1,n2,2,2)")
        flux = np.empty_like(s)
        for i in range(2):
            div_i = np.zeros_like(rho)
            for j in range(2):
                div_i += np.gradient(dmat[..., i, j] * rho, steps[j], axis=j,
                                     edge_order=2)
            flux[..., i] = -s[..., i] * rho + eta * div_i
        r = (np.gradient(flux[..., 0], steps[0], axis=0, edge_order=2)
             + np.gradient(flux[..., 1], steps[1], axis=1, edge_order=2))
        interior = r[2:-2, 2:-2]

    norm = math.sqrt(float(np.prod(steps)) * float(np.sum(interior ** 2)))
    return r, norm
