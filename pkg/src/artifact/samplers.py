"""Discrete-time posterior samplers and the shared chain loop.

Four update rules over a common interface: plain SGD, SGLD, SGHMC, and the
isotropizing sampler. Each step function is pure (state in, state out, noise
drawn from the rng argument), so a zero-noise rng stub turns any of them into
its deterministic skeleton. run_chain owns minibatching, warm-up annealing,
thinning, divergence detection, and diagnostics.

The isotropizing update works per coordinate j in parameter group p:

    c_j  = max(lambda^(p) - b_j, 0)        injected noise level (clamped)
    w_j ~ N(0, 2*tau*c_j)
    theta'_j = theta_j - (g_j + w_j) / lambda^(p)

At tau = 1 with exact b the composite noise covariance per coordinate is
b_j + c_j = lambda^(p), matching the inverse preconditioner, which is the
stationarity condition the oracle module verifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from artifact import jsonio
from artifact.model import Dataset, LayerPartition, ModelSpec, grad_minibatch
from artifact.noise import LambdaSpec, NoiseEstimatorState, estimate_lambdas

__all__ = [
    "SamplerConfig",
    "SampleChain",
    "ChainDivergenceError",
    "sgd_step",
    "sgld_step",
    "sghmc_step",
    "isgd_step",
    "run_chain",
    "config_to_dict",
    "config_from_dict",
]

KINDS = ("sgd", "sgld", "sghmc", "isgd")
WARMUP_SCALE = 10.0  # warm-up starts at 10x the sampling step, decays to 1x


@dataclass(frozen=True, eq=False)
class SamplerConfig:
    """Chain settings. eta is required for sgd/sgld/sghmc; isgd derives its
    step from lambda and only uses eta as the SGD rate when an estimation
    scheme (a/b) runs first."""

    kind: str
    num_samples: int
    eta: float | None = None
    lambda_spec: LambdaSpec | None = None
    temperature: float = 1.0
    batch_size: int = 128
    warmup_steps: int = 0
    keepevery: int = 1
    seed: int = 0
    mass: float = 1.0
    c_diag: float | None = None
    lambda_tracking: str = "frozen"
    b_tracking: str = "ema"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.keepevery < 1:
            raise ValueError("keepevery must be >= 1")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.temperature <= 1.0:
            raise ValueError("temperature must lie in (0, 1]")
        if self.kind != "isgd" and (self.eta is None or self.eta <= 0):
            raise ValueError(f"{self.kind} requires eta > 0")
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be > 0 when given")
        if self.lambda_spec is not None and self.kind != "isgd":
            raise ValueError("lambda spec only applies to kind 'isgd'")
        if np.any(np.asarray(self.mass) <= 0):
            raise ValueError("mass must be positive")
        if self.c_diag is not None and np.any(np.asarray(self.c_diag) <= 0):
            raise ValueError("c_diag must be positive")
        if self.lambda_tracking not in ("frozen", "ema"):
            raise ValueError("lambda_tracking must be 'frozen' or 'ema'")
        if self.b_tracking not in ("ema", "zero", "fixed"):
            raise ValueError("b_tracking must be 'ema', 'zero', or 'fixed'")

    def sghmc_c_diag(self) -> float:
        """Friction noise diagonal; default 0.01/eta makes A = eta*C = 0.01."""
        if self.c_diag is not None:
            return self.c_diag
        return 0.01 / self.eta


class ChainDivergenceError(RuntimeError):
    """Raised when the chain leaves the finite domain; carries partial state."""

    def __init__(self, step: int, samples: np.ndarray, diagnostics: dict):
        super().__init__(f"non-finite parameter at step {step}")
        self.step = step
        self.samples = samples
        self.diagnostics = diagnostics


@dataclass(eq=False)
class SampleChain:
    """Kept samples plus the config snapshot and chain diagnostics."""

    samples: np.ndarray
    config: SamplerConfig
    diagnostics: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    def to_csv(self, path) -> None:
        d = self.samples.shape[1]
        with open(path, "w") as fh:
            fh.write(",".join(f"theta_{j}" for j in range(d)) + "\n")
            for row in self.samples:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")

    def sidecar(self) -> dict:
        return {
            "config": config_to_dict(self.config),
            "seed": self.config.seed,
            "diagnostics": self.diagnostics,
        }

    def sidecar_json(self) -> str:
        return jsonio.dumps(self.sidecar())


# ------------------------------------------------------------- step functions

def sgd_step(theta: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
    if eta <= 0:
        raise ValueError("eta must be > 0")
    return theta - eta * g


def sgld_step(theta: np.ndarray, g: np.ndarray, eta: float,
              rng: np.random.Generator) -> np.ndarray:
    """theta' = theta - eta*(g + w), w ~ N(0, 2/eta) per coordinate."""
    if eta <= 0:
        raise ValueError("eta must be > 0")
    w = math.sqrt(2.0 / eta) * rng.standard_normal(theta.shape)
    return theta - eta * (g + w)


def sghmc_step(theta: np.ndarray, r: np.ndarray, g: np.ndarray, eta: float,
               c_diag, m_diag, rng: np.random.Generator):
    """One momentum step, both updates from the incoming (theta, r):

    theta' = theta + eta * r / M
    r'     = r - eta*A*r/M - eta*(g + w),  A = eta*C,  w ~ N(0, 2*C)
    """
    if eta <= 0:
        raise ValueError("eta must be > 0")
    # c_diag = 0 is allowed: with a zero-noise rng it is the bare
    # Hamiltonian integrator, useful as a deterministic reference
    if np.any(np.asarray(c_diag) < 0) or np.any(np.asarray(m_diag) <= 0):
        raise ValueError("need c_diag >= 0 and m_diag > 0")
    w = np.sqrt(2.0 * c_diag) * rng.standard_normal(r.shape)
    theta_new = theta + eta * r / m_diag
    r_new = r - (eta * eta * c_diag) * r / m_diag - eta * (g + w)
    return theta_new, r_new


def isgd_step(theta: np.ndarray, g: np.ndarray, state: NoiseEstimatorState,
              partition: LayerPartition, tau: float,
              rng: np.random.Generator) -> np.ndarray:
    """Preconditioned step with isotropizing noise, clamped at c = 0."""
    if np.any(state.lam <= 0):
        raise ValueError("lambda must be positive for every group")
    lam_coord = state.lam[partition.group_of]
    c = np.maximum(lam_coord - state.b_diag, 0.0)
    w = np.sqrt(2.0 * tau * c) * rng.standard_normal(theta.shape)
    return theta - (g + w) / lam_coord


# ---------------------------------------------------------------- chain loop

def _resolve_noise_state(config: SamplerConfig, model: ModelSpec,
                         data: Dataset | None, noise, theta0: np.ndarray):
    """Turn the noise argument (state, scheme letter, or None) plus any
    lambda override in the config into a concrete NoiseEstimatorState."""
    partition = model.partition
    theta = theta0
    if isinstance(noise, str):
        if data is None:
            raise ValueError("estimation scheme requires a dataset")
        steps = config.warmup_steps if config.warmup_steps > 0 else 2000
        state, theta = estimate_lambdas(
            noise, model, data, theta0, steps=steps,
            batch_size=config.batch_size, step_size=config.eta,
            seed=config.seed + 1)
        noise = state
    if noise is None:
        if config.lambda_spec is None:
            raise ValueError("isgd needs a noise state, scheme, or lambda spec")
        noise = NoiseEstimatorState(
            lam=np.ones(partition.n_groups), b_diag=np.zeros(partition.d),
            mu=0.5, step_count=1)
    if not isinstance(noise, NoiseEstimatorState):
        raise TypeError("noise must be a NoiseEstimatorState, scheme letter, or None")
    if config.lambda_spec is not None:
        spec = config.lambda_spec
        if spec.mode == "slr":
            lam = np.full(partition.n_groups, spec.values[0])
        else:
            if len(spec.values) != partition.n_groups:
                raise ValueError("lambda spec length does not match group count")
            lam = np.asarray(spec.values, dtype=float)
        noise = NoiseEstimatorState(lam=lam, b_diag=noise.b_diag, mu=noise.mu,
                                    step_count=max(noise.step_count, 1))
    if config.b_tracking == "zero":
        noise = NoiseEstimatorState(lam=noise.lam,
                                    b_diag=np.zeros(partition.d),
                                    mu=noise.mu,
                                    step_count=max(noise.step_count, 1))
    return noise, theta


def run_chain(model: ModelSpec, data: Dataset | None, config: SamplerConfig,
              noise=None, rng: np.random.Generator | None = None, *,
              theta0: np.ndarray | None = None, grad_fn=None) -> SampleChain:
    """Run warm-up then record num_samples thinned samples.

    Total steps = warmup_steps + keepevery*num_samples; a sample is recorded
    every keepevery-th post-warm-up step. For the user-rate kinds (sgd, sgld)
    the warm-up scale anneals linearly from 10x down to 1x (adaptation phase;
    nothing is recorded). sghmc and isgd warm up at the sampling step size:
    the sghmc integrator is unstable above eta ~ A/h, and the isgd rate
    1/lambda is noise-matched rather than user-chosen, so neither tolerates
    a scaled-up step. Minibatches are drawn uniformly with replacement each
    step; grad_fn(theta, rng), when given, replaces minibatching entirely.

    noise: NoiseEstimatorState, estimation scheme letter ('a'/'b'/'c', run
    before the chain), or None (isgd then requires config.lambda_spec and
    injects the full isotropic level). Raises ChainDivergenceError with the
    step index, kept samples, and diagnostics if theta leaves the finite
    domain.
    """
    partition = model.partition
    d = partition.d
    if rng is None:
        rng = np.random.default_rng(config.seed)
    theta = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    if theta.shape != (d,):
        raise ValueError(f"theta0 must have shape ({d},)")

    is_isgd = config.kind == "isgd"
    track_lam = track_b = False
    if is_isgd:
        state, theta = _resolve_noise_state(config, model, data, noise, theta)
        lam = state.lam.copy()
        b_diag = state.b_diag.copy()
        mu = state.mu
        track_lam = config.lambda_tracking == "ema"
        track_b = config.b_tracking == "ema"
        lam_coord = lam[partition.group_of]
    elif noise is not None:
        raise ValueError("noise state applies only to kind 'isgd'")
    tracking = track_lam or track_b

    if config.kind == "sghmc":
        r = np.zeros(d)
        c_diag = config.sghmc_c_diag()
        m_diag = config.mass

    if grad_fn is None and data is None:
        raise ValueError("need a dataset or a grad_fn")
    n_records = data.n if data is not None else 0

    warmup = config.warmup_steps
    keepevery = config.keepevery
    tau = config.temperature
    total = warmup + keepevery * config.num_samples
    samples = np.empty((config.num_samples, d))
    lam_trace = np.empty((config.num_samples, partition.n_groups)) if is_isgd else None
    clamp_total = 0
    composite_dev_max = 0.0
    frozen_clamps = 0
    if is_isgd and not tracking:
        # frozen tracking: the clamp pattern never changes, count it once
        frozen_clamps = int(np.sum(b_diag > lam_coord))
        composite_dev_max = float(tau * np.max(np.maximum(b_diag - lam_coord, 0.0)))

    # only user-rate kinds anneal. sghmc: the explicit integrator is unstable
    # above eta ~ A/h, and a 10x step crosses that threshold. isgd: the rate
    # 1/lambda is set by the noise level, not the user; scaling the update by
    # s multiplies the injected-noise variance by s^2 but the drift by s,
    # breaking the targeted stationary law, and crosses the descent bound
    # 2*lambda/h whenever lambda < 5h. Their warm-up is plain burn-in.
    anneal = config.kind in ("sgd", "sgld")

    kept = 0
    for t in range(1, total + 1):
        scale = 1.0
        if anneal and t <= warmup:
            scale = WARMUP_SCALE + (1.0 - WARMUP_SCALE) * ((t - 1) / warmup)

        if grad_fn is not None:
            g = grad_fn(theta, rng)
        else:
            batch = rng.integers(0, n_records, size=config.batch_size)
            g = grad_minibatch(model, theta, data, batch)

        if config.kind == "sgd":
            theta = theta - (scale * config.eta) * g
        elif config.kind == "sgld":
            eta_t = scale * config.eta
            w = math.sqrt(2.0 / eta_t) * rng.standard_normal(d)
            theta = theta - eta_t * (g + w)
        elif config.kind == "sghmc":
            eta_t = scale * config.eta
            w = np.sqrt(2.0 * c_diag) * rng.standard_normal(d)
            theta_new = theta + eta_t * r / m_diag
            r = r - (eta_t * eta_t * c_diag) * r / m_diag - eta_t * (g + w)
            theta = theta_new
        else:
            if tracking:
                fresh_b = 0.5 * g * g
                if track_lam:
                    lam = mu * lam + (1.0 - mu) * np.bincount(
                        partition.group_of, weights=fresh_b,
                        minlength=partition.n_groups)
                    lam_coord = lam[partition.group_of]
                if track_b:
                    b_diag = mu * b_diag + (1.0 - mu) * fresh_b
                clamp_total += int(np.sum(b_diag > lam_coord))
                dev = tau * np.max(np.maximum(b_diag - lam_coord, 0.0))
                composite_dev_max = max(composite_dev_max, float(dev))
            # same arithmetic as isgd_step (isgd never anneals, scale == 1)
            c = np.maximum(lam_coord - b_diag, 0.0)
            w = np.sqrt(2.0 * tau * c) * rng.standard_normal(d)
            theta = theta - (g + w) / lam_coord

        if not np.all(np.isfinite(theta)):
            if is_isgd and not tracking:
                clamp_total = frozen_clamps * t
            diag = _diagnostics(config, total, t, clamp_total,
                                composite_dev_max, is_isgd, lam_trace, kept)
            raise ChainDivergenceError(t, samples[:kept].copy(), diag)

        if t > warmup and (t - warmup) % keepevery == 0:
            samples[kept] = theta
            if is_isgd:
                lam_trace[kept] = lam
            kept += 1

    if is_isgd and not tracking:
        clamp_total = frozen_clamps * total
    diag = _diagnostics(config, total, None, clamp_total, composite_dev_max,
                        is_isgd, lam_trace, kept)
    return SampleChain(samples=samples, config=config, diagnostics=diag)


def _diagnostics(config, total, divergence_step, clamp_total,
                 composite_dev_max, is_isgd, lam_trace, kept):
    diag = {
        "steps_total": total,
        "warmup_steps": config.warmup_steps,
        "divergence_step": divergence_step,
        "clamp_total": clamp_total,
        "composite_dev_max": composite_dev_max,
    }
    if is_isgd and lam_trace is not None:
        diag["lambda_trace"] = lam_trace[:kept]
    return diag


# ------------------------------------------------------------- serialization

def config_to_dict(config: SamplerConfig) -> dict:
    lam = None
    if config.lambda_spec is not None:
        lam = {"mode": config.lambda_spec.mode,
               "values": list(config.lambda_spec.values)}
    return {
        "kind": config.kind,
        "num_samples": config.num_samples,
        "eta": config.eta,
        "lambda": lam,
        "temperature": config.temperature,
        "batch_size": config.batch_size,
        "warmup_steps": config.warmup_steps,
        "keepevery": config.keepevery,
        "seed": config.seed,
        "mass": config.mass,
        "c_diag": config.c_diag,
        "lambda_tracking": config.lambda_tracking,
        "b_tracking": config.b_tracking,
    }


def config_from_dict(raw: dict) -> SamplerConfig:
    raw = dict(raw)
    lam = raw.pop("lambda", None)
    spec = None
    if lam is not None:
        spec = LambdaSpec(mode=lam["mode"], values=np.asarray(lam["values"]))
    return SamplerConfig(lambda_spec=spec, **raw)
