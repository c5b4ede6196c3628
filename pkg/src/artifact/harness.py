"""Experiment orchestration: config parsing, pipelines, metrics, file I/O.

Configuration is a flat key-value text document ("key = value" lines, '#'
comments). Dotted prefixes group related keys. The canonical key set:

    seed                    rng seed (required; no silent nondeterminism)
    out                     output directory (the CLI --out flag overrides)
    model.kind              trig | logistic
    model.omega             comma-separated feature frequencies (trig)
    model.lik_var           observation noise variance (trig)
    model.groups            comma-separated group sizes (default: one group)
    data.path               CSV dataset to load instead of synthesizing
    data.n                  synthetic training-set size
    data.w_true             generating weights for synthetic data
    data.noise_var          generating noise variance
    data.seed               synthetic-data rng seed (default: seed)
    data.test_n             held-out synthetic test-set size
    sampler.kind            sgd | sgld | sghmc | isgd | exact
    sampler.eta             step size (plain kinds; estimation SGD rate for isgd)
    sampler.temperature     injected-noise temperature tau in (0, 1]
    sampler.batch_size      minibatch size
    sampler.warmup          warm-up steps before recording
    sampler.keepevery       thinning interval
    sampler.num_samples     recorded samples
    sampler.mass            sghmc mass diagonal (scalar)
    sampler.c_diag          sghmc injected-noise diagonal (default 0.01/eta)
    sampler.lambda_tracking frozen | ema
    sampler.b_tracking      ema | zero | fixed
    noise.estimator         gaussian | alpha
    noise.scheme            a | b | c
    noise.mu                EMA momentum for lambda/b estimation
    noise.steps             estimation steps
    noise.draws             gradient draws pooled for the alpha fit
    noise.step_size         SGD rate during schemes a/b
    noise.fast              fast Gaussian matching (sqrt(2)c) for alpha fits
    lambda.mode             layerwise | slr
    eval.grid_lo/grid_hi/grid_n   predictive evaluation grid
    stable.input            CSV of draws for the stable-fit command
    fpe.points              comma-separated grid sizes for the fpe-check command

parse_config materializes every default, so serialize_config(parse_config(t))
re-parses to the identical config. Unknown keys and missing required keys are
errors that name the offending keys.
"""

from __future__ import annotations

import hashlib
import math
import os.path
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from artifact import jsonio
from artifact.model import (Dataset, LayerPartition, LogisticRegression,
                            TrigRegression, dataset_from_csv, features,
                            make_toy_dataset)
from artifact.noise import (collect_noise_samples, estimate_lambdas,
                            slr_collapse, state_to_json)
from artifact.oracle import (GaussianDist, chain_moments, conjugate_posterior,
                             fpe_residual, gaussian_kl, predictive_analytic,
                             predictive_mc)
from artifact.samplers import (ChainDivergenceError, SamplerConfig, run_chain)
from artifact.stable import fit_alpha_stable, fit_to_json, lambda_alpha

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "raw_pairs",
    "parse_config",
    "serialize_config",
    "toy_default_config",
    "TOY_DEFAULTS",
    "split_dataset",
    "run_estimation",
    "run_experiment",
    "run_stable_fit",
    "run_fpe_check",
    "evaluate_metrics",
]


class ConfigError(ValueError):
    """Malformed, unknown, or missing configuration keys."""


def _floats(text: str):
    return tuple(float(v) for v in text.split(","))


def _ints(text: str):
    return tuple(int(v) for v in text.split(","))


def _bool(text: str) -> bool:
    if text in ("true", "false"):
        return text == "true"
    raise ValueError("expected true or false")


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


REQUIRED = object()

# key -> (parser, default); REQUIRED keys must appear; None defaults are
# "absent" and serialize as empty
KEY_TABLE = {
    "seed": (int, REQUIRED),
    "out": (str, "out"),
    "model.kind": (_choice("trig", "logistic"), "trig"),
    "model.omega": (_floats, (1.0, 2.0)),
    "model.lik_var": (float, 0.1),
    "model.groups": (_ints, None),
    "data.path": (str, None),
    "data.n": (int, 30),
    "data.w_true": (_floats, (0.5, -0.3)),
    "data.noise_var": (float, 0.1),
    "data.seed": (int, None),          # default: seed
    "data.test_n": (int, 50),
    "sampler.kind": (_choice("sgd", "sgld", "sghmc", "isgd", "exact"), "isgd"),
    "sampler.eta": (float, None),
    "sampler.temperature": (float, 1.0),
    "sampler.batch_size": (int, 128),
    "sampler.warmup": (int, 2000),
    "sampler.keepevery": (int, 2000),
    "sampler.num_samples": (int, 100),
    "sampler.mass": (float, 1.0),
    "sampler.c_diag": (float, None),
    "sampler.lambda_tracking": (_choice("frozen", "ema"), "frozen"),
    "sampler.b_tracking": (_choice("ema", "zero", "fixed"), "ema"),
    "noise.estimator": (_choice("gaussian", "alpha"), "gaussian"),
    "noise.scheme": (_choice("a", "b", "c"), "c"),
    "noise.mu": (float, 0.5),
    "noise.steps": (int, 2000),
    "noise.draws": (int, 500),
    "noise.step_size": (float, 1e-3),
    "noise.fast": (_bool, False),
    "lambda.mode": (_choice("layerwise", "slr"), "layerwise"),
    "eval.grid_lo": (float, -2.0),
    "eval.grid_hi": (float, 2.0),
    "eval.grid_n": (int, 101),
    "stable.input": (str, None),
    "fpe.points": (_ints, (201, 401, 801)),
}

_PATH_KEYS = ("data.path", "stable.input")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration: every canonical key has an explicit value."""

    values: tuple  # sorted (key, value) pairs; hashable and order-stable

    def __getitem__(self, key: str):
        for k, v in self.values:
            if k == key:
                return v
        raise KeyError(key)

    def with_value(self, key: str, value):
        if key not in KEY_TABLE:
            raise ConfigError(f"unknown config key: {key}")
        pairs = tuple((k, value if k == key else v) for k, v in self.values)
        return ExperimentConfig(values=pairs)


def raw_pairs(text: str) -> dict:
    """key -> value-text for the lines of a config document, unvalidated."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in raw:
            raise ConfigError(f"duplicate key: {key}")
        raw[key] = value
    return raw


def parse_config(text: str, *, seed_override: int | None = None) -> ExperimentConfig:
    """Parse and validate a config document; fill defaults explicitly.

    seed_override replaces (or supplies) the seed before defaults resolve,
    so derived defaults like data.seed follow it.
    """
    raw = raw_pairs(text)
    if seed_override is not None:
        raw["seed"] = str(int(seed_override))

    unknown = sorted(set(raw) - set(KEY_TABLE))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = sorted(k for k, (_, dft) in KEY_TABLE.items()
                     if dft is REQUIRED and k not in raw)
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(missing)}")

    resolved = {}
    for key, (parser, default) in KEY_TABLE.items():
        if key in raw:
            try:
                resolved[key] = parser(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
        else:
            resolved[key] = default
    if resolved["data.seed"] is None:
        resolved["data.seed"] = resolved["seed"]

    for key in _PATH_KEYS:
        if resolved[key] is not None and not os.path.exists(resolved[key]):
            raise ConfigError(f"{key} does not exist: {resolved[key]}")

    return ExperimentConfig(values=tuple(sorted(resolved.items())))


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    lines = []
    for key, value in config.values:
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


TOY_DEFAULTS = {
    # small batches keep the gradient-noise level high enough that the
    # preconditioner 1/lambda stays below the stability threshold 2/h_max
    "sampler.kind": "isgd",
    "sampler.batch_size": 8,
    "noise.estimator": "alpha",
    "noise.scheme": "c",
}


def toy_default_config(seed: int = 0, overrides: dict | None = None) -> ExperimentConfig:
    cfg = parse_config(f"seed = {seed}\n")
    for key, value in TOY_DEFAULTS.items():
        cfg = cfg.with_value(key, value)
    for key, value in (overrides or {}).items():
        cfg = cfg.with_value(key, value)
    return cfg


# ------------------------------------------------------------------ pipeline

def split_dataset(data: Dataset, test_fraction: float, seed: int):
    """Deterministic shuffle split into (train, test)."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    perm = np.random.default_rng(seed).permutation(data.n)
    n_test = int(round(test_fraction * data.n))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    return (Dataset(records=data.records[np.sort(train_idx)]),
            Dataset(records=data.records[np.sort(test_idx)]))


def _build_model(config: ExperimentConfig, n_features: int | None = None):
    groups = config["model.groups"]
    partition = LayerPartition.from_sizes(groups) if groups is not None else None
    if config["model.kind"] == "trig":
        return TrigRegression(omega=np.asarray(config["model.omega"]),
                              lik_var=config["model.lik_var"],
                              partition=partition)
    if n_features is None:
        raise ConfigError("logistic models need data.path to fix n_features")
    return LogisticRegression(n_features=n_features, partition=partition)


def _build_data(config: ExperimentConfig):
    """(train, test) datasets per the config; test may be empty."""
    if config["data.path"] is not None:
        full = dataset_from_csv(config["data.path"])
        return split_dataset(full, 0.1, config["data.seed"])
    if config["model.kind"] != "trig":
        raise ConfigError("synthetic data generation supports only model.kind = trig")
    omega = np.asarray(config["model.omega"])
    w_true = np.asarray(config["data.w_true"])
    train = make_toy_dataset(config["data.n"], w_true, omega,
                             noise_var=config["data.noise_var"],
                             seed=config["data.seed"])
    test = make_toy_dataset(config["data.test_n"], w_true, omega,
                            noise_var=config["data.noise_var"],
                            seed=config["data.seed"] + 1)
    return train, test


def _build_sampler_config(config: ExperimentConfig) -> SamplerConfig:
    return SamplerConfig(
        kind=config["sampler.kind"],
        num_samples=config["sampler.num_samples"],
        eta=config["sampler.eta"],
        temperature=config["sampler.temperature"],
        batch_size=config["sampler.batch_size"],
        warmup_steps=config["sampler.warmup"],
        keepevery=config["sampler.keepevery"],
        seed=config["seed"],
        mass=config["sampler.mass"],
        c_diag=config["sampler.c_diag"],
        lambda_tracking=config["sampler.lambda_tracking"],
        b_tracking=config["sampler.b_tracking"],
    )


def run_estimation(config: ExperimentConfig, model, data: Dataset):
    """Noise estimation per the config: returns (state, theta_final).

    gaussian: EMA lambda/b estimation along the scheme's trajectory.
    alpha: the same EMA pass supplies b and the trajectory; pooled centered
    gradient draws are then fit per group and the matched isotropic levels
    sigma^2/2 replace lambda.
    """
    theta0 = np.zeros(model.partition.d)
    scheme = config["noise.scheme"]
    state, theta = estimate_lambdas(
        scheme, model, data, theta0,
        steps=config["noise.steps"], batch_size=config["sampler.batch_size"],
        mu=config["noise.mu"], step_size=config["noise.step_size"],
        seed=config["seed"] + 1)
    if config["noise.estimator"] == "alpha":
        pools, _ = collect_noise_samples(
            model, data, theta, scheme="c", draws=config["noise.draws"],
            batch_size=config["sampler.batch_size"],
            seed=config["seed"] + 2)
        lam = lambda_alpha(pools, fast=config["noise.fast"])
        state = replace(state, lam=np.maximum(lam, 1e-12))
    return state, theta


def evaluate_metrics(chain, model, data_test: Dataset, lik_var: float,
                     analytic: GaussianDist | None = None) -> dict:
    """Held-out metrics: RMSE/MNLL for regression, accuracy/MNLL for
    classification, KL(moment-matched chain || analytic) when available."""
    samples = chain.samples if hasattr(chain, "samples") else np.asarray(chain)
    if samples.shape[0] < 1 or data_test.n < 1:
        raise ValueError("need a non-empty chain and test set")
    metrics = {"rmse": None, "mnll": None, "accuracy": None, "kl": None}
    if isinstance(model, TrigRegression):
        x, y = data_test.records[:, 0], data_test.records[:, 1]
        mean, _, nll = predictive_mc(samples, x, model, lik_var, y=y)
        metrics["rmse"] = float(np.sqrt(np.mean((mean - y) ** 2)))
        metrics["mnll"] = float(np.mean(nll))
    elif isinstance(model, LogisticRegression):
        z, t = data_test.records[:, :-1], data_test.records[:, -1]
        probs = 1.0 / (1.0 + np.exp(-(z @ samples.T)))
        p_mean = probs.mean(axis=1)
        metrics["accuracy"] = float(np.mean((p_mean > 0.5) == (t > 0.5)))
        p_true = np.where(t > 0.5, p_mean, 1.0 - p_mean)
        metrics["mnll"] = float(np.mean(-np.log(np.clip(p_true, 1e-300, None))))
    if analytic is not None and samples.shape[0] > samples.shape[1]:
        mean, cov, _ = chain_moments(samples)
        try:
            fit = GaussianDist(mean=mean, cov=0.5 * (cov + cov.T))
            metrics["kl"] = float(gaussian_kl(fit, analytic))
        except (ValueError, np.linalg.LinAlgError):
            # a numerically wrecked chain (huge finite values, degenerate
            # covariance) has no meaningful KL; the other metrics still report
            metrics["kl"] = None
    return metrics


def _json_safe(obj):
    """Replace non-finite floats with null; divergence diagnostics hold inf."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_csv(path, header: str, columns) -> None:
    rows = np.column_stack(columns)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def _write_samples_csv(path, samples: np.ndarray) -> None:
    d = samples.shape[1]
    _write_csv(path, ",".join(f"theta_{j}" for j in range(d)),
               [samples[:, j] for j in range(d)])


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _finish_manifest(command: str, config: ExperimentConfig, out_dir,
                     written: list, status: str) -> dict:
    manifest = {
        "command": command,
        "status": status,
        "seed": config["seed"],
        "config": serialize_config(config),
        "files": {name: _sha256(out_dir / name) for name in sorted(written)},
    }
    jsonio.dump_path(manifest, out_dir / "manifest.json")
    return manifest


def run_experiment(config: ExperimentConfig, out_dir, *, command: str = "evaluate",
                   stages: str = "full") -> dict:
    """Estimation -> sampling -> evaluation, writing artifacts to out_dir.

    stages: "estimate" stops after noise estimation, "sample" after the
    chain, "full" adds predictive grids and metrics. Returns the manifest
    (also written to manifest.json). A diverged chain still writes partial
    samples and metrics; the manifest status says "diverged".
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    train, test = _build_data(config)
    n_features = train.records.shape[1] - 1 if config["data.path"] else None
    model = _build_model(config, n_features=n_features)
    lik_var = config["model.lik_var"]

    analytic = None
    if isinstance(model, TrigRegression):
        prior = GaussianDist(mean=np.zeros(model.partition.d),
                             cov=np.eye(model.partition.d))
        analytic = conjugate_posterior(train, model.omega, lik_var, prior)

    state = None
    theta_start = np.zeros(model.partition.d)
    needs_state = config["sampler.kind"] == "isgd" or stages == "estimate"
    if needs_state:
        state, theta_start = run_estimation(config, model, train)
        if config["lambda.mode"] == "slr":
            spec = slr_collapse(state)
            state = replace(state, lam=np.full(model.partition.n_groups,
                                               spec.values[0]))
        with open(out_dir / "lambda_state.json", "w") as fh:
            fh.write(state_to_json(state) + "\n")
        written.append("lambda_state.json")
    if stages == "estimate":
        return _finish_manifest(command, config, out_dir, written, "ok")

    status = "ok"
    diagnostics = {}
    if config["sampler.kind"] == "exact":
        if analytic is None:
            raise ConfigError("sampler.kind = exact needs an analytic posterior")
        rng = np.random.default_rng(config["seed"])
        samples = analytic.sample(rng, config["sampler.num_samples"])
    else:
        sampler_config = _build_sampler_config(config)
        try:
            chain = run_chain(model, train, sampler_config, noise=state,
                              theta0=theta_start)
            samples = chain.samples
            diagnostics = chain.diagnostics
        except ChainDivergenceError as err:
            status = "diverged"
            samples = err.samples
            diagnostics = err.diagnostics
    _write_samples_csv(out_dir / "samples.csv", samples)
    written.append("samples.csv")

    metrics = {"status": status, "diagnostics": diagnostics,
               "lambda": None if state is None else state.lam}
    if stages == "full" and status == "ok" and isinstance(model, TrigRegression):
        x_grid = np.linspace(config["eval.grid_lo"], config["eval.grid_hi"],
                             config["eval.grid_n"])
        mc_mean, mc_var = predictive_mc(samples, x_grid, model, lik_var)
        _write_csv(out_dir / "predictive_mc.csv", "x,mean,std",
                   [x_grid, mc_mean, np.sqrt(mc_var)])
        written.append("predictive_mc.csv")
        a_mean, a_var = predictive_analytic(analytic,
                                            features(x_grid, model.omega),
                                            lik_var)
        _write_csv(out_dir / "predictive_analytic.csv", "x,mean,std",
                   [x_grid, a_mean, np.sqrt(a_var)])
        written.append("predictive_analytic.csv")
    if stages == "full" and status == "ok" and test.n > 0:
        metrics.update(evaluate_metrics(samples, model, test, lik_var,
                                        analytic=analytic))
    jsonio.dump_path(_json_safe(metrics), out_dir / "metrics.json")
    written.append("metrics.json")

    return _finish_manifest(command, config, out_dir, written, status)


# ------------------------------------------------------- standalone commands

def run_stable_fit(config: ExperimentConfig, out_dir) -> dict:
    """Fit tail index and matched scale to draws from a CSV (one value per
    cell; all cells pooled; an optional header row is skipped)."""
    if config["stable.input"] is None:
        raise ConfigError("stable-fit requires stable.input")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(config["stable.input"]) as fh:
        first = fh.readline()
    try:
        [float(cell) for cell in first.strip().split(",")]
        skip = 0
    except ValueError:
        skip = 1
    draws = np.loadtxt(config["stable.input"], delimiter=",", skiprows=skip,
                       ndmin=2).ravel()
    fit = fit_alpha_stable(draws, fast=config["noise.fast"])
    with open(out_dir / "alpha_fit.json", "w") as fh:
        fh.write(fit_to_json(fit) + "\n")
    return _finish_manifest("stable-fit", config, out_dir,
                            ["alpha_fit.json"], "ok")


def run_fpe_check(config: ExperimentConfig, out_dir) -> dict:
    """Stationarity verification on the 1-D preconditioned quadratic.

    Positive case eta*P = 1/Sigma refined over fpe.points grids; negative
    control doubles P. Writes fpe.json with norms, convergence ratios, and
    the separation factor."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    eta, sigma = 0.1, 1.0
    p_good = 1.0 / (eta * sigma)
    norms = []
    for n in config["fpe.points"]:
        x = np.linspace(-6.0, 6.0, n)
        _, norm = fpe_residual(-p_good * x, np.full(n, p_good ** 2 * sigma),
                               0.5 * x * x, (x,), eta=eta)
        norms.append(norm)
    n_fine = config["fpe.points"][-1]
    x = np.linspace(-6.0, 6.0, n_fine)
    p_bad = 2.0 * p_good
    _, bad_norm = fpe_residual(-p_bad * x, np.full(n_fine, p_bad ** 2 * sigma),
                               0.5 * x * x, (x,), eta=eta)
    report = {
        "grid_points": list(config["fpe.points"]),
        "residual_norms": norms,
        "convergence_ratios": [norms[i] / norms[i + 1]
                               for i in range(len(norms) - 1)],
        "negative_control_norm": bad_norm,
        "separation": bad_norm / norms[-1],
    }
    jsonio.dump_path(report, out_dir / "fpe.json")
    return _finish_manifest("fpe-check", config, out_dir, ["fpe.json"], "ok")
