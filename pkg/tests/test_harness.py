"""Config parsing, experiment orchestration, metrics, and output contracts."""

import hashlib
import json

import numpy as np
import pytest

from artifact.harness import (ConfigError, evaluate_metrics, parse_config,
                              raw_pairs, run_experiment, run_fpe_check,
                              run_stable_fit, serialize_config, split_dataset,
                              toy_default_config)
from artifact.model import (Dataset, LogisticRegression, TrigRegression,
                            dataset_to_csv, features, make_toy_dataset)
from artifact.oracle import GaussianDist, conjugate_posterior, predictive_analytic


# ------------------------------------------------------------ config parsing

def test_parse_config_fills_every_default_explicitly():
    cfg = parse_config("seed = 5\n")
    assert cfg["seed"] == 5
    assert cfg["noise.mu"] == 0.5
    assert cfg["sampler.batch_size"] == 128
    assert cfg["sampler.warmup"] == 2000
    assert cfg["sampler.keepevery"] == 2000
    assert cfg["sampler.num_samples"] == 100
    assert cfg["data.seed"] == 5          # derived from seed
    assert cfg["model.kind"] == "trig"
    assert cfg["lambda.mode"] == "layerwise"


def test_parse_config_round_trip_identity():
    text = ("seed = 11\nmodel.omega = 1.0,3.0\nsampler.kind = sgld\n"
            "sampler.eta = 0.001\nnoise.mu = 0.25\n# comment\n\n")
    cfg = parse_config(text)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)


def test_parse_config_unknown_keys_listed():
    with pytest.raises(ConfigError) as err:
        parse_config("seed = 1\nzork = 2\nmodel.colour = red\n")
    assert "model.colour" in str(err.value) and "zork" in str(err.value)


def test_parse_config_missing_seed_listed():
    with pytest.raises(ConfigError) as err:
        parse_config("")
    assert "seed" in str(err.value)


def test_parse_config_rejects_duplicates_and_bad_lines():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="key = value"):
        parse_config("seed\n")
    with pytest.raises(ConfigError, match="sampler.kind"):
        parse_config("seed = 1\nsampler.kind = hmc\n")
    with pytest.raises(ConfigError, match="noise.mu"):
        parse_config("seed = 1\nnoise.mu = fast\n")


def test_parse_config_seed_override_drives_derived_defaults():
    cfg = parse_config("", seed_override=9)
    assert cfg["seed"] == 9 and cfg["data.seed"] == 9
    cfg = parse_config("seed = 1\ndata.seed = 4\n", seed_override=9)
    assert cfg["seed"] == 9 and cfg["data.seed"] == 4


def test_parse_config_checks_referenced_files_exist(tmp_path):
    with pytest.raises(ConfigError, match="data.path"):
        parse_config(f"seed = 1\ndata.path = {tmp_path}/nope.csv\n")
    p = tmp_path / "d.csv"
    dataset_to_csv(make_toy_dataset(6, [0.5, -0.3], [1.0, 2.0], seed=0), p)
    cfg = parse_config(f"seed = 1\ndata.path = {p}\n")
    assert cfg["data.path"] == str(p)


def test_raw_pairs_strips_comments():
    assert raw_pairs("a = 1 # note\n\n# whole line\nb=2\n") == {"a": "1", "b": "2"}


def test_with_value_rejects_unknown_key():
    cfg = parse_config("seed = 1\n")
    with pytest.raises(ConfigError):
        cfg.with_value("sampler.rate", 0.1)


def test_split_dataset_partitions_and_is_deterministic():
    data = make_toy_dataset(20, [0.5, -0.3], [1.0, 2.0], seed=1)
    train, test = split_dataset(data, 0.25, seed=3)
    train2, test2 = split_dataset(data, 0.25, seed=3)
    assert train.n == 15 and test.n == 5
    assert np.array_equal(train.records, train2.records)
    assert np.array_equal(test.records, test2.records)
    merged = np.vstack([train.records, test.records])
    assert np.array_equal(np.sort(merged, axis=0), np.sort(data.records, axis=0))


# ----------------------------------------------------------------- metrics

def test_perfect_predictor_has_zero_rmse():
    omega = np.array([1.0, 2.0])
    w = np.array([0.4, -0.2])
    x = np.linspace(-1, 1, 9)
    data = Dataset(np.column_stack([x, features(x, omega) @ w]))
    model = TrigRegression(omega=omega)
    chain = np.tile(w, (5, 1))
    m = evaluate_metrics(chain, model, data, lik_var=0.1)
    assert m["rmse"] == pytest.approx(0.0, abs=1e-12)
    assert m["accuracy"] is None and m["kl"] is None


def test_exact_draw_mnll_matches_analytic_predictive():
    omega = np.array([1.0, 2.0])
    train = make_toy_dataset(30, [0.5, -0.3], omega, seed=2)
    test = make_toy_dataset(200, [0.5, -0.3], omega, seed=3)
    model = TrigRegression(omega=omega)
    post = conjugate_posterior(train, omega, 0.1,
                               GaussianDist(np.zeros(2), np.eye(2)))
    draws = post.sample(np.random.default_rng(4), 4000)
    m = evaluate_metrics(draws, model, test, lik_var=0.1, analytic=post)
    mean, var = predictive_analytic(post, features(test.records[:, 0], omega), 0.1)
    y = test.records[:, 1]
    want = float(np.mean(0.5 * np.log(2 * np.pi * var)
                         + 0.5 * (y - mean) ** 2 / var))
    # mixture of 4000 exact draws vs closed form: MC error ~ 1/sqrt(4000)
    assert m["mnll"] == pytest.approx(want, abs=0.05)
    assert m["kl"] < 0.01


def test_logistic_accuracy_equals_bayes_rule():
    rng = np.random.default_rng(5)
    z = rng.normal(size=(40, 2))
    theta = np.array([1.5, -1.0])
    labels = (1.0 / (1.0 + np.exp(-(z @ theta))) > 0.5).astype(float)
    data = Dataset(np.column_stack([z, labels]))
    model = LogisticRegression(n_features=2)
    m = evaluate_metrics(np.tile(theta, (3, 1)), model, data, lik_var=0.1)
    assert m["accuracy"] == 1.0
    assert m["rmse"] is None
    p = 1.0 / (1.0 + np.exp(-(z @ theta)))
    want = float(np.mean(-np.log(np.where(labels > 0.5, p, 1 - p))))
    assert m["mnll"] == pytest.approx(want, rel=1e-12)


def test_metrics_skip_kl_when_chain_too_short():
    omega = np.array([1.0, 2.0])
    model = TrigRegression(omega=omega)
    data = make_toy_dataset(5, [0.5, -0.3], omega, seed=6)
    post = conjugate_posterior(data, omega, 0.1,
                               GaussianDist(np.zeros(2), np.eye(2)))
    m = evaluate_metrics(np.zeros((2, 2)), model, data, 0.1, analytic=post)
    assert m["kl"] is None


def test_metrics_reject_empty_inputs():
    model = TrigRegression(omega=np.array([1.0, 2.0]))
    data = make_toy_dataset(4, [0.5, -0.3], [1.0, 2.0], seed=0)
    with pytest.raises(ValueError):
        evaluate_metrics(np.zeros((0, 2)), model, data, 0.1)


# ----------------------------------------------------------- run_experiment

def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_exact_sampler_null_experiment_kl_below_tolerance(tmp_path):
    cfg = parse_config("seed = 7\nsampler.kind = exact\n"
                       "sampler.num_samples = 2000\n")
    manifest = run_experiment(cfg, tmp_path)
    assert manifest["status"] == "ok"
    metrics = json.loads(_read(tmp_path / "metrics.json"))
    # 2000 exact draws: E[KL] ~ 5/N = 0.0025 for d = 2
    assert metrics["kl"] < 0.01


def test_run_experiment_writes_contract_files_and_hashes(tmp_path):
    cfg = toy_default_config(seed=0, overrides={
        "sampler.warmup": 50, "sampler.keepevery": 5,
        "sampler.num_samples": 40, "noise.steps": 100, "noise.draws": 100})
    manifest = run_experiment(cfg, tmp_path)
    want = {"samples.csv", "predictive_mc.csv", "predictive_analytic.csv",
            "metrics.json", "lambda_state.json"}
    assert set(manifest["files"]) == want
    for name, digest in manifest["files"].items():
        assert hashlib.sha256(_read(tmp_path / name)).hexdigest() == digest
    on_disk = json.loads(_read(tmp_path / "manifest.json"))
    assert on_disk == manifest
    body = np.loadtxt(tmp_path / "samples.csv", delimiter=",", skiprows=1)
    assert body.shape == (40, 2)
    grid = np.loadtxt(tmp_path / "predictive_mc.csv", delimiter=",", skiprows=1)
    assert grid.shape == (101, 3)
    assert grid[0, 0] == -2.0 and grid[-1, 0] == 2.0
    metrics = json.loads(_read(tmp_path / "metrics.json"))
    assert metrics["rmse"] > 0 and metrics["mnll"] is not None
    assert metrics["diagnostics"]["clamp_total"] >= 0
    assert len(metrics["diagnostics"]["lambda_trace"]) == 40


def test_rerun_is_byte_identical(tmp_path):
    cfg = toy_default_config(seed=2, overrides={
        "sampler.warmup": 30, "sampler.keepevery": 3,
        "sampler.num_samples": 25, "noise.steps": 60, "noise.draws": 80})
    m1 = run_experiment(cfg, tmp_path / "a")
    m2 = run_experiment(cfg, tmp_path / "b")
    assert m1 == m2
    for name in list(m1["files"]) + ["manifest.json"]:
        assert _read(tmp_path / "a" / name) == _read(tmp_path / "b" / name)


def test_seed_changes_outputs(tmp_path):
    base = {"sampler.warmup": 30, "sampler.keepevery": 3,
            "sampler.num_samples": 25, "noise.steps": 60, "noise.draws": 80}
    m1 = run_experiment(toy_default_config(seed=1, overrides=base), tmp_path / "a")
    m2 = run_experiment(toy_default_config(seed=2, overrides=base), tmp_path / "b")
    assert m1["files"]["samples.csv"] != m2["files"]["samples.csv"]


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_diverged_run_keeps_partial_outputs(tmp_path):
    # eta far above 2/h_max on the toy posterior; enough steps that the
    # iterate provably overflows the float range mid-run
    cfg = parse_config("seed = 3\nsampler.kind = sgld\nsampler.eta = 100.0\n"
                       "sampler.warmup = 50\nsampler.keepevery = 1\n"
                       "sampler.num_samples = 200\n")
    manifest = run_experiment(cfg, tmp_path)
    assert manifest["status"] == "diverged"
    assert {"samples.csv", "metrics.json"} <= set(manifest["files"])
    assert "predictive_mc.csv" not in manifest["files"]
    metrics = json.loads(_read(tmp_path / "metrics.json"))
    assert metrics["status"] == "diverged"
    assert metrics["diagnostics"]["divergence_step"] >= 1
    assert metrics.get("rmse") is None


def test_estimate_stage_writes_state_only(tmp_path):
    cfg = toy_default_config(seed=4, overrides={"noise.steps": 80,
                                                "noise.draws": 60})
    manifest = run_experiment(cfg, tmp_path, command="estimate",
                              stages="estimate")
    assert set(manifest["files"]) == {"lambda_state.json"}
    state = json.loads(_read(tmp_path / "lambda_state.json"))
    assert len(state["lambda"]) == 1 and state["lambda"][0] > 0
    assert len(state["b_diag"]) == 2


def test_sample_stage_skips_evaluation(tmp_path):
    cfg = toy_default_config(seed=4, overrides={
        "sampler.warmup": 20, "sampler.keepevery": 2,
        "sampler.num_samples": 10, "noise.steps": 60, "noise.draws": 60})
    manifest = run_experiment(cfg, tmp_path, command="sample", stages="sample")
    assert set(manifest["files"]) == {"samples.csv", "metrics.json",
                                      "lambda_state.json"}
    metrics = json.loads(_read(tmp_path / "metrics.json"))
    assert "rmse" not in metrics


def test_slr_mode_collapses_lambda_to_shared_level(tmp_path):
    cfg = parse_config(
        "seed = 5\nmodel.groups = 1,1\nlambda.mode = slr\n"
        "sampler.kind = isgd\nsampler.warmup = 20\nsampler.keepevery = 2\n"
        "sampler.num_samples = 10\nsampler.batch_size = 8\n"
        "noise.steps = 60\n")
    run_experiment(cfg, tmp_path)
    state = json.loads(_read(tmp_path / "lambda_state.json"))
    assert len(state["lambda"]) == 2
    assert state["lambda"][0] == state["lambda"][1]


def test_gaussian_and_alpha_estimators_give_different_levels(tmp_path):
    base = {"sampler.warmup": 20, "sampler.keepevery": 2,
            "sampler.num_samples": 10, "noise.steps": 60, "noise.draws": 120}
    g = toy_default_config(seed=6, overrides={**base, "noise.estimator": "gaussian"})
    a = toy_default_config(seed=6, overrides={**base, "noise.estimator": "alpha"})
    run_experiment(g, tmp_path / "g")
    run_experiment(a, tmp_path / "a")
    lam_g = json.loads(_read(tmp_path / "g/lambda_state.json"))["lambda"][0]
    lam_a = json.loads(_read(tmp_path / "a/lambda_state.json"))["lambda"][0]
    assert lam_g > 0 and lam_a > 0 and lam_g != lam_a


def test_logistic_pipeline_from_csv(tmp_path):
    rng = np.random.default_rng(8)
    z = rng.normal(size=(120, 2))
    theta = np.array([2.0, -1.0])
    labels = (rng.uniform(size=120) < 1 / (1 + np.exp(-(z @ theta)))).astype(float)
    path = tmp_path / "clf.csv"
    dataset_to_csv(Dataset(np.column_stack([z, labels])), path)
    cfg = parse_config(
        f"seed = 9\nmodel.kind = logistic\ndata.path = {path}\n"
        "sampler.kind = sgld\nsampler.eta = 0.002\nsampler.batch_size = 16\n"
        "sampler.warmup = 300\nsampler.keepevery = 10\n"
        "sampler.num_samples = 200\n")
    manifest = run_experiment(cfg, tmp_path / "out")
    assert manifest["status"] == "ok"
    assert "predictive_mc.csv" not in manifest["files"]
    metrics = json.loads(_read(tmp_path / "out/metrics.json"))
    assert metrics["kl"] is None
    assert 0.5 <= metrics["accuracy"] <= 1.0
    assert metrics["mnll"] < np.log(2.0)  # beats the coin-flip predictor


# ------------------------------------------------- standalone command bodies

def test_stable_fit_on_gaussian_csv(tmp_path):
    path = tmp_path / "draws.csv"
    draws = np.random.default_rng(10).normal(0.0, 2.0, size=40_000)
    with open(path, "w") as fh:
        fh.write("value\n")
        fh.writelines(f"{v:.17g}\n" for v in draws)
    cfg = parse_config(f"seed = 1\nstable.input = {path}\n")
    manifest = run_stable_fit(cfg, tmp_path / "out")
    assert set(manifest["files"]) == {"alpha_fit.json"}
    fit = json.loads(_read(tmp_path / "out/alpha_fit.json"))
    assert fit["alpha"] == pytest.approx(2.0, abs=0.15)
    assert fit["sigma"] == pytest.approx(2.0, rel=0.1)


def test_stable_fit_accepts_headerless_csv(tmp_path):
    path = tmp_path / "draws.csv"
    draws = np.random.default_rng(11).normal(size=10_000)
    with open(path, "w") as fh:
        fh.writelines(f"{v:.17g}\n" for v in draws)
    cfg = parse_config(f"seed = 1\nstable.input = {path}\n")
    run_stable_fit(cfg, tmp_path / "out")
    fit = json.loads(_read(tmp_path / "out/alpha_fit.json"))
    assert fit["alpha"] == pytest.approx(2.0, abs=0.25)


def test_stable_fit_requires_input(tmp_path):
    with pytest.raises(ConfigError, match="stable.input"):
        run_stable_fit(parse_config("seed = 1\n"), tmp_path)


def test_fpe_check_separates_stationary_from_wrong_density(tmp_path):
    cfg = parse_config("seed = 1\n")
    manifest = run_fpe_check(cfg, tmp_path)
    assert manifest["status"] == "ok"
    report = json.loads(_read(tmp_path / "fpe.json"))
    assert report["grid_points"] == [201, 401, 801]
    assert all(r > 3.0 for r in report["convergence_ratios"])
    assert report["separation"] > 10.0
