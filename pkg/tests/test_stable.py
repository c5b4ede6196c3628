"""Tail-index estimation and Gaussian scale matching."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import stable

SQRT_HALF = 1.0 / math.sqrt(2.0)

# frozen from scripts/derive_matching_r.py (trapezoid E-term + zoomed scans,
# independent of the quad + golden-section path under test)
R_OPT_DERIVED = {2.0: 0.707106, 1.5: 0.709983, 1.0: 0.719528,
                 0.6: 0.739897, 0.5: 0.749974}


# ---------------------------------------------------------------- tail index

def test_alpha_gaussian_large_sample():
    rng = np.random.default_rng(11)
    w = rng.standard_normal(1_000_000)
    a = stable.estimate_alpha(w)
    assert 1.95 <= a <= 2.05


def test_alpha_cauchy_large_sample():
    rng = np.random.default_rng(12)
    w = rng.standard_cauchy(1_000_000)
    a = stable.estimate_alpha(w)
    assert 0.95 <= a <= 1.05


def test_alpha_constant_samples_is_exactly_one():
    # every block sums to N1*c, so the log-ratio is exactly log(N1)
    w = np.full(100, 3.7)
    assert stable.estimate_alpha(w) == 1.0


def test_alpha_alternating_cancellation_hits_gaussian_clamp():
    # block sums cancel exactly; after jitter they are ~1e-12, so the
    # denominator goes negative and the estimate pins at 2.0
    w = np.tile([1.0, -1.0], 50)
    assert stable.estimate_alpha(w) == 2.0


def test_alpha_heavy_blocks_hit_lower_clamp():
    # one enormous entry per block: block sums dwarf the typical sample
    w = np.ones(100)
    w[::10] = 1e60
    assert stable.estimate_alpha(w, n1=10, n2=10) == 0.1


def test_alpha_scale_invariant():
    rng = np.random.default_rng(13)
    w = rng.standard_normal(10_000)
    a1 = stable.estimate_alpha(w)
    a2 = stable.estimate_alpha(173.25 * w)
    assert a1 == pytest.approx(a2, rel=1e-12)


def test_alpha_drops_trailing_samples():
    rng = np.random.default_rng(14)
    w = rng.standard_normal(10_007)
    base = stable.estimate_alpha(w[:10_000], n1=100, n2=100)
    assert stable.estimate_alpha(w, n1=100, n2=100) == base


def test_alpha_block_shape_validation():
    w = np.ones(8)
    with pytest.raises(ValueError):
        stable.estimate_alpha(w, n1=5)          # n2 = 8//5 = 1 < 2
    with pytest.raises(ValueError):
        stable.estimate_alpha(w, n1=3, n2=3)    # 9 > 8
    with pytest.raises(ValueError):
        stable.estimate_alpha(np.ones(3))       # isqrt(3) = 1 < 2


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-1e9, max_value=1e9,
                          allow_nan=False, allow_infinity=False),
                min_size=4, max_size=200))
def test_alpha_always_in_clamp_range(xs):
    w = np.asarray(xs)
    try:
        a = stable.estimate_alpha(w)
    except ValueError:
        # all-zero input is the only rejection for finite data
        assert np.all(w == 0.0)
        return
    assert 0.1 <= a <= 2.0


# --------------------------------------------------------------------- scale

def test_c_gaussian_matches_sigma_over_sqrt2():
    # E log|sigma*Z| = log sigma - (gamma + log 2)/2, and the alpha = 2
    # correction (1/alpha - 1)*gamma = -gamma/2 leaves c = sigma/sqrt(2)
    rng = np.random.default_rng(15)
    sigma = 3.0
    w = sigma * rng.standard_normal(1_000_000)
    c = stable.estimate_c(w, alpha=2.0)
    assert c == pytest.approx(sigma / math.sqrt(2.0), rel=0.01)


def test_c_cauchy_matches_scale():
    # E log|Cauchy(scale)| = log(scale), no Euler correction at alpha = 1
    rng = np.random.default_rng(16)
    w = 2.0 * rng.standard_cauchy(1_000_000)
    c = stable.estimate_c(w, alpha=1.0)
    assert c == pytest.approx(2.0, rel=0.05)


def test_c_scale_equivariant():
    rng = np.random.default_rng(17)
    w = rng.standard_normal(4_000)
    c1 = stable.estimate_c(w, alpha=1.3)
    c2 = stable.estimate_c(9.5 * w, alpha=1.3)
    assert c2 == pytest.approx(9.5 * c1, rel=1e-12)


def test_c_rejects_bad_alpha_and_empty():
    with pytest.raises(ValueError):
        stable.estimate_c(np.ones(4), alpha=0.0)
    with pytest.raises(ValueError):
        stable.estimate_c(np.ones(4), alpha=2.5)
    with pytest.raises(ValueError):
        stable.estimate_c(np.array([]), alpha=1.0)


def test_zero_samples_jittered_deterministically():
    w = np.array([0.0, 1.0, -2.0, 0.0, 3.0, 1.0, -1.0, 2.0, 0.5])
    a1 = stable.estimate_alpha(w)
    a2 = stable.estimate_alpha(w.copy())
    assert a1 == a2
    c1 = stable.estimate_c(w, alpha=1.5)
    c2 = stable.estimate_c(w.copy(), alpha=1.5)
    assert c1 == c2
    with pytest.raises(ValueError, match="all samples are zero"):
        stable.estimate_alpha(np.zeros(16))


# ----------------------------------------------------------------- matching

def test_e_term_closed_form_at_alpha_two():
    # E[exp(-(rT)^2)] = 1/sqrt(1+2r^2): Gaussian integral
    for r in np.linspace(0.01, 5.0, 50):
        num = stable.expected_exp_term(float(r), 2.0)
        assert abs(num - 1.0 / math.sqrt(1.0 + 2.0 * r * r)) <= 1e-8


def test_e_term_at_r_zero_is_one():
    for alpha in (0.5, 1.0, 1.7, 2.0):
        assert stable.expected_exp_term(0.0, alpha) == pytest.approx(1.0, abs=1e-10)


def test_e_term_decreases_in_r():
    vals = [stable.expected_exp_term(r, 1.2) for r in (0.1, 0.5, 1.0, 2.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_optimal_r_gaussian_exact():
    assert abs(stable.optimal_r(2.0) - SQRT_HALF) <= 1e-5


def test_optimal_r_matches_independent_derivation():
    for alpha, r_ref in R_OPT_DERIVED.items():
        assert stable.optimal_r(alpha) == pytest.approx(r_ref, abs=1e-4)


def test_optimal_r_within_band_across_alphas():
    for alpha in np.linspace(0.5, 2.0, 7):
        r = stable.optimal_r(float(alpha))
        assert 0.5 <= r <= 1.0


def test_optimal_r_is_local_minimum():
    for alpha in (0.6, 1.0, 1.5, 2.0):
        r = stable.optimal_r(alpha)
        f0 = stable.matching_objective(r, alpha)
        assert stable.matching_objective(r - 1e-3, alpha) >= f0 - 1e-9
        assert stable.matching_objective(r + 1e-3, alpha) >= f0 - 1e-9


def test_matched_sigma_paths():
    # fast path is exact at alpha = 2; at alpha = 1 the two paths differ by
    # the r shift 0.7195 vs 0.7071, under 2 percent
    assert stable.matched_sigma(2.0, 2.0, fast=True) == pytest.approx(2.0 * math.sqrt(2.0))
    exact2 = stable.matched_sigma(2.0, 2.0, fast=False)
    assert exact2 == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-4)
    fast1 = stable.matched_sigma(2.0, 1.0, fast=True)
    exact1 = stable.matched_sigma(2.0, 1.0, fast=False)
    assert exact1 == pytest.approx(2.0 / R_OPT_DERIVED[1.0], rel=1e-3)
    assert abs(fast1 - exact1) / exact1 < 0.15
    with pytest.raises(ValueError):
        stable.matched_sigma(0.0, 1.0)


# ---------------------------------------------------------------- full fits

def test_fit_gaussian_recovers_sigma():
    rng = np.random.default_rng(18)
    sigma = 2.0
    fit = stable.fit_alpha_stable(sigma * rng.standard_normal(1_000_000))
    assert 1.95 <= fit.alpha <= 2.05
    assert fit.sigma == pytest.approx(sigma, rel=0.03)
    assert fit.sigma == fit.c / fit.r_opt
    assert 0.69 <= fit.r_opt <= 0.72


def test_fit_fast_path_uses_sqrt_half():
    rng = np.random.default_rng(19)
    fit = stable.fit_alpha_stable(rng.standard_normal(40_000), fast=True)
    assert fit.r_opt == SQRT_HALF


def test_fit_validation():
    with pytest.raises(ValueError):
        stable.AlphaStableFit(alpha=2.5, c=1.0, r_opt=0.7, sigma=1.4)
    with pytest.raises(ValueError):
        stable.AlphaStableFit(alpha=2.0, c=-1.0, r_opt=0.7, sigma=1.4)


def test_fit_json_roundtrip_exact():
    fit = stable.AlphaStableFit(alpha=1.9371726, c=0.713371,
                                r_opt=0.70712345, sigma=1.0088)
    back = stable.fit_from_json(stable.fit_to_json(fit))
    assert back == fit


# ------------------------------------------------------------- group lambdas

def test_lambda_alpha_recovers_isotropic_levels():
    # pooled noise N(0, 2b) per group: matched sigma^2/2 should return b
    rng = np.random.default_rng(20)
    b = [1.5, 4.0]
    pools = [math.sqrt(2.0 * bb) * rng.standard_normal(100_000) for bb in b]
    lam = stable.lambda_alpha(pools, fast=True)
    assert lam == pytest.approx(b, rel=0.05)


def test_lambda_alpha_identical_groups_identical_output():
    rng = np.random.default_rng(21)
    pool = rng.standard_normal(10_000)
    lam = stable.lambda_alpha([pool, pool.copy()], fast=True)
    assert lam[0] == lam[1]


def test_lambda_alpha_error_names_group():
    rng = np.random.default_rng(22)
    pools = [rng.standard_normal(100), np.ones(2)]
    with pytest.raises(ValueError, match="group 1"):
        stable.lambda_alpha(pools)
