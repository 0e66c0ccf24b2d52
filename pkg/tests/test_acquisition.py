"""Expected improvement: closed form vs Monte Carlo, argmax over the domain."""

import math

import numpy as np
import pytest

from bandopt.acquisition import (DomainExhausted, ei_closed_form,
                                 ei_monte_carlo, ei_over_masks, erf_approx,
                                 norm_cdf, norm_pdf, propose_next)
from bandopt.gp import gp_fit, gp_posterior_batch
from bandopt.masks import enumerate_masks, mask_key, mask_to_bits


class TestErf:
    def test_matches_stdlib_within_documented_bound(self):
        xs = np.linspace(-6, 6, 4001)
        ours = erf_approx(xs)
        ref = np.array([math.erf(x) for x in xs])
        assert np.abs(ours - ref).max() < 1.5e-7

    def test_cdf_basics(self):
        assert norm_cdf(0.0) == pytest.approx(0.5, abs=1e-9)
        assert norm_cdf(10.0) == pytest.approx(1.0, abs=1e-9)
        assert norm_pdf(0.0) == pytest.approx(0.3989422804014327, rel=1e-12)


class TestClosedForm:
    def test_zero_std_no_improvement(self):
        assert ei_closed_form(0.5, 0.0, 0.5) == 0.0
        assert ei_closed_form(0.9, 0.0, 0.5) == 0.0

    def test_zero_std_deterministic_improvement(self):
        assert ei_closed_form(0.3, 0.0, 0.5) == pytest.approx(0.2, rel=1e-12)

    def test_at_f_best_equals_pdf_height(self):
        # mu = f_best, sigma = 1 -> EI = phi(0); cross-checked by Monte Carlo
        got = ei_closed_form(0.0, 1.0, 0.0)
        assert got == pytest.approx(0.3989422804014327, rel=1e-6)
        rng = np.random.default_rng(999)
        mc = float(np.maximum(-rng.normal(0.0, 1.0, 10 ** 6), 0.0).mean())
        assert got == pytest.approx(mc, rel=5e-3)

    def test_nonnegative_everywhere(self, rng):
        mu = rng.uniform(-5, 5, 1000)
        sigma = rng.uniform(0, 3, 1000)
        assert np.all(ei_closed_form(mu, sigma, 0.0) >= 0.0)

    def test_strictly_increasing_in_sigma_below_f_best(self):
        # grid starts where the increase is representable in float64
        # (for z = (f_best - mu)/sigma >~ 8 the sigma term is below eps)
        for mu in (-0.5, -0.1, 0.3):
            improvement = 0.5 - mu
            sigmas = np.linspace(improvement / 6.0, 3.0, 50)
            ei = ei_closed_form(np.full_like(sigmas, mu), sigmas, f_best=0.5)
            assert np.all(np.diff(ei) > 0.0)

    def test_negative_std_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            ei_closed_form(0.0, -1.0, 0.0)


class TestMonteCarlo:
    def test_zero_std_exact_for_any_n(self):
        for n in (1, 3, 100):
            est, se = ei_monte_carlo(0.3, 0.0, 0.5, n, seed=1)
            assert est == pytest.approx(0.2, rel=1e-12)
        est, _ = ei_monte_carlo(0.7, 0.0, 0.5, 10, seed=1)
        assert est == 0.0

    def test_seeded_estimates_reproduce_bitwise(self):
        a = ei_monte_carlo(0.2, 0.5, 0.4, 10_000, seed=7)
        b = ei_monte_carlo(0.2, 0.5, 0.4, 10_000, seed=7)
        assert a == b

    def test_within_three_standard_errors_of_closed_form(self, rng):
        hits = 0
        for case in range(20):
            sigma = float(rng.uniform(0.05, 2.0))
            f_best = float(rng.uniform(-1, 1))
            mu = f_best + sigma * float(rng.uniform(-2.0, 3.0))
            est, se = ei_monte_carlo(mu, sigma, f_best, 10 ** 5, seed=case)
            cf = ei_closed_form(mu, sigma, f_best)
            if abs(est - cf) <= 3.0 * max(se, 1e-12):
                hits += 1
        assert hits >= 19

    def test_error_shrinks_as_samples_grow(self):
        # quadrupling n should roughly halve the RMS error
        cf = ei_closed_form(0.1, 1.0, 0.3)
        def rms(n):
            errs = [ei_monte_carlo(0.1, 1.0, 0.3, n, seed=s)[0] - cf
                    for s in range(30)]
            return float(np.sqrt(np.mean(np.square(errs))))
        assert rms(40_000) < rms(10_000) < rms(2_500)


def fit_random_state(rng, d=8, n=10):
    masks = rng.integers(0, 2, size=(n, d)).astype(np.int8)
    masks[masks.sum(axis=1) == 0, 0] = 1
    return gp_fit(masks, rng.uniform(0, 1, n)), masks


def rescan_argmax(model, excluded_masks):
    """Independent full re-scan of all nonzero masks (the defining oracle)."""
    taken = {mask_key(m) for m in excluded_masks} | {mask_key(m) for m in model.X}
    best_mask, best_ei = None, -np.inf
    for mask in enumerate_masks(model.n_bands):
        if mask_key(mask) in taken:
            continue
        mu, var = gp_posterior_batch(model, mask[None, :])
        ei = float(ei_closed_form(mu[0], math.sqrt(var[0]), model.f_best))
        if ei > best_ei:      # strict: keeps the first (lex smallest) maximizer
            best_mask, best_ei = mask, ei
    return best_mask


class TestProposeNext:
    def test_exhaustive_equals_independent_rescan(self, rng):
        for trial in range(20):
            model, masks = fit_random_state(rng)
            got = propose_next(model, method="exhaustive")
            ref = rescan_argmax(model, [])
            assert np.array_equal(got, ref), f"trial {trial}"

    def test_never_returns_observed_or_zero(self, rng):
        for trial in range(10):
            model, masks = fit_random_state(rng, d=5, n=8)
            taken = {mask_key(m) for m in masks}
            got = propose_next(model)
            assert got.any()
            assert mask_key(got) not in taken

    def test_tie_break_lexicographically_smallest(self):
        # one observation at (1,1); both remaining masks are hamming-1 away
        # hence equal EI; the lexicographically smaller (0,1) must win
        model = gp_fit([np.array([1, 1], dtype=np.int8)], [0.4])
        got = propose_next(model)
        assert mask_to_bits(got) == "01"

    def test_hillclimb_agrees_with_exhaustive(self, rng):
        agree = 0
        for trial in range(20):
            model, _ = fit_random_state(rng)
            ex = propose_next(model, method="exhaustive")
            hc = propose_next(model, method="hillclimb", seed=trial)
            agree += int(np.array_equal(ex, hc))
        assert agree >= 18

    def test_excluded_masks_are_skipped(self, rng):
        model, _ = fit_random_state(rng, d=4, n=3)
        first = propose_next(model)
        second = propose_next(model, excluded=[first])
        assert not np.array_equal(first, second)

    def test_domain_exhausted(self):
        d = 2
        all_masks = list(enumerate_masks(d))
        model = gp_fit(all_masks, [0.1, 0.2, 0.3])
        with pytest.raises(DomainExhausted):
            propose_next(model)

    def test_ei_over_masks_matches_pointwise(self, rng):
        model, _ = fit_random_state(rng, d=6, n=5)
        queries = enumerate_masks(6)[:10]
        batch = ei_over_masks(model, queries)
        for i, q in enumerate(queries):
            mu, var = gp_posterior_batch(model, q[None, :])
            one = ei_closed_form(mu[0], math.sqrt(var[0]), model.f_best)
            assert batch[i] == pytest.approx(one, rel=1e-12, abs=1e-15)
