"""The search loop: warm start, proposals, trace persistence, failure policy."""

import math

import numpy as np
import pytest

from bandopt.bayesopt import bayes_opt_loop, read_trace
from bandopt.masks import mask_key, mask_to_bits, popcount


def popcount_objective(mask):
    """Toy objective minimized by any 3-band mask: y = |popcount - 3| / D."""
    return abs(popcount(mask) - 3) / mask.size


class TestLoopBasics:
    def test_warm_start_only(self):
        result = bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5,
                                n_iters=0, seed=0)
        assert len(result.records) == 5
        assert len(result.observations) == 5
        keys = {mask_key(o.mask) for o in result.observations}
        assert len(keys) == 5 and 0 not in keys

    def test_observations_sorted_ascending(self):
        result = bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5,
                                n_iters=5, seed=1)
        ys = [o.y for o in result.observations]
        assert ys == sorted(ys)
        assert result.best.y == ys[0]

    def test_total_budget_respected(self):
        result = bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5,
                                n_iters=35, seed=2)
        assert len(result.records) == 40
        # every attempted mask is unique
        bits = [r.bits for r in result.records]
        assert len(set(bits)) == 40

    def test_finds_toy_optimum_in_most_seeds(self):
        hits = 0
        for seed in range(10):
            result = bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5,
                                    n_iters=10, seed=seed)
            hits += int(result.best.y == 0.0)
        assert hits >= 9

    def test_best_so_far_never_increases(self):
        result = bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5,
                                n_iters=15, seed=3)
        best = math.inf
        bests = []
        for rec in result.records:
            if not rec.failed:
                best = min(best, rec.y)
            bests.append(best)
        assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))

    def test_deterministic_given_seed(self):
        a = bayes_opt_loop(popcount_objective, n_bands=6, n_warm=3, n_iters=4, seed=9)
        b = bayes_opt_loop(popcount_objective, n_bands=6, n_warm=3, n_iters=4, seed=9)
        assert [r.bits for r in a.records] == [r.bits for r in b.records]
        assert [r.y for r in a.records] == [r.y for r in b.records]

    def test_invalid_budget_rejected(self):
        with pytest.raises(ValueError):
            bayes_opt_loop(popcount_objective, n_bands=4, n_warm=0, n_iters=3)
        with pytest.raises(ValueError, match="domain"):
            bayes_opt_loop(popcount_objective, n_bands=2, n_warm=5, n_iters=0)


class TestFailures:
    def test_failures_recorded_and_excluded(self):
        poison = {"11000000"}

        def flaky(mask):
            if mask_to_bits(mask) in poison:
                raise RuntimeError("training blew up")
            return popcount_objective(mask)

        result = bayes_opt_loop(flaky, n_bands=8, n_warm=6, n_iters=10, seed=17)
        failed = [r for r in result.records if r.failed]
        # seed 17 warm draws include the poison mask (verified by the count)
        assert result.n_failures == len(failed)
        assert all(math.isnan(r.y) for r in failed)
        ok_bits = {mask_to_bits(o.mask) for o in result.observations}
        assert not (ok_bits & poison)
        assert len(result.records) == 16

    def test_out_of_range_value_is_a_failure(self):
        def sometimes_bogus(mask):
            return 5.0 if popcount(mask) == 1 else popcount_objective(mask)

        result = bayes_opt_loop(sometimes_bogus, n_bands=4, n_warm=4,
                                n_iters=6, seed=0)
        for rec in result.records:
            if popcount(np.array([int(c) for c in rec.bits])) == 1:
                assert rec.failed

    def test_aborts_when_over_quarter_of_budget_fails(self):
        def always_fails(mask):
            raise RuntimeError("nope")

        with pytest.raises(RuntimeError, match="aborting"):
            bayes_opt_loop(always_fails, n_bands=8, n_warm=8, n_iters=8, seed=0)


class TestTrace:
    def test_trace_written_and_parsed(self, tmp_path):
        path = tmp_path / "trace.tsv"
        result = bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5,
                                n_iters=35, seed=4, trace_path=str(path))
        header, records = read_trace(path)
        assert header == {"bands": 8, "n_warm": 5, "n_iters": 35, "seed": 4}
        assert len(records) == 40
        assert [r.bits for r in records] == [r.bits for r in result.records]
        assert [r.index for r in records] == list(range(40))

    def test_resume_from_truncated_trace(self, tmp_path):
        path = tmp_path / "trace.tsv"
        full = bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5,
                              n_iters=10, seed=5, trace_path=str(path))
        lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
        # cut mid-run, leaving a partial final line
        truncated = lines[:9] + [lines[9][:11]]
        path.write_text("".join(truncated), encoding="utf-8")
        resumed = bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5,
                                 n_iters=10, seed=5, trace_path=str(path),
                                 resume=True)
        assert [r.bits for r in resumed.records] == [r.bits for r in full.records]
        assert [r.y for r in resumed.records] == [r.y for r in full.records]
        header, records = read_trace(path)
        assert len(records) == 15

    def test_resume_with_wrong_seed_rejected(self, tmp_path):
        path = tmp_path / "trace.tsv"
        bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5, n_iters=2,
                       seed=6, trace_path=str(path))
        with pytest.raises(ValueError, match="header"):
            bayes_opt_loop(popcount_objective, n_bands=8, n_warm=5, n_iters=2,
                           seed=7, trace_path=str(path), resume=True)

    def test_fresh_run_overwrites_stale_trace(self, tmp_path):
        path = tmp_path / "trace.tsv"
        bayes_opt_loop(popcount_objective, n_bands=6, n_warm=3, n_iters=2,
                       seed=1, trace_path=str(path))
        bayes_opt_loop(popcount_objective, n_bands=6, n_warm=3, n_iters=2,
                       seed=2, trace_path=str(path))
        header, records = read_trace(path)
        assert header["seed"] == 2 and len(records) == 5
