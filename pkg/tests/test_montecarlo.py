import math
import unittest

import numpy as np

from kglab import (
    RngStream,
    bound_curves,
    catalog,
    concentration_check,
    cr_rate_limit,
    estimate_transforms,
    fixed_rate_pe_bounds,
    gaussian_tail_prob,
    mean_tail_bound,
    pull_floor_violations,
    run_kg,
    run_kg_batch,
    run_replications,
    run_replications_async,
    summarize_traces,
    transform_bounds,
    transform_rates,
)

from . import BaseKGTest


class DeterminismTests(BaseKGTest):
    def _series(self, **kwargs):
        return run_replications(catalog(2), 150, 5, 20, seed=3, checkpoints=[50, 100, 150], **kwargs)

    def test_independent_of_workers_and_blocks(self):
        base = self._series(workers=1, block_size=6)
        for kwargs in ({"workers": 3, "block_size": 6}, {"workers": 2, "block_size": 20}):
            other = self._series(**kwargs)
            self.assertArrayEqual(base.alpha_hat, other.alpha_hat)
            self.assertArrayEqual(base.pe_hat, other.pe_hat)
            self.assertArrayEqual(base.sr_hat, other.sr_hat)
            self.assertArrayEqual(base.cr_hat, other.cr_hat)

    def test_matches_single_replications(self):
        series = run_replications(catalog(1), 100, 5, 4, seed=8, workers=2, block_size=3, diagnostic=True)
        self.assertEqual(len(series.traces), 4)
        for rep, trace in enumerate(series.traces):
            single = run_kg(catalog(1), 100, 5, RngStream(8, rep), diagnostic=True)
            self.assertArrayEqual(trace.pull_sequence, single.pull_sequence)
            self.assertArrayEqual(trace.reward_sequence, single.reward_sequence)

    def test_traces_only_kept_for_diagnostics(self):
        self.assertIsNone(self._series(workers=1).traces)

    def test_seed_matters(self):
        a = run_replications(catalog(1), 100, 5, 10, seed=1, workers=1)
        b = run_replications(catalog(1), 100, 5, 10, seed=2, workers=1)
        self.assertFalse(np.array_equal(a.alpha_hat, b.alpha_hat))

    def test_bad_args(self):
        with self.assertRaises(ValueError):
            run_replications(catalog(1), 100, 5, 0, seed=1)
        with self.assertRaises(ValueError):
            run_replications(catalog(1), 100, 5, 5, seed=1, block_size=0)
        with self.assertRaises(ValueError):
            summarize_traces(catalog(1), [], 0)


class AsyncReplicationTests(unittest.IsolatedAsyncioTestCase):
    async def test_async_entry_point(self):
        series = await run_replications_async(catalog(1), 80, 5, 6, seed=4, workers=2, block_size=4)
        sync_series = run_replications(catalog(1), 80, 5, 6, seed=4, workers=1)
        np.testing.assert_array_equal(series.alpha_hat, sync_series.alpha_hat)
        self.assertEqual(series.replications, 6)
        self.assertEqual(len(series), 1)


class SummaryTests(BaseKGTest):
    def test_shapes_and_accounting(self):
        series = run_replications(catalog(1), 200, 5, 10, seed=0, checkpoints=[50, 200], workers=1)
        self.assertEqual(series.alpha_hat.shape, (2, 10))
        np.testing.assert_allclose(series.alpha_hat.sum(axis=1), [1.0, 1.0])
        # Gaps are all 0 or 1, so SR is exactly PE here
        np.testing.assert_allclose(series.sr_hat, series.pe_hat)
        # CR counts pulls of every non-best arm
        np.testing.assert_allclose(series.cr_hat / series.checkpoint_rounds, 1.0 - series.alpha_hat[:, 9])

    def test_single_replication_warns(self):
        with self.assertLogs("kglab.montecarlo", level="WARNING"):
            series = run_replications(catalog(1), 60, 5, 1, seed=0, workers=1)
        self.assertTrue(series.low_replication)
        self.assertArrayEqual(series.alpha_stderr, np.zeros((1, 10)))
        self.assertArrayEqual(series.pe_stderr, [0.0])


class TransformTests(BaseKGTest):
    def test_transform_rates(self):
        rates, gap = transform_rates(np.array([0.1, 0.0, np.nan]), np.array([10.0, 10.0, 10.0]))
        self.assertAlmostEqual(rates[0], -math.log(0.1) / 10.0)
        self.assertTrue(np.isnan(rates[1:]).all())
        self.assertArrayEqual(gap, [False, True, True])

    def test_estimate_transforms(self):
        series = run_replications(catalog(1), 200, 5, 10, seed=0, checkpoints=[100, 200], workers=1)
        bounds = bound_curves(catalog(1).constants, [100, 200])
        transformed = estimate_transforms(series, bounds, rule_of_three=True)
        np.testing.assert_allclose(transformed.cr_rate, series.cr_hat / np.array([100.0, 200.0]))
        expected = -math.log(0.3) / np.array([100.0, 200.0])
        np.testing.assert_allclose(transformed.pe_rule_of_three_rate, expected)
        self.assertIsNotNone(transformed.bounds)
        self.assertTrue(transformed.bounds.valid.all())
        with self.assertRaises(ValueError):
            estimate_transforms(series, bound_curves(catalog(1).constants, [100]))

    def test_transform_bounds_marks_invalid(self):
        tb = transform_bounds(bound_curves(catalog(1).constants, [1, 1e6]))
        self.assertArrayEqual(tb.valid, [False, True])
        self.assertTrue(math.isnan(tb.pe_upper_rate[0]))
        self.assertGreater(tb.pe_lower_rate[1], tb.pe_upper_rate[1])


class ConcentrationTests(BaseKGTest):
    def test_worked_case(self):
        self.assertAlmostEqual(mean_tail_bound(1.0, 25, 0.6), 7.406e-3, delta=1e-6)
        self.assertAlmostEqual(gaussian_tail_prob(1.0, 25, 0.6), 2.6998e-3, delta=1e-7)
        check = concentration_check(1.0, 25, 0.6, 100_000, seed=0)
        self.assertTrue(check.contained())
        self.assertAlmostEqual(check.empirical_prob, 2.6998e-3, delta=5 * check.stderr)

    def test_random_cases(self):
        rng = np.random.default_rng(17)
        for case in range(20):
            sigma = float(rng.uniform(0.5, 3.0))
            m = int(rng.integers(1, 40))
            eps = float(rng.uniform(0.1, 2.0)) * sigma / math.sqrt(m)
            check = concentration_check(sigma, m, eps, 100_000, seed=case)
            self.assertTrue(check.contained(), (sigma, m, eps, check))

    def test_bad_args(self):
        for args in ((0.0, 5, 1.0), (1.0, 0, 1.0), (1.0, 5, 0.0)):
            with self.assertRaises(ValueError):
                mean_tail_bound(*args)
        with self.assertRaises(ValueError):
            concentration_check(1.0, 5, 1.0, 0, seed=0)


class FixedRateContainmentTests(BaseKGTest):
    def test_initial_stage_error_below_bound(self):
        inst = catalog(1)
        # n = k * n0, every pull is part of the round robin
        series = run_replications(inst, 500, 50, 100_000, seed=12, checkpoints=[500])
        bound = fixed_rate_pe_bounds(inst.constants, 500, 0.1)
        self.assertLessEqual(series.pe_hat[-1], bound.upper.value + 3 * series.pe_stderr[-1])


class ConsistencyTests(BaseKGTest):
    def test_error_falls_with_horizon(self):
        series = run_replications(catalog(1), 1000, 5, 10_000, seed=21, checkpoints=[100, 1000])
        self.assertGreater(series.pe_hat[0], 0.0)
        self.assertLess(series.pe_hat[1], series.pe_hat[0])
        self.assertLess(series.sr_hat[1], series.sr_hat[0])


class LatePullFloorTests(BaseKGTest):
    CHECKPOINTS = [1000, 2000, 3000, 5000, 7500, 10_000]

    def test_floor_holds_late_on_equal_ratio_instances(self):
        for instance_id in (1, 3, 4, 5):
            streams = [RngStream(seed) for seed in range(20)]
            traces = run_kg_batch(catalog(instance_id), 10_000, 5, streams, checkpoints=self.CHECKPOINTS)
            for seed, trace in enumerate(traces):
                self.assertEqual(pull_floor_violations(trace, min_round=2000), [], (instance_id, seed))


class InstanceOneSimulationTests(BaseKGTest):
    """One desk-sized simulation of instance 1, checked against the limits and bounds"""

    ROUNDS = 10_000
    CHECKPOINTS = [100, 1000, 2000, 5000, 10_000]

    @classmethod
    def setUpClass(cls):
        cls.inst = catalog(1)
        cls.series = run_replications(cls.inst, cls.ROUNDS, 5, 1000, seed=42, checkpoints=cls.CHECKPOINTS)
        cls.bounds = bound_curves(cls.inst.constants, cls.CHECKPOINTS)

    def test_sampling_rates_near_limits(self):
        np.testing.assert_allclose(self.series.alpha_hat[-1], np.full(10, 0.1), atol=0.02)

    def test_cumulative_regret_rate(self):
        rate = self.series.cr_hat[-1] / self.ROUNDS
        self.assertAlmostEqual(rate, cr_rate_limit(self.inst.constants), delta=0.05)
        self.assertGreaterEqual(self.bounds[-1].cr_upper / self.ROUNDS, rate)

    def test_no_late_pull_floor_violations(self):
        late = self.series.checkpoint_rounds >= 2000
        self.assertArrayEqual(self.series.pull_floor_violations[late], np.zeros(int(late.sum())))

    def test_estimates_bracketed(self):
        for c, bound in enumerate(self.bounds):
            if not bound.valid:
                continue
            for name in ("pe", "sr"):
                hat = getattr(self.series, f"{name}_hat")[c]
                slack = 3 * getattr(self.series, f"{name}_stderr")[c]
                if hat == 0:
                    continue
                self.assertLessEqual(getattr(bound, f"{name}_lower").value, hat + slack)
                self.assertLessEqual(hat, getattr(bound, f"{name}_upper").value + slack)
