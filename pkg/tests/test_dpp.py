import math

import numpy as np
import pytest

from mimosd.channel import bits_diff, draw_channel_instance, zero_forcing_detect
from mimosd.dpp import (DetectionResult, DetectorConfig, LambdaSchedule, NoSchedule,
                        baseline_config, default_lambda_schedule, dpp_detect,
                        early_termination_check, feature_cost, lambda_lookup,
                        nn_inference_cost, nn_initial_radius, sorted_predictions)
from mimosd.numerics import OpCounter
from mimosd.search import conventional_radius, sphere_decode, subtree_min_metric

import helpers


class TestDetectorConfig:
    def test_lambda_bounds(self):
        with pytest.raises(ValueError):
            DetectorConfig(lambda1=0.5, lambda2=1.3)
        with pytest.raises(ValueError):
            DetectorConfig(lambda1=1.2, lambda2=0.0)

    def test_epsilon_domain(self):
        with pytest.raises(ValueError):
            DetectorConfig(lambda1=1.2, lambda2=1.3, epsilon_complement=1.0)
        with pytest.raises(ValueError):
            DetectorConfig(lambda1=1.2, lambda2=1.3, epsilon_complement=0.0)

    def test_termination_requires_ordering(self):
        with pytest.raises(ValueError):
            DetectorConfig(lambda1=1.2, lambda2=1.3, enable_nn_ordering=False,
                           enable_early_termination=True)

    def test_needs_model(self):
        assert DetectorConfig(lambda1=1.2, lambda2=1.3).needs_model
        assert not baseline_config().needs_model
        only_radius = DetectorConfig(lambda1=1.2, lambda2=math.inf,
                                     enable_nn_ordering=False,
                                     enable_early_termination=False)
        assert only_radius.needs_model

    def test_baseline_flags(self):
        cfg = baseline_config(0.99)
        assert not (cfg.enable_nn_radius or cfg.enable_nn_ordering
                    or cfg.enable_early_termination)
        assert cfg.epsilon_complement == 0.99


class TestLambdaSchedule:
    def test_grid_values(self):
        sched = default_lambda_schedule()
        assert sched.entries == {
            (16, 5.0): (1.2, 1.3),
            (16, 7.0): (1.3, 1.4),
            (16, 9.0): (1.4, 1.5),
            (16, 11.0): (1.5, 1.6),
            (16, 13.0): (1.6, 1.7),
            (24, 5.0): (1.2, 1.1),
            (24, 7.0): (1.3, 1.2),
            (24, 9.0): (1.4, 1.4),
            (24, 11.0): (1.4, 1.5),
            (24, 13.0): (1.7, 1.6),
        }
        assert sched.snr_points(16) == [5.0, 7.0, 9.0, 11.0, 13.0]
        assert sched.snr_points(24) == [5.0, 7.0, 9.0, 11.0, 13.0]

    def test_exact_lookups(self):
        sched = default_lambda_schedule()
        assert lambda_lookup(sched, 16, 5.0) == (1.2, 1.3)
        assert lambda_lookup(sched, 24, 13.0) == (1.7, 1.6)
        assert lambda_lookup(sched, 16, 9.0) == (1.4, 1.5)

    def test_nearest_with_tie_up(self):
        sched = default_lambda_schedule()
        # 6 dB sits midway between 5 and 7; ties round to the higher SNR
        assert lambda_lookup(sched, 16, 6.0) == (1.3, 1.4)
        assert lambda_lookup(sched, 16, 12.0) == (1.6, 1.7)
        assert lambda_lookup(sched, 24, 3.0) == (1.2, 1.1)
        assert lambda_lookup(sched, 16, 20.0) == (1.6, 1.7)

    def test_unlisted_antenna_count(self):
        with pytest.raises(NoSchedule):
            lambda_lookup(default_lambda_schedule(), 8, 9.0)

    def test_user_supplied_schedule(self):
        sched = LambdaSchedule(entries={(8, 9.0): (1.8, 1.5)})
        assert lambda_lookup(sched, 8, 10.0) == (1.8, 1.5)


class TestSortedPredictions:
    def test_already_ascending(self):
        g, perm = sorted_predictions(np.array([0.5, 1.0, 2.0, 7.0]))
        assert np.array_equal(perm, [0, 1, 2, 3])
        assert np.array_equal(g, [0.5, 1.0, 2.0, 7.0])

    def test_worked_case(self):
        g, perm = sorted_predictions(np.array([3.0, 1.0, 2.0, 0.0]))
        assert np.array_equal(g, [0.0, 1.0, 2.0, 3.0])
        assert np.array_equal(perm, [3, 1, 2, 0])

    def test_ties_keep_index_order(self):
        g, perm = sorted_predictions(np.full(4, 2.5))
        assert np.array_equal(perm, [0, 1, 2, 3])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            sorted_predictions(np.array([1.0, np.nan, 2.0, 3.0]))


class TestRadiusRule:
    def test_zero_prediction(self):
        assert nn_initial_radius(0.0, 1.4, 5.0) == 0.0

    def test_clamped_by_conventional(self):
        assert nn_initial_radius(10.0, 1.4, 5.0) == 5.0

    def test_scaled_prediction_wins_when_smaller(self):
        assert nn_initial_radius(2.0, 1.4, 5.0) == pytest.approx(2.8)

    def test_schedule_integration(self):
        l1, _ = lambda_lookup(default_lambda_schedule(), 16, 9.0)
        assert l1 == 1.4
        assert nn_initial_radius(2.0, l1, 10.0) == pytest.approx(2.8)

    def test_infinite_lambda_keeps_conventional(self):
        assert nn_initial_radius(2.0, math.inf, 5.0) == 5.0

    def test_negative_prediction_rejected(self):
        with pytest.raises(ValueError):
            nn_initial_radius(-0.1, 1.4, 5.0)


class TestTerminationRule:
    def test_fires_when_prediction_exceeds_scaled_radius(self):
        assert early_termination_check(1.3, 1.0, 1.4) is True

    def test_holds_when_prediction_reachable(self):
        assert early_termination_check(1.3, 1.0, 1.2) is False

    def test_infinite_lambda_disables(self):
        assert early_termination_check(math.inf, 1.0, 1e12) is False

    def test_boundary_is_strict(self):
        assert early_termination_check(1.3, 1.0, 1.3) is False


class TestCostModels:
    def test_inference_cost_formula(self):
        for n_t, m in ((4, 4), (16, 4), (24, 4)):
            inputs = 2 * n_t + 2
            hidden = 2 * n_t + 2 * m
            macs = hidden * inputs + m * hidden
            cost = nn_inference_cost(n_t, m)
            assert cost.mults == macs + hidden
            assert cost.adds == macs + hidden + m

    def test_feature_cost_counts(self):
        # n squared magnitudes + fold for z^H z, the triangular product for
        # R^H z, and the affine normalization of every feature
        cost = feature_cost(4)
        inputs = 10
        assert cost.mults == 4 + 10 + inputs
        assert cost.adds == 7 + 6 + inputs


def detect(inst, model, config, qpsk_c):
    return dpp_detect(inst.y, inst.h, inst.noise_variance, model, config, qpsk_c)


class TestDetect:
    def test_noiseless_recovers_truth(self, qpsk_c, model8):
        lam1, lam2 = helpers.CI_LAMBDAS_8[9.0]
        config = DetectorConfig(lambda1=lam1, lambda2=lam2)
        rng = np.random.default_rng(77)
        for _ in range(200):
            inst = draw_channel_instance(8, 8, qpsk_c, 200.0, rng)
            result = detect(inst, model8, config, qpsk_c)
            assert np.array_equal(result.solution, inst.x_true)

    def test_degrades_to_conventional_search(self, qpsk_c, model4):
        # radius and termination disabled; ordering alone cannot change the metric
        config = DetectorConfig(lambda1=math.inf, lambda2=math.inf)
        corpus = helpers.corpus(4, 4, qpsk_c, 9.0, 1000, 31)
        for inst in corpus:
            aided = detect(inst, model4, config, qpsk_c)
            radius = conventional_radius(inst.noise_variance, 4, 0.999)
            plain = sphere_decode(helpers.problem_for(inst, qpsk_c, radius=radius))
            if plain.solution is None:
                assert aided.used_fallback
            else:
                assert abs(aided.metric - plain.metric) < 1e-9
                assert np.array_equal(aided.solution, plain.solution)

    def test_baseline_needs_no_model(self, qpsk_c):
        inst = draw_channel_instance(4, 4, qpsk_c, 9.0, np.random.default_rng(5))
        result = detect(inst, None, baseline_config(), qpsk_c)
        assert result.nn_ops == OpCounter()
        assert not result.terminated_early
        assert result.subtrees_searched == 4

    def test_nn_cost_charged_exactly_once(self, qpsk_c, model4):
        inst = draw_channel_instance(4, 4, qpsk_c, 9.0, np.random.default_rng(6))
        result = detect(inst, model4, DetectorConfig(lambda1=1.4, lambda2=1.3),
                        qpsk_c)
        expected = feature_cost(4).copy()
        inference = nn_inference_cost(4, 4)
        expected.add(inference.mults, inference.adds)
        assert result.nn_ops == expected

    def test_metric_matches_solution_residual(self, qpsk_c, model4):
        config = DetectorConfig(lambda1=1.4, lambda2=1.3)
        from mimosd.numerics import qrd
        for seed in range(30):
            inst = draw_channel_instance(4, 4, qpsk_c, 9.0,
                                         np.random.default_rng(seed))
            result = detect(inst, model4, config, qpsk_c)
            factors = qrd(inst.h)
            z = factors.q1.conj().T @ inst.y
            res = z - factors.r @ result.solution
            assert result.metric == pytest.approx(float(np.sum(np.abs(res) ** 2)),
                                                  rel=1e-9)

    def test_fallback_is_zero_forcing(self, qpsk_c, model4):
        # a vanishing coverage target empties the sphere
        config = DetectorConfig(lambda1=1.4, lambda2=1.3, epsilon_complement=1e-9)
        hit = 0
        for seed in range(10):
            inst = draw_channel_instance(4, 4, qpsk_c, 9.0,
                                         np.random.default_rng(seed))
            result = detect(inst, model4, config, qpsk_c)
            if result.used_fallback:
                hit += 1
                zf = zero_forcing_detect(inst.y, inst.h, qpsk_c)
                assert np.array_equal(result.solution, zf)
        assert hit == 10

    def test_radius_dominance_prunes_work(self, qpsk_c, model4):
        # identical visit order, so a tighter initial radius can only shave nodes
        radius_only = DetectorConfig(lambda1=1.2, lambda2=math.inf,
                                     enable_nn_ordering=False,
                                     enable_early_termination=False)
        for inst in helpers.corpus(4, 4, qpsk_c, 9.0, 100, 41):
            aided = detect(inst, model4, radius_only, qpsk_c)
            plain = detect(inst, None, baseline_config(), qpsk_c)
            assert aided.nodes_visited <= plain.nodes_visited
            assert aided.tree_ops.total <= plain.tree_ops.total

    def test_termination_returns_prefix_minimum(self, qpsk_c, model4):
        # whenever the loop stops early with an incumbent, that incumbent is
        # the exact minimum over the sub-trees actually searched
        config = DetectorConfig(lambda1=1.5, lambda2=1.1)
        fired = 0
        for inst in helpers.corpus(4, 4, qpsk_c, 11.0, 300, 59):
            result = detect(inst, model4, config, qpsk_c)
            if not result.terminated_early or result.used_fallback:
                continue
            fired += 1
            assert result.subtrees_searched < 4
            problem = helpers.problem_for(inst, qpsk_c)
            from mimosd.numerics import qrd
            from mimosd.predictor import extract_features, predict
            factors = qrd(inst.h)
            z = factors.q1.conj().T @ inst.y
            raw = predict(model4, extract_features(z, factors.r,
                                                   inst.noise_variance))
            _, perm = sorted_predictions(raw)
            searched = perm[:result.subtrees_searched]
            best = min(subtree_min_metric(problem, int(q)) for q in searched)
            assert result.metric == pytest.approx(best, rel=1e-9)
        assert fired > 20

    def test_subtrees_monotone_in_lambda1(self, qpsk_c, model4):
        corpus = helpers.corpus(4, 4, qpsk_c, 9.0, 1000, 501)
        runs = []
        for lam1 in (1.0, 1.5, math.inf):
            subs = []
            errors = 0
            for inst in corpus:
                r = detect(inst, model4, DetectorConfig(lambda1=lam1, lambda2=1.4),
                           qpsk_c)
                subs.append(r.subtrees_searched)
                errors += bits_diff(r.solution, inst.x_true, qpsk_c)
            runs.append((np.array(subs), errors))
        for (lo_subs, lo_errors), (hi_subs, hi_errors) in zip(runs, runs[1:]):
            assert np.all(hi_subs >= lo_subs)
            assert hi_errors <= lo_errors

    def test_subtrees_monotone_in_lambda2(self, qpsk_c, model4):
        corpus = helpers.corpus(4, 4, qpsk_c, 9.0, 1000, 501)
        runs = []
        for lam2 in (1.0, 1.8, math.inf):
            subs = []
            errors = 0
            for inst in corpus:
                r = detect(inst, model4, DetectorConfig(lambda1=1.5, lambda2=lam2),
                           qpsk_c)
                subs.append(r.subtrees_searched)
                errors += bits_diff(r.solution, inst.x_true, qpsk_c)
            runs.append((np.array(subs), errors))
        for (lo_subs, lo_errors), (hi_subs, hi_errors) in zip(runs, runs[1:]):
            assert np.all(hi_subs >= lo_subs)
            assert hi_errors <= lo_errors
        # with termination disabled every sub-tree is visited
        assert np.all(runs[-1][0] == 4)

    def test_result_invariants(self, qpsk_c, model4):
        config = DetectorConfig(lambda1=1.2, lambda2=1.2)
        for inst in helpers.corpus(4, 4, qpsk_c, 7.0, 200, 13):
            r = detect(inst, model4, config, qpsk_c)
            assert 1 <= r.subtrees_searched <= 4
            if r.terminated_early:
                assert r.subtrees_searched < 4
            assert isinstance(r, DetectionResult)

    def test_missing_model_rejected(self, qpsk_c):
        inst = draw_channel_instance(4, 4, qpsk_c, 9.0, np.random.default_rng(0))
        with pytest.raises(ValueError, match="model"):
            detect(inst, None, DetectorConfig(lambda1=1.2, lambda2=1.3), qpsk_c)

    def test_mismatched_model_rejected(self, qpsk_c, model4):
        inst = draw_channel_instance(8, 8, qpsk_c, 9.0, np.random.default_rng(0))
        with pytest.raises(ValueError, match="n_t"):
            detect(inst, model4, DetectorConfig(lambda1=1.2, lambda2=1.3), qpsk_c)

    def test_dimension_check(self, qpsk_c, model4):
        inst = draw_channel_instance(4, 4, qpsk_c, 9.0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            dpp_detect(inst.y[:3], inst.h, inst.noise_variance, model4,
                       DetectorConfig(lambda1=1.2, lambda2=1.3), qpsk_c)
