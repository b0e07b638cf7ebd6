import itertools
import math

import numpy as np
import pytest

from eosched import (
    ChannelState,
    ParameterError,
    QueueState,
    ScheduleValidationError,
    SolverParams,
    dmrc_step,
    fixed_cr_schedule,
    josap_exact,
    josap_solve,
    observation_matching,
    optimal_arrival,
    project_ratio,
    random_schedule,
    ts_solve,
    validate_decision,
)
from conftest import make_config

RATIOS = (2 / 3, 1 / 2, 1 / 3, 1 / 4)


def queues(q, p):
    return QueueState(data=np.asarray(q, dtype=float), deficit=np.asarray(p, dtype=float))


def grid_maximum(v, chi, cap, points=20_001, stages=3):
    """Independent check of the closed form: refining grid search over
    [0, cap], narrowing around the incumbent until the spacing makes the
    objective error negligible."""
    lo, hi = 0.0, cap
    best_a, best_f = 0.0, 0.0
    for _ in range(stages):
        a = np.linspace(lo, hi, points)
        f = v * np.log1p(a) - chi * a
        idx = int(np.argmax(f))
        best_a, best_f = float(a[idx]), float(f[idx])
        step = (hi - lo) / (points - 1)
        lo, hi = max(0.0, best_a - step), min(cap, best_a + step)
        if hi <= lo:
            break
    return best_a, best_f


class TestOptimalArrival:
    def test_high_cost_idles(self):
        assert optimal_arrival(8000.0, 8000.0, 400.0) == 0.0
        assert optimal_arrival(9500.0, 8000.0, 123.0) == 0.0

    def test_low_cost_saturates(self):
        # 10 <= 8000 / 401, so the cap is optimal.
        assert optimal_arrival(10.0, 8000.0, 400.0) == 400.0

    def test_interior_stationary_point(self):
        assert optimal_arrival(100.0, 8000.0, 400.0) == pytest.approx(79.0)

    def test_negative_cost_saturates(self):
        assert optimal_arrival(-250.0, 8000.0, 400.0) == 400.0

    def test_zero_cap(self):
        assert optimal_arrival(5.0, 8000.0, 0.0) == 0.0

    def test_invalid_inputs(self):
        with pytest.raises(ParameterError):
            optimal_arrival(1.0, 0.0, 10.0)
        with pytest.raises(ParameterError):
            optimal_arrival(1.0, 10.0, -1.0)

    def test_matches_grid_search(self):
        rng = np.random.default_rng(17)
        for _ in range(60):
            v = float(rng.uniform(100, 20000))
            chi = float(rng.uniform(-v, 2 * v))
            cap = float(rng.uniform(0, 1000))
            a = optimal_arrival(chi, v, cap)
            _, f_grid = grid_maximum(v, chi, cap)
            f_closed = v * math.log1p(a) - chi * a
            assert abs(f_closed - f_grid) <= 1e-6


class TestProjectRatio:
    def test_reference_case(self):
        # Discrete objectives: 25138 > 22426 > 15657 > 7952 > 0.
        assert project_ratio(79.0 / 600.0, 600.0, RATIOS, 8000.0, 100.0) == 0.25

    def test_idle_when_cost_dominates(self):
        assert project_ratio(0.0, 600.0, RATIOS, 8000.0, 9000.0) == 0.0

    def test_singleton_set_with_negative_cost(self):
        assert project_ratio(1.0, 600.0, (0.25,), 8000.0, -1e6) == 0.25

    def test_free_volume_takes_largest_ratio(self):
        assert project_ratio(1.0, 600.0, RATIOS, 8000.0, 0.0) == 2 / 3

    def test_requires_positive_capacity(self):
        with pytest.raises(ParameterError):
            project_ratio(0.0, 0.0, RATIOS, 8000.0, 1.0)

    def test_beats_nearest_value_rounding(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            b = float(rng.choice((600.0, 800.0, 1000.0)))
            chi = float(rng.uniform(-50, 200))
            v = 8000.0
            rho = project_ratio(0.0, b, RATIOS, v, chi)
            chosen = v * math.log1p(rho * b) - chi * rho * b
            for alt in RATIOS + (0.0,):
                alt_val = v * math.log1p(alt * b) - chi * alt * b
                assert chosen >= alt_val - 1e-9


class TestObservationMatching:
    def test_single_positive_pair(self):
        alpha = np.array([[2.0]])
        b = np.array([[500.0]])
        assert observation_matching(alpha, b)[0, 0] == 1

    def test_diagonal_instance(self):
        alpha = np.array([[3.0, 1.0], [1.0, 3.0]])
        b = np.ones((2, 2))
        x = observation_matching(alpha, b)
        assert np.array_equal(x, np.eye(2, dtype=int))

    def test_zero_multipliers_idle(self):
        x = observation_matching(np.zeros((3, 4)), np.full((3, 4), 800.0))
        assert x.sum() == 0

    def test_output_is_binary_with_row_col_limits(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            alpha = rng.uniform(0, 5, size=(4, 5))
            b = rng.choice((0.0, 600.0, 800.0), size=(4, 5))
            x = observation_matching(alpha, b)
            assert set(np.unique(x)) <= {0, 1}
            assert x.sum(axis=0).max() <= 1
            assert x.sum(axis=1).max() <= 1


def enumerate_josap(Q, P, B, config):
    """Exhaustive oracle: every feasible matching crossed with every ratio
    combination for its matched pairs."""
    I, K = B.shape
    v = config.control_factor
    best = 0.0

    def matchings(i, used):
        if i == I:
            yield []
            return
        for rest in matchings(i + 1, used):
            yield rest
        for k in range(K):
            if k not in used and B[i, k] > 0:
                for rest in matchings(i + 1, used | {k}):
                    yield [(i, k)] + rest

    for matching in matchings(0, frozenset()):
        if not matching:
            continue
        for combo in itertools.product(config.compression_set + (0.0,), repeat=len(matching)):
            total = 0.0
            for (i, k), rho in zip(matching, combo):
                a = rho * B[i, k]
                total += v * math.log1p(a) + (P[i] - Q[k, i]) * a
            best = max(best, total)
    return best


class TestJosapExact:
    def test_no_visibility_idles(self):
        cfg = make_config(num_targets=2, num_eos=2)
        sol = josap_exact(np.zeros((2, 2)), np.zeros(2), np.zeros((2, 2)), cfg)
        assert sol.observe.sum() == 0 and sol.objective == 0.0

    def test_deep_backlog_idles(self):
        cfg = make_config(num_targets=1, num_eos=1)
        sol = josap_exact(np.array([[50000.0]]), np.zeros(1), np.array([[600.0]]), cfg)
        assert sol.observe.sum() == 0
        assert sol.rho[0, 0] == 0.0

    def test_empty_queues_take_largest_ratio(self):
        cfg = make_config(num_targets=1, num_eos=1)
        sol = josap_exact(np.zeros((1, 1)), np.zeros(1), np.array([[600.0]]), cfg)
        assert sol.observe[0, 0] == 1
        assert sol.rho[0, 0] == pytest.approx(2 / 3)
        assert sol.objective == pytest.approx(8000 * math.log1p(400.0))

    def test_floor_deficit_encourages_arrivals(self):
        # At Q=9000 the backlog pressure idles the pair; a large enough
        # rate-floor deficit offsets it and the pair is matched again.
        cfg = make_config(num_targets=1, num_eos=1)
        idle_q = 9000.0
        no_deficit = josap_exact(np.array([[idle_q]]), np.zeros(1), np.array([[600.0]]), cfg)
        with_deficit = josap_exact(
            np.array([[idle_q]]), np.array([8900.0]), np.array([[600.0]]), cfg
        )
        assert no_deficit.observe.sum() == 0
        assert with_deficit.observe.sum() == 1

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_full_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        I, K = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        cfg = make_config(num_targets=I, num_eos=K)
        B = rng.choice((0.0, 600.0, 800.0, 1000.0), size=(I, K))
        Q = rng.uniform(0, 15000, size=(K, I))
        P = rng.uniform(0, 8000, size=I)
        sol = josap_exact(Q, P, B, cfg)
        expected = enumerate_josap(Q, P, B, cfg)
        assert sol.objective == pytest.approx(expected, rel=1e-12, abs=1e-9)


class TestJosapSolve:
    def test_empty_visibility_converges_immediately(self):
        cfg = make_config(num_targets=2, num_eos=2)
        res = josap_solve(np.zeros((2, 2)), np.zeros(2), np.zeros((2, 2)), cfg)
        assert res.observe.sum() == 0
        assert res.iterations == 1
        assert res.converged

    def test_single_pair_matches_exact(self):
        cfg = make_config(num_targets=1, num_eos=1)
        res = josap_solve(np.zeros((1, 1)), np.zeros(1), np.array([[600.0]]), cfg)
        assert res.observe[0, 0] == 1
        assert res.rho[0, 0] == pytest.approx(2 / 3)
        assert res.arrivals[0, 0] == pytest.approx(400.0)

    def test_duals_stay_nonnegative(self):
        cfg = make_config(num_targets=3, num_eos=3)
        rng = np.random.default_rng(2)
        B = rng.choice((0.0, 600.0, 1000.0), size=(3, 3))
        res = josap_solve(rng.uniform(0, 2000, (3, 3)), rng.uniform(0, 500, 3), B, cfg)
        assert np.all(res.duals >= 0)

    def test_arrivals_consistent_with_schedule(self):
        cfg = make_config(num_targets=3, num_eos=4)
        rng = np.random.default_rng(8)
        B = rng.choice((0.0, 600.0, 800.0), size=(3, 4))
        res = josap_solve(rng.uniform(0, 3000, (4, 3)), np.zeros(3), B, cfg)
        assert np.allclose(res.arrivals, (res.rho * res.observe * B).T)

    def test_quality_against_exact(self):
        cfg_base = make_config()
        rng = np.random.default_rng(100)
        good = 0
        for _ in range(30):
            I, K = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            cfg = make_config(num_targets=I, num_eos=K)
            B = rng.choice((0.0, 600.0, 800.0, 1000.0), size=(I, K))
            Q = rng.uniform(0, 5000, size=(K, I))
            P = rng.uniform(0, 2000, size=I)
            res = josap_solve(Q, P, B, cfg)
            exact = josap_exact(Q, P, B, cfg)
            if res.objective >= 0.98 * exact.objective - 1e-9:
                good += 1
        assert good >= 27


class TestTsSolve:
    def test_no_links_no_schedule(self):
        cfg = make_config(num_eos=2, num_destinations=1)
        y, service = ts_solve(np.zeros((2, 2)), np.zeros((2, 1)), cfg)
        assert y.sum() == 0 and service.sum() == 0

    def test_capacity_weighted_choice(self):
        # Weights 10*200 vs 6*400: the second satellite wins the one slot.
        cfg = make_config(num_targets=1, num_eos=2, num_destinations=1, transceivers=1)
        Q = np.array([[10.0], [6.0]])
        C = np.array([[200.0], [400.0]])
        y, service = ts_solve(Q, C, cfg)
        assert y[1, 0] == 1 and y[0, 0] == 0
        assert service[1, 0, 0] == 400.0

    def test_two_transceivers_serve_both(self):
        cfg = make_config(num_targets=1, num_eos=2, num_destinations=1, transceivers=2)
        Q = np.array([[10.0], [6.0]])
        C = np.array([[200.0], [400.0]])
        y, _ = ts_solve(Q, C, cfg)
        assert y.sum() == 2

    def test_serves_most_backlogged_flow_lowest_index_on_ties(self):
        cfg = make_config(num_targets=3, num_eos=1, num_destinations=1, transceivers=1)
        Q = np.array([[5.0, 9.0, 9.0]])
        C = np.array([[300.0]])
        _, service = ts_solve(Q, C, cfg)
        assert service[0, 0, 1] == 300.0
        assert service[0, 0, 2] == 0.0

    def test_scaling_queues_leaves_matching_invariant(self):
        cfg = make_config(num_targets=2, num_eos=4, num_destinations=2, transceivers=1)
        rng = np.random.default_rng(4)
        Q = rng.uniform(1, 100, size=(4, 2))
        C = rng.choice((0.0, 200.0, 400.0), size=(4, 2))
        y1, _ = ts_solve(Q, C, cfg)
        y2, _ = ts_solve(1000.0 * Q, C, cfg)
        assert np.array_equal(y1, y2)

    @pytest.mark.parametrize("seed", range(15))
    def test_matches_exhaustive_schedule_search(self, seed):
        rng = np.random.default_rng(seed)
        K, N = int(rng.integers(1, 6)), int(rng.integers(1, 3))
        mults = tuple(int(rng.integers(1, 3)) for _ in range(N))
        cfg = make_config(
            num_targets=2, num_eos=K, num_destinations=N, transceivers=mults
        )
        Q = rng.uniform(0, 50, size=(K, 2))
        C = rng.choice((0.0, 200.0, 400.0), size=(K, N))
        y, service = ts_solve(Q, C, cfg)
        got = float(np.sum(np.max(Q, axis=1)[:, None] * y * C))

        best = 0.0
        top = np.max(Q, axis=1)
        for assign in itertools.product(range(N + 1), repeat=K):
            counts = [0] * N
            total = 0.0
            ok = True
            for k, choice in enumerate(assign):
                if choice == N:
                    continue
                counts[choice] += 1
                if counts[choice] > mults[choice]:
                    ok = False
                    break
                total += top[k] * C[k, choice]
            if ok:
                best = max(best, total)
        assert got == pytest.approx(best, rel=1e-12, abs=1e-9)


def random_state(cfg, seed, duty=0.7):
    rng = np.random.default_rng(seed)
    I, K, N = cfg.num_targets, cfg.num_eos, cfg.num_destinations
    obs_mask = rng.random((I, K)) < duty
    trans_mask = rng.random((K, N)) < duty
    B = np.where(obs_mask, rng.choice((600.0, 800.0, 1000.0), size=(I, K)), 0.0)
    C = np.where(trans_mask, rng.choice((0.0, 200.0, 400.0), size=(K, N)), 0.0)
    return ChannelState(B=B, C=C), obs_mask | (B > 0), trans_mask | (C > 0)


class TestPolicies:
    def test_random_schedule_feasible(self):
        cfg = make_config(num_targets=4, num_eos=5, num_destinations=2, transceivers=2)
        rng = np.random.default_rng(0)
        for seed in range(30):
            state, obs_mask, trans_mask = random_state(cfg, seed)
            q = queues(np.random.default_rng(seed).uniform(0, 100, (5, 4)), np.zeros(4))
            d = random_schedule(q, state, cfg, rng)
            validate_decision(d, cfg, state, obs_mask, trans_mask)

    def test_random_single_pair_matched_half_the_time(self):
        cfg = make_config(num_targets=1, num_eos=1, num_destinations=1)
        state = ChannelState(B=np.array([[800.0]]), C=np.array([[0.0]]))
        rng = np.random.default_rng(42)
        q = queues(np.zeros((1, 1)), np.zeros(1))
        hits = sum(
            random_schedule(q, state, cfg, rng).observe[0, 0] for _ in range(10000)
        )
        assert abs(hits / 10000 - 0.5) < 0.02

    def test_random_ratio_uniform_over_set(self):
        cfg = make_config(num_targets=1, num_eos=1)
        state = ChannelState(B=np.array([[800.0]]), C=np.array([[0.0]]))
        rng = np.random.default_rng(3)
        q = queues(np.zeros((1, 1)), np.zeros(1))
        seen = []
        for _ in range(8000):
            d = random_schedule(q, state, cfg, rng)
            if d.observe[0, 0]:
                seen.append(d.rho[0, 0])
        freqs = [np.mean(np.isclose(seen, r)) for r in cfg.compression_set]
        assert all(abs(f - 0.25) < 0.03 for f in freqs)

    def test_random_no_contacts_idles(self):
        cfg = make_config(num_targets=2, num_eos=2, num_destinations=1)
        state = ChannelState(B=np.zeros((2, 2)), C=np.zeros((2, 1)))
        q = queues(np.zeros((2, 2)), np.zeros(2))
        d = random_schedule(q, state, cfg, np.random.default_rng(0))
        assert d.observe.sum() == 0 and d.transmit.sum() == 0
        assert d.arrivals.sum() == 0 and d.service.sum() == 0

    def test_fixed_cr_transmission_matches_dmrc_under_equal_backlogs(self):
        # With every satellite's top queue equal, backlog-weighted link
        # weights are proportional to raw capacities, so both policies
        # pick the same transmission schedule.
        cfg = make_config(num_targets=2, num_eos=4, num_destinations=2, transceivers=1)
        rng = np.random.default_rng(12)
        for _ in range(10):
            C = rng.choice((0.0, 200.0, 400.0), size=(4, 2))
            Q = np.full((4, 2), 700.0)
            y_dmrc, _ = ts_solve(Q, C, cfg)
            state = ChannelState(B=np.zeros((2, 4)), C=C)
            d = fixed_cr_schedule(queues(Q, np.zeros(2)), state, cfg)
            assert np.array_equal(y_dmrc, d.transmit)

    def test_fixed_cr_always_quarter(self):
        cfg = make_config(num_targets=3, num_eos=4, num_destinations=2, transceivers=1)
        for seed in range(20):
            state, obs_mask, trans_mask = random_state(cfg, seed)
            q = queues(np.random.default_rng(seed).uniform(0, 100, (4, 3)), np.zeros(3))
            d = fixed_cr_schedule(q, state, cfg)
            validate_decision(d, cfg, state, obs_mask, trans_mask)
            assert np.all(d.rho[d.observe == 1] == 0.25)

    def test_fixed_cr_matches_every_available_contact_possible(self):
        cfg = make_config(num_targets=2, num_eos=2, num_destinations=1, transceivers=2)
        state = ChannelState(
            B=np.array([[600.0, 0.0], [0.0, 800.0]]),
            C=np.array([[200.0], [400.0]]),
        )
        q = queues(np.ones((2, 2)), np.zeros(2))
        d = fixed_cr_schedule(q, state, cfg)
        assert d.observe.sum() == 2
        assert d.transmit.sum() == 2

    def test_dmrc_step_no_contacts(self):
        cfg = make_config(num_targets=2, num_eos=2, num_destinations=1)
        state = ChannelState(B=np.zeros((2, 2)), C=np.zeros((2, 1)))
        q = queues(np.zeros((2, 2)), np.zeros(2))
        d = dmrc_step(q, state, cfg)
        assert d.observe.sum() == 0 and d.transmit.sum() == 0
        assert d.arrivals.sum() == 0 and d.service.sum() == 0

    def test_dmrc_step_single_contact_schedules_both(self):
        cfg = make_config(num_targets=1, num_eos=1, num_destinations=1)
        state = ChannelState(B=np.array([[600.0]]), C=np.array([[400.0]]))
        q = queues(np.array([[100.0]]), np.zeros(1))
        d = dmrc_step(q, state, cfg)
        assert d.observe[0, 0] == 1
        assert d.transmit[0, 0] == 1
        assert d.service[0, 0, 0] == 400.0
        assert d.arrivals[0, 0] > 0

    def test_dmrc_step_feasible_on_random_instances(self):
        cfg = make_config(num_targets=4, num_eos=6, num_destinations=2, transceivers=2)
        for seed in range(20):
            state, obs_mask, trans_mask = random_state(cfg, seed)
            q = queues(
                np.random.default_rng(seed).uniform(0, 2000, (6, 4)), np.zeros(4)
            )
            d = dmrc_step(q, state, cfg)
            validate_decision(d, cfg, state, obs_mask, trans_mask)


class TestValidator:
    def base(self):
        cfg = make_config(num_targets=2, num_eos=2, num_destinations=1, transceivers=1)
        state = ChannelState(
            B=np.array([[600.0, 800.0], [1000.0, 600.0]]),
            C=np.array([[400.0], [200.0]]),
        )
        q = queues(np.full((2, 2), 50.0), np.zeros(2))
        d = dmrc_step(q, state, cfg)
        masks = np.ones((2, 2), dtype=bool), np.ones((2, 1), dtype=bool)
        return cfg, state, d, masks

    def test_valid_decision_passes(self):
        cfg, state, d, (om, tm) = self.base()
        validate_decision(d, cfg, state, om, tm)

    def test_double_observation_rejected(self):
        cfg, state, d, (om, tm) = self.base()
        bad = np.array([[1, 1], [0, 0]])
        d2 = type(d)(
            observe=bad, transmit=d.transmit, rho=d.rho, arrivals=d.arrivals,
            service=d.service,
        )
        with pytest.raises(ScheduleValidationError):
            validate_decision(d2, cfg, state, om, tm)

    def test_transceiver_limit_enforced(self):
        cfg, state, d, (om, tm) = self.base()
        bad = np.array([[1], [1]])
        d2 = type(d)(
            observe=d.observe, transmit=bad, rho=d.rho, arrivals=d.arrivals,
            service=d.service,
        )
        with pytest.raises(ScheduleValidationError):
            validate_decision(d2, cfg, state, om, tm)

    def test_service_over_capacity_rejected(self):
        cfg, state, d, (om, tm) = self.base()
        bad = d.service.copy()
        bad[bad > 0] *= 2
        d2 = type(d)(
            observe=d.observe, transmit=d.transmit, rho=d.rho, arrivals=d.arrivals,
            service=bad,
        )
        with pytest.raises(ScheduleValidationError):
            validate_decision(d2, cfg, state, om, tm)

    def test_ratio_outside_set_rejected(self):
        cfg, state, d, (om, tm) = self.base()
        bad = d.rho.copy()
        matched = np.argwhere(d.observe == 1)
        if len(matched) == 0:
            pytest.skip("no matched pair in this instance")
        i, k = matched[0]
        bad[i, k] = 0.9
        arr = (bad * d.observe * state.B).T
        d2 = type(d)(
            observe=d.observe, transmit=d.transmit, rho=bad, arrivals=arr,
            service=d.service,
        )
        with pytest.raises(ScheduleValidationError):
            validate_decision(d2, cfg, state, om, tm)

    def test_inconsistent_arrivals_rejected(self):
        cfg, state, d, (om, tm) = self.base()
        arr = d.arrivals.copy()
        arr += 1.0
        d2 = type(d)(
            observe=d.observe, transmit=d.transmit, rho=d.rho, arrivals=arr,
            service=d.service,
        )
        with pytest.raises(ScheduleValidationError):
            validate_decision(d2, cfg, state, om, tm)
