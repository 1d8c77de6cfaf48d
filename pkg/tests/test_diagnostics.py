import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from vrkit import (
    Dataset,
    PhaseTestState,
    Problem,
    SyntheticSpec,
    Trace,
    TraceRow,
    estimate_sigma2,
    gen_separable,
    phase_ratio,
    two_phase_slope_fit,
)
from vrkit.diagnostics import TraceRecorder

from conftest import make_problem


class TestPhaseRatio:
    def test_constant_history_gives_zero(self):
        history = np.full(101, 5.0)
        assert phase_ratio(history, 60) == 0.0

    def test_linear_history_gives_one(self):
        history = np.arange(0, 101, dtype=float)
        for t in (10, 60, 100):
            assert phase_ratio(history, t) == pytest.approx(1.0)

    def test_sqrt_history_stays_below_half(self):
        # sublinear growth of the squared norms does not trigger at 0.5
        history = np.sqrt(np.arange(0, 201, dtype=float))
        for t in (50, 100, 200):
            assert phase_ratio(history, t) == pytest.approx(np.sqrt(2.0) - 1.0)
        assert phase_ratio(history, 100) < 0.5

    @settings(max_examples=50, deadline=None)
    @given(
        scale=st.floats(min_value=1e-6, max_value=1e6),
        seed=st.integers(min_value=0, max_value=999),
        t=st.sampled_from([10, 40, 80]),
    )
    def test_scale_invariance(self, scale, seed, t):
        rng = np.random.default_rng(seed)
        history = np.cumsum(rng.random(81) + 0.01)
        base = phase_ratio(history, t)
        scaled = phase_ratio(history * scale, t)
        assert scaled == pytest.approx(base, rel=1e-9)

    def test_errors(self):
        history = np.arange(0, 20, dtype=float)
        with pytest.raises(ValueError):
            phase_ratio(history, 7)  # odd
        with pytest.raises(ValueError):
            phase_ratio(history, 40)  # out of range
        with pytest.raises(ValueError):
            phase_ratio(np.zeros(20), 10)  # zero comparison value


class TestPhaseTestState:
    def test_fires_only_at_even_steps_past_burn_in(self):
        state = PhaseTestState(theta=0.5, burn_in_threshold=4, capacity=10)
        fired = [state.observe(t, float(t)) for t in range(1, 11)]
        # linear growth: R = 1 at every even check from t = 4 on
        assert fired == [False, False, False, True, False, True, False, True, False, True]
        assert state.last_R == pytest.approx(1.0)

    def test_no_decision_on_zero_comparison(self):
        state = PhaseTestState(theta=0.1, burn_in_threshold=2, capacity=8)
        assert not state.observe(1, 0.0)
        assert not state.observe(2, 5.0)  # comparison value is zero
        assert state.last_R is None


class TestEstimateSigma2:
    def test_single_example_is_zero(self):
        problem = make_problem(n=1, d=4, seed=0, loss="squared", classification=False)
        value, err = estimate_sigma2(problem, np.ones(4))
        assert value == 0.0 and err == 0.0

    def test_interpolating_point_is_zero(self):
        dataset, w_star = gen_separable(
            SyntheticSpec(n=100, d=8, mislabel_fraction=0.0, margin=0.5, seed=2)
        )
        problem = Problem(dataset=dataset, loss="squared_hinge", l2_reg=0.0)
        value, _ = estimate_sigma2(problem, w_star / 0.5)
        assert value == pytest.approx(0.0, abs=1e-20)

    def test_two_opposed_gradients_give_unit_variance(self):
        # squared loss rows engineered to produce per-example gradients +1, -1
        dataset = Dataset(
            features=sp.csr_matrix(np.array([[1.0], [1.0]])),
            labels=np.array([-1.0, 1.0]),
        )
        problem = Problem(dataset=dataset, loss="squared", l2_reg=0.0)
        value, err = estimate_sigma2(problem, np.array([0.0]))
        assert value == pytest.approx(1.0)
        assert err == 0.0

    def test_exhaustive_is_seed_independent(self):
        problem = make_problem(n=30, d=5, seed=7)
        w = np.random.default_rng(1).standard_normal(5)
        a, _ = estimate_sigma2(problem, w, exhaustive=True, seed=0)
        b, _ = estimate_sigma2(problem, w, exhaustive=True, seed=999)
        assert a == b

    def test_sampling_mode_reports_error_and_converges(self):
        problem = make_problem(n=40, d=5, seed=3)
        w = np.random.default_rng(2).standard_normal(5)
        exact, _ = estimate_sigma2(problem, w, exhaustive=True)
        approx, stderr = estimate_sigma2(problem, w, exhaustive=False, sample_size=4000, seed=5)
        assert stderr > 0
        assert abs(approx - exact) <= 5 * stderr

    def test_exhaustive_cap(self):
        n = 10**4 + 1
        dataset = Dataset(
            features=sp.csr_matrix((np.ones(n), (np.arange(n), np.zeros(n, dtype=int))), shape=(n, 1)),
            labels=np.zeros(n),
        )
        problem = Problem(dataset=dataset, loss="squared", l2_reg=0.0)
        with pytest.raises(ValueError, match="capped"):
            estimate_sigma2(problem, np.zeros(1), exhaustive=True)


class TestTwoPhaseSlopeFit:
    @pytest.mark.parametrize("t0", [0, 100, 1000])
    def test_recovers_sqrt_growth_exponent(self, t0):
        t = np.arange(1, 4097)
        series = np.sqrt(np.maximum(0, t - t0)) + 1.0
        _, exponent = two_phase_slope_fit(series)
        assert exponent == pytest.approx(0.5, abs=0.05)

    def test_constant_series_has_zero_slope(self):
        growth, exponent = two_phase_slope_fit(np.full(128, 3.0))
        assert growth == 0.0
        assert exponent == 0.0

    def test_flat_series_growth_stays_below_threshold(self):
        # converging accumulation: squared norms approach a limit
        t = np.arange(1, 513)
        series = np.sqrt(10.0 - 9.0 / t)
        growth, _ = two_phase_slope_fit(series)
        assert growth < 0.5

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            two_phase_slope_fit(np.ones(63))

    def test_pure_noise_gradients_grow_as_sqrt(self):
        # i.i.d. gradients with zero signal: the accumulated squared mass
        # grows linearly, so its root grows with exponent one half
        slopes = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            grads = rng.standard_normal((4096, 6))
            series = np.sqrt(np.cumsum((grads**2).sum(axis=1)))
            _, slope = two_phase_slope_fit(series)
            slopes.append(slope)
        assert np.median(slopes) == pytest.approx(0.5, abs=0.1)


class TestTraceSerialization:
    @staticmethod
    def _sample_trace() -> Trace:
        return Trace(
            rows=[
                TraceRow(0.0, 0.6931471805599453, 0.1, None, None, 0, None),
                TraceRow(1.0, 0.5, 0.09, 2.5, 0.1, 0, None),
                TraceRow(2.25, 0.25, None, 3.5, 0.1, 1, "adaptive_stop"),
                TraceRow(3.0, 0.1250000000000001, 0.07, 3.6, 0.2, 1, None),
            ]
        )

    def test_csv_roundtrip_bit_exact(self):
        trace = self._sample_trace()
        text = trace.to_csv()
        again = Trace.from_csv(text)
        assert again.to_csv() == text
        for a, b in zip(trace.rows, again.rows):
            assert a == b

    def test_jsonl_roundtrip_bit_exact(self):
        trace = self._sample_trace()
        text = trace.to_jsonl()
        again = Trace.from_jsonl(text)
        assert again.to_jsonl() == text
        for a, b in zip(trace.rows, again.rows):
            assert a == b

    def test_validate_rejects_non_monotone(self):
        trace = Trace(rows=[TraceRow(1.0, 0.5), TraceRow(1.0, 0.4)])
        with pytest.raises(ValueError):
            trace.validate()

    def test_validate_rejects_unflagged_non_finite(self):
        trace = Trace(rows=[TraceRow(0.0, np.inf)])
        with pytest.raises(ValueError):
            trace.validate()
        flagged = Trace(rows=[TraceRow(0.0, np.inf, event="diverged")])
        flagged.validate()

    def test_value_at_pass_is_step_function(self):
        trace = self._sample_trace()
        assert trace.value_at_pass(0.5, "objective") == pytest.approx(0.6931471805599453)
        assert trace.value_at_pass(2.5, "grad_norm") == pytest.approx(0.09)
        assert trace.value_at_pass(3.0, "grad_norm") == pytest.approx(0.07)


class TestTraceRecorder:
    def test_merges_rows_on_equal_pass(self):
        rec = TraceRecorder()
        rec.record(TraceRow(0.0, 1.0))
        rec.record(TraceRow(1.0, 0.9, event="switch"))
        rec.record(TraceRow(1.0, 0.8))
        assert len(rec.trace.rows) == 2
        assert rec.trace.rows[-1].objective == 0.8
        assert rec.trace.rows[-1].event == "switch"
        rec.trace.validate()

    def test_rejects_backwards_passes(self):
        rec = TraceRecorder()
        rec.record(TraceRow(2.0, 1.0))
        with pytest.raises(ValueError):
            rec.record(TraceRow(1.0, 1.0))
