import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrkit import PrecondState, PrecondVariant, ProjectionSpec, project


def scalar_variant() -> PrecondVariant:
    return PrecondVariant(kind="scalar")


def diag_variant(delta=0.0) -> PrecondVariant:
    return PrecondVariant(kind="diagonal", delta=delta)


def full_variant(delta=1e-8) -> PrecondVariant:
    return PrecondVariant(kind="full_matrix", delta=delta)


class TestAccumulate:
    def test_scalar_sums_squared_norms(self):
        state = PrecondState(scalar_variant(), 2)
        state.accumulate(np.array([3.0, 4.0]))
        assert state.G == pytest.approx(25.0)

    def test_diagonal_sums_coordinatewise(self):
        state = PrecondState(diag_variant(0.0), 2)
        state.accumulate(np.array([3.0, 4.0]))
        state.accumulate(np.array([1.0, 0.0]))
        np.testing.assert_allclose(state.G, [10.0, 16.0])

    def test_full_adds_outer_products(self):
        state = PrecondState(full_variant(delta=1.0), 1)
        state.accumulate(np.array([2.0]))
        np.testing.assert_allclose(state.G, [[5.0]])

    def test_full_requires_positive_delta(self):
        with pytest.raises(ValueError):
            PrecondVariant(kind="full_matrix", delta=0.0)

    def test_psd_monotone(self):
        rng = np.random.default_rng(0)
        state = PrecondState(full_variant(1e-6), 4)
        prev = state.G.copy()
        for _ in range(20):
            state.accumulate(rng.standard_normal(4))
            diff_eigs = np.linalg.eigvalsh(state.G - prev)
            assert diff_eigs.min() >= -1e-12
            prev = state.G.copy()


class TestGNormStar:
    def test_scalar(self):
        state = PrecondState(scalar_variant(), 2)
        state.accumulate(np.array([3.0, 4.0]))
        assert state.g_norm_star() == pytest.approx(5.0)

    def test_diagonal_same_trace(self):
        state = PrecondState(diag_variant(0.0), 2)
        state.accumulate(np.array([3.0, 4.0]))
        assert state.g_norm_star() == pytest.approx(5.0)

    def test_full_initial_trace_is_d_delta(self):
        state = PrecondState(full_variant(delta=1.0), 2)
        assert state.g_norm_star() == pytest.approx(np.sqrt(2.0))

    def test_monotone_along_any_trajectory(self):
        rng = np.random.default_rng(3)
        for variant in (scalar_variant(), diag_variant(1e-8), full_variant(1e-8)):
            state = PrecondState(variant, 3)
            previous = state.g_norm_star() if variant.kind != "scalar" else 0.0
            for _ in range(30):
                state.accumulate(rng.standard_normal(3) * rng.random())
                assert state.g_norm_star() >= previous - 1e-12
                previous = state.g_norm_star()


class TestStep:
    def test_scalar_first_step_normalizes(self):
        state = PrecondState(scalar_variant(), 2)
        g = np.array([3.0, 4.0])
        state.accumulate(g)
        x = state.step(np.zeros(2), g, eta=1.0)
        np.testing.assert_allclose(x, [-0.6, -0.8])

    def test_scalar_without_signal_raises(self):
        state = PrecondState(scalar_variant(), 2)
        assert not state.has_signal()
        with pytest.raises(ValueError):
            state.step(np.zeros(2), np.zeros(2), eta=1.0)

    def test_diagonal_zero_gradient_is_fixed_point(self):
        state = PrecondState(diag_variant(1e-4), 3)
        state.accumulate(np.zeros(3))
        x0 = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(state.step(x0, np.zeros(3), eta=2.0), x0)

    def test_full_with_axis_aligned_gradients_matches_diagonal(self):
        # outer products of single-coordinate gradients keep G diagonal
        rng = np.random.default_rng(8)
        d = 4
        full = PrecondState(full_variant(delta=1e-6), d)
        diag = PrecondState(PrecondVariant(kind="diagonal", delta=1e-6), d)
        x_full = rng.standard_normal(d)
        x_diag = x_full.copy()
        for _ in range(12):
            g = np.zeros(d)
            j = int(rng.integers(d))
            g[j] = rng.standard_normal()
            full.accumulate(g)
            diag.accumulate(g)
            x_full = full.step(x_full, g, eta=0.7)
            x_diag = diag.step(x_diag, g, eta=0.7)
            np.testing.assert_allclose(x_full, x_diag, atol=1e-10)

    def test_scalar_equals_diagonal_in_one_dimension(self):
        rng = np.random.default_rng(4)
        scalar = PrecondState(scalar_variant(), 1)
        diagonal = PrecondState(diag_variant(0.0), 1)
        xs, xd = np.array([2.0]), np.array([2.0])
        for _ in range(15):
            g = rng.standard_normal(1)
            scalar.accumulate(g)
            diagonal.accumulate(g)
            if scalar.has_signal():
                xs = scalar.step(xs, g, eta=0.3)
                xd = diagonal.step(xd, g, eta=0.3)
                np.testing.assert_array_equal(xs, xd)

    def test_non_finite_step_raises(self):
        state = PrecondState(scalar_variant(), 1)
        g = np.array([1.0])
        state.accumulate(g)
        with pytest.raises(FloatingPointError):
            state.step(np.array([np.inf]), g, eta=1.0)


class TestProjection:
    def test_none_is_identity(self):
        state = PrecondState(scalar_variant(), 2)
        y = np.array([5.0, -7.0])
        np.testing.assert_array_equal(project(ProjectionSpec(), state, y), y)

    def test_ball_scalar_radial(self):
        state = PrecondState(scalar_variant(), 2)
        state.accumulate(np.array([1.0, 1.0]))
        spec = ProjectionSpec(kind="l2_ball", radius=1.0)
        np.testing.assert_allclose(
            project(spec, state, np.array([3.0, 4.0])), [0.6, 0.8]
        )

    def test_ball_isotropic_diagonal_reduces_to_radial(self):
        state = PrecondState(diag_variant(0.0), 2)
        state.accumulate(np.array([1.0, 1.0]))  # G = (1, 1)
        spec = ProjectionSpec(kind="l2_ball", radius=1.0, tolerance=1e-12)
        got = project(spec, state, np.array([3.0, 4.0]))
        np.testing.assert_allclose(got, [0.6, 0.8], atol=1e-10)

    def test_ball_diagonal_beats_random_feasible_points(self):
        rng = np.random.default_rng(11)
        d = 5
        state = PrecondState(diag_variant(1e-3), d)
        for _ in range(6):
            state.accumulate(rng.standard_normal(d) * 2)
        spec = ProjectionSpec(kind="l2_ball", radius=1.5, tolerance=1e-10)
        y = rng.standard_normal(d) * 4
        x = project(spec, state, y)
        assert np.linalg.norm(x) <= 1.5 + 1e-9
        a = np.sqrt(state.G)

        def metric_dist(z):
            return float((z - y) @ (a * (z - y)))

        best = metric_dist(x)
        for _ in range(1000):
            z = rng.standard_normal(d)
            z *= rng.random() * 1.5 / np.linalg.norm(z)
            assert best <= metric_dist(z) + 1e-8

    def test_ball_inside_is_identity(self):
        state = PrecondState(diag_variant(1e-3), 2)
        state.accumulate(np.array([1.0, 2.0]))
        spec = ProjectionSpec(kind="l2_ball", radius=10.0)
        y = np.array([1.0, -1.0])
        np.testing.assert_array_equal(project(spec, state, y), y)

    def test_box_clips_coordinatewise(self):
        state = PrecondState(diag_variant(1e-3), 3)
        state.accumulate(np.array([1.0, 2.0, 3.0]))
        spec = ProjectionSpec(kind="box", lo=np.array([-1.0, -1.0, -1.0]), hi=np.ones(3))
        got = project(spec, state, np.array([2.0, -5.0, 0.5]))
        np.testing.assert_array_equal(got, [1.0, -1.0, 0.5])

    def test_full_matrix_projection_unsupported(self):
        state = PrecondState(full_variant(), 2)
        spec = ProjectionSpec(kind="l2_ball", radius=1.0)
        with pytest.raises(NotImplementedError):
            project(spec, state, np.array([3.0, 4.0]))

    def test_diameter(self):
        assert ProjectionSpec(kind="l2_ball", radius=2.0).diameter == 4.0
        box = ProjectionSpec(kind="box", lo=np.zeros(2), hi=np.array([3.0, 4.0]))
        assert box.diameter == pytest.approx(5.0)
        assert ProjectionSpec().diameter == np.inf

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ProjectionSpec(kind="l2_ball")
        with pytest.raises(ValueError):
            ProjectionSpec(kind="box", lo=np.ones(2), hi=np.zeros(2))
        with pytest.raises(ValueError):
            ProjectionSpec(kind="simplex")


def _tr_A(variant, G, delta):
    if variant == "scalar":
        return float(np.sqrt(G))
    if variant == "diagonal":
        return float(np.sqrt(G).sum())
    evals = np.maximum(np.linalg.eigvalsh(G), delta / 2)
    return float(np.sqrt(evals).sum())


class TestInequalities:
    @settings(max_examples=25, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=10_000),
        kind=st.sampled_from(["scalar", "diagonal", "full_matrix"]),
        steps=st.integers(min_value=1, max_value=40),
    )
    def test_weighted_gradient_sum_bounded_by_twice_trace(self, seed, kind, steps):
        rng = np.random.default_rng(seed)
        delta = 1e-8 if kind != "scalar" else 0.0
        variant = PrecondVariant(kind=kind, delta=max(delta, 1e-8) if kind == "full_matrix" else delta)
        d = 3
        state = PrecondState(variant, d)
        for _ in range(steps):
            state.accumulate(rng.standard_normal(d) * rng.random() * 5)
        assert state.weighted_grad_sq_sum <= 2.0 * state.trace_A() + 1e-8 * steps

    @settings(max_examples=25, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=10_000),
        kind=st.sampled_from(["scalar", "diagonal", "full_matrix"]),
    )
    def test_trace_of_metric_bounded_by_gradient_mass(self, seed, kind):
        rng = np.random.default_rng(seed)
        d = 4
        delta = 1e-6
        variant = PrecondVariant(kind=kind, delta=delta)
        state = PrecondState(variant, d)
        total_sq = 0.0
        for _ in range(25):
            g = rng.standard_normal(d)
            total_sq += float(g @ g)
            state.accumulate(g)
        if kind == "scalar":
            bound = np.sqrt(total_sq)
        else:
            bound = np.sqrt(d * total_sq + d * d * delta)
        assert state.trace_A() <= bound + 1e-9

    def test_telescoping_bound_with_projection(self):
        # iterates and reference point live in a ball of diameter D; the
        # metric-weighted increments telescope to at most D^2 * trace(A_m)
        rng = np.random.default_rng(21)
        d = 4
        radius = 1.5
        spec = ProjectionSpec(kind="l2_ball", radius=radius, tolerance=1e-12)
        for kind in ("scalar", "diagonal"):
            variant = PrecondVariant(kind=kind, delta=1e-8 if kind == "diagonal" else 0.0)
            state = PrecondState(variant, d)
            x = np.zeros(d)
            w_ref = rng.standard_normal(d)
            w_ref *= radius * 0.9 / np.linalg.norm(w_ref)
            prev_A = 0.0 if kind == "scalar" else np.zeros(d)
            total = 0.0
            for _ in range(60):
                g = rng.standard_normal(d) * 2
                state.accumulate(g)
                if kind == "scalar":
                    A = np.sqrt(state.G)
                    total += (A - prev_A) * float((x - w_ref) @ (x - w_ref))
                else:
                    A = np.sqrt(state.G)
                    total += float((A - prev_A) @ ((x - w_ref) ** 2))
                prev_A = A
                if state.has_signal():
                    x = state.step(x, g, eta=0.5, proj=spec)
            diameter = spec.diameter
            assert total <= diameter**2 * state.trace_A() + 1e-6
