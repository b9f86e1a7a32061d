import numpy as np
import pytest

from comparables import (
    Comparable,
    DesiderataConfig,
    Instance,
    LinearPredictor,
    QuadraticPredictor,
    SinusoidLinearPredictor,
    evaluate_trace,
    extract_steps,
    fit_trace,
    loss,
    trace_adjusted_estimate,
)
from comparables.errors import ConfigError, NoDifference, OutOfDomain
from comparables.selection import ComparableSet, similarities_from_distances
from comparables.trace import (
    AttributeBlock,
    TraceModel,
    TraceSpace,
    trace_adjusted_value,
)

FAST = DesiderataConfig(seed=0, max_epochs=240)


def make_model(knots, weights, b1, space=None, target_scale=(0.0, 1.0)):
    knots = np.asarray(knots, dtype=float)
    return TraceModel(
        knots=knots,
        weights=np.asarray(weights, dtype=float),
        base_bias=float(b1),
        space=space or TraceSpace.numeric(knots.shape[1]),
        config=DesiderataConfig(),
        target_scale=target_scale,
    )


class TestConfig:
    def test_zero_faithfulness_rejected(self):
        with pytest.raises(ConfigError):
            DesiderataConfig(lambda_f=0.0)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ConfigError):
            DesiderataConfig(lambda_s=-1.0)


class TestEvaluate:
    def test_first_knot_value(self):
        m = make_model([[0.0], [1.0]], [[2.0]], b1=3.0)
        assert evaluate_trace(m, np.array([0.0])) == pytest.approx(3.0)

    def test_interior_knot_continuous(self):
        m = make_model([[0.0], [1.0], [3.0]], [[2.0], [-1.0]], b1=0.0)
        v_left = m.segment_value(0, np.array([1.0]))
        v_right = m.segment_value(1, np.array([1.0]))
        assert v_left == v_right  # bit-exact by construction
        assert evaluate_trace(m, np.array([1.0])) == v_left

    def test_midpoint_on_segment(self):
        m = make_model([[0.0, 0.0], [2.0, 2.0]], [[1.0, 1.0]], b1=0.5)
        mid = np.array([1.0, 1.0])
        assert evaluate_trace(m, mid) == pytest.approx(0.5 + 2.0)

    def test_off_polyline_rejected(self):
        m = make_model([[0.0, 0.0], [2.0, 2.0]], [[1.0, 1.0]], b1=0.0)
        with pytest.raises(OutOfDomain):
            evaluate_trace(m, np.array([1.0, 0.0]))

    def test_param_evaluation_matches(self):
        m = make_model([[0.0], [1.0], [3.0]], [[2.0], [-1.0]], b1=0.0)
        assert m.value_at_param(0.25) == pytest.approx(
            evaluate_trace(m, m.point_at_param(0.25))
        )

    def test_biases_satisfy_continuity_recurrence(self):
        rng = np.random.default_rng(5)
        knots = rng.normal(size=(4, 3))
        weights = rng.normal(size=(3, 3))
        m = make_model(knots, weights, b1=0.7)
        b = m.biases
        for tau in range(1, 3):
            # b_tau = b_{tau-1} - (w_tau - w_{tau-1}) . chi_{tau-1}
            lhs = b[tau]
            rhs = b[tau - 1] - (weights[tau] - weights[tau - 1]) @ knots[tau]
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


class TestFitTrace:
    def test_linear_predictor_faithful(self):
        p = LinearPredictor(weights=(1.5, -2.0), bias=0.3)
        model, bd = fit_trace(p, np.array([0.0, 0.0]), np.array([1.0, 2.0]), FAST)
        assert bd.faithfulness < 1e-2

    def test_single_segment_linear_midpoint(self):
        p = LinearPredictor(weights=(2.0,), bias=1.0)
        cfg = DesiderataConfig(segments=1, seed=1, max_epochs=240)
        model, bd = fit_trace(p, np.array([0.0]), np.array([2.0]), cfg)
        mid = model.point_at_param(0.5)
        assert evaluate_trace(model, mid) == pytest.approx(
            float(p.predict(mid[None, :])[0]), abs=1e-3
        )

    def test_no_difference_rejected(self):
        p = LinearPredictor(weights=(1.0,))
        with pytest.raises(NoDifference):
            fit_trace(p, np.array([1.0]), np.array([1.0]), FAST)

    def test_endpoints_pinned_bitwise(self):
        p = SinusoidLinearPredictor(amplitude=(1.0, 0.5), frequency=(2.0, 1.0))
        x_c = np.array([0.13, -0.7])
        x_s = np.array([1.4, 0.9])
        model, _ = fit_trace(p, x_c, x_s, FAST)
        assert np.array_equal(model.knots[0], x_c)
        assert np.array_equal(model.knots[-1], x_s)

    def test_continuity_bit_exact_after_training(self):
        p = QuadraticPredictor(quad=(1.0, -0.5))
        model, _ = fit_trace(p, np.array([0.0, 1.0]), np.array([2.0, -1.0]), FAST)
        for tau in range(1, model.n_segments):
            left = model.segment_value(tau - 1, model.knots[tau])
            right = model.segment_value(tau, model.knots[tau])
            assert left == right

    def test_seed_deterministic(self):
        p = QuadraticPredictor(quad=(1.0, 1.0))
        a, _ = fit_trace(p, np.zeros(2), np.ones(2), FAST)
        b, _ = fit_trace(p, np.zeros(2), np.ones(2), FAST)
        assert np.array_equal(a.knots, b.knots)
        assert np.array_equal(a.weights, b.weights)
        assert a.base_bias == b.base_bias

    def test_quadratic_interior_knot_near_curvature_optimum(self):
        p = QuadraticPredictor(quad=(1.0,))
        cfg = DesiderataConfig(
            lambda_s=0, lambda_d=0, lambda_m=0, lambda_e=0, segments=2, seed=3, max_epochs=1500
        )
        model, bd = fit_trace(p, np.array([0.0]), np.array([2.0]), cfg)
        assert abs(model.knots[1][0] - 1.0) < 0.15

    def test_monotone_1d_no_value_reversals(self):
        p = LinearPredictor(weights=(2.0,), bias=0.0)
        cfg = DesiderataConfig(segments=4, seed=2, max_epochs=400)
        model, bd = fit_trace(p, np.array([0.0]), np.array([3.0]), cfg)
        assert bd.value_reversals == 0

    def test_loss_breakdown_total_consistent(self):
        p = QuadraticPredictor(quad=(0.5, 0.5))
        model, bd = fit_trace(p, np.zeros(2), np.ones(2), FAST)
        expected = (
            model.config.lambda_f * bd.faithfulness
            + model.config.lambda_s * bd.sparsity
            + model.config.lambda_d * bd.disjointness
            + model.config.lambda_m * bd.monotonicity
            + model.config.lambda_e * bd.evenness
        )
        assert bd.total == pytest.approx(expected, rel=1e-9)

    def test_default_segment_count_counts_differing_attributes(self):
        p = LinearPredictor(weights=(1.0, 1.0, 1.0))
        x_c = np.array([0.0, 5.0, 1.0])
        x_s = np.array([2.0, 5.0, 3.0])  # only two attributes differ
        model, _ = fit_trace(p, x_c, x_s, DesiderataConfig(seed=0, max_epochs=60))
        assert model.n_segments == 2

    def test_evenness_zero_when_equal_deltas(self):
        m = make_model([[0.0], [1.0], [2.0]], [[1.0], [1.0]], b1=0.0)
        p = LinearPredictor(weights=(1.0,), bias=0.0)
        bd = loss(m, p, DesiderataConfig(segments=2))
        assert bd.evenness == pytest.approx(0.0)
        assert bd.faithfulness == pytest.approx(0.0, abs=1e-12)

    def test_loss_example_straight_monotone(self):
        m = make_model([[0.0], [2.0]], [[1.0]], b1=0.0)
        p = LinearPredictor(weights=(1.0,), bias=0.0)
        bd = loss(m, p, DesiderataConfig(segments=1))
        assert bd.monotonicity == 0.0
        assert bd.disjointness <= 1.0


class TestSerialization:
    def test_round_trip(self):
        p = QuadraticPredictor(quad=(1.0, -1.0))
        model, _ = fit_trace(p, np.zeros(2), np.ones(2), FAST)
        doc = model.to_dict()
        back = TraceModel.from_dict(doc)
        assert np.array_equal(back.knots, model.knots)
        assert np.array_equal(back.weights, model.weights)
        assert back.base_bias == model.base_bias
        assert back.config == model.config

    def test_version_checked(self):
        p = QuadraticPredictor(quad=(1.0,))
        model, _ = fit_trace(p, np.zeros(1), np.ones(1), FAST)
        doc = model.to_dict()
        doc["format_version"] = 99
        with pytest.raises(ConfigError):
            TraceModel.from_dict(doc)


class TestExtractSteps:
    def test_three_attribute_disjoint_telescope(self):
        # hand-built staircase: each segment changes exactly one attribute
        knots = np.array(
            [
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 2.0, 0.0],
                [1.0, 2.0, -1.0],
            ]
        )
        weights = np.array([[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
        m = make_model(knots, weights, b1=0.0, target_scale=(0.0, 1000.0))
        comp = Comparable(Instance(values=(0.0, 0.0, 0.0)), 500_000.0, 498_000.0)
        steps = extract_steps(m, comp)
        assert len(steps.steps) == 3
        names = [s.changed_attributes[0][0] for s in steps.steps]
        assert names == ["x0", "x1", "x2"]
        assert all(len(s.changed_attributes) == 1 for s in steps.steps)
        # money deltas: g = (3.0, 2.0, -2.0) in standardized units, scaled 1000x
        assert [s.money_delta for s in steps.steps] == [3000.0, 2000.0, -2000.0]
        assert steps.final_adjusted_value == pytest.approx(503_000.0)
        total = sum(s.money_delta for s in steps.steps)
        assert steps.steps[-1].running_value == pytest.approx(
            comp.actual_value + total, rel=1e-6
        )

    def test_small_moves_reported_unchanged(self):
        knots = np.array([[0.0, 0.0], [0.005, 0.0], [0.005, 1.0]])
        weights = np.array([[1.0, 1.0], [1.0, 1.0]])
        m = make_model(knots, weights, b1=0.0)
        comp = Comparable(Instance(values=(0.0, 0.0)), 10.0, 10.0)
        steps = extract_steps(m, comp, delta=0.01)
        assert steps.steps[0].changed_attributes == ()
        assert steps.steps[0].money_delta != 0.0

    def test_prediction_anchoring_flag(self):
        knots = np.array([[0.0], [1.0]])
        m = make_model(knots, [[2.0]], b1=0.0)
        comp = Comparable(Instance(values=(0.0,)), 100.0, 90.0)
        value_anchored = extract_steps(m, comp)
        pred_anchored = extract_steps(m, comp, prediction_anchored=True)
        assert value_anchored.anchor_value == 100.0
        assert pred_anchored.anchor_value == 90.0
        assert value_anchored.final_adjusted_value - 100.0 == pytest.approx(
            pred_anchored.final_adjusted_value - 90.0
        )

    def test_raw_units_with_standardizer(self, house_standardizer):
        std = house_standardizer
        comp_inst = Instance(values=(1.0, 1.18, 7, 72, "3", 2.39))
        subj_inst = Instance(values=(1.5, 0.91, 7, 106, "4", 2.34))
        z_c, z_s = std.transform(comp_inst), std.transform(subj_inst)
        p = LinearPredictor(weights=tuple(np.zeros(std.dim)), bias=550_000.0)
        from comparables.schema import target_stats

        cfg = DesiderataConfig(seed=0, max_epochs=120)
        model, _ = fit_trace(
            p,
            z_c,
            z_s,
            cfg,
            space=TraceSpace.from_standardizer(std),
            target_scale=(500_000.0, 100_000.0),
            comparable_instance=comp_inst,
            subject_instance=subj_inst,
        )
        comp = Comparable(comp_inst, 600_000.0, 554_400.0)
        steps = extract_steps(model, comp, std=std)
        # final step state snaps exactly to the subject
        final_changes = {}
        for s in steps.steps:
            for name, frm, to in s.changed_attributes:
                final_changes[name] = to
        for name, raw in zip(std.schema.names, subj_inst.values):
            if name in final_changes:
                assert final_changes[name] == raw

    def test_categorical_switch_reported_once(self, house_standardizer):
        std = house_standardizer
        space = TraceSpace.from_standardizer(std)
        comp_inst = Instance(values=(1.0, 1.18, 7, 72, "3", 2.39))
        subj_inst = Instance(values=(1.0, 1.18, 7, 72, "5", 2.39))
        z_c, z_s = std.transform(comp_inst), std.transform(subj_inst)
        p = LinearPredictor(weights=tuple(np.ones(std.dim)), bias=0.0)
        model, _ = fit_trace(
            p,
            z_c,
            z_s,
            DesiderataConfig(seed=1, max_epochs=120),
            space=space,
            comparable_instance=comp_inst,
            subject_instance=subj_inst,
        )
        comp = Comparable(comp_inst, 100.0, 100.0)
        steps = extract_steps(model, comp, std=std)
        switches = [
            (name, frm, to)
            for s in steps.steps
            for name, frm, to in s.changed_attributes
            if name == "condition"
        ]
        assert switches == [("condition", "3", "5")]


class TestTraceEstimate:
    def fixture_set(self, values, predictions):
        comps = tuple(
            Comparable(Instance(values=(float(i),)), v, p)
            for i, (v, p) in enumerate(zip(values, predictions))
        )
        dists = tuple(1.0 for _ in values)
        return ComparableSet(
            subject=Instance(values=(99.0,)),
            comparables=comps,
            distances=dists,
            similarities=similarities_from_distances(dists),
        )

    def test_single_comparable(self):
        m = make_model([[0.0], [1.0]], [[5.0]], b1=0.0, target_scale=(0.0, 2.0))
        cset = self.fixture_set([100.0], [90.0])
        est = trace_adjusted_estimate([m], cset)
        assert est.point_estimate == pytest.approx(110.0)  # 100 + 5*1*2

    def test_consensus_zero_width(self):
        m1 = make_model([[0.0], [1.0]], [[5.0]], b1=0.0)
        m2 = make_model([[2.0], [4.0]], [[5.0]], b1=0.0)
        cset = self.fixture_set([100.0, 95.0], [0.0, 0.0])
        est = trace_adjusted_estimate([m1, m2], cset)
        assert est.bounds[1] - est.bounds[0] == pytest.approx(0.0)
        assert est.point_estimate == pytest.approx(105.0)

    def test_two_traces_on_linear_predictor_agree(self):
        p = LinearPredictor(weights=(1.0, 2.0), bias=0.0)
        subject = np.array([1.0, 1.0])
        cfg = DesiderataConfig(seed=4, max_epochs=400)
        adj = []
        for x_c in (np.array([0.0, 0.0]), np.array([2.0, 0.5])):
            model, _ = fit_trace(p, x_c, subject, cfg)
            comp = Comparable(
                Instance(values=tuple(x_c)),
                actual_value=float(p.predict(x_c[None, :])[0]),
                ai_prediction=float(p.predict(x_c[None, :])[0]),
            )
            adj.append(trace_adjusted_value(model, comp))
        assert adj[0] == pytest.approx(adj[1], abs=1e-2)


from hypothesis import given, settings
from hypothesis import strategies as st


@settings(max_examples=60, deadline=None)
@given(
    n_segments=st.integers(min_value=1, max_value=5),
    dim=st.integers(min_value=1, max_value=4),
    seed=st.integers(min_value=0, max_value=10_000),
    anchor=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    scale=st.floats(min_value=1e-3, max_value=1e6, allow_nan=False),
)
def test_extract_steps_telescope_property(n_segments, dim, seed, anchor, scale):
    rng = np.random.default_rng(seed)
    knots = rng.normal(size=(n_segments + 1, dim))
    weights = rng.normal(size=(n_segments, dim))
    m = make_model(knots, weights, b1=float(rng.normal()), target_scale=(0.0, scale))
    comp = Comparable(Instance(values=tuple(float(v) for v in knots[0])), anchor, anchor)
    steps = extract_steps(m, comp)
    total = sum(s.money_delta for s in steps.steps)
    assert steps.final_adjusted_value == pytest.approx(anchor + total, rel=1e-6, abs=1e-6)
    assert steps.steps[-1].running_value == steps.final_adjusted_value
