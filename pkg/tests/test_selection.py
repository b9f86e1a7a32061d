import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comparables import (
    Comparable,
    ComparableSet,
    Instance,
    LinearPredictor,
    select_comparables,
    uncertainty_bounds,
    weighted_average,
)
from comparables.errors import EmptyInput, KTooLarge
from comparables.schema import fit_standardizer
from comparables.selection import ValueChannel, manhattan_distance, similarities_from_distances
from tests.conftest import make_numeric_dataset


def fixed_set(values, similarities, predictions=None):
    predictions = predictions or values
    comps = tuple(
        Comparable(Instance(values=(float(i),)), float(v), float(p))
        for i, (v, p) in enumerate(zip(values, predictions))
    )
    return ComparableSet(
        subject=Instance(values=(0.0,)),
        comparables=comps,
        distances=tuple(0.0 for _ in values),
        similarities=tuple(similarities),
    )


class TestWeightedAverage:
    def test_two_comparable_fixture(self):
        # 46% of 600K plus 54% of 710K reconciles to 659.4K
        cset = fixed_set([600_000, 710_000], [0.46, 0.54])
        est = weighted_average(cset)
        assert est.point_estimate == pytest.approx(659_400.0, abs=1.0)
        assert est.bounds == (600_000.0, 710_000.0)

    def test_single_comparable(self):
        cset = fixed_set([123.0], [1.0])
        est = weighted_average(cset)
        assert est.point_estimate == 123.0
        assert est.bounds == (123.0, 123.0)

    def test_uniform_weights(self):
        cset = fixed_set([100, 200, 300], [1 / 3, 1 / 3, 1 / 3])
        assert weighted_average(cset).point_estimate == pytest.approx(200.0)

    def test_prediction_channel(self):
        cset = fixed_set([100, 200], [0.5, 0.5], predictions=[110, 190])
        est = weighted_average(cset, use=ValueChannel.PREDICTION)
        assert est.point_estimate == pytest.approx(150.0)
        assert est.bounds == (110.0, 190.0)

    def test_estimate_within_bounds(self, rng):
        for _ in range(50):
            n = rng.integers(1, 8)
            vals = rng.uniform(-100, 100, size=n)
            sims = similarities_from_distances(rng.uniform(0, 5, size=n))
            est = weighted_average(fixed_set(vals, sims))
            assert est.bounds[0] - 1e-9 <= est.point_estimate <= est.bounds[1] + 1e-9

    def test_permutation_invariance(self, rng):
        vals = [10.0, 50.0, 90.0]
        sims = [0.2, 0.3, 0.5]
        base = weighted_average(fixed_set(vals, sims))
        perm = [2, 0, 1]
        shuffled = weighted_average(
            fixed_set([vals[i] for i in perm], [sims[i] for i in perm])
        )
        assert shuffled.point_estimate == pytest.approx(base.point_estimate)
        assert shuffled.bounds == base.bounds


class TestUncertaintyBounds:
    def test_fixture_values(self):
        assert uncertainty_bounds([600_000, 710_000]) == (600_000.0, 710_000.0)

    def test_singleton(self):
        assert uncertainty_bounds([5.0]) == (5.0, 5.0)

    def test_min_max(self):
        assert uncertainty_bounds([3, 1, 2]) == (1.0, 3.0)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            uncertainty_bounds([])

    def test_nested_containment(self, rng):
        a = list(rng.uniform(-10, 10, size=4))
        b = a + list(rng.uniform(-10, 10, size=3))
        la, ha = uncertainty_bounds(a)
        lb, hb = uncertainty_bounds(b)
        assert lb <= la and hb >= ha


class TestSelection:
    def test_k1_similarity_is_one(self, numeric_schema):
        ds = make_numeric_dataset(numeric_schema, [(0, 0), (5, 5)], [1.0, 2.0])
        std = fit_standardizer(ds)
        cset = select_comparables(ds, std, Instance(values=(0.1, 0.1)), k=1)
        assert len(cset.comparables) == 1
        assert cset.similarities == (1.0,)

    def test_equal_distances_split_evenly(self, numeric_schema):
        ds = make_numeric_dataset(numeric_schema, [(1, 0), (-1, 0), (0, 3)], [1, 2, 3])
        std = fit_standardizer(ds)
        cset = select_comparables(ds, std, Instance(values=(0.0, 0.0)), k=2)
        assert cset.similarities[0] == pytest.approx(0.5, abs=1e-6)
        assert cset.similarities[1] == pytest.approx(0.5, abs=1e-6)

    def test_k3_hand_ranked(self, numeric_schema):
        # distances from subject (0,0) computed on standardized coords below
        ds = make_numeric_dataset(
            numeric_schema,
            [(0.1, 0.1), (2, 2), (-0.2, 0.0), (5, -5), (0.4, -0.3)],
            [10, 20, 30, 40, 50],
        )
        std = fit_standardizer(ds)
        subject = Instance(values=(0.0, 0.0))
        zs = std.transform_batch(inst for inst, _ in ds.rows)
        z0 = std.transform(subject)
        dists = np.abs(zs - z0).sum(axis=1)
        expected_order = np.argsort(dists, kind="stable")[:3]
        cset = select_comparables(ds, std, subject, k=3)
        got_values = [c.actual_value for c in cset.comparables]
        assert got_values == [ds.rows[i][1] for i in expected_order]
        assert sum(cset.similarities) == pytest.approx(1.0, abs=1e-12)

    def test_k_too_large(self, numeric_schema):
        ds = make_numeric_dataset(numeric_schema, [(0, 0), (1, 1)], [1, 2])
        std = fit_standardizer(ds)
        with pytest.raises(KTooLarge):
            select_comparables(ds, std, Instance(values=(0.0, 0.0)), k=5)

    def test_predictions_attached(self, numeric_schema):
        ds = make_numeric_dataset(numeric_schema, [(0, 0), (1, 1), (2, 2)], [5, 6, 7])
        std = fit_standardizer(ds)
        p = LinearPredictor(weights=(1.0, 1.0), bias=3.0)
        cset = select_comparables(ds, std, Instance(values=(0.0, 0.0)), k=2, predictor=p)
        for c in cset.comparables:
            z = std.transform(c.instance)
            assert c.ai_prediction == pytest.approx(float(z.sum() + 3.0))

    def test_categorical_switch_costs_one_unit(self, house_dataset, house_standardizer):
        std = house_standardizer
        a = std.transform(Instance(values=(1.5, 0.91, 7, 106, "3", 2.34)))
        b = std.transform(Instance(values=(1.5, 0.91, 7, 106, "5", 2.34)))
        assert manhattan_distance(a, b, std.coord_weights) == pytest.approx(1.0)


class TestDistanceAxioms:
    @settings(max_examples=100, deadline=None)
    @given(
        data=st.lists(
            st.tuples(
                st.floats(-50, 50, allow_nan=False),
                st.floats(-50, 50, allow_nan=False),
                st.floats(-50, 50, allow_nan=False),
            ),
            min_size=3,
            max_size=3,
        )
    )
    def test_metric_properties(self, data):
        w = np.ones(3)
        a, b, c = (np.array(v) for v in data)
        dab = manhattan_distance(a, b, w)
        dba = manhattan_distance(b, a, w)
        assert dab == pytest.approx(dba)
        assert manhattan_distance(a, a, w) == 0.0
        assert dab <= manhattan_distance(a, c, w) + manhattan_distance(c, b, w) + 1e-9

    def test_similarities_normalized(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 10))
            d = rng.uniform(0, 10, size=n)
            s = similarities_from_distances(d)
            assert sum(s) == pytest.approx(1.0, abs=1e-12)
            assert all(0 < x <= 1 for x in s)
