from dataclasses import replace

import numpy as np
import pytest

from fundrank.errors import IndexOutOfRange, KTooLarge
from fundrank.feature_select import FeatureSubset, project, select_features
from fundrank.preprocess import (
    Sample,
    SampleSet,
    assemble_samples,
    default_boundaries,
    split_chronological,
    standardize,
)
from fundrank.rf import RfConfig

from conftest import make_benchmark, make_series


def _planted_set(n_tickers=6, n_quarters=40, signal=(3, 8), seed=0):
    """Targets driven by the chosen feature columns, noise elsewhere."""
    series = [make_series(f"T{i:02d}", n_quarters, seed=seed + i) for i in range(n_tickers)]
    bench = make_benchmark(n_quarters, seed=seed + 100)
    sset = assemble_samples(series, bench)
    sset = split_chronological(sset, *default_boundaries(sset))
    sset, params = standardize(sset)
    rng = np.random.default_rng(seed + 999)
    planted = []
    for s in sset.samples:
        z = params.transform(s.features)
        target = float(sum(z[j] * (2.0 - 0.5 * i) for i, j in enumerate(signal)))
        target += float(rng.normal(scale=0.3))
        planted.append(replace(s, target=target))
    return replace(sset, samples=tuple(planted))


RF_CFG = RfConfig(n_estimators=30)


class TestSelectFeatures:
    def test_k_equals_p_orders_by_importance(self):
        sset = _planted_set()
        p = len(sset.feature_names)
        subset = select_features(sset, RF_CFG, k=p, seed=1)
        assert sorted(subset.indices) == list(range(p))
        assert list(subset.importances) == sorted(subset.importances, reverse=True)

    def test_planted_signal_recovered(self):
        sset = _planted_set(signal=(13, 20))
        subset = select_features(sset, RF_CFG, k=2, seed=1)
        assert set(subset.indices) == {13, 20}

    def test_k_too_large(self):
        sset = _planted_set()
        with pytest.raises(KTooLarge):
            select_features(sset, RF_CFG, k=len(sset.feature_names) + 1, seed=1)

    def test_deterministic_per_seed(self):
        sset = _planted_set()
        a = select_features(sset, RF_CFG, k=6, seed=4)
        b = select_features(sset, RF_CFG, k=6, seed=4)
        assert a == b

    def test_leak_freedom_test_rows_ignored(self):
        sset = _planted_set()
        subset = select_features(sset, RF_CFG, k=6, seed=2)
        mangled = replace(
            sset,
            samples=tuple(
                replace(s, features=s.features.copy()[::-1].copy(), target=-s.target)
                if sset.partition_of(s) == "test"
                else s
                for s in sset.samples
            ),
        )
        subset2 = select_features(mangled, RF_CFG, k=6, seed=2)
        assert subset == subset2


class TestProject:
    def test_identity_projection(self):
        sset = _planted_set()
        p = len(sset.feature_names)
        subset = FeatureSubset(
            indices=tuple(range(p)), names=sset.feature_names, importances=(0.0,) * p
        )
        out = project(sset, subset)
        assert out.feature_names == sset.feature_names
        np.testing.assert_array_equal(out.matrix("train")[0], sset.matrix("train")[0])

    def test_projected_length(self):
        sset = _planted_set()
        subset = select_features(sset, RF_CFG, k=6, seed=3)
        out = project(sset, subset)
        assert all(len(s.features) == 6 for s in out.samples)
        assert out.feature_names == subset.names

    def test_nested_composition(self):
        sset = _planted_set()
        sub_outer = FeatureSubset(
            indices=(2, 5, 9, 13), names=tuple(sset.feature_names[i] for i in (2, 5, 9, 13)),
            importances=(0.4, 0.3, 0.2, 0.1),
        )
        once = project(sset, sub_outer)
        sub_inner = FeatureSubset(
            indices=(1, 3), names=(once.feature_names[1], once.feature_names[3]),
            importances=(0.6, 0.4),
        )
        twice = project(once, sub_inner)
        combined = project(
            sset,
            FeatureSubset(
                indices=(5, 13),
                names=(sset.feature_names[5], sset.feature_names[13]),
                importances=(0.6, 0.4),
            ),
        )
        assert twice.feature_names == combined.feature_names
        np.testing.assert_array_equal(twice.matrix()[0], combined.matrix()[0])

    def test_params_sliced_not_refit(self):
        sset = _planted_set()
        subset = select_features(sset, RF_CFG, k=4, seed=5)
        out = project(sset, subset)
        np.testing.assert_array_equal(out.params.mean, sset.params.mean[list(subset.indices)])
        np.testing.assert_array_equal(out.params.std, sset.params.std[list(subset.indices)])

    def test_index_out_of_range(self):
        sset = _planted_set()
        bad = FeatureSubset(indices=(99,), names=("bogus",), importances=(1.0,))
        with pytest.raises(IndexOutOfRange):
            project(sset, bad)


def test_subset_json_roundtrip(tmp_path):
    subset = FeatureSubset(indices=(13, 20, 5), names=("pb", "relative_return", "book_value"),
                           importances=(0.5, 0.3, 0.2))
    path = tmp_path / "subset.json"
    subset.save(path)
    assert FeatureSubset.load(path) == subset
