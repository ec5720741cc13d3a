import numpy as np
import pytest

from fundrank.errors import (
    EmptyPartition,
    InsufficientHistory,
    QuarterOutOfRange,
    ZeroBase,
    ZeroVariance,
)
from fundrank.ingest import RAW_FEATURES, BenchmarkSeries, StockSeries
from fundrank.preprocess import (
    Sample,
    SampleSet,
    assemble_samples,
    compute_relative_return,
    default_boundaries,
    from_dict,
    load,
    merge_train_validation,
    pct_change,
    save,
    split_chronological,
    standardize,
    to_dict,
)
from fundrank.quarters import Quarter, quarter_range

from conftest import make_benchmark, make_series


def _series_with_levels(levels_per_quarter, prices=None, ticker="A"):
    n = len(levels_per_quarter)
    quarters = tuple(quarter_range(Quarter(2010, 1), n))
    values = np.tile(np.asarray(levels_per_quarter, dtype=float)[:, None], (1, len(RAW_FEATURES)))
    if prices is None:
        prices = np.full(n, 10.0)
    return StockSeries(
        ticker=ticker, quarters=quarters, values=values, prices=np.asarray(prices, dtype=float)
    )


class TestPctChange:
    def test_basic_percent(self):
        s = _series_with_levels([100, 110])
        out = pct_change(s)
        assert out.shape == (1, len(RAW_FEATURES))
        np.testing.assert_allclose(out, 10.0)

    def test_constant_series_is_zero(self):
        s = _series_with_levels([70, 70, 70])
        np.testing.assert_allclose(pct_change(s), 0.0)

    def test_decline(self):
        s = _series_with_levels([80, 60])
        np.testing.assert_allclose(pct_change(s), -25.0)

    def test_zero_base_maps_to_zero_with_warning(self, caplog):
        s = _series_with_levels([0.0, 50.0])
        with caplog.at_level("WARNING"):
            out = pct_change(s)
        np.testing.assert_allclose(out, 0.0)
        assert "zero base" in caplog.text

    def test_zero_base_strict_raises(self):
        s = _series_with_levels([0.0, 50.0])
        with pytest.raises(ZeroBase):
            pct_change(s, zero_base="error")

    def test_scale_invariance(self):
        s = make_series("A", 20, seed=5)

        def scaled_by(factor):
            return StockSeries(
                ticker="A",
                quarters=s.quarters,
                values=s.values * factor,
                prices=s.prices.copy(),
            )

        # power-of-two scaling is exact in floating point
        np.testing.assert_array_equal(pct_change(s), pct_change(scaled_by(32.0)))
        np.testing.assert_allclose(
            pct_change(s), pct_change(scaled_by(37.5)), rtol=1e-9, atol=1e-11
        )


class TestRelativeReturn:
    def _bench(self, levels):
        quarters = tuple(quarter_range(Quarter(2010, 1), len(levels)))
        return BenchmarkSeries(quarters=quarters, levels=np.asarray(levels, dtype=float))

    def test_equal_moves_cancel(self):
        s = _series_with_levels([1, 1], prices=[100, 105])
        bench = self._bench([1000, 1050])
        assert compute_relative_return(s, bench, Quarter(2010, 2)) == pytest.approx(0.0)

    def test_hand_computed(self):
        s = _series_with_levels([1, 1], prices=[100, 110])
        bench = self._bench([1000, 1020])
        assert compute_relative_return(s, bench, Quarter(2010, 2)) == pytest.approx(8.0)

    def test_flat_stock_rising_index(self):
        s = _series_with_levels([1, 1], prices=[100, 100])
        bench = self._bench([1000, 1030])
        assert compute_relative_return(s, bench, Quarter(2010, 2)) == pytest.approx(-3.0)

    def test_out_of_range(self):
        s = _series_with_levels([1, 1], prices=[100, 100])
        bench = self._bench([1000, 1030])
        with pytest.raises(QuarterOutOfRange):
            compute_relative_return(s, bench, Quarter(2010, 1))
        with pytest.raises(QuarterOutOfRange):
            compute_relative_return(s, bench, Quarter(2011, 1))


class TestAssembleSamples:
    def test_sample_count_88_quarters(self):
        series = make_series("A", 88, start=Quarter(1996, 1))
        bench = make_benchmark(88, start=Quarter(1996, 1))
        sset = assemble_samples([series], bench)
        assert len(sset.samples) == 86

    def test_two_quarters_insufficient(self):
        series = make_series("A", 2)
        bench = make_benchmark(2)
        with pytest.raises(InsufficientHistory):
            assemble_samples([series], bench)

    def test_target_is_next_quarter_return(self):
        series = make_series("A", 30, start=Quarter(2010, 1))
        bench = make_benchmark(30, start=Quarter(2010, 1))
        sset = assemble_samples([series], bench)
        sample = next(s for s in sset.samples if s.feature_quarter == Quarter(2015, 2))
        assert sample.target_quarter == Quarter(2015, 3)
        expected = compute_relative_return(series, bench, Quarter(2015, 3))
        assert sample.target == pytest.approx(expected)

    def test_feature_20_is_own_quarter_return(self):
        series = make_series("A", 10)
        bench = make_benchmark(10)
        sset = assemble_samples([series], bench)
        for sample in sset.samples:
            expected = compute_relative_return(series, bench, sample.feature_quarter)
            assert sample.features[-1] == pytest.approx(expected)

    def test_features_match_pct_change(self):
        series = make_series("A", 12, seed=7)
        bench = make_benchmark(12)
        deltas = pct_change(series)
        sset = assemble_samples([series], bench)
        first = sset.samples[0]
        np.testing.assert_allclose(first.features[:-1], deltas[0])


def _ten_quarter_set() -> SampleSet:
    series = [make_series(f"T{i}", 12, seed=i) for i in range(3)]
    bench = make_benchmark(12)
    return assemble_samples(series, bench)


class TestSplit:
    def test_paper_shaped_boundaries(self):
        series = make_series("A", 88, start=Quarter(1996, 1))
        bench = make_benchmark(88, start=Quarter(1996, 1))
        sset = assemble_samples([series], bench)
        out = split_chronological(sset, Quarter(2008, 1), Quarter(2013, 2))
        test_quarters = out.quarters("test")
        assert test_quarters[0] == Quarter(2013, 3)
        assert test_quarters[-1] == Quarter(2017, 4)
        assert len(test_quarters) == 18
        val_quarters = out.quarters("validation")
        assert val_quarters[0] == Quarter(2008, 2)
        assert val_quarters[-1] == Quarter(2013, 2)

    def test_boundary_beyond_data(self):
        sset = _ten_quarter_set()
        with pytest.raises(EmptyPartition):
            split_chronological(sset, Quarter(2030, 1), Quarter(2031, 1))

    def test_counting_six_two_two(self):
        sset = _ten_quarter_set()  # 10 distinct target quarters
        qs = sset.quarters()
        assert len(qs) == 10
        out = split_chronological(sset, qs[5], qs[7])
        assert len(out.quarters("train")) == 6
        assert len(out.quarters("validation")) == 2
        assert len(out.quarters("test")) == 2

    def test_default_boundaries_proportions(self):
        sset = _ten_quarter_set()
        b1, b2 = default_boundaries(sset)
        out = split_chronological(sset, b1, b2)
        assert len(out.quarters("train")) == 6
        assert len(out.quarters("validation")) == 2
        assert len(out.quarters("test")) == 2

    def test_temporal_order_invariant(self):
        sset = _ten_quarter_set()
        out = split_chronological(sset, *default_boundaries(sset))
        t_max = max(s.target_quarter for s in out.partition("train"))
        v = [s.target_quarter for s in out.partition("validation")]
        te_min = min(s.target_quarter for s in out.partition("test"))
        assert t_max < min(v) and max(v) < te_min


class TestStandardize:
    def _split_set(self):
        sset = _ten_quarter_set()
        return split_chronological(sset, *default_boundaries(sset))

    def test_train_mean_zero_std_one(self):
        out, params = standardize(self._split_set())
        X, _ = out.matrix("train")
        np.testing.assert_allclose(X.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(X.std(axis=0), 1.0, atol=1e-10)

    def test_hand_computed_projection(self):
        # train values {1,2,3} -> mean 2; a test value of 2 maps to 0
        from fundrank.preprocess import StandardizationParams

        train = np.array([1.0, 2.0, 3.0])
        params = StandardizationParams(
            mean=np.array([train.mean()]), std=np.array([train.std()])
        )
        assert params.transform(np.array([2.0]))[0] == 0.0

    def test_targets_not_standardized(self):
        sset = self._split_set()
        out, _ = standardize(sset)
        _, y_before = sset.raw_matrix("train")
        _, y_after = out.matrix("train")
        np.testing.assert_array_equal(y_before, y_after)

    def test_constant_feature_rejected(self):
        sset = self._split_set()
        frozen = []
        for s in sset.samples:
            f = s.features.copy()
            f[4] = 1.0
            frozen.append(
                Sample(
                    ticker=s.ticker,
                    feature_quarter=s.feature_quarter,
                    target_quarter=s.target_quarter,
                    features=f,
                    target=s.target,
                )
            )
        bad = SampleSet(
            feature_names=sset.feature_names,
            samples=tuple(frozen),
            boundaries=sset.boundaries,
        )
        with pytest.raises(ZeroVariance):
            standardize(bad)

    def test_leak_freedom_bitwise(self):
        sset = self._split_set()
        _, params = standardize(sset)
        mutated_samples = []
        for s in sset.samples:
            if sset.partition_of(s) == "test":
                f = s.features.copy() * 3.0 + 17.0
                s = Sample(
                    ticker=s.ticker,
                    feature_quarter=s.feature_quarter,
                    target_quarter=s.target_quarter,
                    features=f,
                    target=s.target - 42.0,
                )
            mutated_samples.append(s)
        mutated = SampleSet(
            feature_names=sset.feature_names,
            samples=tuple(mutated_samples),
            boundaries=sset.boundaries,
        )
        _, params2 = standardize(mutated)
        assert params.mean.tobytes() == params2.mean.tobytes()
        assert params.std.tobytes() == params2.std.tobytes()


class TestMerge:
    def test_sixty_twenty_twenty_becomes_eighty(self):
        sset = _ten_quarter_set()
        out = split_chronological(sset, *default_boundaries(sset))
        merged = merge_train_validation(out)
        assert len(merged.quarters("train")) == 8
        assert len(merged.quarters("validation")) == 0
        assert len(merged.quarters("test")) == 2

    def test_idempotent(self):
        sset = _ten_quarter_set()
        out = split_chronological(sset, *default_boundaries(sset))
        once = merge_train_validation(out)
        twice = merge_train_validation(once)
        assert once.boundaries == twice.boundaries
        assert once.params.mean.tobytes() == twice.params.mean.tobytes()

    def test_params_refit_on_merged_train(self):
        sset = _ten_quarter_set()
        out = split_chronological(sset, *default_boundaries(sset))
        std_out, params_before = standardize(out)
        merged = merge_train_validation(std_out)
        assert merged.params is not None
        assert not np.array_equal(merged.params.mean, params_before.mean)

    def test_test_partition_untouched(self):
        sset = _ten_quarter_set()
        out = split_chronological(sset, *default_boundaries(sset))
        merged = merge_train_validation(out)
        assert out.quarters("test") == merged.quarters("test")


def test_serialization_roundtrip(tmp_path):
    sset = _ten_quarter_set()
    sset = split_chronological(sset, *default_boundaries(sset))
    sset, _ = standardize(sset)
    path = tmp_path / "samples.json"
    save(sset, path)
    loaded = load(path)
    assert loaded.feature_names == sset.feature_names
    assert loaded.boundaries == sset.boundaries
    assert loaded.params.mean.tobytes() == sset.params.mean.tobytes()
    X1, y1 = sset.matrix("test")
    X2, y2 = loaded.matrix("test")
    assert X1.tobytes() == X2.tobytes()
    assert y1.tobytes() == y2.tobytes()


def test_to_dict_has_format_tag():
    doc = to_dict(_ten_quarter_set())
    assert doc["format"] == "fundrank/samples"
    assert from_dict(doc).feature_names == _ten_quarter_set().feature_names
