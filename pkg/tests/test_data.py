import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixgm.data import (
    Dataset, SplitSpec, Variable, VariableSchema, load_dataset, preprocess, split_indices,
    split_train_test, write_dataset,
)
from mixgm.errors import DataError


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


@pytest.fixture
def three_col(tmp_path):
    schema = VariableSchema((
        Variable("a", "continuous"),
        Variable("b", "continuous"),
        Variable("smoker", "discrete", ("no", "yes"), "no"),
    ))
    path = tmp_path / "schema.yaml"
    schema.dump(path)
    return schema, path


ROWS = [["1.0", "2.5", "no"], ["2.0", "3.5", "yes"], ["3.0", "1.5", "no"], ["4.5", "0.5", "yes"], ["5.0", "2.0", "no"]]


class TestSchema:
    def test_invariants(self):
        with pytest.raises(DataError, match="duplicate"):
            VariableSchema((Variable("a", "continuous"), Variable("a", "continuous")))
        with pytest.raises(DataError, match=">= 2 levels"):
            VariableSchema((Variable("a", "continuous"), Variable("d", "discrete", ("x",), "x")))
        with pytest.raises(DataError, match="baseline"):
            VariableSchema((Variable("a", "continuous"), Variable("d", "discrete", ("x", "y"), "z")))
        with pytest.raises(DataError, match="p \\+ q >= 2"):
            VariableSchema((Variable("a", "continuous"),))

    def test_model_order_puts_continuous_first(self, mixed_schema):
        interleaved = VariableSchema((mixed_schema["sex"], mixed_schema["age"], mixed_schema["stage"],
                                      mixed_schema["uacr"]))
        assert interleaved.model_order == ["age", "uacr", "sex", "stage"]
        assert interleaved.locate("stage") == ("discrete", 1)
        assert interleaved.baselines == (0, 1)
        assert list(interleaved.offsets) == [0, 2, 5]
        assert list(interleaved.indicator_is_baseline) == [True, False, False, True, False]

    def test_yaml_roundtrip(self, mixed_schema, tmp_path):
        mixed_schema.dump(tmp_path / "s.yaml")
        assert VariableSchema.load(tmp_path / "s.yaml") == mixed_schema

    def test_baseline_defaults_to_first_level(self):
        s = VariableSchema.from_dict({"variables": [
            {"name": "a", "kind": "continuous"},
            {"name": "d", "kind": "discrete", "levels": [3, 1]},
        ]})
        assert s["d"].levels == ("3", "1") and s["d"].baseline == "3"


class TestLoad:
    def test_complete(self, tmp_path, three_col):
        schema, sp = three_col
        _write(tmp_path / "d.csv", ["a", "b", "smoker"], ROWS)
        ds = load_dataset(tmp_path / "d.csv", sp)
        assert ds.n == 5 and ds.dropped_rows == 0
        assert list(ds.discrete[:, 0]) == [0, 1, 0, 1, 0]

    def test_blank_cell_drops_row(self, tmp_path, three_col):
        _, sp = three_col
        rows = [r[:] for r in ROWS]
        rows[2][1] = ""
        _write(tmp_path / "d.csv", ["a", "b", "smoker"], rows)
        ds = load_dataset(tmp_path / "d.csv", sp)
        assert ds.n == 4 and ds.dropped_rows == 1

    def test_cohort_missingness(self, tmp_path):
        # 5217 rows, 1512 with a gap somewhere
        schema = VariableSchema((Variable("egfr", "continuous"), Variable("uacr", "continuous"),
                                 Variable("sex", "discrete", ("f", "m"), "f")))
        rng = np.random.default_rng(1)
        gaps = set(rng.choice(5217, 1512, replace=False).tolist())
        rows = []
        for i in range(5217):
            r = [f"{rng.normal():.6f}", f"{rng.normal():.6f}", "fm"[i % 2]]
            if i in gaps:
                r[i % 3] = ""
            rows.append(r)
        _write(tmp_path / "cohort.csv", schema.names, rows)
        ds = load_dataset(tmp_path / "cohort.csv", schema=schema)
        assert ds.n == 3705 and ds.dropped_rows == 1512

    def test_unparseable_number_is_missing(self, tmp_path, three_col):
        _, sp = three_col
        rows = [r[:] for r in ROWS]
        rows[0][0] = "n/a"
        _write(tmp_path / "d.csv", ["a", "b", "smoker"], rows)
        assert load_dataset(tmp_path / "d.csv", sp).n == 4

    @pytest.mark.parametrize("header, rows, msg", [
        (["a", "b", "smoker", "zzz"], [r + ["1"] for r in ROWS], "unknown column 'zzz'"),
        (["a", "b"], [r[:2] for r in ROWS], "'smoker'.*missing"),
        (["a", "b", "smoker"], [["1", "2", "maybe"]], "row 2, column 'smoker'.*'maybe'"),
        (["a", "b", "smoker"], [["", "2", "no"]], "no complete rows"),
    ])
    def test_errors(self, tmp_path, three_col, header, rows, msg):
        _, sp = three_col
        _write(tmp_path / "d.csv", header, rows)
        with pytest.raises(DataError, match=msg):
            load_dataset(tmp_path / "d.csv", sp)

    def test_csv_roundtrip(self, tmp_path, mixed_schema):
        rng = np.random.default_rng(3)
        ds = Dataset(mixed_schema, rng.normal(size=(50, 2)) * 1e3,
                     np.stack([rng.integers(0, 2, 50), rng.integers(0, 3, 50)], axis=1))
        write_dataset(ds, tmp_path / "out.csv")
        back = load_dataset(tmp_path / "out.csv", schema=mixed_schema)
        np.testing.assert_array_equal(back.discrete, ds.discrete)
        np.testing.assert_allclose(back.continuous, ds.continuous, rtol=0, atol=1e-12)


class TestPreprocess:
    def _one(self, values, log2=False):
        schema = VariableSchema((Variable("v", "continuous", log2=log2), Variable("d", "discrete", ("0", "1"), "0")))
        return Dataset(schema, np.asarray(values, float)[:, None], np.zeros((len(values), 1), int))

    def test_log2_powers_of_two(self):
        out = preprocess(self._one([1, 2, 4, 8], log2=True))
        np.testing.assert_allclose(out.prescale[:, 0], [0, 1, 2, 3])
        ops = [r.operation for r in out.transform_log]
        assert ops == ["log2", "standardize"]

    def test_zscores(self):
        out = preprocess(self._one([-1, 0, 1]))
        np.testing.assert_allclose(out.continuous[:, 0], [-1, 0, 1], atol=1e-15)

    def test_constant_column(self):
        with pytest.raises(DataError, match="zero variance under standardization"):
            preprocess(self._one([3, 3, 3]))

    def test_nonpositive_under_log2(self):
        with pytest.raises(DataError, match="row 1"):
            preprocess(self._one([1, 0, 2], log2=True))

    def test_order_log_center_scale(self):
        schema = VariableSchema((Variable("v", "continuous", log2=True, center=True), Variable("w", "continuous")))
        ds = Dataset(schema, np.array([[1, 5], [4, 6], [16, 9.0]]), np.zeros((3, 0), int))
        out = preprocess(ds)
        assert [r.operation for r in out.transform_log] == ["log2", "center", "standardize", "standardize"]
        np.testing.assert_allclose(out.prescale[:, 0], [-2, 0, 2])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 60))
    def test_standardized_and_idempotent(self, seed, n):
        rng = np.random.default_rng(seed)
        schema = VariableSchema((Variable("a", "continuous"), Variable("b", "continuous")))
        ds = Dataset(schema, rng.normal(5, 3, (n, 2)), np.zeros((n, 0), int))
        once = preprocess(ds)
        np.testing.assert_allclose(once.continuous.mean(axis=0), 0, atol=1e-10)
        np.testing.assert_allclose(once.continuous.std(axis=0, ddof=1), 1, atol=1e-10)
        twice = preprocess(once)
        np.testing.assert_allclose(twice.continuous, once.continuous, atol=1e-10)


class TestSplit:
    @pytest.mark.parametrize("n, sizes", [(3705, (2470, 1235)), (3, (2, 1))])
    def test_sizes(self, n, sizes):
        tr, te = split_indices(n, SplitSpec(2 / 3, 11))
        assert (tr.size, te.size) == sizes
        assert np.array_equal(np.sort(np.r_[tr, te]), np.arange(n))

    def test_deterministic(self):
        a = split_indices(100, SplitSpec(0.5, 42))
        b = split_indices(100, SplitSpec(0.5, 42))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        c = split_indices(100, SplitSpec(0.5, 43))
        assert not np.array_equal(a[0], c[0])

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.5, 1.5])
    def test_bad_fraction(self, frac):
        with pytest.raises(DataError):
            SplitSpec(frac, 0)

    def test_too_small(self):
        with pytest.raises(DataError):
            split_indices(2, SplitSpec())

    def test_training_statistics(self, mixed_schema):
        rng = np.random.default_rng(0)
        raw = Dataset(mixed_schema, rng.lognormal(size=(90, 2)) + 1,
                      np.stack([rng.integers(0, 2, 90), rng.integers(0, 3, 90)], axis=1))
        ds = preprocess(raw)
        train, test = split_train_test(ds, SplitSpec(2 / 3, 5))
        assert (train.n, test.n) == (60, 30)
        np.testing.assert_allclose(train.continuous.mean(axis=0), 0, atol=1e-10)
        np.testing.assert_allclose(train.continuous.std(axis=0, ddof=1), 1, atol=1e-10)
        means, sds = train.scaling
        tr_idx, te_idx = split_indices(90, SplitSpec(2 / 3, 5))
        np.testing.assert_allclose(test.continuous, (ds.prescale[te_idx] - means) / sds)
        assert test.schema == ds.schema
        assert train.transform_log[-1].parameters["source"] == "train"
