import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from denaudit import DataError, Dataset, ModelRun, per_datapoint_error, validate_dataset

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_regression_identity():
    assert per_datapoint_error(ModelRun("m", [0.5], [0.5])).tolist() == [0.0]


def test_regression_abs_error():
    e = per_datapoint_error(ModelRun("m", [0.3, 0.9], [0.5, 0.1]))
    np.testing.assert_allclose(e, [0.2, 0.8], rtol=0, atol=1e-15)


def test_binary_threshold():
    e = per_datapoint_error(ModelRun("m", [0.9, 0.2], [0, 0], task="binary"))
    assert e.tolist() == [1.0, 0.0]


def test_binary_threshold_is_inclusive():
    e = per_datapoint_error(ModelRun("m", [0.5, 0.4999], [1, 1], task="binary"))
    assert e.tolist() == [0.0, 1.0]


def test_binary_labels_must_be_01():
    with pytest.raises(DataError, match="index 1"):
        per_datapoint_error(ModelRun("m", [0.1, 0.2], [0, 2], task="binary"))


@pytest.mark.parametrize("field", ["predictions", "labels"])
def test_nonfinite_rejected_with_index(field):
    vals = {"predictions": [0.1, 0.2, 0.3], "labels": [0.0, 0.0, 0.0]}
    vals[field] = [0.1, np.nan, 0.3]
    with pytest.raises(DataError, match="index 1"):
        per_datapoint_error(ModelRun("m", **vals))


def test_length_mismatch_rejected():
    with pytest.raises(DataError):
        per_datapoint_error(ModelRun("m", [0.1, 0.2], [0.0]))


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30), st.randoms())
def test_error_properties(pairs, rnd):
    pred = np.array([p for p, _ in pairs])
    lab = np.array([y for _, y in pairs])
    e = per_datapoint_error(ModelRun("m", pred, lab))
    assert len(e) == len(pairs)
    # symmetric in (prediction, label)
    assert np.array_equal(e, per_datapoint_error(ModelRun("m", lab, pred)))
    perm = list(range(len(pairs)))
    rnd.shuffle(perm)
    assert np.array_equal(per_datapoint_error(ModelRun("m", pred[perm], lab[perm])), e[perm])


def _ds(**kw):
    base = dict(embeddings=np.zeros((3, 2)), errors=[0.1, 0.2, 0.3],
                identity=["a", "a", "b"], groups={"Male": [0, 1, 1]})
    base.update(kw)
    return Dataset.create(**base)


def test_valid_dataset_has_no_violations():
    assert validate_dataset(_ds()) == []


def test_negative_error_reported():
    problems = validate_dataset(_ds(errors=[0.1, -0.1, 0.3]))
    assert len(problems) == 1
    assert "errors" in problems[0] and "index 1" in problems[0]


def test_short_group_vector_reported():
    problems = validate_dataset(_ds(groups={"Male": [0, 1]}))
    assert len(problems) == 1
    assert "Male" in problems[0]


def test_nan_embedding_and_identity_length():
    emb = np.zeros((3, 2))
    emb[2, 1] = np.nan
    problems = validate_dataset(_ds(embeddings=emb, identity=["a"]))
    assert any("row 2" in p for p in problems)
    assert any(p.startswith("identity") for p in problems)


def test_check_raises():
    with pytest.raises(DataError):
        _ds(errors=[0.1, 0.2]).check()


def test_partition_encoding_is_dense_and_sorted():
    ds = _ds(identity=["z", "a", "z"])
    assert ds.identity.categories == ("a", "z")
    assert ds.identity.codes.tolist() == [1, 0, 1]
    assert ds.partition("individual") is ds.identity
    with pytest.raises(DataError, match="Young"):
        ds.partition("Young")
