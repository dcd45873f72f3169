import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vmga.errors import DataError
from vmga.trace import (
    FEATURE_COLUMNS,
    SOURCE_COLUMNS,
    FeatureMatrix,
    RawTraceRecord,
    SynthSpec,
    clean_records,
    extract_features,
    flatten_nested,
    load_trace,
    minmax_normalize,
    synth_workload,
    write_trace,
)

HEADER = "job_id,timestamp," + ",".join(SOURCE_COLUMNS)


def full_row(job, ts, vals):
    return f"{job},{ts}," + ",".join(str(v) for v in vals)


def test_load_three_rows():
    text = "\n".join([HEADER] + [full_row(f"j{i}", i, [1, 2, 1, 1, 0.5, 0.5, 10]) for i in range(3)])
    recs = load_trace(io.StringIO(text))
    assert [r.job_id for r in recs] == ["j0", "j1", "j2"]
    assert recs[1].timestamp == 1
    assert recs[0].number("duration") == 10


def test_literal_cell_is_parsed():
    text = 'job_id,timestamp,resources\nj1,5,"{\'cpu\': 1}"\n'
    recs = load_trace(text.encode(), schema=())
    assert recs[0].fields["resources"] == {"cpu": 1}


def test_empty_and_garbage_numeric_cells_are_missing():
    text = "\n".join([HEADER, "j1,0,1,2,,1,0.5,0.5,10", "j2,0,1,2,abc,1,0.5,0.5,10"])
    recs = load_trace(io.StringIO(text))
    assert recs[0].number("avg_cpus") is None
    assert recs[1].number("avg_cpus") is None


@pytest.mark.parametrize("text, fragment", [
    ("", "no header"),
    ("job_id,timestamp,a,a\n", "duplicate"),
    ("job_id,timestamp,a\nj,1\n", "expected 3 cells"),
    ("timestamp,a\n1,2\n", "job_id"),
])
def test_load_errors(text, fragment):
    with pytest.raises(DataError, match=fragment):
        load_trace(io.StringIO(text))


def test_google_style_nested_columns():
    text = (
        "job_id,timestamp,resource_request,average_usage,maximum_usage,duration\n"
        "c1,10,\"{'cpus': 0.02, 'memory': 0.01}\",\"{'cpus': 0.005, 'memory': 0.002}\","
        "\"{'cpus': 0.01, 'memory': 0.004}\",300\n"
    )
    recs = flatten_nested(load_trace(io.StringIO(text)))
    r = recs[0]
    assert r.number("requested_cpus") == 0.02
    assert r.number("cpu_usage_mean") == 0.005
    assert r.number("avg_memory") == 0.004
    assert "resource_request" not in r.fields


def rec(i, **vals):
    fields = {c: None for c in SOURCE_COLUMNS}
    fields.update(vals)
    return RawTraceRecord(f"j{i}", i, fields)


def filled(i, **over):
    base = dict(zip(SOURCE_COLUMNS, [2.0, 4.0, 1.5, 3.0, 1.0, 2.0, 100.0]))
    base.update(over)
    return rec(i, **base)


def test_median_imputation_odd():
    recs = [filled(0, avg_cpus=1.0), filled(1, avg_cpus=None), filled(2, avg_cpus=3.0)]
    out = clean_records(recs)
    assert [r.number("avg_cpus") for r in out] == [1.0, 2.0, 3.0]


def test_median_imputation_outlier():
    vals = [1.0, 2.0, None, 100.0]
    out = clean_records([filled(i, avg_cpus=v) for i, v in enumerate(vals)])
    # sorted {1, 2, 100} -> middle element 2
    assert [r.number("avg_cpus") for r in out] == [1.0, 2.0, 2.0, 100.0]


def test_median_even_count_is_mean_of_middle_two():
    vals = [1.0, 2.0, 4.0, 10.0, None]
    out = clean_records([filled(i, avg_cpus=v) for i, v in enumerate(vals)])
    assert out[-1].number("avg_cpus") == 3.0


def test_all_missing_row_dropped():
    recs = [filled(i) for i in range(4)] + [rec(9)]
    assert len(clean_records(recs)) == 4


def test_column_missing_everywhere_is_named():
    recs = [filled(i, duration=None) for i in range(3)]
    with pytest.raises(DataError, match="duration"):
        clean_records(recs)


def test_cleaned_output_has_no_missing():
    recs = synth_workload(SynthSpec(vm_count=200, missing_rate=0.3), seed=3)
    out = clean_records(recs)
    assert all(r.number(c) is not None for r in out for c in SOURCE_COLUMNS)


def test_ratio_definitions():
    fm = extract_features([filled(0, requested_cpus=2.0, cpu_usage_mean=1.0)])
    assert fm.column("cpu_utilization_ratio")[0] == 0.5
    fm = extract_features([filled(0, requested_cpus=0.0)])
    assert fm.column("cpu_utilization_ratio")[0] == 0.0
    assert fm.column("cpu_peak_ratio")[0] == 0.0


def test_feature_shape():
    fm = extract_features(clean_records(synth_workload(SynthSpec(vm_count=100), seed=1)))
    assert fm.names == FEATURE_COLUMNS
    assert fm.values.shape == (100, 10)


def test_extract_requires_clean_input():
    with pytest.raises(DataError):
        extract_features([filled(0, duration=None)])


def test_extract_is_permutation_equivariant():
    recs = clean_records(synth_workload(SynthSpec(vm_count=30), seed=2))
    perm = np.random.default_rng(0).permutation(30)
    a = extract_features(recs).values
    b = extract_features([recs[i] for i in perm]).values
    np.testing.assert_array_equal(a[perm], b)


@pytest.mark.parametrize("col, expected", [
    ([2, 4, 6], [0, 0.5, 1]),
    ([5, 5], [0, 0]),
    ([-1, 0, 3], [0, 0.25, 1]),
])
def test_minmax_examples(col, expected):
    out = minmax_normalize(FeatureMatrix.from_columns({"x": col}))
    np.testing.assert_allclose(out.column("x"), expected, rtol=0, atol=1e-15)


def test_minmax_empty_passthrough():
    out = minmax_normalize(FeatureMatrix(("a",), np.zeros((0, 1))))
    assert out.row_count == 0


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.lists(finite, min_size=1, max_size=40))
def test_minmax_range_and_idempotence(col):
    out = minmax_normalize(FeatureMatrix.from_columns({"x": col})).column("x")
    assert np.all((out >= 0) & (out <= 1))
    if max(col) > min(col):
        assert out.min() == 0.0 and out.max() == 1.0
        again = minmax_normalize(FeatureMatrix.from_columns({"x": out})).column("x")
        np.testing.assert_allclose(again, out, rtol=0, atol=1e-15)


def test_synth_contract():
    spec = SynthSpec(vm_count=40, missing_rate=0.0)
    a = synth_workload(spec, 11)
    assert a == synth_workload(spec, 11)
    assert len(a) == 40
    assert all(r.number(c) is not None for r in a for c in SOURCE_COLUMNS)
    lo, hi = spec.cpu_demand_range
    assert all(lo <= r.number("requested_cpus") <= hi for r in a)


def test_synth_missing_rate_blanks_cells():
    recs = synth_workload(SynthSpec(vm_count=500, missing_rate=0.2), 5)
    frac = np.mean([r.fields[c] is None for r in recs for c in SOURCE_COLUMNS])
    assert 0.15 < frac < 0.25


def test_synthspec_rejects_zero_vms():
    with pytest.raises(ValueError):
        SynthSpec(vm_count=0)


@settings(max_examples=25)
@given(st.integers(0, 2**31 - 1))
def test_write_load_roundtrip(seed):
    recs = synth_workload(SynthSpec(vm_count=5, missing_rate=0.2), seed)
    buf = io.StringIO()
    write_trace(recs, buf)
    back = load_trace(io.StringIO(buf.getvalue()))
    assert back == recs
