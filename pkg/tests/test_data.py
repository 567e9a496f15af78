from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irad.data import (
    BenchSpec,
    CsvFormatError,
    LabeledSet,
    gen_benchmark,
    gen_two_domain,
    load_csv,
    oracle_scores,
    save_csv,
    split,
)
from irad.evaltheory import auroc
from irad.numkit import ShapeError

SMALL = BenchSpec(n_source=200, n_t=10, n_test=100, n_source_test=100)


def test_default_spec_values():
    s = BenchSpec()
    assert (s.k_shared, s.m_private, s.d_x) == (4, 4, 20)
    assert (s.n_source, s.n_t, s.n_test, s.shift) == (2000, 50, 1000, 4.0)


def test_shapes_and_semi_supervised_contract():
    src, tgt, test = gen_two_domain(SMALL, 0)
    assert src.x.shape == (200, 20) and tgt.x.shape == (10, 20) and test.x.shape == (100, 20)
    assert src.normal_only and tgt.normal_only
    assert test.y.sum() == 50
    assert (src.domain, tgt.domain, test.domain) == ("source", "target", "target")
    assert np.all(np.isfinite(test.x))


def test_generation_is_deterministic():
    a, b = gen_benchmark(SMALL, 3), gen_benchmark(SMALL, 3)
    for name in ("source_train", "target_train", "target_test", "source_test"):
        assert np.array_equal(getattr(a, name).x, getattr(b, name).x)
        assert np.array_equal(getattr(a, name).y, getattr(b, name).y)
    c = gen_benchmark(SMALL, 4)
    assert not np.array_equal(a.source_train.x, c.source_train.x)


@pytest.mark.parametrize("seed", range(5))
def test_oracle_detector_certifies_benchmark(seed):
    b = gen_benchmark(BenchSpec(), seed)
    assert auroc(oracle_scores(b.s["target_test"]), b.target_test.y) >= 0.95
    assert auroc(oracle_scores(b.s["source_test"]), b.source_test.y) >= 0.95


def test_zero_shift_makes_classes_identical_in_latent():
    b = gen_benchmark(replace(SMALL, shift=0.0, n_test=2000), 0)
    assert abs(auroc(oracle_scores(b.s["target_test"]), b.target_test.y) - 0.5) < 0.05


def test_identical_transforms_option():
    spec = replace(SMALL, domain_gap=0.0, source_map_seed=11, target_map_seed=11)
    b = gen_benchmark(spec, 0)
    # same map: target normals look like source normals
    mu_s, mu_t = b.source_train.x.mean(axis=0), b.target_train.x.mean(axis=0)
    sd = b.source_train.x.std(axis=0)
    assert np.all(np.abs(mu_s - mu_t) < 4 * sd / np.sqrt(len(b.target_train)))


def test_domains_differ_by_default():
    b = gen_benchmark(BenchSpec(), 0)
    gap = np.linalg.norm(b.source_train.x.mean(axis=0) - b.target_train.x.mean(axis=0))
    assert gap > 1.0


@pytest.mark.parametrize(
    "change",
    [dict(k_shared=0), dict(k_shared=15, m_private=10), dict(n_t=2000), dict(shift=-1.0), dict(domain_gap=1.5), dict(anomaly_frac=0.0)],
)
def test_invalid_specs(change):
    with pytest.raises(ValueError):
        gen_benchmark(replace(SMALL, **change), 0)


def test_labeled_set_validation():
    with pytest.raises(ShapeError):
        LabeledSet(np.zeros((3, 2)), [0, 0], "source")
    with pytest.raises(ValueError):
        LabeledSet(np.zeros((2, 2)), [0, 2], "source")
    with pytest.raises(ValueError):
        LabeledSet(np.zeros((2, 2)), [0, 0], "elsewhere")


# -- CSV ---------------------------------------------------------------------


def test_csv_two_rows(tmp_path):
    p = tmp_path / "two.csv"
    p.write_text("f0,f1,f2,label,domain\n1.5,2,3,0,target\n-1,0,1e-3,1,target\n")
    s = load_csv(p)
    assert s.x.shape == (2, 3) and list(s.y) == [0, 1] and s.domain == "target"
    assert s.x[1, 2] == 1e-3


def test_csv_nan_names_line(tmp_path):
    p = tmp_path / "nan.csv"
    p.write_text("f0,f1,label,domain\n1,2,0,source\n3,NaN,0,source\n")
    with pytest.raises(CsvFormatError, match=r"nan.csv:3"):
        load_csv(p)


@pytest.mark.parametrize(
    "body, line",
    [
        ("1,2,0,source\n1,2,3,0,source\n", 3),
        ("1,x,0,source\n", 2),
        ("1,2,5,source\n", 2),
        ("1,2,0,moon\n", 2),
        ("1,inf,0,source\n", 2),
    ],
)
def test_csv_malformed_rows(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text("f0,f1,label,domain\n" + body)
    with pytest.raises(CsvFormatError, match=rf"bad.csv:{line}:"):
        load_csv(p)


def test_csv_bad_header_and_missing_file(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b,label,domain\n1,2,0,source\n")
    with pytest.raises(CsvFormatError, match=":1:"):
        load_csv(p)
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "missing.csv")


def test_csv_round_trip_bit_identical(tmp_path):
    b = gen_benchmark(SMALL, 1)
    p = tmp_path / "all.csv"
    save_csv(p, b.source_train, b.target_test)
    src, tgt = load_csv(p, "source"), load_csv(p, "target")
    assert np.array_equal(src.x, b.source_train.x) and np.array_equal(tgt.x, b.target_test.x)
    assert np.array_equal(tgt.y, b.target_test.y)
    with pytest.raises(CsvFormatError, match="mixes domains"):
        load_csv(p)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=2, max_size=12))
def test_csv_round_trip_awkward_floats(tmp_path_factory, vals):
    p = tmp_path_factory.mktemp("csv") / "v.csv"
    x = np.array(vals).reshape(-1, 1)
    save_csv(p, LabeledSet(x, np.zeros(len(x), int), "source"))
    assert np.array_equal(load_csv(p).x, x)


# -- split -------------------------------------------------------------------


def test_split_half():
    s = LabeledSet(np.arange(20.0).reshape(10, 2), np.zeros(10, int), "source")
    a, b = split(s, 0.5, 0)
    assert len(a) == len(b) == 5
    a2, _ = split(s, 0.5, 0)
    assert np.array_equal(a.x, a2.x)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_split_is_disjoint_and_exhaustive(n, frac, seed):
    s = LabeledSet(np.arange(float(n)).reshape(n, 1), np.zeros(n, int), "target")
    a, b = split(s, frac, seed)
    assert sorted(np.r_[a.x[:, 0], b.x[:, 0]].tolist()) == list(range(n))


def test_split_fraction_bounds():
    s = LabeledSet(np.zeros((4, 1)), np.zeros(4, int), "source")
    for f in (0.0, 1.0):
        with pytest.raises(ValueError):
            split(s, f, 0)
