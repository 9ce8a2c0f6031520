import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import toy_dataset
from uforest.errors import ConfigError, DataError
from uforest.forest import (ForestConfig, UncertaintyForest,
                            conditional_entropy_at, empirical_entropy,
                            estimate_conditional_entropy,
                            estimate_mutual_information,
                            finite_sample_correct, fit_forest, load_forest,
                            posterior, save_forest)
from uforest.rng import derive_key
from uforest.sim import SimSetting, sample
from uforest.tree import TreeParams

LOG2 = math.log(2.0)
H_3TO1 = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))  # 0.5623...


def spherical_data(n, mu=1.0, d=1, seed=0):
    return sample(SimSetting("spherical", mu, 0.5, d), n, seed)


# ------------------------------------------------------------------ correction

def test_correction_two_class_example():
    out = finite_sample_correct(np.array([[1.0, 0.0]]), np.array([3]), 3.0)
    np.testing.assert_allclose(out, [[9.0 / 10.0, 1.0 / 10.0]], atol=1e-15)


def test_correction_no_zero_entries_is_identity():
    row = np.array([[0.5, 0.5]])
    for n_votes, kappa in ((3, 3.0), (50, 0.1), (1, 7.5)):
        out = finite_sample_correct(row, np.array([n_votes]), kappa)
        np.testing.assert_allclose(out, row, atol=1e-15)


def test_correction_three_class_example_and_bound():
    raw = np.array([[1.0, 0.0, 0.0]])
    out = finite_sample_correct(raw, np.array([10]), 3.0)
    np.testing.assert_allclose(out, [[30.0 / 32.0, 1.0 / 32.0, 1.0 / 32.0]],
                               atol=1e-15)
    gap = np.abs(out - raw).max()
    assert gap == pytest.approx(2.0 / 32.0, abs=1e-15)
    assert gap <= 3 / (3.0 * 10)


@given(
    k=st.integers(2, 10),
    n_votes=st.integers(1, 100),
    kappa=st.floats(0.1, 10.0),
    counts=st.data(),
)
def test_correction_bound_and_simplex_property(k, n_votes, kappa, counts):
    votes = counts.draw(
        st.lists(st.integers(0, n_votes), min_size=k, max_size=k)
        .filter(lambda v: sum(v) > 0))
    votes = np.asarray(votes, dtype=np.float64)
    raw = (votes / votes.sum())[None, :]
    n = int(votes.sum())
    out = finite_sample_correct(raw, np.array([n]), kappa)
    assert out.shape == raw.shape
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    assert (out > 0.0).all()
    assert np.abs(out - raw).max() <= k / (kappa * n) + 1e-12


def test_correction_vanishes_for_large_counts():
    raw = np.array([[1.0, 0.0]])
    out = finite_sample_correct(raw, np.array([10_000_000]), 100.0)
    assert np.abs(out - raw).max() < 1e-6


# ------------------------------------------------------------------- splitting

def test_split_sizes_forty_thirty_thirty():
    data = spherical_data(100, seed=1)
    f = fit_forest(data, ForestConfig(n_trees=1, tree=TreeParams(min_leaf_size=5)),
                   seed=2)
    tree = f.trees[0]
    assert tree.node_count[0] == 40          # partition rows
    assert f.posteriors[0].leaf_counts.sum() == 30  # voting rows
    assert len(f.eval_sets[0]) == 30         # evaluation rows


def test_dishonest_forest_votes_with_partition_rows():
    data = spherical_data(100, seed=1)
    cfg = ForestConfig(n_trees=1, honest=False, correction=False,
                       frac_partition=0.7, frac_vote=0.0, frac_eval=0.3,
                       tree=TreeParams(min_leaf_size=5))
    f = fit_forest(data, cfg, seed=2)
    assert f.trees[0].node_count[0] == 70
    assert f.posteriors[0].leaf_counts.sum() == 70


def test_thread_counts_produce_identical_forests():
    data = spherical_data(300, seed=3)
    cfg = ForestConfig(n_trees=2)
    one = fit_forest(data, cfg, seed=5, threads=1)
    eight = fit_forest(data, cfg, seed=5, threads=8)
    assert len(one.trees) == len(eight.trees)
    for ta, tb in zip(one.trees, eight.trees):
        np.testing.assert_array_equal(ta.feature, tb.feature)
        np.testing.assert_array_equal(ta.threshold, tb.threshold)
    for pa, pb in zip(one.posteriors, eight.posteriors):
        np.testing.assert_array_equal(pa.leaf_probs, pb.leaf_probs)
        np.testing.assert_array_equal(pa.leaf_counts, pb.leaf_counts)
    for ea, eb in zip(one.eval_sets, eight.eval_sets):
        np.testing.assert_array_equal(ea, eb)


def test_single_class_data_rejected():
    data = toy_dataset(np.random.default_rng(0).normal(size=(50, 1)),
                       np.zeros(50), n_classes=1)
    with pytest.raises(DataError):
        fit_forest(data, ForestConfig(n_trees=1), seed=0)


# ------------------------------------------------------------------- posterior

def test_single_leaf_posterior_is_empirical_frequency():
    # constant feature: the tree cannot split, so the posterior is the
    # voting-set frequency; dishonest mode votes with all four rows
    data = toy_dataset(np.zeros((4, 1)), [0, 0, 1, 1])
    cfg = ForestConfig(n_trees=1, honest=False, correction=False,
                       frac_partition=1.0, frac_vote=0.0, frac_eval=0.0,
                       tree=TreeParams(min_leaf_size=1))
    f = fit_forest(data, cfg, seed=0)
    np.testing.assert_allclose(posterior(f, np.array([[0.0]])), [[0.5, 0.5]],
                               atol=1e-15)


def test_posterior_rows_on_simplex_and_dimension_checked():
    data = spherical_data(400, seed=7)
    f = fit_forest(data, ForestConfig(n_trees=20), seed=8)
    p = posterior(f, np.linspace(-2, 2, 9)[:, None])
    assert p.shape == (9, 2)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert (p > 0.0).all()
    with pytest.raises(DataError):
        posterior(f, np.ones((3, 2)))


def test_posterior_monotone_along_signal_axis():
    data = spherical_data(2000, seed=9)
    f = fit_forest(data, ForestConfig(n_trees=60), seed=10)
    p = posterior(f, np.array([[-2.0], [0.0], [2.0]]))[:, 1]
    assert p[0] < 0.2 and p[2] > 0.8
    assert p[0] < p[1] < p[2]


# -------------------------------------------------------------- entropy values

def test_conditional_entropy_at_degenerate_and_uniform():
    # two well-separated spikes: leaves are pure, so with correction
    # off the pointwise entropy collapses to 0
    X = np.repeat([[-1.0], [1.0]], 30, axis=0)
    y = np.repeat([0, 1], 30)
    data = toy_dataset(X, y)
    cfg = ForestConfig(n_trees=1, honest=False, correction=False,
                       frac_partition=1.0, frac_vote=0.0, frac_eval=0.0,
                       tree=TreeParams(min_leaf_size=1))
    f = fit_forest(data, cfg, seed=1)
    assert conditional_entropy_at(f, np.array([-1.0])) == pytest.approx(0.0, abs=1e-15)

    mixed = toy_dataset(np.zeros((4, 1)), [0, 0, 1, 1])
    fm = fit_forest(mixed, cfg, seed=1)
    assert conditional_entropy_at(fm, np.array([0.0])) == pytest.approx(LOG2, abs=1e-12)


def test_conditional_entropy_at_three_to_one_mix():
    data = toy_dataset(np.zeros((8, 1)), [0, 0, 0, 0, 0, 0, 1, 1])
    cfg = ForestConfig(n_trees=1, honest=False, correction=False,
                       frac_partition=1.0, frac_vote=0.0, frac_eval=0.0,
                       tree=TreeParams(min_leaf_size=1))
    f = fit_forest(data, cfg, seed=1)
    assert conditional_entropy_at(f, np.array([0.0])) == \
        pytest.approx(H_3TO1, abs=1e-12)


def test_empirical_entropy_values():
    assert empirical_entropy(np.array([1, 1, 2, 2])) == pytest.approx(LOG2, abs=1e-15)
    assert empirical_entropy(np.array([1, 1, 1, 1])) == 0.0
    assert empirical_entropy(np.array([1, 1, 1, 2])) == pytest.approx(H_3TO1, abs=1e-15)
    assert empirical_entropy(np.array([0, 1, 2]), n_classes=5) == \
        pytest.approx(math.log(3.0), abs=1e-15)
    with pytest.raises(DataError):
        empirical_entropy(np.array([], dtype=np.int64))
    with pytest.raises(DataError):
        empirical_entropy(np.array([-1, 0]))


# ------------------------------------------------------------------- estimates

def test_estimate_report_identities_and_modes():
    data = spherical_data(1200, seed=11)
    for mode in ("tree", "forest"):
        cfg = ForestConfig(n_trees=30, eval_mode=mode)
        rep = estimate_mutual_information(data, cfg, seed=12)
        assert rep.estimator == "uf"
        assert rep.mi == rep.h_y - rep.h_y_given_x
        assert rep.mi_normalized == pytest.approx(rep.mi / rep.h_y, abs=1e-15)
        assert 0.0 <= rep.h_y_given_x <= LOG2 + 1e-12
        assert rep.h_y_given_x <= rep.h_y + 0.02
        assert rep.seed == 12
        assert rep.config == cfg.to_dict()
        if mode == "tree":
            assert rep.per_tree_values is not None
            assert len(rep.per_tree_values) == 30
            assert rep.h_y_given_x == pytest.approx(
                float(np.mean(rep.per_tree_values)), abs=1e-12)
        else:
            assert rep.per_tree_values is None


def test_estimate_deterministic_and_seed_sensitive():
    data = spherical_data(800, seed=13)
    cfg = ForestConfig(n_trees=10)
    a = estimate_mutual_information(data, cfg, seed=14)
    b = estimate_mutual_information(data, cfg, seed=14, threads=4)
    c = estimate_mutual_information(data, cfg, seed=15)
    assert a == b
    assert a.h_y_given_x != c.h_y_given_x


def test_estimate_scaling_by_power_of_two_is_bit_exact():
    data = spherical_data(900, seed=16)
    scaled = toy_dataset(data.features * 8.0, data.labels)
    cfg = ForestConfig(n_trees=12)
    a = estimate_mutual_information(data, cfg, seed=17)
    b = estimate_mutual_information(scaled, cfg, seed=17)
    assert a.h_y_given_x == b.h_y_given_x
    assert a.mi == b.mi


def test_external_eval_rows_and_error_paths():
    data = spherical_data(600, seed=19)
    cfg = ForestConfig(n_trees=8, eval_mode="forest")
    f = fit_forest(data, cfg, seed=20)
    rep = estimate_conditional_entropy(f, eval_rows=np.linspace(-2, 2, 50)[:, None])
    assert 0.0 < rep.h_y_given_x < LOG2 + 1e-9
    with pytest.raises(DataError):
        estimate_conditional_entropy(f, eval_rows=np.empty((0, 1)))


def test_forest_round_trip_evaluates_external_rows(tmp_path):
    data = spherical_data(500, seed=21)
    cfg = ForestConfig(n_trees=6)
    f = fit_forest(data, cfg, seed=22)
    path = str(tmp_path / "forest.json")
    save_forest(f, path)
    g = load_forest(path)
    assert g.config == f.config
    assert g.label_names == f.label_names
    q = np.linspace(-2, 2, 21)[:, None]
    np.testing.assert_array_equal(posterior(f, q), posterior(g, q))
    # training rows are not persisted: internal evaluation is gone
    assert g.train_features is None
    with pytest.raises(DataError):
        estimate_conditional_entropy(g)
    rep = estimate_conditional_entropy(g, eval_rows=q)
    assert np.isfinite(rep.h_y_given_x)


def test_config_validation():
    with pytest.raises(ConfigError):
        ForestConfig(n_trees=0)
    with pytest.raises(ConfigError):
        ForestConfig(kappa=0.0)
    with pytest.raises(ConfigError):
        ForestConfig(frac_partition=0.5, frac_vote=0.2, frac_eval=0.2)
    with pytest.raises(ConfigError):
        ForestConfig(frac_partition=0.0, frac_vote=0.5, frac_eval=0.5)
    with pytest.raises(ConfigError):
        ForestConfig(honest=True, frac_partition=0.7, frac_vote=0.0,
                     frac_eval=0.3)
    with pytest.raises(ConfigError):
        ForestConfig(subsample_size=0)
    with pytest.raises(ConfigError):
        ForestConfig(eval_mode="bootstrap")


def test_config_round_trips_through_dict():
    cfg = ForestConfig(n_trees=17, kappa=2.5, eval_mode="forest",
                       tree=TreeParams(min_leaf_size=9, impurity="entropy",
                                       max_depth=6, n_candidate_features=2),
                       subsample_size=123, honest=False, correction=False,
                       frac_partition=0.5, frac_vote=0.0, frac_eval=0.5)
    doc = cfg.to_dict()
    assert doc["min_leaf_size"] == 9
    assert doc["n_trees"] == 17
    assert ForestConfig.from_dict(doc) == cfg
    assert ForestConfig.from_dict(ForestConfig().to_dict()) == ForestConfig()


def test_too_few_rows_rejected():
    data = toy_dataset(np.arange(4, dtype=float)[:, None], [0, 1, 0, 1])
    with pytest.raises(DataError):
        fit_forest(data, ForestConfig(n_trees=1, frac_partition=0.05,
                                      frac_vote=0.05, frac_eval=0.9), seed=0)


def test_unlabeled_data_rejected():
    data = toy_dataset(np.random.default_rng(2).normal(size=(50, 1)), None)
    with pytest.raises(DataError):
        fit_forest(data, ForestConfig(n_trees=1), seed=0)
