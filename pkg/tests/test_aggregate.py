"""Top-K retention, head normalization, aggregation and combine modes."""

import numpy as np
import pytest

from chronopath.aggregate import (AugmentedFeatures, TopKConfig,
                                  build_augmented, combine, normalize,
                                  top_k_filter, aggregate)
from chronopath.errors import ConfigError
from chronopath.features import FeatureMatrix, feature_matrix
from chronopath.graph import ingest_edges
from chronopath.metapaths import P1, P2, TIMELESS, enumerate_p1, enumerate_p2, \
    enumerate_pattern
from conftest import random_graph


def _p1_graph(head_trans):
    """P1 supers (e{i}, c, b) with importance = number of trans copies."""
    rows = []
    types = {"c": "CA", "b": "EOA"}
    for i, n in enumerate(head_trans):
        head = f"e{i}"
        types[head] = "EOA"
        rows.append((head, "c", "call", 1, 1.0))
        for j in range(n):
            rows.append(("c", "b", "trans", 2 + j, 1.0))
    # every call can pair with every trans, so omega differs only via calls
    return ingest_edges(rows, types=types)


def _omega_graph(omegas):
    """One P1 super per entry, with controllable distinct importance."""
    rows = []
    types = {"b": "EOA"}
    for i, om in enumerate(omegas):
        head, ca = f"e{i}", f"c{i}"
        types[head] = "EOA"
        types[ca] = "CA"
        for j in range(om):
            rows.append((head, ca, "call", 1 + j, 1.0))
        rows.append((ca, "b", "trans", 100, 1.0))
    return ingest_edges(rows, types=types)


def test_topk_config_validation():
    TopKConfig(100.0)
    TopKConfig(0.5)
    for bad in (0.0, -1.0, 100.5):
        with pytest.raises(ConfigError):
            TopKConfig(bad)


def test_topk_keeps_largest_and_breaks_ties_canonically():
    g = _omega_graph([9, 5, 5, 1])
    supers = enumerate_p1(g, TIMELESS)
    assert [sm.importance for sm in supers] == [9, 5, 5, 1]
    kept = top_k_filter(supers, TopKConfig(50.0))
    assert kept.to_dict() == {
        ("e0", "c0", "b"): 9,
        ("e1", "c1", "b"): 5,   # tie with e2 resolved toward smaller sequence
    }


def test_topk_full_retention_is_identity():
    g = _omega_graph([4, 2, 7])
    supers = enumerate_p1(g, TIMELESS)
    kept = top_k_filter(supers, TopKConfig(100.0))
    assert kept.to_dict() == supers.to_dict()


def test_topk_keeps_at_least_one_per_group():
    g = _omega_graph([3])
    supers = enumerate_p1(g, TIMELESS)
    kept = top_k_filter(supers, TopKConfig(1.0))
    assert len(kept) == 1


def test_topk_exact_percentage_no_float_slack():
    g = _omega_graph(list(range(1, 101)))
    supers = enumerate_p1(g, TIMELESS)
    assert len(supers) == 100
    kept = top_k_filter(supers, TopKConfig(7.0))
    assert len(kept) == 7
    assert sorted(sm.importance for sm in kept) == list(range(94, 101))


def test_topk_nested_retention():
    g = _omega_graph([13, 8, 8, 5, 3, 2, 2, 1])
    supers = enumerate_p1(g, TIMELESS)
    prev: set = set()
    for k in (1.0, 3.0, 5.0, 7.0, 9.0, 10.0, 20.0, 30.0, 40.0, 50.0, 100.0):
        kept = set(top_k_filter(supers, TopKConfig(k)).to_dict())
        assert prev <= kept
        prev = kept


def test_topk_groups_by_refined_class():
    rows = [
        ("a", "c", "call", 1, 1.0),
        ("c", "a", "trans", 2, 1.0),   # P12, the only one in its class
        ("x", "c", "call", 1, 1.0),
        ("y", "c", "call", 1, 1.0),
        ("c", "z", "trans", 2, 1.0),   # two P11 supers
    ]
    types = {"a": "EOA", "x": "EOA", "y": "EOA", "z": "EOA", "c": "CA"}
    g = ingest_edges(rows, types=types)
    supers = enumerate_p1(g, TIMELESS)
    assert len(supers) == 6  # 3 calls x 2 trans; only (a,c,a) is P12
    by_class = top_k_filter(supers, TopKConfig(1.0), use_refinement=True)
    names = sorted(sm.refined_class for sm in by_class)
    assert names == ["P11", "P12"]
    pooled = top_k_filter(supers, TopKConfig(1.0), use_refinement=False)
    assert len(pooled) == 1


def test_normalize_head_groups():
    g = _p1_graph([3, 1])
    supers = enumerate_p1(g, TIMELESS)
    # heads e0 and e1 with omega 3 and 1 share no head, each sums to 1 alone
    norm = normalize(supers)
    assert norm.head_sums() == {"e0": 1.0, "e1": 1.0}

    # two supers under one head: 3 copies vs 1 copy of the tail trans edge
    rows = [
        ("e", "c1", "call", 1, 1.0),
        ("e", "c2", "call", 1, 1.0),
        ("c1", "b", "trans", 2, 1.0),
        ("c1", "b", "trans", 3, 1.0),
        ("c1", "b", "trans", 4, 1.0),
        ("c2", "b", "trans", 2, 1.0),
    ]
    types = {"e": "EOA", "b": "EOA", "c1": "CA", "c2": "CA"}
    norm = normalize(enumerate_p1(ingest_edges(rows, types=types), TIMELESS))
    weights = {ns.node_sequence: ns.omega_hat for ns in norm}
    assert weights[("e", "c1", "b")] == pytest.approx(0.75)
    assert weights[("e", "c2", "b")] == pytest.approx(0.25)
    assert norm.head_sums()["e"] == pytest.approx(1.0)


def test_aggregate_sums_whole_sequence_into_target():
    rows = [
        ("A", "C", "call", 1, 1.0),
        ("C", "B", "trans", 2, 1.0),
    ]
    g = ingest_edges(rows, types={"A": "EOA", "B": "EOA", "C": "CA"})
    base = FeatureMatrix(["A", "C", "B"],
                         np.array([[1.0, 0.0], [2.0, 2.0], [0.0, 1.0]]))
    out = aggregate(normalize(enumerate_p1(g, TIMELESS)), base)
    assert out.shape == (3, 2)
    np.testing.assert_allclose(out[g.account_id("C")], [3.0, 3.0])
    assert not out[g.account_id("A")].any()
    assert not out[g.account_id("B")].any()


def test_aggregate_weights_by_omega_hat():
    rows = [
        ("e", "c1", "call", 1, 1.0),
        ("e", "c2", "call", 1, 1.0),
        ("c1", "b", "trans", 2, 1.0),
        ("c1", "b", "trans", 3, 1.0),
        ("c1", "b", "trans", 4, 1.0),
        ("c2", "b", "trans", 2, 1.0),
    ]
    types = {"e": "EOA", "b": "EOA", "c1": "CA", "c2": "CA"}
    g = ingest_edges(rows, types=types)
    base = FeatureMatrix(
        ["e", "b", "c1", "c2"],
        np.array([[4.0, 0.0], [0.0, 4.0], [0.0, 0.0], [0.0, 0.0]]))
    out = aggregate(normalize(enumerate_p1(g, TIMELESS)), base)
    # c1 gets 0.75 x ([4,0]+[0,0]+[0,4]); c2 gets the 0.25 share
    np.testing.assert_allclose(out[g.account_id("c1")], [3.0, 3.0])
    np.testing.assert_allclose(out[g.account_id("c2")], [1.0, 1.0])


def test_aggregate_is_linear_in_base_features():
    g = random_graph(11, max_edges=80)
    supers = enumerate_p2(g, TIMELESS)
    if len(supers) == 0:
        pytest.skip("graph lacks P2 instances")
    rng = np.random.default_rng(0)
    x = rng.normal(size=(g.n_nodes, 4))
    y = rng.normal(size=(g.n_nodes, 4))
    fm = lambda arr: FeatureMatrix(list(g.accounts), arr)
    norm = normalize(supers)
    both = aggregate(norm, fm(2.0 * x + y))
    np.testing.assert_allclose(
        both, 2.0 * aggregate(norm, fm(x)) + aggregate(norm, fm(y)),
        atol=1e-12)


def test_aggregate_missing_base_row_is_an_error():
    rows = [
        ("A", "C", "call", 1, 1.0),
        ("C", "B", "trans", 2, 1.0),
    ]
    g = ingest_edges(rows, types={"A": "EOA", "B": "EOA", "C": "CA"})
    base = FeatureMatrix(["A", "C"], np.zeros((2, 2)))
    with pytest.raises(ConfigError, match="'B'"):
        aggregate(normalize(enumerate_p1(g, TIMELESS)), base)


def _toy_setup():
    rows = [
        ("A", "C", "call", 1, 1.0),
        ("C", "D", "call", 2, 1.0),
        ("D", "B", "trans", 3, 1.0),
        ("C", "B", "trans", 4, 1.0),
    ]
    g = ingest_edges(rows, types={"A": "EOA", "B": "EOA", "C": "CA", "D": "CA"})
    base = feature_matrix(g, list(g.accounts))
    supers = {P1: enumerate_p1(g), P2: enumerate_p2(g)}
    return g, base, supers


def test_combine_modes_and_dimensions():
    g, base, supers = _toy_setup()
    aug, retained = build_augmented(supers, base, TopKConfig(100.0))
    assert set(retained) == {P1, P2}
    dim = base.values.shape[1]

    rep = combine(base, aug, "replace", "P2")
    assert rep.values.shape == (g.n_nodes, dim)
    np.testing.assert_array_equal(rep.values, aug.part(P2))

    add = combine(base, aug, "sum", "P1")
    np.testing.assert_allclose(add.values, base.values + aug.part(P1))

    cat = combine(base, aug, "concat", "P1+P2")
    assert cat.values.shape == (g.n_nodes, 3 * dim)
    np.testing.assert_array_equal(cat.values[:, :dim], base.values)
    np.testing.assert_array_equal(cat.values[:, dim:2 * dim], aug.part(P1))
    np.testing.assert_array_equal(cat.values[:, 2 * dim:], aug.part(P2))

    cat1 = combine(base, aug, "concat", "P1")
    assert cat1.values.shape == (g.n_nodes, 2 * dim)

    both = combine(base, aug, "replace", "P1+P2")
    np.testing.assert_allclose(both.values, aug.part(P1) + aug.part(P2))


def test_combine_rejects_bad_mode_and_pattern():
    g, base, supers = _toy_setup()
    aug, _ = build_augmented(supers, base, TopKConfig(100.0))
    with pytest.raises(ConfigError):
        combine(base, aug, "average", "P1")
    with pytest.raises(ConfigError):
        combine(base, aug, "sum", "P3")
    only_p1, _ = build_augmented({P1: supers[P1]}, base, TopKConfig(100.0))
    with pytest.raises(ConfigError):
        only_p1.part(P2)


def test_build_augmented_filtering_toggle():
    g = _omega_graph([9, 5, 5, 1])
    base = feature_matrix(g, list(g.accounts))
    supers = {P1: enumerate_pattern(g, P1, TIMELESS)}
    _, ret_on = build_augmented(supers, base, TopKConfig(50.0),
                                use_filtering=True)
    _, ret_off = build_augmented(supers, base, TopKConfig(50.0),
                                 use_filtering=False)
    assert len(ret_on[P1]) == 2
    assert len(ret_off[P1]) == 4
    with pytest.raises(ConfigError):
        build_augmented({}, base, TopKConfig(10.0))


def test_refinement_toggle_agrees_at_full_retention():
    for seed in range(6):
        g = random_graph(seed)
        base = feature_matrix(g, list(g.accounts))
        for pattern in (P1, P2):
            supers = {pattern: enumerate_pattern(g, pattern, TIMELESS)}
            if len(supers[pattern]) == 0:
                continue
            a1, _ = build_augmented(supers, base, TopKConfig(100.0),
                                    use_refinement=True)
            a2, _ = build_augmented(supers, base, TopKConfig(100.0),
                                    use_refinement=False)
            np.testing.assert_allclose(a1.part(pattern), a2.part(pattern))
