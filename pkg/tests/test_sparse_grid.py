import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfcolloc.errors import DimMismatch, NodeCountOverflow
from mfcolloc.sparse_grid import (
    cc_rule,
    gauss_hermite_tensor,
    interpolate,
    lagrange_cardinals,
    min_pairwise_distance,
    moments,
    rule_size,
    smolyak_plan,
    smolyak_size,
    truncated_normal_moment,
    write_plan_csv,
)


def test_cc_rules():
    np.testing.assert_array_equal(cc_rule(1).points, [0.0])
    np.testing.assert_array_equal(cc_rule(2).points, [1.0, 0.0, -1.0])
    assert set(cc_rule(2).points) <= set(cc_rule(3).points)
    for lev in range(2, 9):
        p = cc_rule(lev).points
        assert p.shape[0] == rule_size(lev) == 2 ** (lev - 1) + 1
        np.testing.assert_array_equal(p, -p[::-1])
        assert set(p) <= set(cc_rule(lev + 1).points)
        np.testing.assert_allclose(p, np.cos(np.arange(p.shape[0]) * np.pi / (p.shape[0] - 1)), atol=1e-15)


def test_node_count_convention():
    assert smolyak_plan(3, 8).size == 6017
    assert [smolyak_size(3, q) for q in (6, 7, 8, 9)] == [1073, 2561, 6017, 13953]


def test_one_dimensional_collapse():
    p = smolyak_plan(1, 4)
    assert sorted(p.nodes[:, 0]) == sorted(4.0 * cc_rule(5).points)
    assert p.comb == {(5,): 1}


@pytest.mark.parametrize("d,q", [(2, 3), (3, 4), (3, 8)])
def test_weights_and_symmetry(d, q):
    p = smolyak_plan(d, q)
    assert abs(p.weights.sum() - 1) <= 1e-10
    for k in range(d):
        assert abs(p.weights @ p.nodes[:, k]) <= 1e-12
        assert abs(p.weights @ p.nodes[:, k] ** 3) <= 1e-12


def test_combination_identity():
    for d, q in [(2, 5), (3, 5), (4, 3)]:
        p = smolyak_plan(d, q)
        assert sum(p.comb.values()) == 1


def test_nesting():
    small, big = smolyak_plan(3, 4), smolyak_plan(3, 5)
    assert {tuple(x) for x in small.nodes} <= {tuple(x) for x in big.nodes}


def test_visit_order():
    p = smolyak_plan(3, 5)
    keys = [(lev, tuple(x)) for lev, x in zip(p.node_levels, p.nodes)]
    assert keys == sorted(keys)
    np.testing.assert_array_equal(p.nodes[0], [0, 0, 0])


def test_overflow_guard():
    with pytest.raises(NodeCountOverflow):
        smolyak_plan(3, 8, max_nodes=5000)


def test_interpolation_properties(rng):
    p = smolyak_plan(3, 4)
    vals = rng.standard_normal(p.size)
    for i in rng.choice(p.size, 20, replace=False):
        assert abs(interpolate(p, vals, p.nodes[i]) - vals[i]) <= 1e-12
    assert interpolate(p, np.full(p.size, 2.5), [0.3, -1.7, 3.1]) == pytest.approx(2.5, abs=1e-12)
    with pytest.raises(DimMismatch):
        interpolate(p, vals, [0.0, 0.0])


def test_polynomial_exactness(rng):
    p = smolyak_plan(2, 3)
    f = lambda x: x[..., 0] ** 2 + x[..., 0] * x[..., 1]
    vals = f(p.nodes)
    for z in rng.uniform(-4, 4, (10, 2)):
        assert interpolate(p, vals, z) == pytest.approx(f(z), abs=1e-11)


def _difference_form(plan, f, z):
    """Direct sum of tensor difference operators over |i| <= q + d."""
    from itertools import product

    from mfcolloc.sparse_grid import _bary_weights, _cc_points

    d, q, L = plan.dim, plan.level, plan.bound

    def interp1(lev, k):
        if lev == 0:
            return None
        pts = L * _cc_points(lev)
        return pts, lagrange_cardinals(pts, _bary_weights(lev), z[k])[0]

    total = 0.0
    for idx in product(range(1, q + 2), repeat=d):
        if sum(idx) > q + d:
            continue
        for mask in product((0, 1), repeat=d):
            levels = [i - m for i, m in zip(idx, mask)]
            if any(lev == 0 for lev in levels):
                continue
            sign = (-1) ** sum(mask)
            parts = [interp1(lev, k) for k, lev in enumerate(levels)]
            grids = np.meshgrid(*[pp[0] for pp in parts], indexing="ij")
            vals = f(np.stack(grids, axis=-1))
            for pp in parts:
                vals = np.tensordot(pp[1], vals, axes=(0, 0))
            total += sign * vals
    return total


@pytest.mark.parametrize("d,q", [(2, 4), (3, 3)])
def test_difference_form_equivalence(d, q, rng):
    p = smolyak_plan(d, q)
    f = lambda x: np.exp(0.2 * x[..., 0] - 0.1 * np.sum(x, axis=-1)) * np.cos(0.3 * x[..., -1])
    vals = f(p.nodes)
    for z in rng.uniform(-4, 4, (4, d)):
        assert interpolate(p, vals, z) == pytest.approx(_difference_form(p, f, z), abs=1e-12)


def test_vector_valued_interpolation(rng):
    p = smolyak_plan(2, 3)
    vals = rng.standard_normal((p.size, 5))
    z = np.array([0.7, -2.2])
    out = interpolate(p, vals, z)
    assert out.shape == (5,)
    for j in range(5):
        assert out[j] == pytest.approx(interpolate(p, vals[:, j], z), abs=1e-13)


def test_moment_examples():
    p = smolyak_plan(3, 8)
    assert moments(p, np.full(p.size, 1.5), 3) == pytest.approx(1.5**3, rel=1e-12)
    x1 = p.nodes[:, 0]
    assert abs(moments(p, x1, 1)) <= 1e-12
    m2, m4 = truncated_normal_moment(2, 4.0), truncated_normal_moment(4, 4.0)
    assert abs(moments(p, x1, 2) - m2) <= 1e-10
    assert abs(moments(p, x1**2, 2) - m4) <= 1e-10
    # the truncation bias itself is small but visible
    assert 0 < 1 - m2 < 2e-3 and 0 < 3 - m4 < 0.03


def test_gauss_hermite_cross_check():
    nodes, w = gauss_hermite_tensor(3, 6)
    assert w.sum() == pytest.approx(1.0)
    assert w @ nodes[:, 1] ** 2 == pytest.approx(1.0)
    assert w @ nodes[:, 2] ** 4 == pytest.approx(3.0)
    p = smolyak_plan(3, 6)
    f = lambda x: np.cos(0.3 * x[..., 0]) * (1 + 0.1 * x[..., 1] ** 2)
    assert abs(moments(p, f(p.nodes), 1) - w @ f(nodes)) < 1e-3


def test_min_distance_and_csv(tmp_path):
    p = smolyak_plan(2, 3)
    dmin = min_pairwise_distance(p)
    diffs = np.abs(p.nodes[:, None, :] - p.nodes[None, :, :]).max(axis=-1)
    np.fill_diagonal(diffs, np.inf)
    assert dmin == diffs.min()
    path = tmp_path / "plan.csv"
    write_plan_csv(p, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["node_index", "xi_1", "xi_2", "weight"]
    assert len(rows) == p.size + 1
    assert float(rows[3][1]) == p.nodes[2, 0]
