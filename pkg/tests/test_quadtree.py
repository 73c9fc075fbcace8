import random

import numpy as np
import pytest

from gossipmap.grid import GridKey
from gossipmap.quadtree import QuadTree


def leaf_occupancies(tree):
    return [len(n.table) for n in tree._leaf_nodes()]


def leaf_shape(tree):
    return sorted((n.level, n.cx, n.cy, tuple(sorted(n.table)))
                  for n in tree._leaf_nodes())


class TestInsertOrMerge:
    def test_first_insert(self):
        t = QuadTree(0.1)
        t.insert_or_merge(GridKey(3, -2), 1.0, 0.3)
        e = t.get(GridKey(3, -2))
        assert (e.m, e.zeta) == (1.0, 0.3)
        assert len(t) == 1
        assert t.leaf_count() == 1

    def test_weighted_merge(self):
        # one unit observation then a 1/5-weighted one: the running average
        # folds as (1*0.3 + 0.02) / 1.2
        t = QuadTree(0.1)
        t.insert_or_merge(GridKey(0, 0), 1.0, 0.3)
        t.insert_or_merge(GridKey(0, 0), 0.2, 0.1 * 0.2)
        e = t.get(GridKey(0, 0))
        assert e.m == pytest.approx(1.2, abs=1e-15)
        assert e.zeta == pytest.approx(0.32 / 1.2, abs=1e-12)

    def test_split_on_capacity(self):
        t = QuadTree(0.1, max_leaf_size=4)
        for i in range(5):
            t.insert_or_merge(GridKey(i, 0), 1.0, 0.1)
        assert max(leaf_occupancies(t)) <= 4
        assert len(t) == 5

    def test_nonpositive_delta_rejected(self):
        t = QuadTree(0.1)
        with pytest.raises(ValueError):
            t.insert_or_merge(GridKey(0, 0), 0.0, 0.0)


class TestCapacityInvariant:
    def test_exhaustive_after_every_insert(self):
        rng = np.random.RandomState(0)
        t = QuadTree(0.1, max_leaf_size=5)
        for step in range(300):
            k = GridKey(int(rng.randint(-40, 40)), int(rng.randint(-40, 40)))
            t.insert_or_merge(k, 1.0, 0.05)
            assert max(leaf_occupancies(t)) <= 5, f"violated after insert {step}"

    def test_paper_default_capacity(self):
        rng = np.random.RandomState(1)
        t = QuadTree(0.1)        # max_leaf_size 50
        for _ in range(600):
            k = GridKey(int(rng.randint(-30, 30)), int(rng.randint(-30, 30)))
            t.insert_or_merge(k, 1.0, 0.02)
        assert max(leaf_occupancies(t)) <= 50


class TestConservation:
    def test_empty(self):
        assert QuadTree(0.1).global_stats_sum() == (0.0, 0.0, 0)

    def test_unit_inserts(self):
        t = QuadTree(0.1)
        for i in range(7):
            t.insert_or_merge(GridKey(i, i), 1.0, 0.1)
        total_m, total_wv, count = t.global_stats_sum()
        assert total_m == 7.0
        assert count == 7

    def test_unchanged_by_split_cascade(self):
        t = QuadTree(0.1, max_leaf_size=3)
        rng = np.random.RandomState(2)
        keys = [GridKey(int(a), int(b)) for a, b in rng.randint(0, 8, (30, 2))]
        before = None
        for i, k in enumerate(keys):
            t.insert_or_merge(k, 1.0, float(rng.uniform(-0.5, 0.5)))
            total_m, total_wv, count = t.global_stats_sum()
            if before is not None and count == before[2]:
                pass  # merge, totals grow
            before = (total_m, total_wv, count)
        # force further splits by crowding one quadrant, totals preserved
        pre = t.global_stats_sum()
        crowd = [GridKey(x, y) for x in range(4) for y in range(4)
                 if GridKey(x, y) not in {k for k in keys}]
        added = 0.0
        for k in crowd:
            t.insert_or_merge(k, 1.0, 0.0)
            added += 1.0
        post = t.global_stats_sum()
        assert post[0] == pytest.approx(pre[0] + added, abs=1e-12)


class TestOrderIndependence:
    def test_merge_order_for_totals(self):
        deltas = [(GridKey(0, 0), 1.0, 0.3), (GridKey(0, 0), 0.5, -0.1),
                  (GridKey(0, 0), 0.25, 0.05), (GridKey(1, 1), 1.0, 0.2),
                  (GridKey(0, 0), 2.0, 0.8)]
        results = []
        for seed in range(12):
            order = deltas[:]
            random.Random(seed).shuffle(order)
            t = QuadTree(0.1)
            for k, dm, dwv in order:
                t.insert_or_merge(k, dm, dwv)
            e = t.get(GridKey(0, 0))
            results.append((e.m, e.zeta))
        m0, z0 = results[0]
        for m, z in results[1:]:
            assert m == pytest.approx(m0, abs=1e-12)
            assert z == pytest.approx(z0, abs=1e-9)

    def test_structure_is_function_of_key_set(self):
        rng = np.random.RandomState(3)
        keys = list({GridKey(int(a), int(b))
                     for a, b in rng.randint(-60, 60, (150, 2))})
        ref = None
        for seed in range(10):
            order = keys[:]
            random.Random(seed).shuffle(order)
            t = QuadTree(0.1, max_leaf_size=7)
            for k in order:
                t.insert_or_merge(k, 1.0, 0.05)
            shape = leaf_shape(t)
            if ref is None:
                ref = shape
            assert shape == ref


class TestKeyUniqueness:
    def test_no_key_in_two_leaves(self):
        t = QuadTree(0.1, max_leaf_size=3)
        rng = np.random.RandomState(4)
        for a, b in rng.randint(-20, 20, (120, 2)):
            t.insert_or_merge(GridKey(int(a), int(b)), 1.0, 0.1)
        seen = set()
        for node in t._leaf_nodes():
            for key in node.table:
                assert key not in seen
                seen.add(key)
        assert len(seen) == len(t)


class TestQueryLeaf:
    def test_outside_root_empty(self):
        t = QuadTree(0.1)
        t.insert_or_merge(GridKey(0, 0), 1.0, 0.1)
        assert t.query_leaf((1000.0, 1000.0)) == []

    def test_leaf_contents(self):
        t = QuadTree(0.1, max_leaf_size=10)
        for k in (GridKey(0, 0), GridKey(1, 0), GridKey(0, 1)):
            t.insert_or_merge(k, 1.0, 0.1)
        got = t.query_leaf((0.0, 0.0))
        assert [s.key for s in got] == [GridKey(0, 0), GridKey(0, 1), GridKey(1, 0)]

    def test_halo_pulls_near_neighbors(self):
        t = QuadTree(0.1, max_leaf_size=2)
        for k in (GridKey(0, 0), GridKey(1, 0), GridKey(5, 5), GridKey(6, 5),
                  GridKey(6, 6)):
            t.insert_or_merge(k, 1.0, 0.1)
        plain = t.query_leaf((0.52, 0.52))
        withhalo = t.query_leaf((0.52, 0.52), halo_radius=0.75)
        assert len(withhalo) > len(plain)
        for s in withhalo:
            if s not in plain:
                dx = s.location[0] - 0.52
                dy = s.location[1] - 0.52
                assert dx * dx + dy * dy <= 0.75 ** 2 + 1e-12

    def test_stored_location_inside_leaf_bounds(self):
        t = QuadTree(0.1, max_leaf_size=3)
        rng = np.random.RandomState(5)
        for a, b in rng.randint(-30, 30, (80, 2)):
            t.insert_or_merge(GridKey(int(a), int(b)), 1.0, 0.1)
        for node in t._leaf_nodes():
            xmin, ymin, xmax, ymax = node.world_bounds(t.grid_spacing)
            for s in node.table.values():
                assert xmin <= s.location[0] < xmax
                assert ymin <= s.location[1] < ymax


class TestGrowth:
    def test_root_grows_toward_far_keys(self):
        t = QuadTree(0.1, max_leaf_size=2)
        t.insert_or_merge(GridKey(0, 0), 1.0, 0.1)
        t.insert_or_merge(GridKey(900, -450), 1.0, 0.1)
        t.insert_or_merge(GridKey(-3000, 7), 1.0, 0.1)
        assert len(t) == 3
        for key in (GridKey(0, 0), GridKey(900, -450), GridKey(-3000, 7)):
            assert t.get(key) is not None


class TestSerialization:
    def test_records_roundtrip(self):
        t = QuadTree(0.1, max_leaf_size=4)
        rng = np.random.RandomState(6)
        for a, b in rng.randint(-15, 15, (40, 2)):
            t.insert_or_merge(GridKey(int(a), int(b)), 1.0,
                              float(rng.uniform(-0.05, 0.05)))
        records = t.to_records()
        clone = QuadTree.from_records(records, 0.1, 4)
        assert clone.to_records() == records
        assert leaf_shape(clone) == leaf_shape(t)
