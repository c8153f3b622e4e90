import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modfl.core import (Dataset, DimensionError, InstanceParseError, check_feasible, default_split, dominates,
                        evaluate_objectives, instance_to_dict, pareto_filter, read_dataset, read_instance,
                        write_dataset, write_instance)
from modfl.benchmarks import BipartiteConfig, gen_bipartite
from modfl.benchmarks.common import matching_constraints

from conftest import make_instance


def brute_front(points):
    keep = []
    for i, p in enumerate(points):
        if not any(np.all(q <= p) and np.any(q < p) for j, q in enumerate(points) if j != i):
            keep.append(p)
    return np.unique(np.array(keep), axis=0)


def test_dominates_cases():
    assert dominates([1, 2], [2, 3])
    assert not dominates([1, 2], [1, 2])
    assert not dominates([1, 3], [2, 1])
    assert dominates([2, 3], [1, 2], "max")


def test_dominates_shape_mismatch():
    with pytest.raises(DimensionError):
        dominates([1, 2], [1, 2, 3])


def test_pareto_filter_small():
    front = pareto_filter([[1, 2], [2, 1], [2, 2]])
    assert sorted(map(tuple, front.points)) == [(1, 2), (2, 1)]
    assert pareto_filter([[0, 0]]).points.tolist() == [[0, 0]]


def test_pareto_filter_matches_pairwise_oracle(rng):
    pts = rng.random((50, 2))
    got = np.unique(pareto_filter(pts).points, axis=0)
    assert np.array_equal(got, brute_front(pts))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=25))
def test_pareto_filter_property(points):
    pts = np.array(points, dtype=float)
    got = np.unique(pareto_filter(pts).points, axis=0)
    assert np.array_equal(got, brute_front(pts))


def test_evaluate_objectives():
    inst = make_instance([[1, 0], [0, 1]])
    assert evaluate_objectives(inst, [1, 1]).tolist() == [1, 1]
    assert evaluate_objectives(inst, [0, 0]).tolist() == [0, 0]


def test_evaluate_objectives_oracle(rng):
    C = rng.normal(size=(3, 5))
    pi = rng.random(5)
    inst = make_instance(C)
    expected = [sum(C[j, k] * pi[k] for k in range(5)) for j in range(3)]
    assert np.allclose(evaluate_objectives(inst, pi), expected, atol=1e-12)


def test_check_feasible_matching():
    A, b = matching_constraints(2, 2)
    inst = make_instance(np.ones((2, 4)), A, b)
    assert check_feasible(inst, [1, 0, 0, 1])
    assert check_feasible(inst, [0.5, 0.5, 0.5, 0.5])  # rows tight
    assert not check_feasible(inst, [2, 0, 0, 0])
    assert not check_feasible(inst, [1, 1, 0, 0])


def test_round_trip_small(tmp_path):
    inst = make_instance([[1.5, -2.0], [0.25, 3.0]], orientation="max")
    write_instance(inst, tmp_path / "i.json")
    back = read_instance(tmp_path / "i.json")
    assert instance_to_dict(back) == instance_to_dict(inst)


def test_missing_costs_is_parse_error(tmp_path):
    doc = instance_to_dict(make_instance([[1.0, 2.0]]))
    del doc["costs"]
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    with pytest.raises(InstanceParseError):
        read_instance(tmp_path / "bad.json")


def test_round_trip_generated(tmp_path):
    inst = gen_bipartite(BipartiteConfig(nodes=20, instances=1, seed=3)).instances[0]
    assert inst.n_vars == 100
    write_instance(inst, tmp_path / "g.json")
    back = read_instance(tmp_path / "g.json")
    for name in ("features", "costs", "b", "bounds", "pareto_set", "pareto_front"):
        assert np.max(np.abs(getattr(back, name) - getattr(inst, name))) < 1e-12
    assert abs(back.A - inst.A).max() < 1e-12


def test_dataset_round_trip_and_split(tmp_path):
    ds = gen_bipartite(BipartiteConfig(nodes=8, instances=5, seed=1))
    write_dataset(ds, tmp_path / "d")
    back = read_dataset(tmp_path / "d")
    assert back.split == ds.split and len(back) == 5
    with pytest.raises(ValueError):
        Dataset(ds.instances, {"train": [0, 1], "test": [1, 2, 3, 4]})


def test_default_split_covers_everything():
    for n in range(1, 30):
        split = default_split(n)
        assert sorted(sum(split.values(), [])) == list(range(n))
