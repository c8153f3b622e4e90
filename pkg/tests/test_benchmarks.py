import itertools
import os

import numpy as np
import pytest

from modfl.benchmarks import (AdAllocConfig, BipartiteConfig, QuadraticExample, exposure_constraints, gen_ad_alloc,
                              gen_bipartite, grid_membership, load_cora, overlap_ratio, perturb_labels,
                              quadratic_pareto_set)
from modfl.benchmarks.cora import cut_size, max_cut_bisection
from modfl.core import check_feasible
from modfl.solvers import solve_multiobjective

from conftest import make_instance


def test_ad_hand_case():
    cfg = AdAllocConfig(nd=2, nc=2, delta=(1.0,), thr=0.5)
    A, b = exposure_constraints(cfg)
    expected = np.array([[1, 1, 0, 0], [0, 0, 1, 1], [1, 1, 1, 1], [-1, -1, -1, -1]], float)
    assert np.array_equal(A.toarray(), expected)
    assert b.tolist() == [1, 1, 3, -1]  # floor(2 * 1.5), ceil(2 * 0.5)
    ds = gen_ad_alloc(cfg, count=2)
    for inst in ds.instances:
        assert check_feasible(inst, inst.pareto_set[0])


def test_identical_objectives_single_front_point():
    cfg = AdAllocConfig(nd=4, nc=3, delta=(0.5, 0.5), thr=0.25)
    inst = gen_ad_alloc(cfg, count=1).instances[0]
    same = inst.with_costs(np.vstack([inst.costs[0], inst.costs[0]]))
    _, pf = solve_multiobjective(same)
    assert len(pf) == 1


def test_ad_default_config_instances():
    count = 300 if os.environ.get("MODFL_FULL_BENCHMARKS") else 3
    ds = gen_ad_alloc(AdAllocConfig(), count=count)
    for inst in ds.instances:
        assert inst.n_vars == 100 * 53
        inst.check_invariants()
        assert all(check_feasible(inst, pi) for pi in inst.pareto_set)


def test_infeasible_exposure_rejected():
    with pytest.raises(ValueError):
        AdAllocConfig(nd=10, nc=4, delta=(0.9, 0.9), thr=0.05).validate()


def test_bipartite_perturbation_extremes():
    y1 = gen_bipartite(BipartiteConfig(nodes=10, instances=1, rho=0.0)).instances[0].costs
    assert np.array_equal(y1[0], y1[1])
    y = gen_bipartite(BipartiteConfig(nodes=10, instances=1, rho=1.0)).instances[0].costs
    assert np.array_equal(y[1], 1 - y[0])


def test_literal_mode_flip_rate():
    rng = np.random.default_rng(0)
    y1 = np.zeros(10_000)
    y2 = perturb_labels(y1, 0.05, rng, "literal")
    assert abs(y2.mean() - 0.95) <= 0.02


def test_bipartite_shapes_and_third_objective():
    ds = gen_bipartite(BipartiteConfig(nodes=8, instances=3, third_objective=True, seed=5))
    inst = ds.instances[0]
    assert inst.costs.shape == (3, 16) and inst.orientation == "max"
    assert inst.features.shape == (16, 16)


def test_bipartite_seeded():
    a = gen_bipartite(BipartiteConfig(nodes=8, instances=2, seed=3))
    b = gen_bipartite(BipartiteConfig(nodes=8, instances=2, seed=3))
    assert all(np.array_equal(x.costs, y.costs) for x, y in zip(a.instances, b.instances))


def _write_cora(tmp_path, n_nodes, edges, words=4):
    rng = np.random.default_rng(0)
    content = "\n".join(f"p{i}\t" + "\t".join(str(int(v)) for v in rng.random(words) < 0.5) + "\tlabel"
                        for i in range(n_nodes))
    (tmp_path / "c.content").write_text(content + "\n")
    (tmp_path / "c.cites").write_text("\n".join(f"p{a}\tp{b}" for a, b in edges) + "\n")
    return tmp_path / "c.content", tmp_path / "c.cites"


def test_bisection_beats_brute_force_on_four_nodes():
    adj = [{1}, {0, 2}, {1, 3}, {2}]
    left, right = max_cut_bisection(adj, [0, 1, 2, 3], np.random.default_rng(0))
    best = max(cut_size(adj, list(L), [v for v in range(4) if v not in L])
               for L in itertools.combinations(range(4), 2))
    assert cut_size(adj, left, right) >= best


def test_cora_drops_trailing_nodes(tmp_path):
    content, cites = _write_cora(tmp_path, 10, [(0, 1), (2, 3), (4, 5), (6, 7)])
    with pytest.warns(RuntimeWarning, match="2 trailing"):
        ds = load_cora(content, cites, instances=2, nodes_per=4)
    assert len(ds) == 2 and ds.meta["dropped_nodes"] == 2
    assert ds.instances[0].n_vars == 4


def test_quadratic_interval_and_overlap():
    ps = quadratic_pareto_set(QuadraticExample(1, 2, 4))
    assert (ps.lower, ps.upper) == (1.0, 2.0)
    single = quadratic_pareto_set(QuadraticExample(1, 2, 2))
    assert single.lower == single.upper == 1.0
    assert overlap_ratio(2.0, 4.0, 1.0, 1) == 0.5


def test_quadratic_grid_membership():
    ex = QuadraticExample(2.0, 1.0, 3.0)
    grid, mask = grid_membership(ex)
    ps = quadratic_pareto_set(ex)
    inside = (grid >= ps.lower - 1e-12) & (grid <= ps.upper + 1e-12)
    assert np.array_equal(mask, inside)
