import warnings

import numpy as np
import pytest

from modfl.benchmarks import BipartiteConfig, gen_bipartite
from modfl.core import Dataset, default_split
from modfl.predictor import Layer, PredictorParams, init_params
from modfl.scalarize import weight_grid
from modfl.solvers.multi import dedup_solutions, weighted_solutions
from modfl.trainer import (SolutionCache, TrainConfig, modfl_instance_loss, seed_cache, train_modfl,
                           train_twostage, twostage_instance_loss)

from conftest import make_instance, matching_instance

SMALL = dict(trunk_sizes=(8,), head_sizes=(8,))


@pytest.fixture(scope="module")
def dataset():
    return gen_bipartite(BipartiteConfig(nodes=12, instances=5, seed=2))


def oracle_params(t):
    heads = [[Layer(np.eye(t)[:, [j]], np.zeros(1))] for j in range(t)]
    return PredictorParams(t, [], heads, "identity", ["identity"] * t)


def test_cache_dedup_count():
    inst = matching_instance([[3, 1, 1, 3], [1, 3, 3, 1]])
    grid = weight_grid(2, 5)
    sols = weighted_solutions(inst.canonical_costs, inst.A, inst.b, inst.bounds, grid, center=False)
    cache = SolutionCache()
    for pi in sols:
        cache.add(inst, pi)
    assert len(sols) == 6
    assert cache.size(inst.id) == len(dedup_solutions(sols))


def test_cache_fifo_and_feasibility():
    inst = make_instance(np.ones((2, 2)), bounds=[(0, 10), (0, 10)])
    cache = SolutionCache(capacity=3)
    for k in range(5):
        cache.add(inst, [k, 0])
    assert cache.get(inst.id)[:, 0].tolist() == [2, 3, 4]
    assert not cache.add(inst, [4, 0])
    with pytest.raises(ValueError):
        cache.add(inst, [11, 0])


def test_single_solution_instance_flagged():
    inst = matching_instance([[1, 2, 3, 4], [1, 2, 3, 4]])
    with pytest.warns(RuntimeWarning):
        cache = seed_cache([inst])
    assert inst.id in cache.flagged


def test_oracle_start(dataset):
    for inst in dataset.instances:
        inst.features = inst.costs.T.copy()
    cfg = TrainConfig(max_epochs=10, patience=2)
    params = oracle_params(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cache = seed_cache(dataset)
        for inst in dataset.instances:
            values, _ = modfl_instance_loss(params, inst, cache, cfg, grad=False)
            assert values["landscape"] <= 1e-6
        res = train_modfl(dataset, cfg, params)
    assert len(res.log) - 1 <= cfg.patience + 1
    assert res.best_epoch == 0


def test_no_solver_calls_when_gate_is_off(dataset):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = train_modfl(dataset, TrainConfig(p_solve=0.0, max_epochs=2, **SMALL))
    assert res.solver_calls == 0 and res.dslp_calls > 0


def test_modfl_is_deterministic(dataset):
    cfg = TrainConfig(max_epochs=2, seed=4, **SMALL)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a, b = train_modfl(dataset, cfg), train_modfl(dataset, cfg)
    strip = lambda log: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in log]
    assert strip(a.log) == strip(b.log)
    assert a.params.equals(b.params)


def test_ablation_label(dataset):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = train_modfl(dataset, TrainConfig(max_epochs=1, ablate=("pareto_set",), **SMALL))
    assert res.log[-1]["setting"] == "w/o Pareto Set Loss"
    assert res.log[-1]["train_losses"]["ps"] == 0.0


def _regression_dataset(n_inst=6, n=10, seed=0):
    r = np.random.default_rng(seed)
    W = r.normal(size=(3, 2))
    insts = []
    for k in range(n_inst):
        X = r.normal(size=(n, 3))
        insts.append(make_instance((X @ W).T, features=X, iid=k))
    return Dataset(insts, default_split(n_inst))


def test_twostage_mse_decreases():
    ds = _regression_dataset()
    res = train_twostage(ds, TrainConfig(lr=0.05, max_epochs=5, patience=10, **SMALL))
    totals = [r["train_losses"]["total"] for r in res.log[1:]]
    assert all(b < a for a, b in zip(totals, totals[1:]))
    assert res.dslp_calls == 0 and res.solver_calls == 0


def test_twostage_deterministic():
    ds = _regression_dataset()
    cfg = TrainConfig(max_epochs=3, seed=1, **SMALL)
    assert train_twostage(ds, cfg).params.equals(train_twostage(ds, cfg).params)


def test_twostage_loss_is_mean_over_objectives():
    ds = _regression_dataset(1)
    inst = ds.instances[0]
    p = init_params(3, 2, (4,), (4,), seed=0)
    v, _ = twostage_instance_loss(p, inst, grad=False)
    from modfl.predictor import predict
    yhat = predict(p, inst.features)
    per = [np.mean((yhat[j] - inst.costs[j]) ** 2) for j in range(2)]
    assert abs(v - np.mean(per)) <= 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(gamma=0)
    with pytest.raises(ValueError):
        TrainConfig(p_solve=1.5)
    with pytest.raises(ValueError):
        TrainConfig(ablate=("bogus",))
