import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import appa.engine as engine
from appa.engine import (
    FITNESS_MAX,
    FITNESS_MIN,
    AppaParams,
    InvalidObjectiveError,
    Plant,
    Population,
    SearchSpace,
    apply_abandonment,
    make_rng,
    normalize_fitness,
    run,
    runner_count,
    runner_offsets,
    spawn_runner,
    survive,
)

finite = st.floats(-1e12, 1e12, allow_nan=False)


def squash(z):
    # direct evaluation of the tanh map, independent of the vectorized path
    return 0.5 * (math.tanh(4 * z - 2) + 1)


# -- normalize_fitness ---------------------------------------------------------

def test_fitness_midpoint_is_half():
    assert normalize_fitness([0.0, 1.0, 2.0])[1] == pytest.approx(0.5, abs=1e-12)


def test_fitness_degenerate_population_is_half():
    np.testing.assert_allclose(normalize_fitness([3.0, 3.0, 3.0]), 0.5, atol=1e-12)


def test_fitness_extremes():
    n = normalize_fitness([10.0, -4.0, 7.0])
    assert n[1] == pytest.approx(squash(1.0), abs=1e-12)
    assert n[0] == pytest.approx(squash(0.0), abs=1e-12)
    assert squash(1.0) == pytest.approx(0.9820, abs=5e-5)
    assert squash(0.0) == pytest.approx(0.0180, abs=5e-5)
    assert FITNESS_MAX == squash(1.0) and FITNESS_MIN == squash(0.0)


def test_fitness_matches_pointwise_oracle():
    f = np.array([5.0, 1.0, 3.0, 2.5, 9.0])
    expected = [squash((f.max() - fi) / (f.max() - f.min())) for fi in f]
    np.testing.assert_allclose(normalize_fitness(f), expected, atol=1e-12)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_fitness_rejects_non_finite(bad):
    with pytest.raises(InvalidObjectiveError):
        normalize_fitness([1.0, bad])


def test_fitness_needs_two_values():
    with pytest.raises(ValueError):
        normalize_fitness([1.0])


@given(arrays(float, st.integers(2, 40), elements=finite))
def test_fitness_range_and_order(f):
    n = normalize_fitness(f)
    assert np.all(n >= FITNESS_MIN - 1e-15) and np.all(n <= FITNESS_MAX + 1e-15)
    order = np.argsort(f)
    assert np.all(np.diff(n[order]) <= 1e-15)
    if f.max() > f.min():
        i, k = int(np.argmin(f)), int(np.argmax(f))
        assert n[i] > n[k]


# -- runner_count / runner_offsets -------------------------------------------

@pytest.mark.parametrize(
    "fitness, r, n_max, expected",
    [(0.0, 0.3, 5, 1), (0.7, 0.0, 5, 1), (1.0, 1.0, 5, 5), (0.5, 0.61, 5, 2)],
)
def test_runner_count_examples(scripted, fitness, r, n_max, expected):
    assert runner_count(fitness, n_max, scripted([r])) == expected


def test_runner_count_vector(scripted):
    out = runner_count(np.array([1.0, 0.5]), 5, scripted([1.0, 0.61]))
    assert out.tolist() == [5, 2]


def test_runner_count_rejects_bad_fitness():
    with pytest.raises(ValueError):
        runner_count(1.5, 5, make_rng(0))


@given(st.floats(0, 1), st.integers(1, 500), st.integers(0, 2**32))
def test_runner_count_in_range(fitness, n_max, seed):
    assert 1 <= runner_count(fitness, n_max, make_rng(seed)) <= n_max


def test_runner_offsets_full_fitness_is_zero():
    np.testing.assert_array_equal(runner_offsets(1.0, 4, make_rng(3)), np.zeros(4))


def test_runner_offsets_examples(scripted):
    assert runner_offsets(0.0, 1, scripted([1.0]))[0] == pytest.approx(0.5)
    assert runner_offsets(0.5, 1, scripted([0.2]))[0] == pytest.approx(-0.15)


def test_runner_offsets_draws_per_coordinate(scripted):
    d = runner_offsets(0.0, 3, scripted([0.1, 0.5, 0.9]))
    np.testing.assert_allclose(d, [-0.4, 0.0, 0.4])


@given(st.floats(0, 1), st.integers(1, 10), st.integers(0, 2**32))
def test_runner_offsets_bounded(fitness, dims, seed):
    d = runner_offsets(fitness, dims, make_rng(seed))
    assert d.shape == (dims,)
    assert np.all(np.abs(d) <= 0.5)


# -- spawn_runner ----------------------------------------------------------------

@pytest.mark.parametrize(
    "y, lo, hi, d, expected",
    [([0.0], 0, 1, [0.3], [0.3]), ([440.0], 350, 450, [0.5], [450.0]), ([400.0], 350, 450, [0.0], [400.0])],
)
def test_spawn_runner_examples(y, lo, hi, d, expected):
    space = SearchSpace([lo], [hi])
    np.testing.assert_allclose(spawn_runner(np.array(y), d, space), expected)


def test_spawn_runner_accepts_plant():
    space = SearchSpace([0.0, 0.0], [2.0, 4.0])
    plant = Plant(position=np.array([1.0, 1.0]), objective=0.0)
    np.testing.assert_allclose(spawn_runner(plant, [0.25, -0.5], space), [1.5, 0.0])


@given(
    st.integers(1, 6).flatmap(
        lambda n: st.tuples(
            arrays(float, n, elements=st.floats(-1e3, 1e3)),
            arrays(float, n, elements=st.floats(1e-3, 1e3)),
            arrays(float, n, elements=st.floats(0, 1)),
            arrays(float, n, elements=st.floats(-0.5, 0.5)),
        )
    )
)
def test_spawn_runner_stays_in_box(case):
    lower, width, u, d = case
    space = SearchSpace(lower, lower + width)
    parent = space.lower + u * space.width
    x = spawn_runner(np.clip(parent, space.lower, space.upper), d, space)
    assert np.all(x >= space.lower) and np.all(x <= space.upper)


# -- SearchSpace -------------------------------------------------------------------

@pytest.mark.parametrize(
    "lower, upper",
    [([0.0, 1.0], [1.0]), ([1.0], [1.0]), ([2.0], [1.0]), ([0.0], [np.inf]), ([], [])],
)
def test_search_space_rejects_bad_bounds(lower, upper):
    with pytest.raises(ValueError):
        SearchSpace(lower, upper)


# -- survive -------------------------------------------------------------------------

def _plants(objs):
    return [Plant(position=np.array([float(i)]), objective=o) for i, o in enumerate(objs)]


def test_survive_sorts_and_truncates():
    kept = survive(_plants([5, 1, 3]), 2)
    assert [p.objective for p in kept] == [1, 3]


def test_survive_keeps_parents_when_runners_worse():
    pool = _plants([2, 1, 3, 9, 8, 7])
    kept = survive(pool, 3)
    assert [p.position[0] for p in kept] == [1.0, 0.0, 2.0]


def test_survive_tie_break_is_creation_order():
    kept = survive(_plants([1, 4, 4, 4, 0]), 3)
    assert [p.position[0] for p in kept] == [4.0, 0.0, 1.0]


def test_survive_population_view_large_pool_matches_stable_sort():
    rng = np.random.default_rng(5)
    f = rng.integers(0, 20, 500).astype(float)
    pop = Population(np.arange(500.0)[:, None], f, np.zeros(500, dtype=np.int64))
    kept = survive(pop, 30)
    np.testing.assert_array_equal(kept.positions[:, 0], np.argsort(f, kind="stable")[:30])


def test_survive_pool_too_small():
    with pytest.raises(RuntimeError):
        survive(_plants([1.0]), 2)


# -- apply_abandonment ---------------------------------------------------------------

def _stale_population(counters, objs):
    return [
        Plant(position=np.array([0.5, 0.5]), objective=o, stagnation=c)
        for c, o in zip(counters, objs)
    ]


def test_abandonment_noop_below_threshold():
    space = SearchSpace([0, 0], [1, 1])
    pop = _stale_population([0, 3, 9], [1.0, 2.0, 3.0])
    out = apply_abandonment(pop, 10, space, make_rng(0))
    for a, b in zip(pop, out):
        np.testing.assert_array_equal(a.position, b.position)
        assert a.objective == b.objective and a.stagnation == b.stagnation


def test_abandonment_replaces_only_stale_non_best():
    space = SearchSpace([0, 0], [1, 1])
    pop = _stale_population([0, 10, 2], [1.0, 2.0, 3.0])
    out = apply_abandonment(pop, 10, space, make_rng(0), objective=lambda x: float(x.sum()))
    np.testing.assert_array_equal(out[0].position, pop[0].position)
    np.testing.assert_array_equal(out[2].position, pop[2].position)
    assert out[2].stagnation == 2
    assert out[1].stagnation == 0
    assert not np.array_equal(out[1].position, pop[1].position)
    assert space.contains(out[1].position)
    assert out[1].objective == pytest.approx(out[1].position.sum())


def test_abandonment_spares_best():
    space = SearchSpace([0, 0], [1, 1])
    pop = _stale_population([50, 50], [0.0, 1.0])
    out = apply_abandonment(pop, 10, space, make_rng(0))
    np.testing.assert_array_equal(out[0].position, pop[0].position)
    assert out[0].stagnation == 50
    assert out[1].stagnation == 0


# -- run -----------------------------------------------------------------------------

def sphere(x):
    return float(np.sum(np.asarray(x) ** 2))


def test_run_sphere_2d():
    space = SearchSpace([-1, -1], [1, 1])
    best, trace = run(sphere, space, AppaParams(population_size=20, max_generations=100, max_runners=5, seed=1))
    assert best.objective <= 1e-3
    assert len(trace) == 100


def test_run_is_deterministic():
    space = SearchSpace([-2, 0, 5], [2, 1, 6])
    params = AppaParams(population_size=8, max_generations=15, max_runners=4, seed=42)
    b1, t1 = run(sphere, space, params)
    b2, t2 = run(sphere, space, params)
    assert b1.objective == b2.objective
    for g1, g2 in zip(t1.generations, t2.generations):
        assert g1.best_objective == g2.best_objective
        assert g1.mean_objective == g2.mean_objective
        np.testing.assert_array_equal(g1.best_position, g2.best_position)


def test_run_vectorized_matches_scalar():
    space = SearchSpace([-1, -1], [1, 1])
    params = AppaParams(population_size=6, max_generations=10, max_runners=3, seed=7)
    b1, t1 = run(sphere, space, params)
    b2, t2 = run(lambda X: np.sum(X**2, axis=1), space, params, vectorized=True)
    np.testing.assert_array_equal(t1.best_objectives, t2.best_objectives)


def test_run_trace_invariants():
    space = SearchSpace([-3] * 3, [3] * 3)
    f = lambda x: float(np.sum(np.abs(x)) + np.sin(5 * x[0]))
    best, trace = run(f, space, AppaParams(population_size=10, max_generations=40, seed=3))
    b = trace.best_objectives
    assert np.all(np.diff(b) <= 0)
    assert b.min() == best.objective
    assert space.contains(best.position)
    assert best.objective == pytest.approx(f(best.position))


def test_run_population_size_constant(monkeypatch):
    sizes = []
    original = engine.normalize_fitness

    def spy(objs):
        sizes.append(len(objs))
        return original(objs)

    monkeypatch.setattr(engine, "normalize_fitness", spy)
    run(sphere, SearchSpace([-1], [1]), AppaParams(population_size=7, max_generations=12, seed=0))
    assert sizes == [7] * 13


def test_run_positions_stay_in_box():
    space = SearchSpace([350.0, 200.0], [450.0, 300.0])
    seen = []

    def f(x):
        seen.append(x.copy())
        return float(-x.sum())

    run(f, space, AppaParams(population_size=6, max_generations=20, max_runners=5, seed=9))
    seen = np.array(seen)
    assert np.all(seen >= space.lower) and np.all(seen <= space.upper)


def test_run_aborts_on_non_finite_objective():
    def f(x):
        return float("nan") if x[0] > 0.5 else 0.0

    with pytest.raises(InvalidObjectiveError, match="position"):
        run(f, SearchSpace([0.0], [1.0]), AppaParams(population_size=50, max_generations=5, seed=0))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"population_size": 1},
        {"max_generations": 0},
        {"max_runners": 0},
        {"stagnation_threshold": 0},
        {"seed": -1},
        {"seed": 2**64},
        {"population_size": 3.0},
    ],
)
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        AppaParams(**kwargs)


def test_make_rng_is_pcg64_and_reproducible():
    a, b = make_rng(123), make_rng(123)
    assert isinstance(a.bit_generator, np.random.PCG64)
    np.testing.assert_array_equal(a.random(5), b.random(5))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(1, 4), st.integers(2, 6))
def test_run_determinism_property(seed, dims, pop):
    space = SearchSpace([-1.0] * dims, [1.0] * dims)
    params = AppaParams(population_size=pop, max_generations=4, max_runners=3, seed=seed)
    _, t1 = run(sphere, space, params)
    _, t2 = run(sphere, space, params)
    np.testing.assert_array_equal(t1.best_objectives, t2.best_objectives)
    np.testing.assert_array_equal(t1.mean_objectives, t2.mean_objectives)
