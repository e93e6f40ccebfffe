"""Solve-loop contracts: duality, correction parity, determinism."""

import random

from hypothesis import given, settings
from hypothesis import strategies as st

import mwpmdec as M
from mwpmdec.framework import correction_from_paths, verify_correction
from mwpmdec.graphs import ModelGraph, Syndrome
from mwpmdec.oracle import build_syndrome_graph, exact_mwpm
from mwpmdec.solver import Solver
from conftest import path_graph, random_sparse_graph, random_syndrome


def test_empty_syndrome():
    g = path_graph([4, 4])
    res = M.decode(g, Syndrome(()))
    assert res.primal_weight == 0 == res.dual_objective
    assert res.matching.pairs == [] and res.matching.boundary == []
    assert res.correction == []


def test_isolated_pair_matches_directly():
    # two defects joined by a weight-4 edge, boundary much further away
    g = ModelGraph([1, 0, 0, 1],
                   [(0, 1, 40, 0.0), (1, 2, 4, 0.0), (2, 3, 40, 0.0)])
    res = M.decode(g, Syndrome((1, 2)))
    assert res.primal_weight == 4
    assert res.matching.pairs == [(1, 2, 4)]
    assert res.correction == [1]


def test_correction_is_single_lightest_edge():
    # parallel routes: the direct edge is lightest
    g = ModelGraph([0, 0, 0], [(0, 1, 2, 0.0), (0, 2, 2, 0.0), (1, 2, 6, 0.0)])
    res = M.decode(g, Syndrome((1, 2)))
    assert res.primal_weight == 4
    assert res.correction == [0, 1]


def test_dual_objective_starts_at_zero_and_grows_additively():
    g = ModelGraph([0, 0, 1, 1],
                   [(0, 2, 10, 0.0), (1, 3, 10, 0.0), (0, 1, 30, 0.0)])
    from mwpmdec.dual_parity import DualParity

    dual = DualParity(g)
    dual.load(Syndrome((0, 1)))
    assert dual.arena.dual_objective() == 0
    delta, _ = dual.grow_until_obstacles({0: +1, 1: +1})
    assert dual.arena.dual_objective() == 2 * delta


def test_correction_reproduces_syndrome_on_random_instances(rng):
    for _ in range(150):
        g = random_sparse_graph(rng, 10, 2, 8)
        s = random_syndrome(rng, g, 8)
        res = M.decode(g, s)
        assert verify_correction(g, s, res.correction)


def test_symmetric_difference_of_overlapping_paths():
    assert correction_from_paths([(1, 2, 3), (3, 4)]) == [1, 2, 4]


def test_matching_to_correction_standalone(rng):
    from mwpmdec.framework import PerfectMatching, matching_to_correction

    assert matching_to_correction(path_graph([2, 4]), PerfectMatching([], [])) == []
    for _ in range(40):
        g = random_sparse_graph(rng, 10, 2, 8)
        s = random_syndrome(rng, g, 8)
        res = M.decode(g, s)
        rebuilt = matching_to_correction(g, res.matching)
        assert verify_correction(g, s, rebuilt)


def test_deterministic_results():
    g = M.build_surface_code_graph(M.CodeSpec(d=5, rounds=3, p=0.04, weight_resolution=100))
    s = M.syndrome_of(g, M.sample_error(g, seed=5))
    a = Solver(g).decode(s)
    b = Solver(g).decode(s)
    assert a.to_obj() == b.to_obj()


def test_termination_certificate_equals_oracle(rng):
    for _ in range(60):
        g = random_sparse_graph(rng, 9, 1, 8)
        s = random_syndrome(rng, g, 8)
        res = M.decode(g, s)
        weight, _, _ = exact_mwpm(build_syndrome_graph(g, s))
        assert res.primal_weight == weight == res.dual_objective


@given(st.data())
@settings(max_examples=120, deadline=None)
def test_decode_matches_oracle_property(data):
    seed = data.draw(st.integers(min_value=0, max_value=2 ** 30))
    rng = random.Random(seed)
    n = rng.randint(2, 9)
    g = random_sparse_graph(rng, n, rng.randint(1, 2), rng.randint(0, 6))
    s = random_syndrome(rng, g, min(n, 8))
    res = M.decode(g, s, check_invariants=True)
    weight, _, _ = exact_mwpm(build_syndrome_graph(g, s))
    assert res.primal_weight == weight == res.dual_objective
    assert verify_correction(g, s, res.correction)
