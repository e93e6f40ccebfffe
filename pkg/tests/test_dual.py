"""Cover growth, obstacle detection, blossom ownership, islands, reset."""

import pytest

from mwpmdec.dual_parity import DualParity
from mwpmdec.framework import (
    Conflict,
    ContractError,
    MatchingContext,
    TouchVirtual,
)
from mwpmdec.graphs import CodeSpec, ModelGraph, Syndrome, build_surface_code_graph, dist, sample_error, syndrome_of
from mwpmdec.primal_standard import StandardPrimal
from mwpmdec.solver import Solver
from conftest import path_graph, random_sparse_graph, random_syndrome


def fresh(graph, syndrome, check=True):
    dual = DualParity(graph, check_invariants=check)
    dual.load(Syndrome(tuple(syndrome)))
    return dual


class TestLoad:
    def test_empty(self):
        dual = fresh(path_graph([4, 4]), ())
        assert dual.arena.parentless_ids() == []

    def test_each_defect_owns_its_vertex(self):
        g = path_graph([4, 4, 4], virtual_ends=(False, False))
        dual = fresh(g, (0, 2))
        owners = {v: nid for nid, v in dual.covered_vertices()}
        assert set(owners) == {0, 2}
        for e in range(g.num_edges):
            assert dual.edge_growth(e) == (0, 0)

    def test_duplicate_defect_rejected(self):
        dual = DualParity(path_graph([4, 4]))
        dual.add_defect(0)
        with pytest.raises(ContractError):
            dual.add_defect(0)

    def test_load_after_reset_matches_fresh(self):
        g = path_graph([4, 6, 2])
        a = DualParity(g)
        a.load(Syndrome((0, 1)))
        a.grow_until_obstacles({0: +1, 1: +1})
        a.reset()
        a.load(Syndrome((0, 1)))
        b = DualParity(g)
        b.load(Syndrome((0, 1)))
        assert a.dump()["vertices"] == b.dump()["vertices"]
        assert a.dump()["edges"] == b.dump()["edges"]


class TestGrow:
    def test_single_defect_reaches_boundary(self):
        # boundary at distance 10: one TouchVirtual after growing exactly 10
        g = path_graph([4, 6], virtual_ends=(False, True))
        dual = fresh(g, (0,))
        delta, obstacles = dual.grow_until_obstacles({0: +1})
        assert delta == 10
        assert obstacles == [TouchVirtual(node=0, virtual_vertex=2, touch=0, path=(0, 1))]

    def test_two_defects_meet_in_middle(self):
        g = ModelGraph([0, 0], [(0, 1, 6, 0.0)])
        dual = fresh(g, (0, 1))
        delta, obstacles = dual.grow_until_obstacles({0: +1, 1: +1})
        assert delta == 3
        (ob,) = obstacles
        assert isinstance(ob, Conflict)
        assert (ob.touch1, ob.touch2) == (0, 1) and ob.edge == 0
        gu, gv = dual.edge_growth(0)
        assert gu == gv == 3

    def test_unequal_radii_conflict(self):
        # one side frozen after matching: growth claims the remaining slack
        g = path_graph([4, 8, 4], virtual_ends=(True, False))
        dual = fresh(g, (1, 3))
        delta, obstacles = dual.grow_until_obstacles({0: +1, 1: +1})
        assert delta == 4
        assert any(isinstance(ob, TouchVirtual) for ob in obstacles)
        # freeze the boundary-matched node, keep growing the other
        delta, obstacles = dual.grow_until_obstacles({0: 0, 1: +1})
        assert delta == 4
        (ob,) = obstacles
        assert isinstance(ob, Conflict) and {ob.touch1, ob.touch2} == {1, 3}

    def test_capacity_never_exceeded(self, rng):
        for trial in range(50):
            g = random_sparse_graph(rng, 8, 1, 6)
            s = random_syndrome(rng, g, 6)
            solver = Solver(g, check_invariants=True)
            solver.decode(s)  # asserts per-edge capacity after every grow

    def test_at_most_one_conflict_per_edge(self):
        g = ModelGraph([0, 0], [(0, 1, 4, 0.0)])
        dual = fresh(g, (0, 1))
        _, obstacles = dual.grow_until_obstacles({0: +1, 1: +1})
        edges = [ob.edge for ob in obstacles if isinstance(ob, Conflict)]
        assert len(edges) == len(set(edges)) == 1

    def test_direction_for_unknown_node_rejected(self):
        dual = fresh(path_graph([4]), (0,))
        with pytest.raises(ContractError):
            dual.grow_until_obstacles({7: +1})

    def test_growth_claims_intermediate_vertices(self):
        g = path_graph([2, 2, 2, 4], virtual_ends=(False, True))
        dual = fresh(g, (0,))
        dual.grow_until_obstacles({0: +1})
        owners = {v for _, v in dual.covered_vertices()}
        assert owners == {0, 1, 2, 3}


class TestBlossomOwnership:
    def build_triangle(self):
        # triangle a(0) b(1) c(2) with tails; equal weights
        kinds = [0, 0, 0, 0, 1]
        edges = [(0, 1, 4, 0.0), (1, 2, 4, 0.0), (0, 2, 4, 0.0),
                 (2, 3, 8, 0.0), (3, 4, 8, 0.0)]
        return ModelGraph(kinds, edges)

    def run_until_blossom(self):
        g = self.build_triangle()
        dual = DualParity(g, check_invariants=True)
        dual.load(Syndrome((0, 1, 2)))
        primal = StandardPrimal(dual)
        ctx = MatchingContext(g, dual, primal)
        primal.load()
        blossom = None
        for _ in range(10):
            directions = primal.directions()
            _, obstacles = dual.grow_until_obstacles(directions)
            primal.resolve(obstacles)
            for node in dual.arena.nodes.values():
                if node.children is not None and node.alive and node.parent is None:
                    blossom = node
            if blossom:
                break
        assert blossom is not None
        return g, dual, primal, blossom

    def test_blossom_owns_union_of_child_covers(self):
        g, dual, primal, blossom = self.run_until_blossom()
        for nid, v in dual.covered_vertices():
            if v in (0, 1, 2):
                assert nid == blossom.id

    def test_even_child_count_rejected(self):
        g, dual, primal, blossom = self.run_until_blossom()
        with pytest.raises(ContractError):
            dual.arena.new_blossom([0, 1])

    def test_expand_restores_child_ownership(self):
        g, dual, primal, blossom = self.run_until_blossom()
        before = dict(dual.covered_vertices())
        blossom.y = 0
        dual.on_blossom_expanded(blossom)
        owners = {v: nid for nid, v in dual.covered_vertices()}
        for v in (0, 1, 2):
            assert owners[v] == dual.arena.leaf_of_defect[v]
        dual.on_blossom_created(blossom)
        assert dict(dual.covered_vertices()) == before

    def test_expand_with_positive_dual_rejected(self):
        g, dual, primal, blossom = self.run_until_blossom()
        blossom.y = 2
        with pytest.raises(ContractError):
            dual.on_blossom_expanded(blossom)

    def test_blossom_grows_as_one_cover(self):
        g, dual, primal, blossom = self.run_until_blossom()
        # after growth, the blossom's cover radius from each defect equals the
        # ancestry sum of that defect
        directions = primal.directions()
        assert directions.get(blossom.id) == +1
        dual.grow_until_obstacles(directions)
        for v in (0, 1, 2):
            radius = dual.arena.radius_of_defect(v)
            assert radius == dual.arena[dual.arena.leaf_of_defect[v]].y + blossom.y


class TestIslands:
    def test_zero_edges_absorbed_eagerly(self):
        # island of three zero-joined vertices behind a weighted edge
        kinds = [0, 0, 0, 0, 1]
        edges = [(0, 1, 4, 0.0), (1, 2, 0, 0.0), (2, 3, 0, 0.0), (3, 4, 6, 0.0)]
        g = ModelGraph(kinds, edges)
        dual = fresh(g, (0,))
        delta, obstacles = dual.grow_until_obstacles({0: +1})
        owners = {v for _, v in dual.covered_vertices()}
        assert owners == {0, 1, 2, 3}
        assert delta == 4 + 6  # island crossed at zero cost, then the last edge
        assert obstacles and isinstance(obstacles[0], TouchVirtual)

    def test_island_conflict_between_two_covers(self):
        kinds = [0, 0, 0, 0]
        edges = [(0, 1, 4, 0.0), (1, 2, 0, 0.0), (2, 3, 4, 0.0)]
        g = ModelGraph(kinds, edges)
        dual = fresh(g, (0, 3))
        delta, obstacles = dual.grow_until_obstacles({0: +1, 1: +1})
        assert delta == 4
        assert any(isinstance(ob, Conflict) for ob in obstacles)
        # no same-island split without a reported conflict
        owners = {v: nid for nid, v in dual.covered_vertices()}
        if owners.get(1) is not None and owners.get(2) is not None:
            if owners[1] != owners[2]:
                assert any(isinstance(ob, Conflict) for ob in obstacles)

    def test_zero_edge_to_virtual_touches(self):
        g = ModelGraph([0, 0, 1], [(0, 1, 4, 0.0), (1, 2, 0, 0.0)])
        dual = fresh(g, (0,))
        delta, obstacles = dual.grow_until_obstacles({0: +1})
        assert delta == 4
        assert any(isinstance(ob, TouchVirtual) and ob.virtual_vertex == 2
                   for ob in obstacles)


class TestReset:
    def test_decode_reset_decode_identical(self):
        g = build_surface_code_graph(CodeSpec(d=5, rounds=2, p=0.05, weight_resolution=100))
        s = syndrome_of(g, sample_error(g, seed=11))
        solver = Solver(g)
        first = solver.decode(s)
        second = solver.decode(s)
        assert first.to_obj() == second.to_obj()

    def test_timestamp_is_arbitrary_precision(self):
        g = path_graph([4, 4])
        solver = Solver(g)
        solver.dual.stamp = 2 ** 32 - 1
        a = solver.decode(Syndrome((0, 1)))
        b = solver.decode(Syndrome((0, 1)))
        c = solver.decode(Syndrome((0, 1)))
        assert solver.dual.stamp > 2 ** 32
        assert a.to_obj() == b.to_obj() == c.to_obj()

    def test_reset_does_not_scale_with_graph(self):
        import time

        small = Solver(build_surface_code_graph(CodeSpec(d=3, rounds=80, p=0.01)))
        big = Solver(build_surface_code_graph(CodeSpec(d=13, rounds=1000, p=0.01)))

        def cost(solver, reps=5000):
            t0 = time.perf_counter()
            for _ in range(reps):
                solver.dual.reset()
            return (time.perf_counter() - t0) / reps

        cost(small)  # warm
        ratio = cost(big) / cost(small)
        assert ratio < 5.0


class TestObstacleSoundness:
    def test_tight_edge_equivalence_on_random_instances(self, rng):
        # check_invariants recomputes dist(touch1, touch2) and the ancestry sum
        # for every reported conflict
        for _ in range(40):
            g = random_sparse_graph(rng, 10, 2, 8)
            s = random_syndrome(rng, g, 8)
            Solver(g, check_invariants=True).decode(s)

    def test_no_missed_obstacle_at_termination(self, rng):
        # brute-force dual feasibility on the implied syndrome graph
        for _ in range(30):
            g = random_sparse_graph(rng, 9, 1, 7)
            s = random_syndrome(rng, g, 6)
            solver = Solver(g)
            solver.decode(s)
            arena = solver.dual.arena
            defects = sorted(s.defects)
            for i, u in enumerate(defects):
                for v in defects[i + 1:]:
                    assert arena.pair_dual_sum(u, v) <= dist(g, u, v)
