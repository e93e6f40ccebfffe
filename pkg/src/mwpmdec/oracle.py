"""Exact reference matcher.

Builds the complete graph over defects (edge weights are decoding-graph
shortest-path weights, plus a per-defect distance to the nearest virtual
vertex) and solves minimum-weight perfect matching by dynamic programming
over defect subsets.  Deliberately a different algorithm family from the
production solver, so agreement between the two is evidence rather than
tautology.  Exponential in the defect count; guarded by a hard cap.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graphs import INF, GraphError, ModelGraph, Syndrome, shortest_paths_from

DEFAULT_DEFECT_CAP = 20


@dataclass
class SyndromeGraph:
    defects: list
    pairwise: list          # weight matrix, pairwise[i][j] = Dist(defects[i], defects[j])
    to_boundary: list       # per-defect min distance to any virtual vertex
    boundary_vertex: list   # the virtual vertex realizing to_boundary


def build_syndrome_graph(g: ModelGraph, s: Syndrome,
                         cap: int = DEFAULT_DEFECT_CAP) -> SyndromeGraph:
    defects = sorted(s.defects)
    n = len(defects)
    if n > cap:
        raise GraphError(
            f"{n} defects exceed the oracle cap of {cap}; "
            "shrink the instance (lower p, d, or rounds)"
        )
    pairwise = [[0] * n for _ in range(n)]
    to_boundary = [0] * n
    boundary_vertex = [-1] * n
    for i, src in enumerate(defects):
        dist = shortest_paths_from(g, src)
        for j, dst in enumerate(defects):
            if dist[dst] is INF:
                raise GraphError(f"defects {src} and {dst} are not connected")
            pairwise[i][j] = int(dist[dst])
        best = None
        for v in range(g.num_vertices):
            if g.is_virtual[v] and dist[v] is not INF:
                if best is None or dist[v] < dist[best]:
                    best = v
        if best is None:
            to_boundary[i] = -1
        else:
            to_boundary[i] = int(dist[best])
            boundary_vertex[i] = best
    return SyndromeGraph(defects, pairwise, to_boundary, boundary_vertex)


def exact_mwpm(sg: SyndromeGraph):
    """Minimum matching weight and one optimal matching.

    Returns (weight, pairs, boundary) where pairs is a list of defect-index
    pairs (into sg.defects) and boundary lists defect indices matched to the
    virtual boundary.  O(2^n * n) over the defect count n.
    """
    n = len(sg.defects)
    if n == 0:
        return 0, [], []
    full = (1 << n) - 1
    memo = {0: 0}
    choice = {}

    def solve(mask: int) -> int:
        cached = memo.get(mask)
        if cached is not None:
            return cached
        i = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << i)
        best = INF
        best_choice = None
        if sg.to_boundary[i] >= 0:
            cost = sg.to_boundary[i] + solve(rest)
            if cost < best:
                best = cost
                best_choice = -1
        j_mask = rest
        while j_mask:
            j = (j_mask & -j_mask).bit_length() - 1
            j_mask &= j_mask - 1
            cost = sg.pairwise[i][j] + solve(rest ^ (1 << j))
            if cost < best:
                best = cost
                best_choice = j
        if best_choice is None:
            raise GraphError("no perfect matching exists (odd defects, no boundary)")
        memo[mask] = best
        choice[mask] = best_choice
        return best

    weight = solve(full)
    pairs = []
    boundary = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        j = choice[mask]
        if j == -1:
            boundary.append(i)
            mask ^= 1 << i
        else:
            pairs.append((i, j))
            mask ^= (1 << i) | (1 << j)
    return int(weight), pairs, boundary


def oracle_weight(g: ModelGraph, s: Syndrome, cap: int = DEFAULT_DEFECT_CAP) -> int:
    """Exact MWPM weight of a syndrome, straight from the DP."""
    weight, _, _ = exact_mwpm(build_syndrome_graph(g, s, cap=cap))
    return weight
