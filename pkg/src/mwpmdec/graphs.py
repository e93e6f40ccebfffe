"""Weighted decoding graphs for rotated surface codes.

A decoding graph has one vertex per stabilizer measurement outcome and one
edge per independent error source.  Ordinary vertices carry a parity
constraint; virtual vertices sit on the open boundaries and may be matched
any number of times.  Edge weights are even non-negative integers so that
every dual quantity in the solver stays integral.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

ORDINARY = 0
VIRTUAL = 1

INF = float("inf")


class GraphError(ValueError):
    """Invalid code parameters, malformed graph input, or unreachable query."""


@dataclass(frozen=True)
class CodeSpec:
    """Parameters of a rotated surface code memory over several rounds."""

    d: int
    rounds: int
    p: float
    weight_resolution: int = 1000

    def validate(self) -> None:
        if self.d < 3 or self.d % 2 == 0:
            raise GraphError(f"code distance must be odd and >= 3, got {self.d}")
        if self.rounds < 0:
            raise GraphError(f"rounds must be >= 0, got {self.rounds}")
        if not (0.0 < self.p <= 0.5):
            raise GraphError(f"error probability must be in (0, 0.5], got {self.p}")
        if self.weight_resolution <= 0 or self.weight_resolution % 2 != 0:
            raise GraphError(
                f"weight resolution must be a positive even integer, got {self.weight_resolution}"
            )

    @property
    def num_rounds_total(self) -> int:
        # rounds of vertices, one more than the number of noisy measurement rounds
        return self.rounds + 1


@dataclass(frozen=True)
class ErrorPattern:
    edges: frozenset

    def __iter__(self):
        return iter(sorted(self.edges))


@dataclass(frozen=True)
class Syndrome:
    defects: tuple

    def __len__(self) -> int:
        return len(self.defects)

    def __iter__(self):
        return iter(self.defects)


class ModelGraph:
    """Immutable sparse decoding graph.

    Vertices are indexed 0..n-1; edges 0..m-1.  Storage is flat numpy arrays
    plus a CSR adjacency so the graph stays cheap even at millions of edges.
    Instances are safe to share between any number of solver instances.
    """

    __slots__ = (
        "is_virtual",
        "edge_u",
        "edge_v",
        "edge_w",
        "edge_p",
        "adj_indptr",
        "adj_edges",
        "num_vertices",
        "num_edges",
        "round_size",
        "num_rounds",
        "ordinary_per_round",
    )

    def __init__(self, kinds, edges, round_size: int = 0, num_rounds: int = 1,
                 ordinary_per_round: int = 0):
        n = len(kinds)
        self.num_vertices = n
        self.is_virtual = np.asarray(kinds, dtype=np.uint8) == VIRTUAL
        m = len(edges)
        self.num_edges = m
        self.edge_u = np.empty(m, dtype=np.int64)
        self.edge_v = np.empty(m, dtype=np.int64)
        self.edge_w = np.empty(m, dtype=np.int64)
        self.edge_p = np.empty(m, dtype=np.float64)
        for i, (u, v, w, p) in enumerate(edges):
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise GraphError(f"edge {i} has invalid endpoints ({u}, {v})")
            if w < 0 or w % 2 != 0:
                raise GraphError(f"edge {i} weight must be an even integer >= 0, got {w}")
            self.edge_u[i] = u
            self.edge_v[i] = v
            self.edge_w[i] = w
            self.edge_p[i] = p
        counts = np.zeros(n + 1, dtype=np.int64)
        np.add.at(counts, self.edge_u + 1, 1)
        np.add.at(counts, self.edge_v + 1, 1)
        self.adj_indptr = np.cumsum(counts)
        self.adj_edges = np.empty(2 * m, dtype=np.int64)
        cursor = self.adj_indptr[:-1].copy()
        for i in range(m):
            for end in (self.edge_u[i], self.edge_v[i]):
                self.adj_edges[cursor[end]] = i
                cursor[end] += 1
        # layout metadata, used by the fusion engine for time-slicing
        self.round_size = round_size
        self.num_rounds = num_rounds
        self.ordinary_per_round = ordinary_per_round

    def incident_edges(self, v: int):
        return self.adj_edges[self.adj_indptr[v]:self.adj_indptr[v + 1]]

    def other_end(self, e: int, v: int) -> int:
        u = self.edge_u[e]
        return int(self.edge_v[e]) if u == v else int(u)

    def round_of(self, v: int) -> int:
        if self.round_size == 0:
            return 0
        return v // self.round_size

    def round_vertices(self, r: int) -> range:
        return range(r * self.round_size, (r + 1) * self.round_size)

    def ordinary_count(self) -> int:
        return int(np.count_nonzero(~self.is_virtual))

    def virtual_count(self) -> int:
        return int(np.count_nonzero(self.is_virtual))


def compute_weight(p_e: float, resolution: int) -> int:
    """Edge weight from an error probability: resolution * ln((1-p)/p), rounded
    to the nearest even integer (ties round away from zero)."""
    if not (0.0 < p_e <= 0.5):
        raise GraphError(f"edge probability must be in (0, 0.5], got {p_e}")
    if resolution <= 0 or resolution % 2 != 0:
        raise GraphError(f"resolution must be a positive even integer, got {resolution}")
    x = resolution * math.log((1.0 - p_e) / p_e)
    return 2 * int(math.floor(x / 2.0 + 0.5))


def _z_check_positions(d: int):
    """Plaquette coordinates (a, b) of the Z stabilizers of a distance-d
    rotated surface code; (a, b) stands for the plaquette spanning data rows
    a..a+1 and columns b..b+1, Z-colored when a+b is even."""
    interior = [(a, b) for a in range(d - 1) for b in range(d - 1) if (a + b) % 2 == 0]
    top = [(-1, b) for b in range(d - 1) if b % 2 == 1]
    bottom = [(d - 1, b) for b in range(d - 1) if b % 2 == 0]
    return sorted(interior + top + bottom)


def _z_virtual_positions(d: int):
    # Z-colored half-plaquettes on the left/right open boundaries
    left = [(a, -1) for a in range(-1, d) if a % 2 == 1]
    right = [(a, d - 1) for a in range(-1, d) if a % 2 == 0]
    return sorted(left + right)


def build_surface_code_graph(spec: CodeSpec) -> ModelGraph:
    """Build the 3D Z-basis decoding graph for ``spec``.

    Per round there are (d^2-1)/2 ordinary vertices (Z stabilizers) and d+1
    virtual vertices (open Z boundaries); each data qubit contributes a
    space-like edge, and consecutive rounds are joined by time-like edges on
    each stabilizer.  All edges are weighted uniformly from spec.p.
    """
    spec.validate()
    d = spec.d
    rounds_total = spec.num_rounds_total
    checks = _z_check_positions(d)
    virtuals = _z_virtual_positions(d)
    n_ord = len(checks)
    assert n_ord == (d * d - 1) // 2
    assert len(virtuals) == d + 1
    round_size = n_ord + len(virtuals)

    local_index = {pos: i for i, pos in enumerate(checks)}
    for i, pos in enumerate(virtuals):
        local_index[pos] = n_ord + i
    check_set = set(checks)
    virtual_set = set(virtuals)

    def vid(r: int, pos) -> int:
        return r * round_size + local_index[pos]

    w = compute_weight(spec.p, spec.weight_resolution)
    kinds = []
    for _ in range(rounds_total):
        kinds.extend([ORDINARY] * n_ord)
        kinds.extend([VIRTUAL] * len(virtuals))

    # space edges: one per data qubit, joining its two Z-colored plaquettes
    space_pairs = []
    for r_dq in range(d):
        for c_dq in range(d):
            if (r_dq + c_dq) % 2 == 0:
                pa, pb = (r_dq - 1, c_dq - 1), (r_dq, c_dq)
            else:
                pa, pb = (r_dq - 1, c_dq), (r_dq, c_dq - 1)
            for pos in (pa, pb):
                if pos not in check_set and pos not in virtual_set:
                    raise GraphError(f"internal layout error at plaquette {pos}")
            space_pairs.append((pa, pb))

    edges = []
    for r in range(rounds_total):
        for pa, pb in space_pairs:
            edges.append((vid(r, pa), vid(r, pb), w, spec.p))
        if r + 1 < rounds_total:
            for pos in checks:
                edges.append((vid(r, pos), vid(r + 1, pos), w, spec.p))

    return ModelGraph(kinds, edges, round_size=round_size, num_rounds=rounds_total,
                      ordinary_per_round=n_ord)


def sample_error(g: ModelGraph, seed: int) -> ErrorPattern:
    """Sample each edge independently with its own probability.

    Driven by numpy's PCG64 generator, so the same seed always produces the
    same pattern on the same graph.
    """
    rng = np.random.default_rng(seed)
    u = rng.random(g.num_edges)
    hit = np.nonzero(u < g.edge_p)[0]
    return ErrorPattern(frozenset(int(e) for e in hit))


def syndrome_of(g: ModelGraph, err: ErrorPattern) -> Syndrome:
    """Defect set of an error pattern: ordinary vertices incident to an odd
    number of error edges."""
    parity = np.zeros(g.num_vertices, dtype=np.int64)
    for e in err.edges:
        parity[g.edge_u[e]] ^= 1
        parity[g.edge_v[e]] ^= 1
    defect = np.nonzero(parity & ~g.is_virtual)[0]
    return Syndrome(tuple(int(v) for v in defect))


def shortest_paths_from(g: ModelGraph, src: int):
    """Dijkstra distances from src to every vertex (INF when unreachable)."""
    dist = [INF] * g.num_vertices
    dist[src] = 0
    heap = [(0, src)]
    while heap:
        dv, v = heapq.heappop(heap)
        if dv != dist[v]:
            continue
        for e in g.incident_edges(v):
            u = g.other_end(int(e), v)
            du = dv + int(g.edge_w[e])
            if du < dist[u]:
                dist[u] = du
                heapq.heappush(heap, (du, u))
    return dist


def dist(g: ModelGraph, u: int, v: int) -> int:
    """Weight of a minimum-weight path between two vertices."""
    if not (0 <= u < g.num_vertices and 0 <= v < g.num_vertices):
        raise GraphError(f"vertex out of range: ({u}, {v})")
    if u == v:
        return 0
    dist_u = [None] * g.num_vertices
    dist_u[u] = 0
    heap = [(0, u)]
    while heap:
        dv, x = heapq.heappop(heap)
        if dv != dist_u[x]:
            continue
        if x == v:
            return dv
        for e in g.incident_edges(x):
            y = g.other_end(int(e), x)
            dy = dv + int(g.edge_w[e])
            if dist_u[y] is None or dy < dist_u[y]:
                dist_u[y] = dy
                heapq.heappush(heap, (dy, y))
    raise GraphError(f"vertices {u} and {v} are not connected")


def shortest_path_edges(g: ModelGraph, s: int, t: int):
    """(edge ids, weight) of one minimum-weight path from s to t, with
    deterministic tie-breaking."""
    if s == t:
        return (), 0
    dist_s = [None] * g.num_vertices
    via = [-1] * g.num_vertices
    dist_s[s] = 0
    heap = [(0, s)]
    while heap:
        dv, x = heapq.heappop(heap)
        if dv != dist_s[x]:
            continue
        if x == t:
            break
        for e in g.incident_edges(x):
            y = g.other_end(int(e), x)
            dy = dv + int(g.edge_w[e])
            if dist_s[y] is None or dy < dist_s[y]:
                dist_s[y] = dy
                via[y] = int(e)
                heapq.heappush(heap, (dy, y))
    if dist_s[t] is None:
        raise GraphError(f"vertices {s} and {t} are not connected")
    edges = []
    x = t
    while x != s:
        e = via[x]
        edges.append(e)
        x = g.other_end(e, x)
    edges.reverse()
    return tuple(edges), dist_s[t]


def shortest_path_to_virtual(g: ModelGraph, s: int, is_virtual=None):
    """(edge ids, weight, virtual vertex) of a minimum-weight path from s to
    the nearest virtual vertex."""
    pred = is_virtual if is_virtual is not None else (lambda v: bool(g.is_virtual[v]))
    dist_s = [None] * g.num_vertices
    via = [-1] * g.num_vertices
    dist_s[s] = 0
    heap = [(0, s)]
    target = -1
    while heap:
        dv, x = heapq.heappop(heap)
        if dv != dist_s[x]:
            continue
        if pred(x):
            target = x
            break
        for e in g.incident_edges(x):
            y = g.other_end(int(e), x)
            dy = dv + int(g.edge_w[e])
            if dist_s[y] is None or dy < dist_s[y]:
                dist_s[y] = dy
                via[y] = int(e)
                heapq.heappush(heap, (dy, y))
    if target == -1:
        raise GraphError(f"no virtual vertex reachable from {s}")
    edges = []
    x = target
    while x != s:
        e = via[x]
        edges.append(e)
        x = g.other_end(e, x)
    edges.reverse()
    return tuple(edges), dist_s[target], target


def nearest_virtual(g: ModelGraph, src: int):
    """(virtual vertex, distance) closest to src, or None if no virtual is
    reachable.  Ties break toward the lowest vertex index."""
    dist_v = shortest_paths_from(g, src)
    best = None
    for v in range(g.num_vertices):
        if g.is_virtual[v] and dist_v[v] is not INF:
            if best is None or dist_v[v] < dist_v[best]:
                best = v
    if best is None:
        return None
    return best, int(dist_v[best])


# --- serialization ---------------------------------------------------------

def graph_to_json(g: ModelGraph) -> str:
    obj = {
        "vertices": [
            {"kind": "virtual" if g.is_virtual[i] else "ordinary"}
            for i in range(g.num_vertices)
        ],
        "edges": [
            {
                "u": int(g.edge_u[i]),
                "v": int(g.edge_v[i]),
                "weight": int(g.edge_w[i]),
                "p": float(g.edge_p[i]),
            }
            for i in range(g.num_edges)
        ],
        "layout": {
            "round_size": g.round_size,
            "num_rounds": g.num_rounds,
            "ordinary_per_round": g.ordinary_per_round,
        },
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def graph_from_json(text: str) -> ModelGraph:
    obj = json.loads(text)
    try:
        kinds = [VIRTUAL if v["kind"] == "virtual" else ORDINARY for v in obj["vertices"]]
        edges = [(e["u"], e["v"], e["weight"], e.get("p", 0.0)) for e in obj["edges"]]
        layout = obj.get("layout", {})
    except (KeyError, TypeError) as exc:
        raise GraphError(f"graph JSON does not match the schema: {exc}") from exc
    return ModelGraph(
        kinds,
        edges,
        round_size=layout.get("round_size", 0),
        num_rounds=layout.get("num_rounds", 1),
        ordinary_per_round=layout.get("ordinary_per_round", 0),
    )


def syndrome_to_json(s: Syndrome) -> str:
    return json.dumps(sorted(s.defects), separators=(",", ":"))


def syndrome_from_json(text: str) -> Syndrome:
    data = json.loads(text)
    if not isinstance(data, list) or not all(isinstance(x, int) for x in data):
        raise GraphError("syndrome JSON must be an array of vertex indices")
    return Syndrome(tuple(sorted(data)))
