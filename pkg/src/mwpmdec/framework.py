"""Primal/dual matching framework.

The solver alternates between a dual module, which grows covers of nodes on
the decoding graph and reports obstacles, and a primal module, which resolves
obstacles by augmenting matchings, growing alternating trees, and forming or
expanding blossoms.  This module owns the node store shared by both sides,
the solve loop, and the conversion of a finished matching into a correction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graphs import ModelGraph, Syndrome


class ContractError(RuntimeError):
    """A primal/dual module violated the framework contract."""


class StallError(RuntimeError):
    """The solve loop stopped making progress; internal invariant broken."""


# --- obstacles --------------------------------------------------------------

@dataclass(frozen=True)
class Conflict:
    """A tight edge between two distinct nodes whose combined grow rate is
    positive.  touch1/touch2 are the defect vertices whose circles meet; path
    is a minimum-weight edge path from touch1 to touch2."""
    node1: int
    node2: int
    edge: int
    touch1: int
    touch2: int
    path: tuple = ()

    def sort_key(self):
        a, b = sorted((self.node1, self.node2))
        return (0, a, b, self.edge)


@dataclass(frozen=True)
class TouchVirtual:
    node: int
    virtual_vertex: int
    touch: int
    path: tuple = ()

    def sort_key(self):
        return (1, self.node, self.virtual_vertex, 0)


@dataclass(frozen=True)
class BlossomMustExpand:
    node: int

    def sort_key(self):
        return (2, self.node, 0, 0)


# --- dual nodes -------------------------------------------------------------

class Node:
    """A parentless blossom, a nested blossom, or a single-defect leaf.

    ``children`` is None for leaves.  Standard blossoms carry ``cycle``, the
    tight edges joining consecutive children in the odd cycle; cluster
    blossoms (union-find primal) carry ``links``, a forest of tight paths
    between their children instead.
    """

    __slots__ = ("id", "y", "vertex", "children", "cycle", "links", "parent", "match", "alive")

    def __init__(self, nid: int, vertex: int = -1):
        self.id = nid
        self.y = 0
        self.vertex = vertex          # defect vertex for leaves, -1 otherwise
        self.children = None          # list of child node ids
        self.cycle = None             # list of TightEdge between consecutive children
        self.links = None             # list of TightEdge forming a forest (cluster blossoms)
        self.parent = None            # enclosing blossom id
        self.match = None             # Match record, parentless nodes only
        self.alive = True

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def __repr__(self):  # pragma: no cover
        kind = "leaf" if self.is_leaf else ("blossom" if self.cycle else "cluster")
        return f"<Node {self.id} {kind} y={self.y}>"


@dataclass(frozen=True)
class TightEdge:
    """A tight syndrome-graph edge: two defect vertices joined by a recorded
    minimum-weight decoding-graph path."""
    touch1: int
    touch2: int
    weight: int
    path: tuple

    def reversed(self) -> "TightEdge":
        return TightEdge(self.touch2, self.touch1, self.weight, tuple(reversed(self.path)))


@dataclass(frozen=True)
class Match:
    """Match state of a parentless node: to another node or to a virtual
    vertex, through a tight edge."""
    kind: str                   # "node" | "virtual"
    other: int                  # node id or virtual vertex index
    edge: TightEdge             # oriented: touch1 inside this node


class NodeArena:
    """Store of all dual nodes of one solver instance."""

    def __init__(self):
        self.nodes = {}
        self.next_id = 0
        self.leaf_of_defect = {}

    def new_leaf(self, vertex: int) -> Node:
        if vertex in self.leaf_of_defect:
            raise ContractError(f"defect {vertex} loaded twice")
        node = Node(self._take_id(), vertex)
        self.nodes[node.id] = node
        self.leaf_of_defect[vertex] = node.id
        return node

    def new_blossom(self, children, cycle=None, links=None) -> Node:
        if len(children) % 2 == 0:
            raise ContractError(f"blossom needs an odd child count, got {len(children)}")
        node = Node(self._take_id())
        node.children = list(children)
        node.cycle = cycle
        node.links = links
        self.nodes[node.id] = node
        for c in children:
            child = self.nodes[c]
            if child.parent is not None or not child.alive:
                raise ContractError(f"blossom child {c} is not parentless")
            child.parent = node.id
            child.match = None
        return node

    def _take_id(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid

    def __getitem__(self, nid: int) -> Node:
        return self.nodes[nid]

    def is_parentless(self, nid: int) -> bool:
        node = self.nodes.get(nid)
        return node is not None and node.alive and node.parent is None

    def parentless_ids(self):
        return [nid for nid, node in self.nodes.items() if node.alive and node.parent is None]

    def root_of_defect(self, vertex: int) -> int:
        nid = self.leaf_of_defect[vertex]
        node = self.nodes[nid]
        while node.parent is not None:
            node = self.nodes[node.parent]
        return node.id

    def chain_of_defect(self, vertex: int):
        """Node ids from the defect's leaf up to its parentless root."""
        nid = self.leaf_of_defect.get(vertex)
        if nid is None:
            raise ContractError(f"vertex {vertex} is not a loaded defect")
        chain = [nid]
        node = self.nodes[nid]
        while node.parent is not None:
            chain.append(node.parent)
            node = self.nodes[node.parent]
        return chain

    def radius_of_defect(self, vertex: int) -> int:
        """Circle radius of a defect: sum of y over its ancestry."""
        return sum(self.nodes[nid].y for nid in self.chain_of_defect(vertex))

    def child_containing(self, blossom_id: int, vertex: int) -> int:
        """Direct child of a blossom whose progeny contains the defect."""
        chain = self.chain_of_defect(vertex)
        for i, nid in enumerate(chain):
            if nid == blossom_id:
                if i == 0:
                    raise ContractError(f"defect {vertex} is the blossom itself")
                return chain[i - 1]
        raise ContractError(f"defect {vertex} not inside blossom {blossom_id}")

    def defects_under(self, nid: int):
        """All defect vertices in a node's progeny, ascending."""
        out = []
        stack = [nid]
        while stack:
            node = self.nodes[stack.pop()]
            if node.is_leaf:
                out.append(node.vertex)
            else:
                stack.extend(node.children)
        return sorted(out)

    def dual_objective(self) -> int:
        return sum(node.y for node in self.nodes.values() if node.alive)

    def pair_dual_sum(self, t1: int, t2: int) -> int:
        """Sum of y over both exclusive ancestries of two defects: the dual
        value that a tight syndrome edge between them must equal."""
        c1 = self.chain_of_defect(t1)
        c2 = self.chain_of_defect(t2)
        common = set(c1) & set(c2)
        total = 0
        for nid in c1:
            if nid not in common:
                total += self.nodes[nid].y
        for nid in c2:
            if nid not in common:
                total += self.nodes[nid].y
        return total


# --- results ----------------------------------------------------------------

@dataclass
class PerfectMatching:
    pairs: list        # (defect, defect, weight)
    boundary: list     # (defect, virtual vertex, weight)

    def all_defects(self):
        for u, v, _ in self.pairs:
            yield u
            yield v
        for u, _, _ in self.boundary:
            yield u


@dataclass
class DecodeResult:
    matching: PerfectMatching
    correction: list            # sorted edge ids
    primal_weight: int
    dual_objective: int

    def to_obj(self) -> dict:
        return {
            "pairs": [[u, v, w] for u, v, w in self.matching.pairs],
            "boundary": [[u, b, w] for u, b, w in self.matching.boundary],
            "correction": list(self.correction),
            "primal_weight": self.primal_weight,
            "dual_objective": self.dual_objective,
        }

    @staticmethod
    def from_obj(obj: dict) -> "DecodeResult":
        matching = PerfectMatching(
            pairs=[tuple(x) for x in obj["pairs"]],
            boundary=[tuple(x) for x in obj["boundary"]],
        )
        return DecodeResult(matching, list(obj["correction"]),
                            obj["primal_weight"], obj["dual_objective"])


def correction_from_paths(paths) -> list:
    """Symmetric difference of edge paths."""
    seen = set()
    for path in paths:
        for e in path:
            if e in seen:
                seen.remove(e)
            else:
                seen.add(e)
    return sorted(seen)


def matching_to_correction(g: ModelGraph, m: PerfectMatching) -> list:
    """Correction edge set of a matching: one minimum-weight decoding-graph
    path per pair (defect-to-virtual for boundary entries), combined by
    symmetric difference.  Path weights sum to the matching weight before the
    symmetric difference; decode() uses the solver's recorded tight paths
    instead, which satisfy the same contract."""
    from .graphs import shortest_path_edges

    paths = []
    total = 0
    for u, v, w in m.pairs:
        path, weight = shortest_path_edges(g, u, v)
        if weight != w:
            raise ContractError(f"pair ({u}, {v}) weight {w} is not the graph distance {weight}")
        paths.append(path)
        total += weight
    for u, b, w in m.boundary:
        path, weight = shortest_path_edges(g, u, b)
        if weight != w:
            raise ContractError(f"boundary pair ({u}, {b}) weight {w} is not the graph "
                                f"distance {weight}")
        paths.append(path)
        total += weight
    assert total == sum(w for _, _, w in m.pairs) + sum(w for _, _, w in m.boundary)
    return correction_from_paths(paths)


def verify_correction(g: ModelGraph, s: Syndrome, correction) -> bool:
    """Does the correction reproduce the syndrome exactly?"""
    parity = {}
    for e in correction:
        for v in (int(g.edge_u[e]), int(g.edge_v[e])):
            parity[v] = parity.get(v, 0) ^ 1
    produced = {v for v, bit in parity.items() if bit and not g.is_virtual[v]}
    return produced == set(s.defects)


# --- solve loop ---------------------------------------------------------------

MAX_ROUNDS_FACTOR = 64


class MatchingContext:
    """One solver instance: a dual module and a primal module over a shared
    node arena.  Exclusively owned by one worker at a time."""

    def __init__(self, graph: ModelGraph, dual, primal, trace=None):
        self.graph = graph
        self.dual = dual
        self.primal = primal
        self.trace = trace
        self.work_units = 0

    def load(self, syndrome: Syndrome) -> None:
        self.dual.load(syndrome)
        self.primal.load()

    def run(self) -> None:
        """Alternate grow and resolve until no alternating structure remains."""
        guard = MAX_ROUNDS_FACTOR * (len(self.dual.arena.nodes) + 2)
        rounds = 0
        while not self.primal.finished():
            directions = self.primal.directions()
            delta, obstacles = self.dual.grow_until_obstacles(directions)
            self.work_units += 1 + len(obstacles)
            if not obstacles:
                if self.primal.finished():
                    break
                raise StallError("dual reported no obstacles while trees remain")
            self.primal.resolve(obstacles)
            rounds += 1
            if rounds > guard:
                raise StallError(f"solve loop exceeded {guard} rounds; state dump: "
                                 f"{self.dual.dump()}")

    def decode(self, syndrome: Syndrome) -> DecodeResult:
        self.load(syndrome)
        self.run()
        return self.finish()

    def finish(self) -> DecodeResult:
        matching, paths = self.primal.extract()
        primal_weight = sum(w for _, _, w in matching.pairs)
        primal_weight += sum(w for _, _, w in matching.boundary)
        correction = correction_from_paths(paths)
        result = DecodeResult(
            matching=matching,
            correction=correction,
            primal_weight=primal_weight,
            dual_objective=self.dual.arena.dual_objective(),
        )
        if self.primal.exact and result.primal_weight != result.dual_objective:
            raise StallError(
                f"duality certificate failed: primal {result.primal_weight} "
                f"!= dual {result.dual_objective}"
            )
        return result
