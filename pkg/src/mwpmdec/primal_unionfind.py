"""Union-find primal module and the tree-size continuum.

Instead of alternating trees, defects are organized in clusters.  A cluster
with odd defect parity and no boundary contact keeps growing; conflicts merge
clusters; boundary contact satisfies a cluster.  So that one cluster grows as
a single region, an invalid cluster's nodes are collapsed into one cluster
blossom (the dual module then treats their covers as one).  The matching is
extracted at the end by peeling the cluster's forest of recorded tight paths
leaf-first, with shortest-path fallbacks for defects stranded by the peel.

``LimitedPrimal`` behaves exactly like the standard module until an
alternating tree exceeds ``k`` parentless nodes, then converts that tree to a
cluster; any conflict between a tree and a cluster converts the tree side
first.  The limit counts parentless nodes per tree.  ``k=None`` never
converts and is decision-for-decision the standard module; ``k=0`` converts
every singleton tree immediately and is the plain union-find decoder, which
``UnionFindPrimal`` exposes directly.
"""

from __future__ import annotations

from .framework import (
    BlossomMustExpand,
    Conflict,
    ContractError,
    Match,
    PerfectMatching,
    TightEdge,
    TouchVirtual,
)
from .graphs import shortest_path_edges
from .primal_standard import StandardPrimal


class _Cluster:
    __slots__ = ("members", "defects", "links", "anchor")

    def __init__(self, members, defects, links, anchor=None):
        self.members = members      # current parentless node ids
        self.defects = defects      # defect count
        self.links = links          # list of TightEdge between cluster defects
        self.anchor = anchor        # (node id, Match to virtual) or None

    @property
    def invalid(self) -> bool:
        return self.defects % 2 == 1 and self.anchor is None


class LimitedPrimal(StandardPrimal):
    """Standard primal with a cap on alternating-tree size."""

    def __init__(self, dual, k=None, trace=None):
        super().__init__(dual, trace)
        self.k = k
        self.exact = k is None
        self._dsu = {}        # node id -> dsu parent
        self._cluster = {}    # dsu root -> _Cluster

    # -- disjoint sets ------------------------------------------------------------

    def _find(self, nid: int) -> int:
        root = nid
        while self._dsu[root] != root:
            root = self._dsu[root]
        while self._dsu[nid] != root:
            self._dsu[nid], nid = root, self._dsu[nid]
        return root

    def _cluster_of(self, nid: int):
        if nid not in self._dsu:
            return None
        return self._find(nid)

    # -- lifecycle --------------------------------------------------------------

    def load(self) -> None:
        super().load()
        self._sweep_oversized(set())

    def _sweep_oversized(self, dirty: set) -> None:
        if self.k is None:
            return
        for root in sorted({self.root[n] for n in self.label}):
            if root in self.tree_children and len(self._tree_members(root)) > self.k:
                self._convert_tree(root, dirty)

    def finished(self) -> bool:
        if self.label:
            return False
        return all(not c.invalid for c in self._cluster.values())

    def directions(self) -> dict:
        dirs = dict(sorted(self.label.items()))
        for root in sorted(self._cluster):
            data = self._cluster[root]
            if data.invalid:
                if len(data.members) != 1:
                    raise ContractError("invalid cluster with several nodes")
                dirs[data.members[0]] = +1
        return dirs

    def resolve(self, obstacles) -> dict:
        dirty = set()
        for ob in obstacles:
            if isinstance(ob, Conflict):
                self._handle_conflict(ob, dirty)
            elif isinstance(ob, TouchVirtual):
                self._handle_touch(ob, dirty)
            elif isinstance(ob, BlossomMustExpand):
                self._handle_expand(ob, dirty)
            else:
                raise ContractError(f"unknown obstacle {ob!r}")
        self._sweep_oversized(dirty)
        return self.directions()

    # -- conversion ----------------------------------------------------------------

    def _convert_tree(self, root: int, dirty: set) -> None:
        members = sorted(self._tree_members(root))
        links = [self.tree_parent[m][1] for m in members if self.tree_parent[m] is not None]
        defects = 0
        for m in members:
            defects += len(self.arena.defects_under(m))
            del self.label[m]
            del self.tree_parent[m]
            del self.tree_children[m]
            del self.root[m]
            del self.depth[m]
            dirty.add(m)
        if len(members) == 1:
            nid = members[0]
            self.arena[nid].match = None
            self._dsu[nid] = nid
            self._cluster[nid] = _Cluster([nid], defects, [])
        else:
            blossom = self.arena.new_blossom(members, links=links)
            self.dual.on_blossom_created(blossom)
            self._dsu[blossom.id] = blossom.id
            for m in members:
                self._dsu[m] = blossom.id
            self._cluster[blossom.id] = _Cluster([blossom.id], defects, [])
        self._emit("uf_convert", tuple(members))

    def _register_standard(self, nid: int) -> int:
        """Bring a matched node outside any cluster into the cluster world."""
        rec = self.arena[nid].match
        if rec is None:
            raise ContractError(f"node {nid} is neither in a tree, matched, nor clustered")
        self._dsu[nid] = nid
        if rec.kind == "virtual":
            self._cluster[nid] = _Cluster([nid], len(self.arena.defects_under(nid)), [],
                                          anchor=(nid, rec))
        else:
            partner = rec.other
            self._dsu[partner] = nid
            defects = len(self.arena.defects_under(nid))
            defects += len(self.arena.defects_under(partner))
            self._cluster[nid] = _Cluster(sorted((nid, partner)), defects, [rec.edge])
        return nid

    def _ensure_cluster(self, nid: int, dirty: set) -> int:
        root = self._cluster_of(nid)
        if root is not None:
            return root
        if nid in self.label:
            self._convert_tree(self.root[nid], dirty)
            return self._find(nid)
        return self._register_standard(nid)

    # -- cluster operations -----------------------------------------------------------

    def _merge(self, n1: int, n2: int, edge: TightEdge, dirty: set) -> None:
        r1 = self._ensure_cluster(n1, dirty)
        r2 = self._ensure_cluster(n2, dirty)
        if r1 == r2:
            return
        c1, c2 = self._cluster[r1], self._cluster[r2]
        if c1.anchor is not None and c2.anchor is not None:
            raise ContractError("two satisfied clusters cannot conflict")
        # union by defect count, lower root id on ties
        if (c2.defects, r2) < (c1.defects, r1):
            r1, r2 = r2, r1
            c1, c2 = c2, c1
        self._dsu[r2] = r1
        merged = _Cluster(
            sorted(c1.members + c2.members),
            c1.defects + c2.defects,
            c1.links + c2.links + [edge],
            c1.anchor or c2.anchor,
        )
        del self._cluster[r2]
        self._cluster[r1] = merged
        dirty.update(merged.members)
        self._emit("uf_merge", n1, n2)
        if merged.invalid:
            blossom = self.arena.new_blossom(merged.members, links=merged.links)
            self.dual.on_blossom_created(blossom)
            self._dsu[blossom.id] = r1
            self._cluster[r1] = _Cluster([blossom.id], merged.defects, [])
            self._emit("uf_collapse", tuple(merged.members), blossom.id)

    # -- obstacle handling ---------------------------------------------------------------

    def _handle_conflict(self, ob: Conflict, dirty: set) -> None:
        arena = self.arena
        n1, n2 = ob.node1, ob.node2
        if n1 in dirty or n2 in dirty:
            return
        if not (arena.is_parentless(n1) and arena.is_parentless(n2)):
            return
        if self._cluster_of(n1) is not None or self._cluster_of(n2) is not None:
            edge = self._tight_edge(ob.touch1, ob.touch2, ob.path)
            self._merge(n1, n2, edge, dirty)
            return
        super()._handle_conflict(ob, dirty)

    def _handle_touch(self, ob: TouchVirtual, dirty: set) -> None:
        n = ob.node
        if n in dirty or not self.arena.is_parentless(n):
            return
        root = self._cluster_of(n)
        if root is None:
            super()._handle_touch(ob, dirty)
            return
        data = self._cluster[root]
        if data.anchor is not None or not data.invalid:
            return
        w = sum(int(self.dual.graph.edge_w[e]) for e in ob.path)
        rec = Match("virtual", ob.virtual_vertex,
                    TightEdge(ob.touch, ob.virtual_vertex, w, tuple(ob.path)))
        data.anchor = (n, rec)
        dirty.add(n)
        self._emit("uf_anchor", n, ob.virtual_vertex)

    def _handle_expand(self, ob: BlossomMustExpand, dirty: set) -> None:
        if self._cluster_of(ob.node) is not None:
            raise ContractError("cluster blossoms never shrink")
        super()._handle_expand(ob, dirty)

    # -- extraction ------------------------------------------------------------------------

    def extract(self):
        if self.label:
            raise ContractError("extract called while alternating trees remain")
        pairs = []
        boundary = []
        paths = []
        done = set()
        seen_roots = set()
        for nid in sorted(self.arena.parentless_ids()):
            root = self._cluster_of(nid)
            if root is None:
                self._extract_top(nid, done, pairs, boundary, paths)
                continue
            if root in seen_roots:
                continue
            seen_roots.add(root)
            self._extract_cluster(self._cluster[root], pairs, boundary, paths)
        return PerfectMatching(pairs, boundary), paths

    def _extract_cluster(self, data: _Cluster, pairs, boundary, paths) -> None:
        if data.invalid:
            raise ContractError("extract called with an invalid cluster")
        arena = self.arena
        defects = set()
        links = list(data.links)
        stack = list(data.members)
        while stack:
            node = arena[stack.pop()]
            if node.is_leaf:
                defects.add(node.vertex)
            elif node.cycle is None:
                stack.extend(node.children)
                links.extend(node.links)
            else:
                defects.update(arena.defects_under(node.id))

        if len(defects) % 2 == 1:
            node_id, rec = data.anchor
            edge = rec.edge
            if edge.touch1 not in defects:
                raise ContractError("anchor touch is not a cluster defect")
            boundary.append((edge.touch1, rec.other, edge.weight))
            paths.append(edge.path)
            defects.discard(edge.touch1)

        # leaf-first peel of the tight-path forest
        adj = {d: [] for d in defects}
        for link in links:
            if link.touch1 in defects and link.touch2 in defects:
                adj[link.touch1].append((link.touch2, link))
                adj[link.touch2].append((link.touch1, link.reversed()))
        alive = set(defects)

        def degree(d):
            return sum(1 for other, _ in adj[d] if other in alive)

        progressed = True
        while progressed:
            progressed = False
            for d in sorted(alive):
                if degree(d) != 1:
                    continue
                other, link = next((o, l) for o, l in adj[d] if o in alive)
                pairs.append((link.touch1, link.touch2, link.weight))
                paths.append(link.path)
                alive.discard(d)
                alive.discard(other)
                progressed = True
                break

        leftovers = sorted(alive)
        if len(leftovers) % 2 == 1:
            raise ContractError("odd leftover defects after cluster peel")
        g = self.dual.graph
        for i in range(0, len(leftovers), 2):
            a, b = leftovers[i], leftovers[i + 1]
            path, w = shortest_path_edges(g, a, b)
            pairs.append((a, b, w))
            paths.append(path)

    def _peel(self, nid, touch, pairs, paths):
        node = self.arena[nid]
        if node.children is not None and node.cycle is None:
            raise ContractError(f"cluster blossom {nid} reached standard peel")
        super()._peel(nid, touch, pairs, paths)


class UnionFindPrimal(LimitedPrimal):
    """The plain union-find decoder: every node is a cluster from the start."""

    def __init__(self, dual, trace=None):
        super().__init__(dual, k=0, trace=trace)
