"""Standard primal module: alternating trees over parentless nodes.

Obstacle handling follows the classic blossom recipe, with virtual-vertex
support folded in: an augmenting path may end at the boundary, and a node
matched to a virtual vertex is released when an augmentation reaches it.
All obstacles of one grow step are processed as a batch; obstacles whose
nodes were consumed earlier in the batch are dropped silently and
rediscovered by the next grow call at zero growth.
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


class StandardPrimal:
    """Exact primal phase: grows all alternating trees simultaneously."""

    exact = True

    def __init__(self, dual, trace=None):
        self.dual = dual
        self.trace = trace if trace is not None else None
        self.label = {}          # node id -> +1 (plus) / -1 (minus); absent = free
        self.tree_parent = {}    # node id -> None (root) | (parent id, TightEdge parent->child)
        self.tree_children = {}  # node id -> list of node ids
        self.root = {}
        self.depth = {}

    @property
    def arena(self):
        return self.dual.arena

    def _emit(self, *event):
        if self.trace is not None:
            self.trace.append(event)

    # -- lifecycle -------------------------------------------------------------

    def load(self) -> None:
        for nid in sorted(self.arena.parentless_ids()):
            self.make_root(nid)

    def make_root(self, nid: int) -> None:
        """Start a fresh singleton alternating tree (new defects and nodes
        whose boundary match was dissolved at a fusion boundary)."""
        self.arena[nid].match = None
        self.label[nid] = +1
        self.tree_parent[nid] = None
        self.tree_children[nid] = []
        self.root[nid] = nid
        self.depth[nid] = 0

    def finished(self) -> bool:
        return not self.label

    def directions(self) -> dict:
        # frozen nodes stay implicit: absent means direction 0
        return dict(sorted(self.label.items()))

    # -- obstacle resolution ------------------------------------------------------

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
        return self.directions()

    def _handle_conflict(self, ob: Conflict, dirty: set) -> None:
        arena = self.arena
        n1, n2 = ob.node1, ob.node2
        if n1 in dirty or n2 in dirty:
            return
        if not (arena.is_parentless(n1) and arena.is_parentless(n2)):
            return
        edge = self._tight_edge(ob.touch1, ob.touch2, ob.path)
        l1, l2 = self.label.get(n1), self.label.get(n2)
        if l1 == +1 and l2 == +1:
            if self.root[n1] != self.root[n2]:
                self._augment(n1, n2, edge, dirty)
            else:
                self._blossom(n1, n2, edge, dirty)
        elif l1 == +1 and l2 is None:
            self._absorb(n1, n2, edge, dirty)
        elif l2 == +1 and l1 is None:
            self._absorb(n2, n1, edge.reversed(), dirty)
        # anything else is stale within this batch

    def _handle_touch(self, ob: TouchVirtual, dirty: set) -> None:
        n = ob.node
        if n in dirty or not self.arena.is_parentless(n):
            return
        if self.label.get(n) != +1:
            return
        self._augment_virtual(n, ob.virtual_vertex, ob.touch, ob.path, dirty)

    def _handle_expand(self, ob: BlossomMustExpand, dirty: set) -> None:
        n = ob.node
        if n in dirty or not self.arena.is_parentless(n):
            return
        node = self.arena[n]
        if self.label.get(n) != -1 or node.is_leaf or node.y != 0:
            return
        if node.cycle is None:
            raise ContractError(f"node {n} has no cycle to expand")
        self._expand(n, dirty)

    def _tight_edge(self, t1, t2, path) -> TightEdge:
        w = sum(int(self.dual.graph.edge_w[e]) for e in path)
        return TightEdge(t1, t2, w, tuple(path))

    def _set_match(self, a: int, b: int, edge_ab: TightEdge) -> None:
        self.arena[a].match = Match("node", b, edge_ab)
        self.arena[b].match = Match("node", a, edge_ab.reversed())

    # -- tree walks ----------------------------------------------------------------

    def _path_to_root(self, nid: int):
        path = [nid]
        while self.tree_parent[path[-1]] is not None:
            path.append(self.tree_parent[path[-1]][0])
        return path

    def _tree_members(self, root: int):
        members = []
        stack = [root]
        while stack:
            cur = stack.pop()
            members.append(cur)
            stack.extend(self.tree_children[cur])
        return members

    def _dissolve(self, root: int, dirty: set) -> None:
        for nid in self._tree_members(root):
            del self.label[nid]
            del self.tree_parent[nid]
            del self.tree_children[nid]
            del self.root[nid]
            del self.depth[nid]
            dirty.add(nid)

    def _flip_root_path(self, nid: int) -> None:
        # re-match every minus ancestor to its own tree parent, bottom-up
        cur = nid
        while True:
            tp = self.tree_parent[cur]
            if tp is None:
                return
            minus = tp[0]
            gp, edge_gp_minus = self.tree_parent[minus]
            self._set_match(minus, gp, edge_gp_minus.reversed())
            cur = gp

    def _renumber_subtree(self, top: int) -> None:
        base = 0 if self.tree_parent[top] is None else self.depth[self.tree_parent[top][0]] + 1
        root = top if self.tree_parent[top] is None else self.root[self.tree_parent[top][0]]
        stack = [(top, base)]
        while stack:
            cur, d = stack.pop()
            self.depth[cur] = d
            self.root[cur] = root
            for c in self.tree_children[cur]:
                stack.append((c, d + 1))

    # -- actions ---------------------------------------------------------------------

    def _augment(self, n1: int, n2: int, edge: TightEdge, dirty: set) -> None:
        r1, r2 = self.root[n1], self.root[n2]
        self._flip_root_path(n1)
        self._flip_root_path(n2)
        self._set_match(n1, n2, edge)
        self._dissolve(r1, dirty)
        self._dissolve(r2, dirty)
        self._emit("augment", n1, n2)

    def _augment_virtual(self, n: int, vv: int, touch: int, path, dirty: set) -> None:
        r = self.root[n]
        self._flip_root_path(n)
        w = sum(int(self.dual.graph.edge_w[e]) for e in path)
        self.arena[n].match = Match("virtual", vv, TightEdge(touch, vv, w, tuple(path)))
        self._dissolve(r, dirty)
        self._emit("match_virtual", n, vv)

    def _absorb(self, plus: int, free: int, edge: TightEdge, dirty: set) -> None:
        rec = self.arena[free].match
        if rec is None:
            raise ContractError(f"free node {free} has no match")
        if rec.kind == "virtual":
            # augmenting path ends at the boundary through the free node
            r = self.root[plus]
            self._flip_root_path(plus)
            self._set_match(plus, free, edge)
            self._dissolve(r, dirty)
            dirty.add(free)
            self._emit("augment", plus, free)
            return
        partner = rec.other
        if self.arena[partner].match.other != free:
            raise ContractError(f"match records of {free} and {partner} disagree")
        self.label[free] = -1
        self.tree_parent[free] = (plus, edge)
        self.tree_children[free] = [partner]
        self.tree_children[plus].append(free)
        self.root[free] = self.root[plus]
        self.depth[free] = self.depth[plus] + 1
        self.label[partner] = +1
        self.tree_parent[partner] = (free, rec.edge)
        self.tree_children[partner] = []
        self.root[partner] = self.root[plus]
        self.depth[partner] = self.depth[plus] + 2
        dirty.add(free)
        dirty.add(partner)
        self._emit("attach", plus, free, partner)

    def _blossom(self, n1: int, n2: int, conflict_edge: TightEdge, dirty: set) -> None:
        arena = self.arena
        path1 = self._path_to_root(n1)
        index1 = {nid: i for i, nid in enumerate(path1)}
        path2 = self._path_to_root(n2)
        lca = next(nid for nid in path2 if nid in index1)
        arc1 = path1[:index1[lca]]
        arc2 = path2[:path2.index(lca)]
        cycle = [lca] + arc1[::-1] + arc2
        edges = []
        for k in range(len(arc1)):
            edges.append(self.tree_parent[cycle[k + 1]][1])
        edges.append(conflict_edge)
        for nid in arc2:
            edges.append(self.tree_parent[nid][1].reversed())
        lca_match = arena[lca].match
        lca_tp = self.tree_parent[lca]
        lca_root = self.root[lca]

        blossom = arena.new_blossom(cycle, cycle=edges)
        self.dual.on_blossom_created(blossom)
        bid = blossom.id

        blossom.match = lca_match
        if lca_match is not None and lca_match.kind == "node":
            partner = arena[lca_match.other]
            partner.match = Match("node", bid, partner.match.edge)

        member_set = set(cycle)
        hanging = []
        for m in cycle:
            for c in self.tree_children[m]:
                if c not in member_set:
                    self.tree_parent[c] = (bid, self.tree_parent[c][1])
                    hanging.append(c)
        self.label[bid] = +1
        self.tree_parent[bid] = lca_tp
        self.tree_children[bid] = hanging
        if lca_tp is not None:
            kids = self.tree_children[lca_tp[0]]
            kids[kids.index(lca)] = bid
        self.root[bid] = bid if lca_tp is None else lca_root
        self.depth[bid] = 0 if lca_tp is None else self.depth[lca_tp[0]] + 1
        for m in cycle:
            del self.label[m]
            del self.tree_parent[m]
            del self.tree_children[m]
            del self.root[m]
            del self.depth[m]
            dirty.add(m)
        self._renumber_subtree(bid)
        self._emit("blossom", tuple(cycle), bid)

    def _expand(self, n: int, dirty: set) -> None:
        arena = self.arena
        node = arena[n]
        parent_id, edge_p = self.tree_parent[n]
        kids = self.tree_children[n]
        if len(kids) != 1:
            raise ContractError(f"minus node {n} has {len(kids)} tree children")
        child_c = kids[0]
        edge_c = self.tree_parent[child_c][1]           # oriented n -> child
        c_in = arena.child_containing(n, edge_p.touch2)
        c_out = arena.child_containing(n, edge_c.touch1)

        self.dual.on_blossom_expanded(node)
        children = node.children
        cyc = node.cycle
        length = len(children)
        for c in children:
            arena[c].parent = None
        node.alive = False

        i_in = children.index(c_in)
        i_out = children.index(c_out)
        fwd = (i_out - i_in) % length
        if fwd % 2 == 0:
            path_idx = [(i_in + k) % length for k in range(fwd + 1)]
            path_edges = [cyc[(i_in + k) % length] for k in range(fwd)]
            off_pairs = []
            m_off = length - fwd - 1
            for j in range(0, m_off, 2):
                a = (i_out + 1 + j) % length
                b = (i_out + 2 + j) % length
                off_pairs.append((children[a], children[b], cyc[a]))
        else:
            bwd = length - fwd
            path_idx = [(i_in - k) % length for k in range(bwd + 1)]
            path_edges = [cyc[(i_in - k - 1) % length].reversed() for k in range(bwd)]
            off_pairs = []
            m_off = length - bwd - 1
            for j in range(0, m_off, 2):
                a = (i_out - 1 - j) % length
                b = (i_out - 2 - j) % length
                off_pairs.append((children[a], children[b], cyc[b].reversed()))

        path_nodes = [children[i] for i in path_idx]
        # stitch the even-length arc back into the tree in place of the blossom
        kids_p = self.tree_children[parent_id]
        kids_p[kids_p.index(n)] = path_nodes[0]
        prev = None
        for k, cur in enumerate(path_nodes):
            self.label[cur] = -1 if k % 2 == 0 else +1
            self.tree_parent[cur] = (parent_id, edge_p) if k == 0 else (prev, path_edges[k - 1])
            self.tree_children[cur] = [] if k == len(path_nodes) - 1 else [path_nodes[k + 1]]
            prev = cur
        for j in range(0, len(path_nodes) - 1, 2):
            self._set_match(path_nodes[j], path_nodes[j + 1], path_edges[j])
        last = path_nodes[-1]
        self.tree_children[last] = [child_c]
        self.tree_parent[child_c] = (last, edge_c)
        rec = node.match
        if rec is None or rec.kind != "node" or rec.other != child_c:
            raise ContractError(f"minus blossom {n} not matched to its tree child")
        self._set_match(last, child_c, rec.edge)
        for a, b, e_ab in off_pairs:
            self._set_match(a, b, e_ab)
        del self.label[n]
        del self.tree_parent[n]
        del self.tree_children[n]
        del self.root[n]
        del self.depth[n]
        dirty.add(n)
        self._renumber_subtree(path_nodes[0])
        self._emit("expand", n)

    # -- extraction ----------------------------------------------------------------

    def extract(self):
        """Expand blossoms outermost-first and emit the final matching plus
        the minimum-weight path of every pair."""
        if self.label:
            raise ContractError("extract called while alternating trees remain")
        arena = self.arena
        pairs = []
        boundary = []
        paths = []
        done = set()
        for nid in sorted(arena.parentless_ids()):
            self._extract_top(nid, done, pairs, boundary, paths)
        return PerfectMatching(pairs, boundary), paths

    def _extract_top(self, nid: int, done: set, pairs, boundary, paths) -> None:
        if nid in done:
            return
        rec = self.arena[nid].match
        if rec is None:
            raise ContractError(f"node {nid} unmatched at extraction")
        if rec.kind == "virtual":
            edge = rec.edge
            boundary.append((edge.touch1, rec.other, edge.weight))
            paths.append(edge.path)
            self._peel(nid, edge.touch1, pairs, paths)
            done.add(nid)
        else:
            edge = rec.edge
            pairs.append((edge.touch1, edge.touch2, edge.weight))
            paths.append(edge.path)
            self._peel(nid, edge.touch1, pairs, paths)
            self._peel(rec.other, edge.touch2, pairs, paths)
            done.add(nid)
            done.add(rec.other)

    def _peel(self, nid: int, touch: int, pairs, paths) -> None:
        node = self.arena[nid]
        if node.is_leaf:
            if node.vertex != touch:
                raise ContractError(f"leaf {nid} consumed via foreign defect {touch}")
            return
        if node.cycle is None:
            raise ContractError(f"node {nid} is a cluster blossom; wrong primal module")
        children = node.children
        cyc = node.cycle
        length = len(children)
        entry = self.arena.child_containing(nid, touch)
        i = children.index(entry)
        self._peel(entry, touch, pairs, paths)
        for j in range(1, length, 2):
            a = (i + j) % length
            b = (i + j + 1) % length
            edge = cyc[a]
            pairs.append((edge.touch1, edge.touch2, edge.weight))
            paths.append(edge.path)
            self._peel(children[a], edge.touch1, pairs, paths)
            self._peel(children[b], edge.touch2, pairs, paths)
