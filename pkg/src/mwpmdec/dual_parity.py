"""Dual module: cover growth directly on the decoding graph.

Every parentless node owns a region of decoding-graph vertices (its
pseudo-cover): each vertex has at most one owner, and per-edge growth from
the two sides never exceeds the edge weight, which is the dual edge-slackness
constraint localized to the decoding graph.  Growing a node's dual variable
advances its cover wavefront; obstacles are reported exactly when a further
step would violate a constraint.

Cover bookkeeping is per vertex: the owner, the defect whose circle claimed
the vertex (source), the claim radius, and the predecessor on the claim path.
Per-edge growth is derived from these exactly:

  avail(u)        = radius(source(u)) - claim_radius(u)
  one owner       : g_u = min(avail(u), w)
  two owners      : g_u = avail(u)                (capacity kept by the delta rule)
  same owner      : g_u = min(avail(u), cap_u),   cap_u = clamp((w + avail_u - avail_v)/2, 0, w)

where the same-owner cap splits the edge at the point where the two wavefronts
of one cover first met.  With even integer edge weights every quantity above
is an integer and every comparison is exact.

Reset is O(1): a global timestamp invalidates all per-vertex entries lazily.
The timestamp is an unbounded Python integer, so any number of resets is safe.
"""

from __future__ import annotations

from .framework import (
    BlossomMustExpand,
    Conflict,
    ContractError,
    NodeArena,
    StallError,
    TouchVirtual,
)
from .graphs import ModelGraph, Syndrome, dist

UNBOUNDED = None


class DualParity:
    """Cover state and dual growth for one solver instance."""

    def __init__(self, graph: ModelGraph, check_invariants: bool = False):
        n = graph.num_vertices
        self.graph = graph
        self.check_invariants = check_invariants
        self.stamp = 1
        self._vstamp = [0] * n
        self._vowner = [-1] * n
        self._vsrc = [-1] * n
        self._vds = [0] * n
        self._vparent = [-1] * n
        self._vpedge = [-1] * n
        self.virtual_override = set()
        self.arena = NodeArena()
        self.owned = {}
        self.claim_count = 0
        self.grow_iterations = 0
        self.conflicts_checked = 0

    # -- state access --------------------------------------------------------

    def owner_of(self, v: int) -> int:
        return self._vowner[v] if self._vstamp[v] == self.stamp else -1

    def source_of(self, v: int) -> int:
        return self._vsrc[v]

    def is_virtual(self, v: int) -> bool:
        return bool(self.graph.is_virtual[v]) or v in self.virtual_override

    def _set_vertex(self, v, owner, src, ds, parent, pedge):
        self._vstamp[v] = self.stamp
        self._vowner[v] = owner
        self._vsrc[v] = src
        self._vds[v] = ds
        self._vparent[v] = parent
        self._vpedge[v] = pedge

    def _disown(self, v):
        self._vowner[v] = -1

    # -- lifecycle -------------------------------------------------------------

    def reset(self) -> None:
        """O(1) reset: bump the timestamp; per-vertex entries are invalidated
        lazily on next touch."""
        self.soft_reset()
        self.virtual_override.clear()
        self.claim_count = 0
        self.grow_iterations = 0

    def soft_reset(self) -> None:
        """Clear cover and node state but keep the virtual overrides (used
        when one solver is reused across leaf partitions)."""
        self.stamp += 1
        self.arena = NodeArena()
        self.owned = {}

    def load(self, syndrome: Syndrome) -> None:
        for v in sorted(syndrome.defects):
            self.add_defect(v)

    def add_defect(self, v: int):
        if not (0 <= v < self.graph.num_vertices):
            raise ContractError(f"defect {v} out of range")
        if self.is_virtual(v):
            raise ContractError(f"defect {v} is a virtual vertex")
        if self.owner_of(v) != -1:
            raise ContractError(f"defect vertex {v} is already covered")
        node = self.arena.new_leaf(v)
        self._set_vertex(v, node.id, v, 0, -1, -1)
        self.owned[node.id] = [v]
        return node

    def set_virtual_override(self, vertices, on: bool) -> None:
        if on:
            self.virtual_override.update(vertices)
        else:
            self.virtual_override.difference_update(vertices)

    # -- blossom hooks ---------------------------------------------------------

    def on_blossom_created(self, node) -> None:
        merged = []
        for c in node.children:
            for v in self.owned.pop(c, []):
                if self.owner_of(v) == c:
                    self._vowner[v] = node.id
                    merged.append(v)
        self.owned[node.id] = merged

    def on_blossom_expanded(self, node) -> None:
        # caller must not have detached the children yet
        if node.y != 0:
            raise ContractError(f"cannot expand blossom {node.id} with y={node.y} > 0")
        child_of_src = {}
        lists = {c: [] for c in node.children}
        for v in self.owned.pop(node.id, []):
            if self.owner_of(v) != node.id:
                continue
            src = self._vsrc[v]
            c = child_of_src.get(src)
            if c is None:
                c = self.arena.child_containing(node.id, src)
                child_of_src[src] = c
            self._vowner[v] = c
            lists[c].append(v)
        self.owned.update(lists)

    # -- growth ------------------------------------------------------------------

    def grow_until_obstacles(self, directions: dict):
        """Advance every cover along its direction by the largest feasible
        step, absorbing vertices as wavefronts cross them, and return the
        total step with all obstacles at the final frontier.

        Nodes missing from ``directions`` are frozen (direction 0); every key
        must name a live parentless node.
        """
        arena = self.arena
        for nid in directions:
            if not arena.is_parentless(nid):
                raise ContractError(f"direction supplied for unknown node {nid}")
        if not any(directions.values()):
            return 0, []
        delta_total = 0
        while True:
            self.grow_iterations += 1
            dropped = self._drop_shrink_boundaries(directions)
            radius = self._radius_memo()
            delta, records = self._scan(directions, radius)
            if delta is UNBOUNDED:
                raise StallError("a cover is growing with no bounding constraint")
            if delta > 0:
                for nid in sorted(directions):
                    d = directions[nid]
                    if d:
                        arena[nid].y += d * delta
                delta_total += delta
                continue
            claimed = self._process_claims(records, radius)
            if claimed:
                continue
            obstacles = self._collect_obstacles(directions, records, radius)
            if obstacles:
                if self.check_invariants:
                    self._assert_obstacles(obstacles)
                    self.assert_feasible(directions)
                return delta_total, obstacles
            if not dropped:
                raise StallError(f"dual stalled with no obstacle: {self.dump()}")

    def _radius_memo(self):
        arena = self.arena
        memo = {}

        def radius(src: int) -> int:
            r = memo.get(src)
            if r is None:
                r = arena.radius_of_defect(src)
                memo[src] = r
            return r

        return radius

    def _drop_shrink_boundaries(self, directions) -> bool:
        # a shrinking cover excludes its boundary non-defect vertices, so
        # neighbours can absorb them (zero-edge islands change hands this way)
        radius = self._radius_memo()
        is_defect = self.arena.leaf_of_defect
        dropped = False
        for nid in sorted(directions):
            if directions[nid] >= 0:
                continue
            lst = self.owned.get(nid, [])
            kept = []
            for v in lst:
                if self.owner_of(v) != nid:
                    continue
                if v not in is_defect:
                    avail = radius(self._vsrc[v]) - self._vds[v]
                    if avail < 0:
                        raise ContractError(f"vertex {v} cover radius went negative")
                    if avail == 0:
                        self._disown(v)
                        dropped = True
                        continue
                kept.append(v)
            self.owned[nid] = kept
        return dropped

    def _scan(self, directions, radius):
        """One pass over all edges adjacent to active covers: the largest
        feasible delta plus the zero-slack events at the current frontier."""
        graph = self.graph
        arena = self.arena
        delta = UNBOUNDED
        records = []
        seen = set()

        def limit(x: int):
            nonlocal delta
            if delta is UNBOUNDED or x < delta:
                delta = x

        for nid in sorted(directions):
            dirn = directions[nid]
            if dirn == 0:
                continue
            node = arena[nid]
            if dirn < 0:
                if node.y < 0:
                    raise ContractError(f"node {nid} has negative dual value")
                limit(node.y)
            lst = self.owned.get(nid, [])
            kept = []
            for v in lst:
                if self.owner_of(v) != nid:
                    continue
                kept.append(v)
                avail_v = radius(self._vsrc[v]) - self._vds[v]
                if dirn < 0 and v not in arena.leaf_of_defect:
                    limit(avail_v)
                for e in graph.incident_edges(v):
                    e = int(e)
                    if e in seen:
                        continue
                    seen.add(e)
                    self._scan_edge(e, directions, radius, limit, records)
            self.owned[nid] = kept
        return delta, records

    def _scan_edge(self, e, directions, radius, limit, records):
        graph = self.graph
        u = int(graph.edge_u[e])
        v = int(graph.edge_v[e])
        w = int(graph.edge_w[e])
        ou = self.owner_of(u)
        ov = self.owner_of(v)
        if ou == -1 and ov == -1:
            return
        au = radius(self._vsrc[u]) - self._vds[u] if ou != -1 else 0
        av = radius(self._vsrc[v]) - self._vds[v] if ov != -1 else 0
        du = directions.get(ou, 0) if ou != -1 else 0
        dv = directions.get(ov, 0) if ov != -1 else 0
        if ou == ov:
            # one cover approaching itself around a cycle: capped, no obstacle
            if du > 0:
                cap_u = min(max((w + au - av) // 2, 0), w)
                gu = min(au, cap_u)
                gv = min(av, w - cap_u)
                slack = w - gu - gv
                if slack > 0:
                    limit(slack // 2)
            return
        gu = min(au, w) if ou != -1 else 0
        gv = min(av, w) if ov != -1 else 0
        slack = w - gu - gv
        if slack < 0:
            raise ContractError(f"edge {e} over capacity: {gu}+{gv} > {w}")
        rate = du + dv
        if rate <= 0:
            return
        if slack == 0:
            limit(0)
            if ou != -1 and ov != -1:
                records.append(("conflict", e, u, v))
            elif ou != -1:
                if self.is_virtual(v):
                    if du > 0:
                        records.append(("touch", e, u, v))
                else:
                    records.append(("claim", e, u, v))
            else:
                if self.is_virtual(u):
                    if dv > 0:
                        records.append(("touch", e, v, u))
                else:
                    records.append(("claim", e, v, u))
        else:
            if rate == 2 and slack % 2 != 0:
                raise ContractError(f"odd slack {slack} on edge {e} with both sides growing")
            limit(slack // rate)

    def _process_claims(self, records, radius) -> bool:
        claimed = False
        for rec in sorted(r for r in records if r[0] == "claim"):
            _, e, from_v, new_v = rec
            owner = self.owner_of(from_v)
            if owner == -1 or self.owner_of(new_v) != -1 or self.is_virtual(new_v):
                continue
            w = int(self.graph.edge_w[e])
            avail = radius(self._vsrc[from_v]) - self._vds[from_v]
            if avail < w:
                continue
            if avail > w:
                raise ContractError(f"cover overshot vertex {new_v} through edge {e}")
            self._set_vertex(new_v, owner, self._vsrc[from_v],
                             self._vds[from_v] + w, from_v, e)
            self.owned[owner].append(new_v)
            self.claim_count += 1
            claimed = True
        return claimed

    def _collect_obstacles(self, directions, records, radius):
        obstacles = []
        seen_touch = set()
        for rec in records:
            kind, e, a, b = rec
            if kind == "conflict":
                oa, ob = self.owner_of(a), self.owner_of(b)
                if oa == -1 or ob == -1 or oa == ob:
                    continue
                obstacles.append(Conflict(
                    node1=oa, node2=ob, edge=e,
                    touch1=self._vsrc[a], touch2=self._vsrc[b],
                    path=self._conflict_path(e, a, b),
                ))
            elif kind == "touch":
                oa = self.owner_of(a)
                if oa == -1:
                    continue
                key = (oa, b)
                if key in seen_touch:
                    continue
                seen_touch.add(key)
                obstacles.append(TouchVirtual(
                    node=oa, virtual_vertex=b, touch=self._vsrc[a],
                    path=tuple(reversed(self._chain(a))) + (e,),
                ))
        for nid in sorted(directions):
            if directions[nid] < 0:
                node = self.arena[nid]
                if node.y == 0:
                    if node.is_leaf:
                        self._squeeze_conflicts(nid, directions, radius, obstacles)
                    else:
                        obstacles.append(BlossomMustExpand(node=nid))
        obstacles.sort(key=lambda ob: ob.sort_key())
        return obstacles

    def _squeeze_conflicts(self, nid, directions, radius, obstacles):
        """A shrinking single-defect node at y=0 blocks no one, but its vertex
        may sit exactly between two covers whose combined rate is positive: the
        implied syndrome edge between those two is tight (this is exactly how
        the non-negative vertex dual bound is attained).  Report that conflict,
        routing the tight path through the squeezed vertex."""
        graph = self.graph
        u = self.arena[nid].vertex
        if radius(self._vsrc[u]) - self._vds[u] != 0:
            return
        reachers = []
        for e in graph.incident_edges(u):
            e = int(e)
            z = graph.other_end(e, u)
            oz = self.owner_of(z)
            if oz == -1 or oz == nid:
                continue
            az = radius(self._vsrc[z]) - self._vds[z]
            w = int(graph.edge_w[e])
            if az >= w:
                reachers.append((-directions.get(oz, 0), oz, e, z))
        reachers.sort()
        for i in range(len(reachers)):
            for j in range(i + 1, len(reachers)):
                d1, o1, e1, z1 = reachers[i]
                d2, o2, e2, z2 = reachers[j]
                if o1 == o2 or (-d1) + (-d2) <= 0:
                    continue
                path = tuple(reversed(self._chain(z1))) + (e1, e2) + tuple(self._chain(z2))
                obstacles.append(Conflict(
                    node1=o1, node2=o2, edge=min(e1, e2),
                    touch1=self._vsrc[z1], touch2=self._vsrc[z2],
                    path=path,
                ))
                return

    def _chain(self, v):
        """Edge ids from vertex v back to its claim source."""
        path = []
        x = v
        while self._vparent[x] != -1:
            path.append(self._vpedge[x])
            x = self._vparent[x]
        return path

    def _conflict_path(self, e, u, v):
        forward = list(reversed(self._chain(u)))
        forward.append(e)
        forward.extend(self._chain(v))
        return tuple(forward)

    # -- diagnostics ---------------------------------------------------------------

    def edge_growth(self, e: int):
        """Derived (growth_from_u, growth_from_v) of one edge."""
        graph = self.graph
        u = int(graph.edge_u[e])
        v = int(graph.edge_v[e])
        w = int(graph.edge_w[e])
        ou, ov = self.owner_of(u), self.owner_of(v)
        au = self.arena.radius_of_defect(self._vsrc[u]) - self._vds[u] if ou != -1 else 0
        av = self.arena.radius_of_defect(self._vsrc[v]) - self._vds[v] if ov != -1 else 0
        if ou == -1 and ov == -1:
            return 0, 0
        if ou == ov:
            cap_u = min(max((w + au - av) // 2, 0), w)
            return min(au, cap_u), min(av, w - cap_u)
        return (min(au, w) if ou != -1 else 0), (min(av, w) if ov != -1 else 0)

    def covered_vertices(self):
        for nid in sorted(self.owned):
            for v in self.owned[nid]:
                if self.owner_of(v) == nid:
                    yield nid, v

    def assert_feasible(self, directions=None) -> None:
        """Per-edge capacity and non-negative duals over the covered region."""
        for node in self.arena.nodes.values():
            if node.alive and node.y < 0:
                raise ContractError(f"node {node.id} has y < 0")
        seen = set()
        for _, v in self.covered_vertices():
            for e in self.graph.incident_edges(v):
                e = int(e)
                if e in seen:
                    continue
                seen.add(e)
                gu, gv = self.edge_growth(e)
                w = int(self.graph.edge_w[e])
                if gu + gv > w:
                    raise ContractError(f"edge {e} violates capacity: {gu}+{gv} > {w}")

    def _assert_obstacles(self, obstacles) -> None:
        for ob in obstacles:
            if isinstance(ob, Conflict):
                self.conflicts_checked += 1
                dual_sum = self.arena.pair_dual_sum(ob.touch1, ob.touch2)
                path_w = sum(int(self.graph.edge_w[e]) for e in ob.path)
                graph_dist = dist(self.graph, ob.touch1, ob.touch2)
                if not (dual_sum == path_w == graph_dist):
                    raise ContractError(
                        f"conflict between {ob.touch1} and {ob.touch2} is not tight: "
                        f"dual {dual_sum}, path {path_w}, dist {graph_dist}"
                    )

    def dump(self) -> dict:
        vertices = {}
        edges = {}
        for nid, v in self.covered_vertices():
            vertices[v] = {
                "owner": nid,
                "source": self._vsrc[v],
                "claim_radius": self._vds[v],
                "parent": self._vparent[v],
            }
            for e in self.graph.incident_edges(v):
                e = int(e)
                if e not in edges:
                    gu, gv = self.edge_growth(e)
                    edges[e] = {"growth_from_u": gu, "growth_from_v": gv,
                                "weight": int(self.graph.edge_w[e])}
        nodes = {
            n.id: {"y": n.y, "parent": n.parent,
                   "children": n.children, "vertex": n.vertex}
            for n in self.arena.nodes.values() if n.alive
        }
        return {"timestamp": self.stamp, "vertices": vertices, "edges": edges,
                "nodes": nodes}
