"""Divide-and-fuse decoding over measurement-round partitions.

The 3D decoding problem is split along the time axis: leaf partitions of M
consecutive rounds, separated by single boundary rounds whose vertices are
temporarily treated as virtual.  Leaves are solved independently (in parallel
when workers > 1); a fuse operation restores one boundary round to ordinary,
injects its withheld defects as fresh roots, dissolves matches into its
temporary boundary vertices, keeps every dual variable, and resumes the solve
loop over the combined region.  Solutions fuse up a full binary tree
(balanced, linear, or mixed) until the root holds the global optimum.

Worker pools only parallelize leaf solves; fuses run in the coordinating
process on the shared solver state, in a deterministic ready order, so the
decode result is identical for any worker count.  Stream-decoding latency is
evaluated on a virtual clock driven by deterministic work counters, so those
numbers are hardware-independent.
"""

from __future__ import annotations

import json
import os
import pickle
import time
from dataclasses import dataclass

from .dual_parity import DualParity
from .framework import (
    ContractError,
    Match,
    MatchingContext,
    TightEdge,
)
from .graphs import ModelGraph, Syndrome
from .primal_standard import StandardPrimal

VIRTUAL_TIME_PER_WORK_UNIT = 0.01


@dataclass
class FusionJob:
    kind: str                   # "leaf" | "fuse"
    index: int                  # job id; leaves are 0..K-1
    leaf_span: tuple            # [lo, hi) leaf indices covered
    left: int = -1
    right: int = -1
    boundary_round: int = -1


@dataclass
class FusionPlan:
    leaves: list                # inclusive round ranges (lo, hi) per leaf
    boundaries: list            # boundary round between leaf i and i+1
    jobs: list                  # FusionJob list, leaves first
    kind: str
    leaf_rounds: int
    mix_height: int = 0
    cycle_time: float = 1.0

    @property
    def num_leaves(self) -> int:
        return len(self.leaves)

    @property
    def root_job(self) -> int:
        return len(self.jobs) - 1

    def fusion_jobs(self):
        return [j for j in self.jobs if j.kind == "fuse"]

    def to_obj(self) -> dict:
        return {
            "leaves": [[lo, hi] for lo, hi in self.leaves],
            "tree": [
                {"kind": j.kind, "index": j.index, "left": j.left, "right": j.right,
                 "boundary_round": j.boundary_round}
                for j in self.jobs
            ],
            "kind": self.kind,
            "M": self.leaf_rounds,
            "mix_height": self.mix_height,
            "cycle_time": self.cycle_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":"))


def make_plan(g: ModelGraph, leaf_rounds: int, kind: str = "balanced",
              mix_height: int = 0, cycle_time: float = 1.0) -> FusionPlan:
    """Time-slice the graph's rounds into leaves of ``leaf_rounds`` rounds
    (the last may be short), one boundary round between consecutive leaves,
    and a full binary fusion tree of the requested shape over the leaves."""
    if g.round_size == 0:
        raise ContractError("graph carries no round layout; cannot partition")
    if leaf_rounds < 1:
        raise ContractError(f"leaf partition size must be >= 1, got {leaf_rounds}")
    rounds = g.num_rounds
    leaves = []
    boundaries = []
    r = 0
    while r < rounds:
        hi = min(r + leaf_rounds - 1, rounds - 1)
        leaves.append((r, hi))
        r = hi + 2
        if hi + 1 < rounds:
            boundaries.append(hi + 1)
    if len(leaves) > 1 and leaves[-1][0] > leaves[-1][1]:
        raise ContractError("internal partition error")
    # a trailing boundary round with no leaf after it folds into the last leaf
    if len(boundaries) == len(leaves):
        folded = boundaries.pop()
        leaves[-1] = (leaves[-1][0], folded)

    jobs = [FusionJob("leaf", i, (i, i + 1)) for i in range(len(leaves))]

    def fuse_of(left: FusionJob, right: FusionJob) -> FusionJob:
        job = FusionJob("fuse", len(jobs), (left.leaf_span[0], right.leaf_span[1]),
                        left=left.index, right=right.index,
                        boundary_round=boundaries[left.leaf_span[1] - 1])
        jobs.append(job)
        return job

    def balanced(lo: int, hi: int) -> FusionJob:
        if hi - lo == 1:
            return jobs[lo]
        mid = lo + (hi - lo + 1) // 2
        return fuse_of(balanced(lo, mid), balanced(mid, hi))

    k = len(leaves)
    if k == 1:
        pass
    elif kind == "balanced":
        balanced(0, k)
    elif kind == "linear":
        acc = jobs[0]
        for i in range(1, k):
            acc = fuse_of(acc, jobs[i])
    elif kind == "mixed":
        size = 1 << max(mix_height, 0)
        groups = []
        lo = 0
        while lo < k:
            hi = min(lo + size, k)
            groups.append(balanced(lo, hi) if hi - lo > 1 else jobs[lo])
            lo = hi
        acc = groups[0]
        for grp in groups[1:]:
            acc = fuse_of(acc, grp)
    else:
        raise ContractError(f"unknown fusion tree kind {kind!r}")
    return FusionPlan(leaves, boundaries, jobs, kind, leaf_rounds,
                      mix_height=mix_height, cycle_time=cycle_time)


def plan_regions(plan: FusionPlan, g: ModelGraph):
    """Vertex sets (as round lists) of the two child regions of every fusion
    job, for separator checking."""
    out = []
    for job in plan.fusion_jobs():
        left = plan.jobs[job.left]
        right = plan.jobs[job.right]
        left_rounds = list(range(plan.leaves[left.leaf_span[0]][0],
                                 plan.leaves[left.leaf_span[1] - 1][1] + 1))
        right_rounds = list(range(plan.leaves[right.leaf_span[0]][0],
                                  plan.leaves[right.leaf_span[1] - 1][1] + 1))
        out.append((job.index, left_rounds, right_rounds, job.boundary_round))
    return out


@dataclass
class TimingReport:
    decode_time: float
    latency: float
    rounds: int
    fusion_durations: list
    fusion_touched: list
    events: list                    # {"job", "start", "end", "worker"}
    job_work_units: dict            # job id -> deterministic work units
    schedule: str = "batch"

    def event_log_json(self) -> str:
        return "\n".join(json.dumps(e, sort_keys=True) for e in self.events)


# -- leaf solving and the worker pool ----------------------------------------------


def _run_leaf_on(dual: DualParity, task):
    leaf_index, defects = task
    dual.soft_reset()
    primal = StandardPrimal(dual)
    ctx = MatchingContext(dual.graph, dual, primal, trace=None)
    t0 = time.perf_counter()
    ctx.load(Syndrome(tuple(defects)))
    ctx.run()
    t1 = time.perf_counter()
    state = _export_state(dual)
    return leaf_index, state, ctx.work_units, (t0, t1, os.getpid())


def _export_state(dual: DualParity) -> dict:
    # expanded blossoms are dead and unreferenced: only live nodes transfer
    nodes = []
    for nid in sorted(dual.arena.nodes):
        n = dual.arena.nodes[nid]
        if not n.alive:
            continue
        rec = None
        if n.match is not None:
            rec = (n.match.kind, n.match.other, _edge_obj(n.match.edge))
        nodes.append({
            "id": n.id,
            "y": n.y,
            "vertex": n.vertex,
            "children": n.children,
            "cycle": [_edge_obj(e) for e in n.cycle] if n.cycle else None,
            "links": [_edge_obj(e) for e in n.links] if n.links else None,
            "parent": n.parent,
            "match": rec,
        })
    cover = []
    for nid in sorted(dual.owned):
        for v in dual.owned[nid]:
            if dual.owner_of(v) == nid:
                cover.append((v, nid, dual._vsrc[v], dual._vds[v],
                              dual._vparent[v], dual._vpedge[v]))
    return {"nodes": nodes, "cover": cover}


def _edge_obj(e: TightEdge):
    return (e.touch1, e.touch2, e.weight, tuple(e.path))


def _edge_from_obj(obj) -> TightEdge:
    return TightEdge(obj[0], obj[1], obj[2], tuple(obj[3]))


class _ForkWorkers:
    """Persistent forked leaf solvers over raw pipes.

    One request/response round per worker per shot keeps the coordination
    cost far below the leaf work.  The graph is shared with the children by
    fork, never copied; each child keeps one scratch solver across shots.
    """

    def __init__(self, workers: int, graph: ModelGraph, boundary_vertices, check: bool):
        self.channels = []
        for _ in range(workers):
            task_r, task_w = os.pipe()
            res_r, res_w = os.pipe()
            pid = os.fork()
            if pid == 0:
                os.close(task_w)
                os.close(res_r)
                status = 1
                try:
                    dual = DualParity(graph, check_invariants=check)
                    dual.set_virtual_override(boundary_vertices, True)
                    with os.fdopen(task_r, "rb") as rf, os.fdopen(res_w, "wb") as wf:
                        while True:
                            batch = pickle.load(rf)
                            if batch is None:
                                status = 0
                                break
                            out = [_run_leaf_on(dual, task) for task in batch]
                            pickle.dump(out, wf, protocol=pickle.HIGHEST_PROTOCOL)
                            wf.flush()
                except (EOFError, BrokenPipeError, KeyboardInterrupt):
                    status = 0
                finally:
                    os._exit(status)
            os.close(task_r)
            os.close(res_w)
            self.channels.append((pid, os.fdopen(task_w, "wb"), os.fdopen(res_r, "rb")))

    def run(self, tasks):
        """Solve tasks split into contiguous blocks, results in task order.

        Two rounds of blocks per worker smooth out load imbalance while
        keeping the message count small."""
        n = len(self.channels)
        rounds = 2 if len(tasks) >= 2 * n else 1
        per = (len(tasks) + n * rounds - 1) // (n * rounds) if tasks else 0
        for r in range(rounds):
            for w, (_, wf, _) in enumerate(self.channels):
                i = r * n + w
                block = tasks[i * per:(i + 1) * per]
                pickle.dump(block, wf, protocol=pickle.HIGHEST_PROTOCOL)
                wf.flush()
        for r in range(rounds):
            for _, _, rf in self.channels:
                for item in pickle.load(rf):
                    yield item

    def close(self):
        for pid, wf, rf in self.channels:
            try:
                pickle.dump(None, wf)
                wf.flush()
            except (BrokenPipeError, ValueError):
                pass
            wf.close()
            rf.close()
            os.waitpid(pid, 0)
        self.channels = []


class FusionDecoder:
    """Fusion decoding of one graph under one plan.  Reusable across shots."""

    def __init__(self, graph: ModelGraph, plan: FusionPlan,
                 check_invariants: bool = False):
        self.graph = graph
        self.plan = plan
        self.check_invariants = check_invariants
        self.boundary_vertices = []
        for b in plan.boundaries:
            self.boundary_vertices.extend(graph.round_vertices(b))
        self.dual = DualParity(graph, check_invariants=check_invariants)
        self._pool = None
        self._pool_workers = 0
        self._local_scratch = None
        self._virt_index = {}
        self._round_owner = {}
        for i, (lo, hi) in enumerate(plan.leaves):
            for r in range(lo, hi + 1):
                self._round_owner[r] = ("leaf", i)
        for b in plan.boundaries:
            self._round_owner[b] = ("boundary", b)

    # -- partitioning ------------------------------------------------------------

    def split_syndrome(self, syndrome: Syndrome):
        leaf_defects = [[] for _ in self.plan.leaves]
        boundary_defects = {b: [] for b in self.plan.boundaries}
        for v in sorted(syndrome.defects):
            kind, key = self._round_owner[self.graph.round_of(v)]
            if kind == "leaf":
                leaf_defects[key].append(v)
            else:
                boundary_defects[key].append(v)
        return leaf_defects, boundary_defects

    # -- worker pool --------------------------------------------------------------

    def _ensure_pool(self, workers: int):
        if workers <= 1:
            return None
        if self._pool is not None and self._pool_workers == workers:
            return self._pool
        self.close()
        self._pool = _ForkWorkers(workers, self.graph, self.boundary_vertices,
                                  self.check_invariants)
        self._pool_workers = workers
        return self._pool

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool = None
            self._pool_workers = 0

    def __del__(self):  # pragma: no cover
        try:
            self.close()
        except Exception:
            pass

    # -- decoding -------------------------------------------------------------------

    def decode(self, syndrome: Syndrome, workers: int = 1):
        if workers < 1:
            raise ContractError(f"worker count must be >= 1, got {workers}")
        plan = self.plan
        graph = self.graph
        self.dual.reset()
        self.dual.set_virtual_override(self.boundary_vertices, True)
        self._virt_index = {b: [] for b in plan.boundaries}
        primal = StandardPrimal(self.dual, trace=[])
        ctx = MatchingContext(graph, self.dual, primal, trace=primal.trace)

        leaf_defects, boundary_defects = self.split_syndrome(syndrome)
        tasks = [(i, leaf_defects[i]) for i in range(plan.num_leaves)]

        events = []
        job_work = {}
        fusion_durations = []
        fusion_touched = []
        t_start = time.perf_counter()

        if workers == 1:
            if self._local_scratch is None:
                self._local_scratch = DualParity(graph, check_invariants=self.check_invariants)
                self._local_scratch.set_virtual_override(self.boundary_vertices, True)
            scratch = self._local_scratch
            results = (_run_leaf_on(scratch, task) for task in tasks)
        else:
            pool = self._ensure_pool(workers)
            results = pool.run(tasks)

        done = set()
        fusions = plan.fusion_jobs()
        worker_ids = {}

        def worker_index(pid):
            if pid not in worker_ids:
                worker_ids[pid] = len(worker_ids)
            return worker_ids[pid]

        for leaf_index, state, work, (t0, t1, pid) in results:
            self._install(ctx, state)
            done.add(leaf_index)
            job_work[leaf_index] = work
            events.append({"job": f"leaf:{leaf_index}", "start": t0 - t_start,
                           "end": t1 - t_start, "worker": worker_index(pid)})
            progressed = True
            while progressed:
                progressed = False
                for job in fusions:
                    if job.index in done:
                        continue
                    if job.left in done and job.right in done:
                        self._fuse(ctx, job, boundary_defects, events, job_work,
                                   fusion_durations, fusion_touched, t_start)
                        done.add(job.index)
                        progressed = True
        if plan.root_job not in done:
            raise ContractError("fusion tree did not complete")

        result = ctx.finish()
        t_end = time.perf_counter()
        report = TimingReport(
            decode_time=t_end - t_start,
            latency=t_end - t_start,
            rounds=graph.num_rounds,
            fusion_durations=fusion_durations,
            fusion_touched=fusion_touched,
            events=events,
            job_work_units=job_work,
            schedule="batch",
        )
        return result, report

    def _install(self, ctx: MatchingContext, state: dict) -> None:
        arena = ctx.dual.arena
        remap = {}
        deferred_matches = []
        for rec in state["nodes"]:
            if rec["children"] is None:
                node = arena.new_leaf(rec["vertex"])
            else:
                node = arena.new_blossom(
                    [remap[c] for c in rec["children"]],
                    cycle=[_edge_from_obj(e) for e in rec["cycle"]] if rec["cycle"] else None,
                    links=[_edge_from_obj(e) for e in rec["links"]] if rec["links"] else None,
                )
            node.y = rec["y"]
            remap[rec["id"]] = node.id
            if rec["match"] is not None:
                deferred_matches.append((node.id, rec["match"]))
        for nid, (kind, other, edge) in deferred_matches:
            other_id = other if kind == "virtual" else remap[other]
            arena[nid].match = Match(kind, other_id, _edge_from_obj(edge))
            if kind == "virtual":
                lst = self._virt_index.get(ctx.graph.round_of(other_id))
                if lst is not None:
                    lst.append(nid)
        dual = ctx.dual
        for v, owner, src, ds, pv, pe in state["cover"]:
            if dual.owner_of(v) != -1:
                raise ContractError(f"vertex {v} installed twice")
            dual._set_vertex(v, remap[owner], src, ds, pv, pe)
            dual.owned.setdefault(remap[owner], []).append(v)

    def _fuse(self, ctx, job, boundary_defects, events, job_work,
              fusion_durations, fusion_touched, t_start) -> None:
        dual = ctx.dual
        primal = ctx.primal
        graph = ctx.graph
        b = job.boundary_round
        t0 = time.perf_counter()
        work0 = ctx.work_units
        trace_mark = len(primal.trace) if primal.trace is not None else 0
        touched = set()

        round_vs = list(graph.round_vertices(b))
        dual.set_virtual_override(round_vs, False)
        # matches into the dissolved temporary boundary become fresh roots
        round_set = set(round_vs)
        for nid in self._virt_index.pop(b, []):
            if not dual.arena.is_parentless(nid):
                continue
            rec = dual.arena[nid].match
            if rec is not None and rec.kind == "virtual" and rec.other in round_set:
                primal.make_root(nid)
                touched.add(nid)
        for v in boundary_defects.get(b, []):
            node = dual.add_defect(v)
            primal.make_root(node.id)
            touched.add(node.id)
        if self.check_invariants:
            dual.assert_feasible()
        ctx.run()
        t1 = time.perf_counter()
        if primal.trace is not None:
            for ev in primal.trace[trace_mark:]:
                touched.update(_event_nodes(ev))
                if ev[0] == "match_virtual":
                    lst = self._virt_index.get(graph.round_of(ev[2]))
                    if lst is not None:
                        lst.append(ev[1])
        fusion_durations.append(t1 - t0)
        fusion_touched.append(len(touched))
        job_work[job.index] = ctx.work_units - work0 + 1
        events.append({"job": f"fuse:{job.index}", "start": t0 - t_start,
                       "end": t1 - t_start, "worker": -1})


def _event_nodes(ev):
    kind = ev[0]
    if kind == "match_virtual":
        return (ev[1],)
    if kind == "augment":
        return (ev[1], ev[2])
    if kind == "attach":
        return ev[1:4]
    if kind == "blossom":
        return tuple(ev[1]) + (ev[2],)
    if kind == "expand":
        return (ev[1],)
    return ()


# -- virtual-clock schedule simulation ----------------------------------------------


def simulate_schedule(plan: FusionPlan, job_work_units: dict, workers: int,
                      stream: bool, cycle_time: float = None,
                      unit_cost: float = VIRTUAL_TIME_PER_WORK_UNIT):
    """Deterministic virtual-clock schedule of a decoded shot.

    Job durations are work units times a fixed virtual cost.  In stream mode
    a leaf is ready once its last round has arrived (round r completes at
    virtual time (r+1)*cycle_time) and a fuse additionally waits for its
    boundary round; in batch mode everything is ready at time zero.  Returns
    (decode_time, latency): latency counts from the arrival of the last round.
    """
    import heapq

    cycle = plan.cycle_time if cycle_time is None else cycle_time
    durations = {j: job_work_units.get(j, 0) * unit_cost for j in range(len(plan.jobs))}
    data_ready = {}
    for job in plan.jobs:
        if job.kind == "leaf":
            hi = plan.leaves[job.index][1]
            data_ready[job.index] = (hi + 1) * cycle if stream else 0.0
        else:
            data_ready[job.index] = (job.boundary_round + 1) * cycle if stream else 0.0

    deps_left = {}
    parent = {}
    for job in plan.jobs:
        if job.kind == "fuse":
            deps_left[job.index] = 2
            parent[job.left] = job.index
            parent[job.right] = job.index

    ready = []
    for job in plan.jobs:
        if job.kind == "leaf":
            heapq.heappush(ready, (data_ready[job.index], job.index))
    workers_free = [(0.0, w) for w in range(workers)]
    heapq.heapify(workers_free)
    finish = {}
    t_last = 0.0
    while ready:
        rt, jid = heapq.heappop(ready)
        ft, wid = heapq.heappop(workers_free)
        start = max(rt, ft)
        end = start + durations[jid]
        finish[jid] = end
        t_last = max(t_last, end)
        heapq.heappush(workers_free, (end, wid))
        pj = parent.get(jid)
        if pj is not None:
            deps_left[pj] -= 1
            if deps_left[pj] == 0:
                left, right = plan.jobs[pj].left, plan.jobs[pj].right
                rt_p = max(finish[left], finish[right], data_ready[pj])
                heapq.heappush(ready, (rt_p, pj))
    decode_time = t_last
    if stream:
        last_round = plan.leaves[-1][1]
        for b in plan.boundaries:
            last_round = max(last_round, b)
        latency = t_last - (last_round + 1) * cycle
    else:
        latency = t_last
    return decode_time, latency
