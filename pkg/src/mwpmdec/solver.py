"""High-level decoder handle: a reusable solver bound to one graph."""

from __future__ import annotations

from .dual_parity import DualParity
from .framework import ContractError, DecodeResult, MatchingContext
from .graphs import ModelGraph, Syndrome


def make_primal(name, dual, trace=None):
    from .primal_standard import StandardPrimal
    from .primal_unionfind import LimitedPrimal, UnionFindPrimal

    if name == "standard" or name == "parity":
        return StandardPrimal(dual, trace=trace)
    if name == "uf":
        return UnionFindPrimal(dual, trace=trace)
    if isinstance(name, tuple) and name[0] == "limited":
        return LimitedPrimal(dual, k=name[1], trace=trace)
    raise ContractError(f"unknown primal module {name!r}")


class Solver:
    """Decoder over one immutable graph.  Reusable across shots: reset is
    O(1) regardless of graph size."""

    def __init__(self, graph: ModelGraph, primal="standard",
                 check_invariants: bool = False, trace: bool = False):
        self.graph = graph
        self.primal_name = primal
        self.check_invariants = check_invariants
        self.dual = DualParity(graph, check_invariants=check_invariants)
        self.trace = [] if trace else None
        self._fresh = True

    def reset(self) -> None:
        self.dual.reset()
        if self.trace is not None:
            self.trace = []
        self._fresh = True

    def decode(self, syndrome: Syndrome) -> DecodeResult:
        if not self._fresh:
            self.reset()
        self._fresh = False
        primal = make_primal(self.primal_name, self.dual, trace=self.trace)
        ctx = MatchingContext(self.graph, self.dual, primal, trace=self.trace)
        result = ctx.decode(syndrome)
        self.last_work_units = ctx.work_units
        if self.check_invariants:
            from .framework import verify_correction
            if not verify_correction(self.graph, syndrome, result.correction):
                raise ContractError("correction does not reproduce the syndrome")
        return result


def decode(graph: ModelGraph, syndrome: Syndrome, primal="standard",
           check_invariants: bool = False) -> DecodeResult:
    """One-shot decode of a syndrome on a graph."""
    return Solver(graph, primal=primal, check_invariants=check_invariants).decode(syndrome)
