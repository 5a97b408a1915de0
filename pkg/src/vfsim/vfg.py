"""Validity Frame Graph: the design-time mega-model over registered frames."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from vfsim.errors import ConsistencyError, CycleError
from vfsim.frames import (Context, ValidityFrame, domain_region_contains, frame_admits,
                          frame_covers)

__all__ = ["Context", "Edge", "EdgeKind", "VFGraph", "enumerate_admissible"]


class EdgeKind(str, Enum):
    ABSTRACT = "Abstract"
    APPROXIMATE = "Approximate"
    VIEW_DECOMPOSITION = "ViewDecomposition"


@dataclass(frozen=True, order=True)
class Edge:
    source: str
    target: str
    kind: EdgeKind


class VFGraph:
    """Frames as vertices, typed edges between them, one head vertex.

    Every mutation is validated before it is applied, so a graph built only
    through :meth:`add_frame` and :meth:`add_edge` always satisfies
    :meth:`check`.
    """

    def __init__(self):
        self.frames: dict[str, ValidityFrame] = {}
        self.edges: list[Edge] = []
        self.head: str | None = None
        self._factor_kinds: dict[str, type] = {}

    def __len__(self):
        return len(self.frames)

    def __contains__(self, frame_id):
        return frame_id in self.frames

    def __getitem__(self, frame_id) -> ValidityFrame:
        return self.frames[frame_id]

    @property
    def vertices(self):
        return list(self.frames)

    def add_frame(self, frame: ValidityFrame, head: bool = False) -> "VFGraph":
        if frame.frame_id in self.frames:
            raise ConsistencyError(f"duplicate frame id {frame.frame_id!r}", frame.frame_id)
        if head and self.head is not None:
            raise ConsistencyError(
                f"graph already has head {self.head!r}; cannot make {frame.frame_id!r} head",
                frame.frame_id)
        kinds = {}
        for name, dom in frame.gamma.items():
            seen = self._factor_kinds.get(name)
            if seen is not None and seen is not type(dom):
                raise ConsistencyError(
                    f"factor {name!r} mixes interval and enumerated domains "
                    f"(frame {frame.frame_id!r})", name)
            kinds[name] = type(dom)
        self._factor_kinds.update(kinds)
        self.frames[frame.frame_id] = frame
        if head:
            self.head = frame.frame_id
        return self

    def set_head(self, frame_id: str) -> "VFGraph":
        if frame_id not in self.frames:
            raise ConsistencyError(f"unknown frame {frame_id!r}", frame_id)
        if any(e.target == frame_id for e in self.edges):
            raise ConsistencyError(f"head {frame_id!r} must not have incoming edges", frame_id)
        self.head = frame_id
        return self

    def add_edge(self, source: str, target: str, kind) -> "VFGraph":
        kind = EdgeKind(kind)
        for end in (source, target):
            if end not in self.frames:
                raise ConsistencyError(f"unknown frame {end!r}", end)
        if target == self.head:
            raise ConsistencyError(f"head {target!r} must not have incoming edges", target)
        self._check_kind(self.frames[source], self.frames[target], kind)
        if source == target or self._reaches(target, source):
            raise CycleError(f"edge {source} -> {target} closes a cycle", (source, target))
        edge = Edge(source, target, kind)
        if edge not in self.edges:
            self.edges.append(edge)
        return self

    @staticmethod
    def _check_kind(src: ValidityFrame, dst: ValidityFrame, kind: EdgeKind):
        sp, dp = src.pi.names, dst.pi.names
        sg, dg = src.gamma.names, dst.gamma.names
        label = f"{kind.value} edge {src.frame_id} -> {dst.frame_id}"
        if kind is EdgeKind.ABSTRACT:
            extra = dp - sp
            if extra:
                raise ConsistencyError(f"{label}: target adds properties {sorted(extra)}",
                                       sorted(extra)[0])
            if dp == sp:
                raise ConsistencyError(f"{label}: abstraction must remove at least one property",
                                       None)
        elif kind is EdgeKind.APPROXIMATE:
            if dp != sp:
                diff = sorted(sp ^ dp)
                raise ConsistencyError(
                    f"{label}: approximation must retain the property set, differs in {diff}",
                    diff[0])
            if not domain_region_contains(src.gamma, dst.gamma):
                bad = next(n for n, dom in src.gamma.items()
                           if n not in dst.gamma or not dom.contains(dst.gamma[n]))
                raise ConsistencyError(
                    f"{label}: factor {bad!r} widens the validity region of the source", bad)
        else:
            if not dp <= sp:
                raise ConsistencyError(f"{label}: target adds properties {sorted(dp - sp)}",
                                       sorted(dp - sp)[0])
            if not dg <= sg:
                raise ConsistencyError(f"{label}: target adds factors {sorted(dg - sg)}",
                                       sorted(dg - sg)[0])
            if dp == sp and dg == sg:
                raise ConsistencyError(
                    f"{label}: view must represent a strict portion of pi and/or gamma", None)

    def _reaches(self, start: str, goal: str) -> bool:
        stack, seen = [start], {start}
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            for e in self.edges:
                if e.source == node and e.target not in seen:
                    seen.add(e.target)
                    stack.append(e.target)
        return False

    def neighbours(self, frame_id: str) -> list:
        out = {e.target for e in self.edges if e.source == frame_id}
        out |= {e.source for e in self.edges if e.target == frame_id}
        return sorted(out)

    def approximation_pairs(self) -> list:
        """``(original_id, approximated_id)`` for every Approximate edge."""
        return sorted((e.source, e.target) for e in self.edges
                      if e.kind is EdgeKind.APPROXIMATE)

    def factor_domains(self) -> dict:
        """Every factor name mapped to the list of domains frames declare for it."""
        out: dict[str, list] = {}
        for fr in self.frames.values():
            for name, dom in fr.gamma.items():
                out.setdefault(name, []).append(dom)
        return dict(sorted(out.items()))

    def check(self):
        """Re-verify every invariant from scratch; raises on the first violation."""
        if self.head is not None:
            if self.head not in self.frames:
                raise ConsistencyError(f"head {self.head!r} is not a vertex", self.head)
            if any(e.target == self.head for e in self.edges):
                raise ConsistencyError("head has incoming edges", self.head)
        kinds = {}
        for fr in self.frames.values():
            for name, dom in fr.gamma.items():
                if kinds.setdefault(name, type(dom)) is not type(dom):
                    raise ConsistencyError(f"factor {name!r} mixes domain kinds", name)
        for e in self.edges:
            self._check_kind(self.frames[e.source], self.frames[e.target], e.kind)
        # Kahn's algorithm; leftover vertices mean a cycle.
        indeg = {v: 0 for v in self.frames}
        for e in self.edges:
            indeg[e.target] += 1
        queue = deque(v for v, d in indeg.items() if d == 0)
        seen = 0
        while queue:
            node = queue.popleft()
            seen += 1
            for e in self.edges:
                if e.source == node:
                    indeg[e.target] -= 1
                    if indeg[e.target] == 0:
                        queue.append(e.target)
        if seen != len(self.frames):
            raise CycleError("graph contains a cycle")
        return True


def admissible_order(frames) -> list:
    return [fr.frame_id for fr in sorted(frames, key=lambda fr: (fr.wcet, fr.frame_id))]


def enumerate_admissible(graph: VFGraph, context: Mapping, requested: Mapping) -> list:
    """All non-invalidated frames that admit ``context`` and cover ``requested``.

    Ordered by ascending WCET, ties by frame id. This exhaustive filter is the
    reference the compiled decision tree is checked against.
    """
    chosen = [fr for fr in graph.frames.values()
              if not fr.invalidated and frame_covers(fr, requested)
              and frame_admits(fr, context)]
    return admissible_order(chosen)
