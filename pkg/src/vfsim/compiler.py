"""Design-time compilation of a validity frame graph into a dispatch tree."""
from __future__ import annotations

import copy
import math
import numbers
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from vfsim.errors import InvalidArgumentError, InvalidOrderingError, MissingFactorError, \
    NoFeasibleModelError
from vfsim.frames import EnumDomain, format_value, frame_admits, frame_covers, value_key
from vfsim.vfg import VFGraph, admissible_order


@dataclass(frozen=True)
class Branch:
    """One child's share of a factor's value space.

    ``kind`` is ``"value"`` (enumerated value), ``"other"`` (anything not
    matched by a sibling), ``"point"`` (a single interval endpoint) or
    ``"open"`` (the open span between two consecutive endpoints).
    """
    kind: str
    value: object = None
    lo: float = -math.inf
    hi: float = math.inf

    def matches(self, value) -> bool:
        if self.kind == "value":
            return value_key(value) == value_key(self.value)
        if self.kind == "other":
            return True
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            return False
        if self.kind == "point":
            return value == self.value
        return self.lo < value < self.hi

    def representative(self):
        if self.kind in ("value", "point"):
            return self.value
        if self.kind == "other":
            return None
        if math.isinf(self.lo) and math.isinf(self.hi):
            return 0.0
        if math.isinf(self.lo):
            return self.hi - 1.0
        if math.isinf(self.hi):
            return self.lo + 1.0
        return 0.5 * (self.lo + self.hi)

    def admitted_by(self, domain) -> bool:
        if self.kind == "other":
            return False
        return self.representative() in domain

    def label(self, factor: str) -> str:
        if self.kind == "value":
            return f"{factor} = {format_value(self.value)}"
        if self.kind == "point":
            return f"{factor} = {format_value(float(self.value))}"
        if self.kind == "other":
            return f"{factor} = *"
        lo = "-inf" if math.isinf(self.lo) else format_value(float(self.lo))
        hi = "inf" if math.isinf(self.hi) else format_value(float(self.hi))
        return f"{factor} in ({lo}, {hi})"


@dataclass
class Leaf:
    candidates: tuple
    infeasible: bool = False
    reason: str = ""


@dataclass
class Node:
    factor: str
    branches: list  # of (Branch, Node | Leaf)


@dataclass
class DecisionTree:
    root: object
    ordering: tuple
    requested: Mapping
    wcet: dict
    pairs: tuple
    head: Optional[str] = None
    deadline: Optional[float] = None
    factor_cells: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(child) for _, child in node.branches)
        return walk(self.root)

    def leaves(self) -> list:
        out = []

        def walk(node):
            if isinstance(node, Leaf):
                out.append(node)
            else:
                for _, child in node.branches:
                    walk(child)
        walk(self.root)
        return out

    @property
    def tested_factors(self) -> list:
        names = set()

        def walk(node):
            if isinstance(node, Node):
                names.add(node.factor)
                for _, child in node.branches:
                    walk(child)
        walk(self.root)
        return sorted(names)

    def stats(self) -> dict:
        leaves = self.leaves()
        return {"depth": self.depth, "leaves": len(leaves),
                "infeasible": sum(1 for lf in leaves if lf.infeasible)}

    def dump(self) -> str:
        return dump_tree(self)


def factor_cells(graph: VFGraph) -> dict:
    """Partition each factor's value space into cells on which every frame is constant."""
    cells = {}
    for name, domains in graph.factor_domains().items():
        if isinstance(domains[0], EnumDomain):
            values = {}
            for dom in domains:
                for v in dom.values:
                    values.setdefault(value_key(v), v)
            branches = [Branch("value", values[k]) for k in sorted(values)]
            # A factor enumerating both truth values is boolean-typed: no third cell.
            if set(values) != {("b", False), ("b", True)}:
                branches.append(Branch("other"))
        else:
            ends = sorted({float(e) for dom in domains for e in (dom.lo, dom.hi)})
            branches = [Branch("open", lo=-math.inf, hi=ends[0])]
            for i, e in enumerate(ends):
                branches.append(Branch("point", e))
                nxt = ends[i + 1] if i + 1 < len(ends) else math.inf
                branches.append(Branch("open", lo=e, hi=nxt))
            branches.append(Branch("other"))
        cells[name] = branches
    return cells


def build_tree(graph: VFGraph, ordering: Sequence[str], requested: Mapping) -> DecisionTree:
    """Compile ``graph`` into a tree equivalent to :func:`enumerate_admissible`.

    Factors are tested in ``ordering``; a factor is skipped on any path where
    no remaining frame constrains it.
    """
    ordering = list(ordering)
    if len(set(ordering)) != len(ordering):
        raise InvalidOrderingError(f"ordering repeats a factor: {ordering}")
    cells = factor_cells(graph)
    missing = [name for name in cells if name not in ordering]
    if missing:
        raise InvalidOrderingError(f"ordering is missing factors {missing}")
    ordering = [name for name in ordering if name in cells]

    live = [fr for fr in graph.frames.values()
            if not fr.invalidated and frame_covers(fr, requested)]

    def build(frames, remaining):
        for pos, name in enumerate(remaining):
            if any(name in fr.gamma for fr in frames):
                rest = remaining[:pos] + remaining[pos + 1:]
                node = Node(name, [])
                for br in cells[name]:
                    sub = [fr for fr in frames
                           if name not in fr.gamma or br.admitted_by(fr.gamma[name])]
                    node.branches.append((br, build(sub, rest)))
                return node
        ids = tuple(admissible_order(frames))
        if not ids:
            return Leaf((), infeasible=True, reason="no admissible frame")
        return Leaf(ids)

    pairs = tuple(p for p in graph.approximation_pairs())
    return DecisionTree(root=build(live, ordering), ordering=tuple(ordering),
                        requested=dict(requested),
                        wcet={fid: fr.wcet for fid, fr in graph.frames.items()},
                        pairs=pairs, head=graph.head, factor_cells=cells)


def leaf_pairs(candidates: Iterable[str], pairs: Iterable[tuple]) -> list:
    cands = set(candidates)
    return [(o, a) for o, a in pairs if o in cands and a in cands]


def comparison_overhead(frame_id: str, candidates: Sequence[str], tree: DecisionTree) -> float:
    """Extra cost a step pays for running the comparison partner of ``frame_id``."""
    partners = [a if o == frame_id else o for o, a in leaf_pairs(candidates, tree.pairs)
                if frame_id in (o, a)]
    return max((tree.wcet[p] for p in partners), default=0.0)


def prune_for_deadline(tree: DecisionTree, deadline: float) -> DecisionTree:
    """Drop candidates that cannot run inside ``deadline``.

    A frame is dropped when its WCET alone exceeds the budget. When an
    original/approximated pair survives but running both for the comparison
    would not fit, the original is dropped and the approximated frame is kept
    on its own. Leaves left empty are marked infeasible.
    """
    pruned = copy.deepcopy(tree)
    pruned.deadline = deadline
    for leaf in pruned.leaves():
        if leaf.infeasible:
            continue
        keep = [c for c in leaf.candidates if tree.wcet[c] <= deadline]
        changed = True
        while changed:
            changed = False
            for o, a in leaf_pairs(keep, tree.pairs):
                if tree.wcet[o] + tree.wcet[a] > deadline:
                    keep.remove(o)
                    changed = True
                    break
        leaf.candidates = tuple(keep)
        if not keep:
            leaf.infeasible = True
            leaf.reason = f"no candidate fits deadline {format_value(float(deadline))}"
    return pruned


def lookup(tree: DecisionTree, context: Mapping):
    """Walk one root-to-leaf path; returns ``(candidates, nodes_visited)``."""
    node, visited = tree.root, 0
    while isinstance(node, Node):
        if node.factor not in context:
            raise MissingFactorError(node.factor)
        visited += 1
        node = _child(node, context[node.factor])
    if node.infeasible:
        raise NoFeasibleModelError(f"no feasible model for {dict(context)}: {node.reason}",
                                   node.reason, visited)
    return list(node.candidates), visited


def graph_search_baseline(graph: VFGraph, context: Mapping, requested: Mapping):
    """Breadth-first sweep of the whole graph, testing every vertex.

    Returns ``(candidates, vertices_visited)``; vertices unreachable from the
    head are picked up by restarting the sweep, so the count is always ``|V|``.
    """
    order = ([graph.head] if graph.head else []) + sorted(graph.frames)
    seen, admitted, visited = set(), [], 0
    for root in order:
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            fid = queue.popleft()
            visited += 1
            fr = graph.frames[fid]
            if not fr.invalidated and frame_covers(fr, requested) and frame_admits(fr, context):
                admitted.append(fr)
            for nb in graph.neighbours(fid):
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
    return admissible_order(admitted), visited


class HeatMap:
    """Occurrence counts per context cell.

    A cell is a tuple of ``(factor, value)`` pairs sorted by factor name.
    """

    def __init__(self, counts: Optional[Mapping] = None):
        self.counts: Counter = Counter()
        for cell, n in (counts or {}).items():
            self.add(cell, n)

    @staticmethod
    def cell(assignments: Mapping) -> tuple:
        return tuple(sorted(assignments.items()))

    def add(self, cell, n: int = 1):
        if n < 0:
            raise InvalidArgumentError("heat-map counts must be non-negative")
        if isinstance(cell, Mapping):
            cell = self.cell(cell)
        self.counts[tuple(cell)] += n

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def factors(self) -> list:
        return sorted({name for cell in self.counts for name, _ in cell})

    def frequencies(self) -> dict:
        total = self.total
        return {cell: n / total for cell, n in self.counts.items()} if total else {}

    def observed_values(self, factor: str) -> list:
        vals = {}
        for cell in self.counts:
            for name, v in cell:
                if name == factor:
                    vals.setdefault(value_key(v), v)
        return [vals[k] for k in sorted(vals)]

    def __len__(self):
        return len(self.counts)


def order_factors_by_heatmap(heatmap: HeatMap, factors: Sequence[str],
                             route: Optional[Callable[[dict], object]] = None) -> list:
    """Order factors by how much observed mass their value actually redirects.

    With ``route`` (a context -> dispatch result function, see
    :func:`admissible_router`), a factor's weight is the count mass of cells
    whose routing changes when only that factor's value is swapped for another
    observed value. Without it, the weight is the mass lying off the factor's
    most frequent value. Equal weights everywhere keep the input order;
    otherwise ties break by name.
    """
    factors = list(factors)
    if heatmap.total == 0:
        return factors
    present = set(heatmap.factors)
    absent = [f for f in factors if f not in present]
    if absent:
        raise InvalidArgumentError(f"factors {absent} never appear in the heat map")

    weights = dict.fromkeys(factors, 0)
    if route is None:
        for f in factors:
            per_value = Counter()
            for cell, n in heatmap.counts.items():
                per_value[value_key(dict(cell)[f])] += n
            weights[f] = heatmap.total - max(per_value.values())
    else:
        observed = {f: heatmap.observed_values(f) for f in factors}
        for cell, n in heatmap.counts.items():
            ctx = dict(cell)
            base = route(ctx)
            for f in factors:
                here = value_key(ctx[f])
                if any(route({**ctx, f: alt}) != base
                       for alt in observed[f] if value_key(alt) != here):
                    weights[f] += n
    if len(set(weights.values())) <= 1:
        return factors
    return sorted(factors, key=lambda f: (-weights[f], f))


def choose_ordering(graph: VFGraph, requested: Mapping, heatmap: HeatMap,
                    default: Sequence[str]) -> list:
    """Heat-map ordering, kept only if it does not lengthen the expected lookup path.

    The weight sort is a heuristic; comparing against ``default`` on the
    compiled trees makes the result never worse than the declaration order.
    """
    default = list(default)
    if heatmap.total == 0:
        return default
    proposed = order_factors_by_heatmap(heatmap, default,
                                        route=admissible_router(graph, requested))
    if proposed == default:
        return default
    mine = expected_path_length(build_tree(graph, proposed, requested), heatmap)
    theirs = expected_path_length(build_tree(graph, default, requested), heatmap)
    return proposed if mine <= theirs else default


def admissible_router(graph: VFGraph, requested: Mapping) -> Callable:
    from vfsim.vfg import enumerate_admissible

    def route(ctx):
        return tuple(enumerate_admissible(graph, ctx, requested))
    return route


def expected_path_length(tree: DecisionTree, heatmap: HeatMap) -> float:
    """Mean number of tests a lookup performs under the heat-map distribution."""
    total = heatmap.total
    if total == 0:
        return 0.0
    acc = 0.0
    for cell, n in heatmap.counts.items():
        acc += n * _visits(tree, dict(cell))
    return acc / total


def _visits(tree, ctx):
    node, visited = tree.root, 0
    while isinstance(node, Node):
        if node.factor not in ctx:
            raise MissingFactorError(node.factor)
        visited += 1
        node = _child(node, ctx[node.factor])
    return visited


def _child(node, value):
    for br, child in node.branches:
        if br.matches(value):
            return child
    raise InvalidArgumentError(f"value {value!r} is outside the domain of factor {node.factor!r}")


def dump_tree(tree: DecisionTree) -> str:
    """Indented text form: one node per line, two spaces per level."""
    lines = []

    def leaf_text(leaf):
        if leaf.infeasible:
            return f"INFEASIBLE ({leaf.reason})"
        return "[" + ", ".join(leaf.candidates) + "]"

    def walk(node, depth, prefix):
        pad = "  " * depth
        if isinstance(node, Leaf):
            lines.append(f"{pad}{prefix}leaf {leaf_text(node)}")
            return
        lines.append(f"{pad}{prefix}test {node.factor}")
        for br, child in node.branches:
            walk(child, depth + 1, br.label(node.factor) + " -> ")

    walk(tree.root, 0, "")
    return "\n".join(lines) + "\n"
