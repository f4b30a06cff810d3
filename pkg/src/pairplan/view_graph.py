"""Geometry-aware pair selection on a cycle of views.

Views are vertices ``0..n-1`` of the cycle graph, ordered by capture. A small
set of offsets proposes candidate chords, each chord is weighted from its
wrap-around distance, weak chords are dropped, and a degree-bounded
high-weight subgraph is picked from what remains.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

__all__ = [
    "RangeClass",
    "ImportanceParams",
    "PairingProblem",
    "CandidateEdge",
    "PairingPlan",
    "CapacityError",
    "default_offsets",
    "circular_distance",
    "decay_phi",
    "classify_range",
    "edge_importance",
    "generate_candidates",
    "filter_by_importance",
    "select_subgraph_greedy",
    "select_subgraph_exact",
    "expand_to_directed_pairs",
    "check_connectivity",
    "plan_gaps",
    "plan_to_dict",
    "plan_to_dot",
]


class CapacityError(ValueError):
    """Raised when an exact search is asked to handle too many edges."""


class RangeClass(str, enum.Enum):
    LOCAL = "local"
    MEDIUM = "medium"
    LONG = "long"


DEFAULT_ALPHA = {RangeClass.LOCAL: 1.0, RangeClass.MEDIUM: 0.7, RangeClass.LONG: 0.4}
DEFAULT_BETA = {RangeClass.LOCAL: 0.0, RangeClass.MEDIUM: 0.0, RangeClass.LONG: 0.0}


def _range_map(values: Mapping | None, default: Mapping) -> dict[RangeClass, float]:
    out = dict(default)
    for key, val in (values or {}).items():
        out[RangeClass(key)] = float(val)
    return out


@dataclass(frozen=True)
class ImportanceParams:
    """Parameters of the distance -> importance map.

    ``alpha`` and ``beta`` may be given with string keys (``"local"`` ...);
    missing classes fall back to the defaults.
    """

    tau: float = 2.0
    alpha: Mapping[RangeClass, float] = field(default_factory=lambda: dict(DEFAULT_ALPHA))
    beta: Mapping[RangeClass, float] = field(default_factory=lambda: dict(DEFAULT_BETA))
    w_min: float = 0.0
    local_max: int = 2
    medium_max: int = 3
    decay: Callable[[int, float], float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _range_map(self.alpha, DEFAULT_ALPHA))
        object.__setattr__(self, "beta", _range_map(self.beta, DEFAULT_BETA))
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.w_min < 0:
            raise ValueError(f"w_min must be >= 0, got {self.w_min}")
        if self.local_max < 1:
            raise ValueError(f"local_max must be >= 1, got {self.local_max}")
        if not self.local_max < self.medium_max:
            raise ValueError(
                f"local_max ({self.local_max}) must be < medium_max ({self.medium_max})"
            )

    @classmethod
    def for_views(cls, n: int, **overrides) -> "ImportanceParams":
        """Defaults scaled to ``n`` views: medium bound is ceil(n/4), kept above local."""
        local_max = overrides.pop("local_max", 2)
        medium_max = overrides.pop("medium_max", None)
        if medium_max is None:
            medium_max = max(math.ceil(n / 4), local_max + 1)
        return cls(local_max=local_max, medium_max=medium_max, **overrides)


def default_offsets(n: int) -> tuple[int, ...]:
    """Powers of two up to floor(n/2)."""
    half = n // 2
    offsets = []
    k = 1
    while k <= half:
        offsets.append(k)
        k *= 2
    return tuple(offsets)


@dataclass(frozen=True)
class PairingProblem:
    n: int
    offsets: tuple[int, ...] = ()
    params: ImportanceParams | None = None
    degree_budget: int = 4
    keep_ring: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 views, got n={self.n}")
        offsets = tuple(sorted(set(int(k) for k in self.offsets))) or default_offsets(self.n)
        half = self.n // 2
        bad = [k for k in offsets if not 1 <= k <= half]
        if bad:
            raise ValueError(f"offsets must lie in [1, {half}] for n={self.n}, got {bad}")
        object.__setattr__(self, "offsets", offsets)
        if self.params is None:
            object.__setattr__(self, "params", ImportanceParams.for_views(self.n))
        if self.degree_budget < 1:
            raise ValueError(f"degree_budget must be >= 1, got {self.degree_budget}")


@dataclass(frozen=True, order=True)
class CandidateEdge:
    i: int
    j: int
    distance: int = field(compare=False)
    range: RangeClass = field(compare=False)
    weight: float = field(compare=False)

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError(f"self-loop on view {self.i}")
        if self.i > self.j:
            i, j = self.j, self.i
            object.__setattr__(self, "i", i)
            object.__setattr__(self, "j", j)
        if self.weight < 0:
            raise ValueError(f"negative weight on edge ({self.i}, {self.j})")

    @property
    def key(self) -> tuple[int, int]:
        return (self.i, self.j)


@dataclass(frozen=True)
class PairingPlan:
    edges: tuple[CandidateEdge, ...]
    total_weight: float
    directed: tuple[tuple[int, int], ...] | None = None

    @classmethod
    def from_edges(cls, edges: Iterable[CandidateEdge]) -> "PairingPlan":
        edges = tuple(sorted(edges))
        return cls(edges, math.fsum(e.weight for e in edges))

    def degrees(self, n: int) -> list[int]:
        deg = [0] * n
        for e in self.edges:
            deg[e.i] += 1
            deg[e.j] += 1
        return deg

    @property
    def keys(self) -> list[tuple[int, int]]:
        return [e.key for e in self.edges]


def circular_distance(i: int, j: int, n: int) -> int:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"view index out of range: ({i}, {j}) for n={n}")
    diff = abs(i - j)
    return min(diff, n - diff)


def decay_phi(d: int, tau: float) -> float:
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d}")
    return math.exp(-max(d - 1, 0) / tau)


def classify_range(d: int, params: ImportanceParams) -> RangeClass:
    if d <= params.local_max:
        return RangeClass.LOCAL
    if d <= params.medium_max:
        return RangeClass.MEDIUM
    return RangeClass.LONG


def edge_importance(d: int, params: ImportanceParams) -> float:
    decay = params.decay or decay_phi
    r = classify_range(d, params)
    return max(0.0, params.alpha[r] * decay(d, params.tau) + params.beta[r])


def generate_candidates(problem: PairingProblem) -> list[CandidateEdge]:
    """Union of the k-step chords over all offsets, as sorted undirected edges."""
    n = problem.n
    if n < 2:
        raise ValueError(f"need at least 2 views, got n={n}")
    keys = set()
    for k in problem.offsets:
        for i in range(n):
            j = (i + k) % n
            keys.add((min(i, j), max(i, j)))
    params = problem.params
    out = []
    for i, j in sorted(keys):
        d = circular_distance(i, j, n)
        out.append(CandidateEdge(i, j, d, classify_range(d, params), edge_importance(d, params)))
    return out


def filter_by_importance(
    edges: Iterable[CandidateEdge], w_min: float, keep_ring: bool = True
) -> list[CandidateEdge]:
    return [e for e in edges if e.weight >= w_min or (keep_ring and e.distance == 1)]


def _greedy_order(edges: Iterable[CandidateEdge]) -> list[CandidateEdge]:
    return sorted(edges, key=lambda e: (-e.weight, e.i, e.j))


def select_subgraph_greedy(
    edges: Iterable[CandidateEdge],
    b: int,
    reserved: Iterable[CandidateEdge] = (),
) -> PairingPlan:
    """Greedy degree-bounded selection (1/2-approximate max-weight b-matching).

    Edges are scanned by descending weight, ties by ascending ``(i, j)``.
    ``reserved`` edges are taken first regardless of weight; the caller must
    make sure they fit the budget on their own.
    """
    if b < 1:
        raise ValueError(f"degree budget must be >= 1, got {b}")
    deg: dict[int, int] = {}
    chosen: dict[tuple[int, int], CandidateEdge] = {}
    for e in _greedy_order(reserved):
        if e.key in chosen:
            continue
        if deg.get(e.i, 0) >= b or deg.get(e.j, 0) >= b:
            raise ValueError(f"reserved edges exceed degree budget {b} at {e.key}")
        chosen[e.key] = e
        deg[e.i] = deg.get(e.i, 0) + 1
        deg[e.j] = deg.get(e.j, 0) + 1
    for e in _greedy_order(edges):
        if e.key in chosen:
            continue
        if deg.get(e.i, 0) < b and deg.get(e.j, 0) < b:
            chosen[e.key] = e
            deg[e.i] = deg.get(e.i, 0) + 1
            deg[e.j] = deg.get(e.j, 0) + 1
    return PairingPlan.from_edges(chosen.values())


def select_subgraph_exact(
    edges: Iterable[CandidateEdge], b: int, max_edges: int = 24
) -> PairingPlan:
    """Exact max-weight degree-bounded subgraph by branch and bound.

    Among optima of equal weight the lexicographically smallest sorted edge
    list wins. Totals use ``math.fsum`` so equal sets compare equal exactly.
    """
    edges = sorted({e.key: e for e in edges}.values())
    if len(edges) > max_edges:
        raise CapacityError(
            f"exact selection limited to max_edges={max_edges}, got {len(edges)} edges"
        )
    if b < 1:
        raise ValueError(f"degree budget must be >= 1, got {b}")
    m = len(edges)
    # suffix sums of weights bound what the remaining edges can add
    suffix = [0.0] * (m + 1)
    for k in range(m - 1, -1, -1):
        suffix[k] = suffix[k + 1] + edges[k].weight

    best_w = 0.0
    best_set: list[tuple[int, int]] = []
    deg: dict[int, int] = {}
    current: list[int] = []

    def visit(k: int):
        nonlocal best_w, best_set
        if k == m:
            w = math.fsum(edges[t].weight for t in current)
            keys = [edges[t].key for t in current]
            if w > best_w or (w == best_w and keys < best_set):
                best_w, best_set = w, keys
            return
        partial = math.fsum(edges[t].weight for t in current)
        bound = partial + suffix[k]
        if bound + 1e-9 * (1.0 + abs(bound)) < best_w:
            return
        e = edges[k]
        if deg.get(e.i, 0) < b and deg.get(e.j, 0) < b:
            deg[e.i] = deg.get(e.i, 0) + 1
            deg[e.j] = deg.get(e.j, 0) + 1
            current.append(k)
            visit(k + 1)
            current.pop()
            deg[e.i] -= 1
            deg[e.j] -= 1
        visit(k + 1)

    visit(0)
    lookup = {e.key: e for e in edges}
    return PairingPlan.from_edges(lookup[key] for key in best_set)


def expand_to_directed_pairs(plan: PairingPlan, mode: str = "both") -> list[tuple[int, int]]:
    if mode not in ("both", "forward"):
        raise ValueError(f"mode must be 'both' or 'forward', got {mode!r}")
    pairs = []
    for e in sorted(plan.edges):
        pairs.append((e.i, e.j))
        if mode == "both":
            pairs.append((e.j, e.i))
    return pairs


def check_connectivity(plan: PairingPlan, n: int) -> tuple[bool, int]:
    """Return (connected, component_count) of the plan's graph on n vertices."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in plan.edges:
        ri, rj = find(e.i), find(e.j)
        if ri != rj:
            parent[ri] = rj
    components = len({find(v) for v in range(n)})
    return components == 1, components


def plan_gaps(problem: PairingProblem, mode: str = "both") -> PairingPlan:
    """Run the full pipeline: candidates, filtering, degree-bounded selection.

    With ``keep_ring`` the distance-1 ring is exempt from filtering and is
    seated before the greedy pass, so the view cycle survives whenever the
    budget allows it (b >= 2).
    """
    candidates = generate_candidates(problem)
    kept = filter_by_importance(candidates, problem.params.w_min, problem.keep_ring)
    reserved: Sequence[CandidateEdge] = ()
    if problem.keep_ring and problem.degree_budget >= 2:
        reserved = [e for e in kept if e.distance == 1]
    plan = select_subgraph_greedy(kept, problem.degree_budget, reserved=reserved)
    return PairingPlan(plan.edges, plan.total_weight, tuple(expand_to_directed_pairs(plan, mode)))


def plan_to_dict(plan: PairingPlan, n: int, mode: str = "both") -> dict:
    pairs = plan.directed if plan.directed is not None else expand_to_directed_pairs(plan, mode)
    return {
        "n": n,
        "mode": mode,
        "edges": [
            {"i": e.i, "j": e.j, "d": e.distance, "range": e.range.value, "w": e.weight}
            for e in plan.edges
        ],
        "pairs": [list(p) for p in pairs],
        "total_weight": plan.total_weight,
    }


def plan_to_dot(plan: PairingPlan, n: int, name: str = "pairs") -> str:
    lines = [f"graph {name} {{"]
    for v in range(n):
        lines.append(f"  {v};")
    for e in plan.edges:
        lines.append(f'  {e.i} -- {e.j} [label="{e.weight:.4f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
