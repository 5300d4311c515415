"""DAG hypothesis space: enumeration, structure priors, and edit distance.

Graphs over d labelled nodes are enumerated exhaustively (hard-capped at
d <= 5, i.e. 29281 graphs), so every posterior sum over the hypothesis space
downstream is exact rather than sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MAX_NODES = 5

LOG_ZERO = float("-inf")


class DagError(ValueError):
    """Invalid graph construction or query."""


def _topological_order(d: int, parent_sets: tuple[tuple[int, ...], ...]) -> tuple[int, ...]:
    """Kahn's algorithm, always picking the smallest ready node (canonical)."""
    indegree = [len(ps) for ps in parent_sets]
    children: list[list[int]] = [[] for _ in range(d)]
    for child, ps in enumerate(parent_sets):
        for p in ps:
            children[p].append(child)
    order: list[int] = []
    ready = sorted(i for i in range(d) if indegree[i] == 0)
    while ready:
        node = ready.pop(0)
        order.append(node)
        for c in children[node]:
            indegree[c] -= 1
            if indegree[c] == 0:
                # keep 'ready' sorted; d is tiny so insertion cost is irrelevant
                ready.append(c)
                ready.sort()
    if len(order) != d:
        raise DagError("adjacency contains a directed cycle")
    return tuple(order)


@dataclass(frozen=True)
class Dag:
    """Labelled DAG over ``d`` nodes.

    ``adjacency[p][i]`` is True iff there is an edge p -> i. ``parent_sets``
    and ``topo_order`` are derived and validated against the adjacency, so two
    equal adjacencies always compare (and hash) equal.
    """

    d: int
    adjacency: tuple[tuple[bool, ...], ...]
    parent_sets: tuple[tuple[int, ...], ...]
    topo_order: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.d < 1:
            raise DagError(f"node count must be >= 1, got {self.d}")
        if len(self.adjacency) != self.d or any(len(row) != self.d for row in self.adjacency):
            raise DagError("adjacency must be a d x d matrix")
        if any(self.adjacency[i][i] for i in range(self.d)):
            raise DagError("self-loops are not allowed")
        expected = tuple(
            tuple(p for p in range(self.d) if self.adjacency[p][i]) for i in range(self.d)
        )
        if self.parent_sets != expected:
            raise DagError("parent_sets inconsistent with adjacency")
        # raises on cycles; also check the stored order is a valid linearisation
        _topological_order(self.d, self.parent_sets)
        if sorted(self.topo_order) != list(range(self.d)):
            raise DagError("topo_order must be a permutation of the nodes")
        position = {node: k for k, node in enumerate(self.topo_order)}
        for child, ps in enumerate(self.parent_sets):
            for p in ps:
                if position[p] >= position[child]:
                    raise DagError("topo_order inconsistent with adjacency")

    @classmethod
    def from_edges(cls, d: int, edges: list[tuple[int, int]] | tuple[tuple[int, int], ...]) -> "Dag":
        adj = [[False] * d for _ in range(d)]
        for p, i in edges:
            if not (0 <= p < d and 0 <= i < d):
                raise DagError(f"edge ({p}, {i}) out of range for d={d}")
            if p == i:
                raise DagError(f"self-loop ({p}, {i}) not allowed")
            adj[p][i] = True
        adjacency = tuple(tuple(row) for row in adj)
        parent_sets = tuple(tuple(p for p in range(d) if adjacency[p][i]) for i in range(d))
        topo = _topological_order(d, parent_sets)
        return cls(d=d, adjacency=adjacency, parent_sets=parent_sets, topo_order=topo)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (p, i) for p in range(self.d) for i in range(self.d) if self.adjacency[p][i]
        )

    @property
    def n_edges(self) -> int:
        return sum(sum(row) for row in self.adjacency)

    def flat(self) -> tuple[bool, ...]:
        """Row-major flattened adjacency; defines the canonical enumeration order."""
        return tuple(v for row in self.adjacency for v in row)

    def to_json(self) -> dict:
        return {"d": self.d, "edges": [list(e) for e in sorted(self.edges)]}

    @classmethod
    def from_json(cls, obj: dict) -> "Dag":
        try:
            d = int(obj["d"])
            edges = [(int(p), int(i)) for p, i in obj["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DagError(f"malformed DAG JSON: {exc}") from exc
        return cls.from_edges(d, edges)

    def __repr__(self) -> str:
        es = ",".join(f"{p}->{i}" for p, i in self.edges)
        return f"Dag(d={self.d}, [{es}])"


def dag_token(g: Dag) -> int:
    """Stable nonnegative integer identifying a graph by its adjacency.

    Used to key per-graph random substreams so estimates do not depend on the
    graph's position in the enumerated universe.
    """
    token = 0
    for bit, v in enumerate(g.flat()):
        if v:
            token |= 1 << bit
    return token


def enumerate_dags(d: int) -> list[Dag]:
    """Every labelled DAG over d nodes, exactly once.

    Order is lexicographic by row-major flattened adjacency (False < True).
    The search walks include/exclude decisions over the d*(d-1) off-diagonal
    positions, pruning any branch whose partial edge set already closed a
    cycle, so work is proportional to the number of acyclic graphs rather
    than 2^(d*(d-1)).
    """
    if not isinstance(d, int) or not 1 <= d <= MAX_NODES:
        raise DagError(
            f"exhaustive enumeration supports 1 <= d <= {MAX_NODES} nodes, got {d!r}"
        )
    positions = [(p, i) for p in range(d) for i in range(d) if p != i]
    out: list[Dag] = []
    edges: list[tuple[int, int]] = []
    # reach[q] = bitmask of nodes reachable from q via current edges
    reach = [0] * d

    def descend(k: int) -> None:
        if k == len(positions):
            out.append(Dag.from_edges(d, list(edges)))
            return
        p, i = positions[k]
        descend(k + 1)  # exclude first: keeps lexicographic order
        if reach[i] >> p & 1:
            return  # i already reaches p; adding p->i would close a cycle
        saved = list(reach)
        add = reach[i] | (1 << i)
        for q in range(d):
            if q == p or reach[q] >> p & 1:
                reach[q] |= add
        edges.append((p, i))
        descend(k + 1)
        edges.pop()
        reach[:] = saved

    descend(0)
    return out


def shd(a: Dag, b: Dag) -> int:
    """Structural Hamming distance; a reversal counts as one edit."""
    if a.d != b.d:
        raise DagError(f"dimension mismatch: {a.d} vs {b.d}")
    dist = 0
    for i in range(a.d):
        for j in range(i + 1, a.d):
            sa = (a.adjacency[i][j], a.adjacency[j][i])
            sb = (b.adjacency[i][j], b.adjacency[j][i])
            if sa != sb:
                dist += 1
    return dist


PRIOR_KINDS = ("uniform", "sparsity", "reference", "explicit")


@dataclass(frozen=True)
class GraphPrior:
    """Structure prior over an enumerated DAG universe.

    Weights before normalisation:
      uniform    1
      sparsity   1 / (1 + #edges)
      reference  1 / (1 + SHD(g, reference_graph))
      explicit   explicit_table[g]
    A ``max_edges`` cap zeroes out any graph exceeding it, for every kind.
    """

    kind: str = "uniform"
    reference_graph: Dag | None = None
    max_edges: int | None = None
    explicit_table: dict | None = None

    def __post_init__(self) -> None:
        if self.kind not in PRIOR_KINDS:
            raise DagError(f"unknown prior kind {self.kind!r}; options: {PRIOR_KINDS}")
        if self.kind == "reference" and self.reference_graph is None:
            raise DagError("reference prior requires reference_graph")
        if self.kind == "explicit" and self.explicit_table is None:
            raise DagError("explicit prior requires explicit_table")

    def _weight(self, g: Dag) -> float:
        if self.max_edges is not None and g.n_edges > self.max_edges:
            return 0.0
        if self.kind == "uniform":
            return 1.0
        if self.kind == "sparsity":
            return 1.0 / (1.0 + g.n_edges)
        if self.kind == "reference":
            return 1.0 / (1.0 + shd(g, self.reference_graph))
        table = self.explicit_table
        if g not in table:
            raise DagError(f"explicit prior table is missing graph {g!r}")
        w = float(table[g])
        if w < 0 or not math.isfinite(w):
            raise DagError(f"explicit prior weight for {g!r} must be finite and >= 0")
        return w


def log_prior_vector(prior: GraphPrior, universe: list[Dag] | tuple[Dag, ...]) -> list[float]:
    """Normalised log prior over the universe; LOG_ZERO marks capped-out graphs."""
    if not universe:
        raise DagError("universe must be nonempty")
    weights = [prior._weight(g) for g in universe]
    total = math.fsum(weights)
    if total <= 0:
        raise DagError("prior assigns zero mass to every graph in the universe")
    log_total = math.log(total)
    return [math.log(w) - log_total if w > 0 else LOG_ZERO for w in weights]


def log_prior(g: Dag, prior: GraphPrior, universe: list[Dag] | tuple[Dag, ...]) -> float:
    """Normalised log prior probability of ``g`` within ``universe``."""
    try:
        idx = list(universe).index(g)
    except ValueError:
        raise DagError(f"graph {g!r} is not in the universe") from None
    return log_prior_vector(prior, universe)[idx]
