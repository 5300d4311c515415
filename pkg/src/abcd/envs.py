"""Ground-truth structural causal models for closed-loop simulation.

Mechanisms come from a small serialisable expression vocabulary (constants,
parent placeholders p0..pk, + - *, tanh, sin, pow2) rather than arbitrary
code, so SCM configs are plain JSON and runs stay reproducible.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass

import numpy as np

from .belief import InterventionSpec, Sample
from .dags import Dag
from .seeds import as_rng


class ScmError(ValueError):
    """Invalid SCM configuration or expression."""


_FUNCS = {"tanh": np.tanh, "sin": np.sin, "pow2": np.square}
_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult)
_ALLOWED_UNARY = (ast.USub, ast.UAdd)


def _validate_expr(node: ast.AST, arity: int, expr: str) -> None:
    if isinstance(node, ast.Expression):
        _validate_expr(node.body, arity, expr)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
        _validate_expr(node.left, arity, expr)
        _validate_expr(node.right, arity, expr)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
        _validate_expr(node.operand, arity, expr)
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ScmError(f"unknown function in mechanism {expr!r}; allowed: {sorted(_FUNCS)}")
        if len(node.args) != 1 or node.keywords:
            raise ScmError(f"functions take exactly one argument: {expr!r}")
        _validate_expr(node.args[0], arity, expr)
    elif isinstance(node, ast.Name):
        if not (node.id.startswith("p") and node.id[1:].isdigit()):
            raise ScmError(f"unknown name {node.id!r} in mechanism {expr!r}")
        k = int(node.id[1:])
        if k >= arity:
            raise ScmError(
                f"placeholder {node.id} in {expr!r} exceeds parent count {arity}"
            )
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ScmError(f"only numeric constants allowed: {expr!r}")
    else:
        raise ScmError(f"unsupported syntax {type(node).__name__} in mechanism {expr!r}")


def compile_mechanism(expr: str, arity: int):
    """Compile an expression over p0..p{arity-1} into a vectorised callable."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ScmError(f"cannot parse mechanism {expr!r}: {exc}") from exc
    _validate_expr(tree, arity, expr)
    code = compile(tree, filename="<mechanism>", mode="eval")

    def fn(parent_columns: np.ndarray) -> np.ndarray:
        # parent_columns: (m, arity)
        scope = {f"p{k}": parent_columns[:, k] for k in range(arity)}
        scope.update(_FUNCS)
        return np.asarray(eval(code, {"__builtins__": {}}, scope), dtype=float)

    return fn


@dataclass(frozen=True)
class Mechanism:
    expr: str
    noise_sd: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.noise_sd) and self.noise_sd >= 0):
            raise ScmError(f"noise_sd must be finite and >= 0, got {self.noise_sd}")


@dataclass(frozen=True)
class RootDistribution:
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and math.isfinite(self.sd) and self.sd >= 0):
            raise ScmError(f"root distribution must be finite with sd >= 0: {self}")


class GroundTruthScm:
    """A DAG plus additive-noise mechanisms the simulator can sample from."""

    def __init__(
        self,
        graph: Dag,
        mechanisms: dict[int, Mechanism],
        root_distributions: dict[int, RootDistribution],
    ):
        self.graph = graph
        self.mechanisms = dict(mechanisms)
        self.root_distributions = dict(root_distributions)
        self._compiled: dict[int, object] = {}
        for node in range(graph.d):
            parents = graph.parent_sets[node]
            if parents:
                if node not in self.mechanisms:
                    raise ScmError(f"node {node} has parents but no mechanism")
                self._compiled[node] = compile_mechanism(
                    self.mechanisms[node].expr, len(parents)
                )
            else:
                if node not in self.root_distributions:
                    raise ScmError(f"root node {node} has no distribution")
        extra_mech = set(self.mechanisms) - {n for n in range(graph.d) if graph.parent_sets[n]}
        if extra_mech:
            raise ScmError(f"mechanisms given for parentless nodes: {sorted(extra_mech)}")

    @property
    def d(self) -> int:
        return self.graph.d

    def to_json(self) -> dict:
        return {
            "graph": self.graph.to_json(),
            "mechanisms": [
                {"node": n, "expr": m.expr, "noise_sd": m.noise_sd}
                for n, m in sorted(self.mechanisms.items())
            ],
            "roots": [
                {"node": n, "mean": r.mean, "sd": r.sd}
                for n, r in sorted(self.root_distributions.items())
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GroundTruthScm":
        try:
            graph = Dag.from_json(obj["graph"])
            mechanisms = {
                int(rec["node"]): Mechanism(expr=str(rec["expr"]), noise_sd=float(rec["noise_sd"]))
                for rec in obj.get("mechanisms", [])
            }
            roots = {
                int(rec["node"]): RootDistribution(mean=float(rec["mean"]), sd=float(rec["sd"]))
                for rec in obj.get("roots", [])
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ScmError(f"malformed SCM config: {exc}") from exc
        return cls(graph, mechanisms, roots)


def sample_truth_batch(
    scm: GroundTruthScm,
    spec: InterventionSpec,
    m: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """m ancestral draws (rows) from the ground truth under ``spec``."""
    if spec.target is not None and not 0 <= spec.target < scm.d:
        raise ScmError(f"intervention target {spec.target} out of range for d={scm.d}")
    values = np.empty((m, scm.d))
    for node in scm.graph.topo_order:
        if spec.target == node:
            values[:, node] = spec.value
            continue
        parents = scm.graph.parent_sets[node]
        if parents:
            mech = scm.mechanisms[node]
            base = scm._compiled[node](values[:, list(parents)])
            noise = rng.normal(0.0, mech.noise_sd, size=m) if mech.noise_sd > 0 else 0.0
            values[:, node] = base + noise
        else:
            root = scm.root_distributions[node]
            draws = rng.normal(root.mean, root.sd, size=m) if root.sd > 0 else root.mean
            values[:, node] = draws
    return values


def sample_truth(
    scm: GroundTruthScm,
    spec: InterventionSpec,
    seed: int | np.random.Generator,
) -> Sample:
    """One draw from the ground truth; deterministic given the seed."""
    rng = as_rng(seed)
    row = sample_truth_batch(scm, spec, 1, rng)[0]
    if spec.target is not None:
        row[spec.target] = spec.value
    return Sample(values=tuple(row), intervention=spec)


def bivariate_tanh_scm(noise: str = "variance") -> GroundTruthScm:
    """The two-variable saturating benchmark: X0 ~ N(0,1), X1 = 2*tanh(X0) + eps.

    ``noise`` selects how the benchmark's 0.1 noise parameter is read:
    "variance" (sd = sqrt(0.1)) or "sd" (sd = 0.1). Both readings ship as
    checked-in configs.
    """
    if noise == "variance":
        sd = math.sqrt(0.1)
    elif noise == "sd":
        sd = 0.1
    else:
        raise ScmError(f"noise must be 'variance' or 'sd', got {noise!r}")
    graph = Dag.from_edges(2, [(0, 1)])
    return GroundTruthScm(
        graph,
        mechanisms={1: Mechanism(expr="2*tanh(p0)", noise_sd=sd)},
        root_distributions={0: RootDistribution(mean=0.0, sd=1.0)},
    )


def chain_tanh_scm(d: int = 3, noise_sd: float = 0.2) -> GroundTruthScm:
    """A d-node chain X0 -> X1 -> ... with saturating mechanisms."""
    graph = Dag.from_edges(d, [(i, i + 1) for i in range(d - 1)])
    mechanisms = {
        i: Mechanism(expr="2*tanh(p0)", noise_sd=noise_sd) for i in range(1, d)
    }
    return GroundTruthScm(
        graph,
        mechanisms=mechanisms,
        root_distributions={0: RootDistribution(mean=0.0, sd=1.0)},
    )
