"""Joint posterior over causal graphs and their GP mechanisms.

The likelihood decomposes per node given a graph, so evidence is cached per
(node, parent-set) pair and shared across every graph containing that pair.
Samples gathered under an intervention on node j contribute no conditional
term for j itself (its mechanism was overridden), but still act as regression
inputs for j's children; this masking is what lets interventional data
separate graphs that agree on all observational distributions.

Root nodes (empty parent set) carry a conjugate normal model with unknown
mean and variance, so their evidence and posterior predictive are closed
form, mirroring the GP case.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .dags import LOG_ZERO, Dag, DagError, GraphPrior, enumerate_dags, log_prior_vector
from .gp import (
    FactorizationError,
    FitBounds,
    FitError,
    GpDataset,
    GpHyperparams,
    GpSnapshot,
    LOG_2PI,
    default_hyperparams,
    fit_hyperparams,
)
from .seeds import as_rng, substream_seed

log = logging.getLogger(__name__)

DEFAULT_N_MIN = 5

# Type-2 ML on a handful of points cannot identify observation noise: the
# likelihood in noise variance is nearly flat, and the interpolating mode
# (noise -> 0) is catastrophically overconfident on later interventional
# outcomes. Fitting therefore floors the noise at this fraction of the target
# node's observational variance unless the caller supplies explicit bounds.
NOISE_FLOOR_FRACTION = 0.01

NodeKey = tuple[int, tuple[int, ...]]


class BeliefError(ValueError):
    """Invalid belief-state construction or update."""


@dataclass(frozen=True)
class InterventionSpec:
    """Either observational (no target) or do(X_target = value)."""

    target: int | None = None
    value: float | None = None

    def __post_init__(self) -> None:
        if (self.target is None) != (self.value is None):
            raise BeliefError("intervention target and value must be set together")
        if self.value is not None and not math.isfinite(self.value):
            raise BeliefError(f"intervention value must be finite, got {self.value}")
        if self.target is not None and self.target < 0:
            raise BeliefError(f"intervention target must be a node index, got {self.target}")

    @property
    def is_observational(self) -> bool:
        return self.target is None

    def to_json(self):
        if self.is_observational:
            return None
        return {"target": self.target, "value": self.value}

    @classmethod
    def from_json(cls, obj) -> "InterventionSpec":
        if obj is None:
            return OBSERVATIONAL
        return cls(target=int(obj["target"]), value=float(obj["value"]))


OBSERVATIONAL = InterventionSpec()


@dataclass(frozen=True)
class Sample:
    """One observed vector tagged with the intervention it was drawn under."""

    values: tuple[float, ...]
    intervention: InterventionSpec = OBSERVATIONAL

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not all(math.isfinite(v) for v in vals):
            raise BeliefError(f"sample values must be finite, got {vals}")
        iv = self.intervention
        if iv.target is not None:
            if iv.target >= len(vals):
                raise BeliefError(f"intervention target {iv.target} out of range for d={len(vals)}")
            if vals[iv.target] != iv.value:
                raise BeliefError(
                    f"clamping violated: values[{iv.target}] = {vals[iv.target]} "
                    f"but intervention fixes {iv.value}"
                )

    @property
    def d(self) -> int:
        return len(self.values)

    def to_json(self) -> dict:
        return {"values": list(self.values), "intervention": self.intervention.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "Sample":
        return cls(
            values=tuple(float(v) for v in obj["values"]),
            intervention=InterventionSpec.from_json(obj.get("intervention")),
        )


@dataclass(frozen=True)
class RootModel:
    """Conjugate prior for a root node's marginal: unknown mean and variance.

    (mu0, kappa0) locate the mean given the variance; (alpha0, beta0) shape the
    inverse-gamma variance prior.
    """

    mu0: float = 0.0
    kappa0: float = 1.0
    alpha0: float = 2.0
    beta0: float = 1.0

    def __post_init__(self) -> None:
        if not (self.kappa0 > 0 and self.alpha0 > 0 and self.beta0 > 0):
            raise BeliefError(f"kappa0, alpha0, beta0 must be positive: {self}")


class RootCache:
    """Posterior state of one root node's conjugate model plus its evidence."""

    __slots__ = ("prior", "n", "mu", "kappa", "alpha", "beta", "log_evidence")

    def __init__(self, prior, n, mu, kappa, alpha, beta, log_evidence):
        self.prior = prior
        self.n = n
        self.mu = mu
        self.kappa = kappa
        self.alpha = alpha
        self.beta = beta
        self.log_evidence = log_evidence

    @classmethod
    def from_data(cls, prior: RootModel, ys: np.ndarray) -> "RootCache":
        """Closed-form batch posterior and evidence (not a sequential fold)."""
        ys = np.asarray(ys, dtype=float)
        n = ys.shape[0]
        if n == 0:
            return cls(prior, 0, prior.mu0, prior.kappa0, prior.alpha0, prior.beta0, 0.0)
        mean = float(np.mean(ys))
        ss = float(np.sum((ys - mean) ** 2))
        kappa_n = prior.kappa0 + n
        mu_n = (prior.kappa0 * prior.mu0 + n * mean) / kappa_n
        alpha_n = prior.alpha0 + n / 2.0
        beta_n = (
            prior.beta0
            + 0.5 * ss
            + prior.kappa0 * n * (mean - prior.mu0) ** 2 / (2.0 * kappa_n)
        )
        log_ev = float(
            gammaln(alpha_n)
            - gammaln(prior.alpha0)
            + prior.alpha0 * math.log(prior.beta0)
            - alpha_n * math.log(beta_n)
            + 0.5 * (math.log(prior.kappa0) - math.log(kappa_n))
            - 0.5 * n * LOG_2PI
        )
        return cls(prior, n, mu_n, kappa_n, alpha_n, beta_n, log_ev)

    def extend(self, y: float) -> "RootCache":
        """One-step conjugate update; evidence grows by the predictive density."""
        delta = float(self.predictive_logpdf(np.array([y]))[0])
        kappa_new = self.kappa + 1.0
        mu_new = (self.kappa * self.mu + y) / kappa_new
        alpha_new = self.alpha + 0.5
        beta_new = self.beta + self.kappa * (y - self.mu) ** 2 / (2.0 * kappa_new)
        return RootCache(
            self.prior, self.n + 1, mu_new, kappa_new, alpha_new, beta_new,
            self.log_evidence + delta,
        )

    def _t_params(self) -> tuple[float, float, float]:
        df = 2.0 * self.alpha
        scale = math.sqrt(self.beta * (self.kappa + 1.0) / (self.alpha * self.kappa))
        return df, self.mu, scale

    def predictive_logpdf(self, ys: np.ndarray) -> np.ndarray:
        """Student-t posterior predictive log density, vectorised."""
        df, loc, scale = self._t_params()
        z = (np.asarray(ys, dtype=float) - loc) / scale
        return (
            gammaln((df + 1.0) / 2.0)
            - gammaln(df / 2.0)
            - 0.5 * math.log(df * math.pi)
            - math.log(scale)
            - (df + 1.0) / 2.0 * np.log1p(z * z / df)
        )

    def sample_predictive(self, m: int, rng: np.random.Generator) -> np.ndarray:
        df, loc, scale = self._t_params()
        return loc + scale * rng.standard_t(df, size=m)


class GpNodeCache:
    """GP regression state of one (node, nonempty parent set) pair."""

    __slots__ = ("snapshot",)

    def __init__(self, snapshot: GpSnapshot):
        self.snapshot = snapshot

    @property
    def n(self) -> int:
        return self.snapshot.n

    @property
    def log_evidence(self) -> float:
        return self.snapshot.log_ml

    def extend(self, x: np.ndarray, y: float) -> "GpNodeCache":
        return GpNodeCache(self.snapshot.extend(x, y))

    def predictive_logpdf(self, X: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.snapshot.predictive_logpdf(X, ys)

    def sample_predictive(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        means, var_f = self.snapshot.predict_batch(X)
        sd = np.sqrt(var_f + self.snapshot.hyperparams.noise_variance)
        return means + sd * rng.standard_normal(X.shape[0])


def _logsumexp(v: np.ndarray, axis=None) -> np.ndarray:
    vmax = np.max(v, axis=axis, keepdims=True)
    vmax = np.where(np.isfinite(vmax), vmax, 0.0)
    out = np.log(np.sum(np.exp(v - vmax), axis=axis, keepdims=True)) + vmax
    return np.squeeze(out, axis=axis) if axis is not None else float(np.squeeze(out))


def _normalize_log(v: np.ndarray) -> np.ndarray:
    return v - _logsumexp(v)


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Immutable snapshot of the joint posterior over graphs and mechanisms.

    ``update`` produces a new snapshot; concurrent readers of one snapshot are
    safe. ``caches`` maps (node, parent-set) to its evidence state; graphs
    index into it via ``graph_key_idx``.
    """

    d: int
    universe: tuple[Dag, ...]
    prior: GraphPrior
    log_prior_vec: np.ndarray
    log_posterior: np.ndarray
    data: tuple[Sample, ...]
    caches: dict
    hyperparams: dict
    root_models: tuple[RootModel, ...]
    centering: np.ndarray
    keys: tuple[NodeKey, ...]
    key_index: dict
    graph_key_idx: np.ndarray
    seed: int

    def centered(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float) - self.centering

    def evidence_vector(self) -> np.ndarray:
        return np.array([self.caches[k].log_evidence for k in self.keys])

    def graph_evidence_totals(self) -> np.ndarray:
        ev = self.evidence_vector()
        totals = np.zeros(len(self.universe))
        for col in range(self.d):
            totals += ev[self.graph_key_idx[:, col]]
        return totals

    def posterior_probs(self) -> np.ndarray:
        return np.exp(self.log_posterior)

    def map_graph(self) -> Dag:
        return self.universe[int(np.argmax(self.log_posterior))]


def _node_keys(universe: tuple[Dag, ...]) -> tuple[NodeKey, ...]:
    keys = {(i, g.parent_sets[i]) for g in universe for i in range(universe[0].d)}
    return tuple(sorted(keys))


def initialize(
    obs: list[Sample],
    *,
    d: int | None = None,
    universe: tuple[Dag, ...] | list[Dag] | None = None,
    prior: GraphPrior | None = None,
    root_model: RootModel | None = None,
    n_min: int = DEFAULT_N_MIN,
    seed: int = 0,
    fit_restarts: int = 5,
    fit_bounds: FitBounds | None = None,
) -> BeliefState:
    """Build the initial belief from purely observational samples.

    Fits GP hyperparameters once per (node, parent-set) pair by type-2 ML
    (falling back to documented defaults if a fit fails) and freezes them;
    subsequent updates never refit, which keeps sequential model comparison
    coherent. Per-node centering offsets are the observational means.
    """
    if len(obs) < n_min:
        raise BeliefError(
            f"initialization needs at least n_min={n_min} observational samples, got {len(obs)}"
        )
    if any(not s.intervention.is_observational for s in obs):
        raise BeliefError("initialization samples must all be observational")
    dims = {s.d for s in obs}
    if len(dims) != 1:
        raise BeliefError(f"samples disagree on dimension: {sorted(dims)}")
    d_obs = dims.pop()
    if d is None:
        d = d_obs
    if d != d_obs:
        raise BeliefError(f"samples have d={d_obs}, expected {d}")

    if universe is None:
        universe = tuple(enumerate_dags(d))
    else:
        universe = tuple(universe)
        if not universe or any(g.d != d for g in universe):
            raise BeliefError("universe must be nonempty DAGs over d nodes")
    prior = prior or GraphPrior()
    rm = root_model or RootModel()
    root_models = tuple(rm for _ in range(d))

    raw = np.array([s.values for s in obs])
    centering = raw.mean(axis=0)
    V = raw - centering

    keys = _node_keys(universe)
    key_index = {k: idx for idx, k in enumerate(keys)}
    graph_key_idx = np.array(
        [[key_index[(i, g.parent_sets[i])] for i in range(d)] for g in universe]
    )

    hyperparams: dict[NodeKey, GpHyperparams] = {}
    caches: dict[NodeKey, object] = {}
    for i, parents in keys:
        if parents:
            data = GpDataset(V[:, parents], V[:, i])
            if fit_bounds is not None:
                bounds = fit_bounds
            else:
                base = FitBounds()
                floor = min(
                    max(base.noise_variance[0], NOISE_FLOOR_FRACTION * float(np.var(V[:, i]))),
                    1.0,
                )
                bounds = FitBounds(
                    signal_variance=base.signal_variance,
                    inverse_lengthscale=base.inverse_lengthscale,
                    noise_variance=(floor, base.noise_variance[1]),
                )
            try:
                h = fit_hyperparams(
                    data,
                    bounds=bounds,
                    restarts=fit_restarts,
                    seed=substream_seed(seed, "hyperfit", i, *parents),
                )
            except (FitError, FactorizationError) as exc:
                h = default_hyperparams(len(parents))
                log.warning("hyperparameter fit failed for node %d | %s (%s); using defaults",
                            i, parents, exc)
            hyperparams[(i, parents)] = h
            caches[(i, parents)] = GpNodeCache(GpSnapshot.build(data, h))
        else:
            caches[(i, parents)] = RootCache.from_data(root_models[i], V[:, i])

    log_prior_vec = np.array(log_prior_vector(prior, universe))
    belief = BeliefState(
        d=d,
        universe=universe,
        prior=prior,
        log_prior_vec=log_prior_vec,
        log_posterior=np.zeros(len(universe)),
        data=tuple(obs),
        caches=caches,
        hyperparams=hyperparams,
        root_models=root_models,
        centering=centering,
        keys=keys,
        key_index=key_index,
        graph_key_idx=graph_key_idx,
        seed=seed,
    )
    object.__setattr__(belief, "log_posterior", _recompute_log_posterior(belief))
    return belief


def _recompute_log_posterior(belief: BeliefState) -> np.ndarray:
    unnorm = belief.log_prior_vec + belief.graph_evidence_totals()
    if np.all(np.isneginf(unnorm)):
        raise BeliefError("empty hypothesis space: every graph has zero prior mass")
    return _normalize_log(unnorm)


def node_log_evidence(
    i: int, parents: tuple[int, ...], data: list[Sample] | tuple[Sample, ...], belief: BeliefState
) -> float:
    """From-scratch evidence of node i given a parent set, with masking.

    Only samples whose intervention target is not i count; a sample that
    intervened on a parent still counts, with the clamped parent value as a
    regression input. The cached path in ``BeliefState`` must agree with this
    within 1e-8 (spot-checked in tests).
    """
    parents = tuple(parents)
    masked = [s for s in data if s.intervention.target != i]
    if not masked:
        return 0.0
    V = np.array([s.values for s in masked]) - belief.centering
    if not parents:
        return RootCache.from_data(belief.root_models[i], V[:, i]).log_evidence
    h = belief.hyperparams.get((i, parents))
    if h is None:
        raise BeliefError(
            f"no hyperparameters for node {i} | parents {parents}; "
            "call initialize() before scoring conditional evidence"
        )
    snapshot = GpSnapshot.build(GpDataset(V[:, parents], V[:, i]), h)
    return snapshot.log_ml


def graph_log_posterior(belief: BeliefState, prior: GraphPrior | None = None) -> np.ndarray:
    """Normalised per-graph log posterior under the given (or stored) prior."""
    if prior is None:
        log_prior_vec = belief.log_prior_vec
    else:
        log_prior_vec = np.array(log_prior_vector(prior, belief.universe))
    unnorm = log_prior_vec + belief.graph_evidence_totals()
    if np.all(np.isneginf(unnorm)):
        raise BeliefError("empty hypothesis space: every graph has zero prior mass")
    return _normalize_log(unnorm)


def update(belief: BeliefState, s: Sample) -> BeliefState:
    """New belief with ``s`` absorbed; the input snapshot is untouched.

    Cache entries for the intervened node are carried over unchanged (same
    object, bitwise-equal evidence); every other entry is extended
    incrementally.
    """
    if s.d != belief.d:
        raise BeliefError(f"sample has d={s.d}, belief has d={belief.d}")
    target = s.intervention.target
    v = belief.centered(s.values)
    caches = dict(belief.caches)
    for key in belief.keys:
        i, parents = key
        if target == i:
            continue
        cache = caches[key]
        if parents:
            caches[key] = cache.extend(v[list(parents)], float(v[i]))
        else:
            caches[key] = cache.extend(float(v[i]))
    new_belief = BeliefState(
        d=belief.d,
        universe=belief.universe,
        prior=belief.prior,
        log_prior_vec=belief.log_prior_vec,
        log_posterior=belief.log_posterior,
        data=belief.data + (s,),
        caches=caches,
        hyperparams=belief.hyperparams,
        root_models=belief.root_models,
        centering=belief.centering,
        keys=belief.keys,
        key_index=belief.key_index,
        graph_key_idx=belief.graph_key_idx,
        seed=belief.seed,
    )
    object.__setattr__(new_belief, "log_posterior", _recompute_log_posterior(new_belief))
    return new_belief


def sample_interventional_batch(
    g: Dag,
    belief: BeliefState,
    spec: InterventionSpec,
    m: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """m ancestral draws (rows) from graph g's belief-implied distribution.

    The intervened coordinate is clamped; children draw from the GP predictive
    with observation noise, marginalising the latent function per draw; roots
    draw from their conjugate posterior predictive.
    """
    if g.d != belief.d:
        raise BeliefError(f"graph has d={g.d}, belief has d={belief.d}")
    target = spec.target
    values = np.empty((m, belief.d))
    for node in g.topo_order:
        if target == node:
            values[:, node] = spec.value
            continue
        parents = g.parent_sets[node]
        cache = belief.caches[(node, parents)]
        if parents:
            X = values[:, list(parents)] - belief.centering[list(parents)]
            draws = cache.sample_predictive(X, rng)
        else:
            draws = cache.sample_predictive(m, rng)
        values[:, node] = draws + belief.centering[node]
    return values


def sample_interventional(
    g: Dag,
    belief: BeliefState,
    spec: InterventionSpec,
    seed: int | np.random.Generator,
) -> Sample:
    """One draw from graph g's interventional (or observational) distribution."""
    rng = as_rng(seed)
    row = sample_interventional_batch(g, belief, spec, 1, rng)[0]
    if spec.target is not None:
        row[spec.target] = spec.value  # exact clamp, no float round-trip
    return Sample(values=tuple(row), intervention=spec)


def log_posterior_after_batch(
    belief: BeliefState, values: np.ndarray, target: int | None
) -> np.ndarray:
    """Log graph posterior after hypothetically appending each row of ``values``.

    Returns (n_graphs, m). Row i of ``values`` is treated as one sample under
    do(X_target = values[i, target]). The evidence increment of each
    (node, parent-set) cache is its one-step predictive log density, which
    equals extending the factorisation and subtracting (tested identity), but
    vectorises over all m hypothetical outcomes at once.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    m = values.shape[0]
    V = values - belief.centering
    deltas = np.zeros((len(belief.keys), m))
    for idx, (i, parents) in enumerate(belief.keys):
        if target == i:
            continue
        cache = belief.caches[(i, parents)]
        if parents:
            deltas[idx] = cache.predictive_logpdf(V[:, list(parents)], V[:, i])
        else:
            deltas[idx] = cache.predictive_logpdf(V[:, i])
    unnorm = np.broadcast_to(belief.log_posterior[:, None], (len(belief.universe), m)).copy()
    for col in range(belief.d):
        unnorm += deltas[belief.graph_key_idx[:, col], :]
    return unnorm - _logsumexp(unnorm, axis=0)[None, :]


def edge_marginals(belief: BeliefState) -> np.ndarray:
    """d x d matrix; entry (p, i) is the posterior probability of edge p -> i."""
    probs = belief.posterior_probs()
    out = np.zeros((belief.d, belief.d))
    for g, p in zip(belief.universe, probs):
        if p == 0.0:
            continue
        out += p * np.array(g.adjacency, dtype=float)
    return out
