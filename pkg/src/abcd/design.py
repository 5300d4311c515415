"""Intervention design: Monte-Carlo expected information gain under the
current belief, maximised per target by GP-UCB Bayesian optimisation.

The objective scored for a candidate do(X_j = x) is the expected log posterior
mass of the data-generating graph after one hypothetical outcome,

    sum_G P(G) * (1/M) * sum_m log P(G | data + outcome_m, do(X_j = x)),

with outcomes drawn from each graph's own predictive distribution. Up to a
constant (the current negative entropy, which does not depend on the
candidate), this is the expected information gain in the graph; it is
maximised over the continuous intervention value with a GP surrogate and an
upper-confidence-bound acquisition rule, run once per target node.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefState, InterventionSpec, log_posterior_after_batch, sample_interventional_batch
from .dags import dag_token
from .gp import GpDataset, GpHyperparams, GpSnapshot
from .seeds import substream

ACQ_GRID_SIZE = 512


class DesignError(ValueError):
    """Invalid design configuration or query."""


@dataclass(frozen=True)
class DesignConfig:
    """Design-time knobs: MC sample count, UCB coefficient, BO budget per
    target, per-node intervention domains, and the seed all streams derive
    from."""

    mc_samples: int = 64
    beta: float = 2.0
    bo_budget: int = 12
    domains: tuple[tuple[float, float], ...] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mc_samples < 1:
            raise DesignError(f"mc_samples must be >= 1, got {self.mc_samples}")
        if self.beta < 0:
            raise DesignError(f"beta must be >= 0, got {self.beta}")
        if self.bo_budget < 2:
            raise DesignError(f"bo_budget must be >= 2, got {self.bo_budget}")
        if self.domains is not None:
            doms = tuple((float(lo), float(hi)) for lo, hi in self.domains)
            for lo, hi in doms:
                if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                    raise DesignError(f"domain [{lo}, {hi}] must be finite and nonempty")
            object.__setattr__(self, "domains", doms)


def default_domains(belief: BeliefState) -> tuple[tuple[float, float], ...]:
    """Per-node [min, max] of observed values, expanded by 50% on each side."""
    raw = np.array([s.values for s in belief.data])
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    width = hi - lo
    return tuple((float(l - 0.5 * w), float(h + 0.5 * w)) for l, h, w in zip(lo, hi, width))


def resolve_domains(belief: BeliefState, cfg: DesignConfig) -> tuple[tuple[float, float], ...]:
    doms = cfg.domains if cfg.domains is not None else default_domains(belief)
    if len(doms) != belief.d:
        raise DesignError(f"{len(doms)} domains for d={belief.d} nodes")
    return doms


def utility(log_posterior: np.ndarray) -> float:
    """Negative Shannon entropy of the graph posterior, in nats (<= 0)."""
    lp = np.asarray(log_posterior, dtype=float)
    finite = lp[np.isfinite(lp)]
    norm = float(np.log(np.sum(np.exp(finite - finite.max()))) + finite.max()) if finite.size else math.inf
    if not math.isfinite(norm) or abs(norm) > 1e-6:
        raise DesignError(f"log posterior is not normalised (log-sum-exp = {norm:.3e})")
    mass = np.exp(finite)
    return float(np.sum(mass * finite))


def mc_expected_info_gain(belief: BeliefState, j: int, x: float, cfg: DesignConfig) -> float:
    """Monte-Carlo estimate of the design objective at candidate do(X_j = x).

    Deterministic given cfg.seed: each (target, graph) pair draws from its own
    substream, so estimates are independent of evaluation order.
    """
    value, _ = _mc_eig(belief, j, x, cfg, eval_order=0)
    return value


def _mc_eig(
    belief: BeliefState, j: int, x: float, cfg: DesignConfig, eval_order: int
) -> tuple[float, float]:
    """(estimate, standard error). ``eval_order`` keys the random substream in
    place of the raw float x."""
    doms = resolve_domains(belief, cfg)
    if not 0 <= j < belief.d:
        raise DesignError(f"target {j} out of range for d={belief.d}")
    lo, hi = doms[j]
    if not lo <= x <= hi:
        raise DesignError(f"intervention value {x} outside domain [{lo}, {hi}] of node {j}")
    spec = InterventionSpec(target=j, value=float(x))
    probs = belief.posterior_probs()
    m = cfg.mc_samples
    total = 0.0
    var_total = 0.0
    for g_idx, (g, p) in enumerate(zip(belief.universe, probs)):
        if p == 0.0:
            continue  # 0 * log 0 convention; also skips -inf log posteriors
        rng = substream(cfg.seed, "eig", j, eval_order, dag_token(g))
        outcomes = sample_interventional_batch(g, belief, spec, m, rng)
        lp_after = log_posterior_after_batch(belief, outcomes, j)[g_idx]
        total += p * float(np.mean(lp_after))
        if m > 1:
            var_total += p * p * float(np.var(lp_after, ddof=1)) / m
    return total, math.sqrt(var_total)


@dataclass
class BoSurrogate:
    """Evaluated (x, objective, stderr) triples for one target plus the GP
    surrogate fitted over them."""

    domain: tuple[float, float]
    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    stderrs: list = field(default_factory=list)
    hyperparams: GpHyperparams | None = None
    _snapshot: GpSnapshot | None = None

    def add(self, x: float, y: float, stderr: float) -> None:
        self.xs.append(float(x))
        self.ys.append(float(y))
        self.stderrs.append(float(stderr))
        self._refit()

    def _refit(self) -> None:
        lo, hi = self.domain
        width = hi - lo
        ys = np.array(self.ys)
        signal = float(np.var(ys)) if len(ys) >= 2 else 0.0
        if signal <= 0:
            signal = 1.0
        inv_ls = (8.0 / width) ** 2 if width > 0 else 1.0
        noise = float(np.mean(np.square(self.stderrs))) if self.stderrs else 0.0
        if noise <= 0:
            noise = 1e-4
        self.hyperparams = GpHyperparams(
            signal_variance=signal,
            inverse_lengthscales=(inv_ls,),
            noise_variance=noise,
        )
        data = GpDataset(np.array(self.xs).reshape(-1, 1), ys)
        self._snapshot = GpSnapshot.build(data, self.hyperparams)

    def predict(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(mean, latent sd) of the surrogate at each query point."""
        if self._snapshot is None:
            q = np.asarray(xs, dtype=float)
            return np.zeros(q.shape[0]), np.ones(q.shape[0])  # prior with unit variance
        means, var_f = self._snapshot.predict_batch(np.asarray(xs, dtype=float).reshape(-1, 1))
        return means, np.sqrt(var_f)


def ucb_acquisition(surrogate: BoSurrogate, x: float, beta: float) -> float:
    """Surrogate mean plus beta posterior standard deviations at x."""
    lo, hi = surrogate.domain
    if not lo <= x <= hi:
        raise DesignError(f"acquisition query {x} outside domain [{lo}, {hi}]")
    mean, sd = surrogate.predict(np.array([x]))
    return float(mean[0] + beta * sd[0])


def gp_ucb_maximize(
    objective,
    domain: tuple[float, float],
    budget: int,
    beta: float,
    grid_size: int = ACQ_GRID_SIZE,
    deadline: float | None = None,
) -> tuple[float, float, BoSurrogate, list]:
    """Maximise a noisy 1-d objective with GP-UCB on a fixed evaluation grid.

    ``objective(x, eval_order)`` returns (value, stderr). Seeds with the domain
    endpoints and midpoint, then repeatedly evaluates the grid argmax of
    mean + beta * sd. Returns (best_x, best_value, surrogate, evals) where
    evals is the ordered list of (x, value, stderr) triples; best is the
    highest *evaluated* value, ties broken toward the lowest x.
    """
    lo, hi = domain
    if budget < 2:
        raise DesignError(f"BO budget must be >= 2, got {budget}")
    surrogate = BoSurrogate(domain=(lo, hi))
    grid = np.linspace(lo, hi, grid_size)
    evals: list[tuple[float, float, float]] = []

    def run_eval(x: float) -> None:
        y, stderr = objective(float(x), len(evals))
        evals.append((float(x), float(y), float(stderr)))
        surrogate.add(x, y, stderr)

    for x0 in (lo, 0.5 * (lo + hi), hi)[:budget]:
        run_eval(x0)
    while len(evals) < budget:
        if deadline is not None and time.monotonic() > deadline:
            break
        means, sds = surrogate.predict(grid)
        run_eval(grid[int(np.argmax(means + beta * sds))])

    best_x, best_y = evals[0][0], evals[0][1]
    for x, y, _ in evals[1:]:
        if y > best_y or (y == best_y and x < best_x):
            best_x, best_y = x, y
    return best_x, best_y, surrogate, evals


@dataclass(frozen=True)
class DesignResult:
    target: int
    value: float
    eig: float
    diagnostics: tuple[dict, ...]
    budget_exhausted: bool = False

    def diagnostics_json(self) -> list[dict]:
        return [dict(rec) for rec in self.diagnostics]


def optimize_intervention(
    belief: BeliefState,
    cfg: DesignConfig,
    time_budget: float | None = None,
) -> DesignResult:
    """Best (target, value) across d per-target GP-UCB runs on the MC objective.

    Every evaluated (target, x, estimate) lands in diagnostics for the
    EIG-landscape view. Ties break toward the lowest target index, then the
    lowest value. With ``time_budget`` (seconds), remaining evaluations are
    skipped once the budget is exhausted and the best-so-far is returned with
    ``budget_exhausted`` set.
    """
    if belief.d < 2:
        raise DesignError("intervention design needs at least 2 nodes")
    doms = resolve_domains(belief, cfg)
    deadline = time.monotonic() + time_budget if time_budget is not None else None
    diagnostics: list[dict] = []
    best: tuple[float, int, float] | None = None  # (eig, j, x)
    errors: list[Exception] = []
    for j in range(belief.d):
        objective = lambda x, order, _j=j: _mc_eig(belief, _j, x, cfg, eval_order=order)
        try:
            _, _, _, evals = gp_ucb_maximize(
                objective, doms[j], cfg.bo_budget, cfg.beta, deadline=deadline
            )
        except Exception as exc:  # noqa: BLE001 - a failed target is skipped, not fatal
            errors.append(exc)
            continue
        for order, (x, y, _) in enumerate(evals):
            diagnostics.append({"target": j, "x": x, "eig": y, "order": order})
            if best is None or y > best[0] or (y == best[0] and (j, x) < (best[1], best[2])):
                best = (y, j, x)
    if best is None:
        raise DesignError(f"every target failed: {errors}")
    exhausted = deadline is not None and time.monotonic() > deadline
    return DesignResult(
        target=best[1],
        value=best[2],
        eig=best[0],
        diagnostics=tuple(diagnostics),
        budget_exhausted=exhausted,
    )
