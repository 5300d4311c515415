"""The closed experimentation loop: design, intervene, observe, update.

One episode draws an observational batch, initialises the belief, then
repeatedly picks an intervention (via BO-EIG or a baseline strategy), queries
the ground truth for one outcome, and absorbs it. Every step is recorded with
the full posterior so traces replay and plot without recomputation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .belief import (
    BeliefState,
    InterventionSpec,
    RootModel,
    Sample,
    initialize,
    update,
)
from .dags import Dag, GraphPrior, shd
from .design import DesignConfig, DesignResult, _mc_eig, optimize_intervention, resolve_domains, utility
from .envs import GroundTruthScm, sample_truth
from .gp import FitBounds
from .seeds import substream, substream_seed


class LoopError(RuntimeError):
    """Episode failure; ``step`` is -1 when initialization failed."""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(message)


@dataclass(frozen=True)
class EpisodeConfig:
    scm: GroundTruthScm
    max_steps: int
    design: DesignConfig = field(default_factory=DesignConfig)
    n_obs: int = 5
    confidence_stop: float = 0.99
    prior: GraphPrior = field(default_factory=GraphPrior)
    root_model: RootModel = field(default_factory=RootModel)
    strategy: str = "bo"
    seed: int = 0
    samples_per_step: int = 1
    fit_restarts: int = 5
    fit_bounds: FitBounds | None = None

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if not 0.5 < self.confidence_stop <= 1.0:
            raise ValueError(
                f"confidence_stop must be in (0.5, 1], got {self.confidence_stop}"
            )
        if self.samples_per_step < 1:
            raise ValueError("samples_per_step must be >= 1")


@dataclass(frozen=True)
class StepRecord:
    t: int
    chosen: InterventionSpec
    eig: float
    outcome: Sample
    posterior: tuple[float, ...]
    entropy: float
    p_true: float | None = None
    expected_shd: float | None = None

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "chosen": self.chosen.to_json(),
            "eig": self.eig,
            "outcome": self.outcome.to_json(),
            "posterior": list(self.posterior),
            "entropy": self.entropy,
            "p_true": self.p_true,
            "expected_shd": self.expected_shd,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StepRecord":
        return cls(
            t=int(obj["t"]),
            chosen=InterventionSpec.from_json(obj["chosen"]),
            eig=float(obj["eig"]),
            outcome=Sample.from_json(obj["outcome"]),
            posterior=tuple(float(v) for v in obj["posterior"]),
            entropy=float(obj["entropy"]),
            p_true=None if obj.get("p_true") is None else float(obj["p_true"]),
            expected_shd=None if obj.get("expected_shd") is None else float(obj["expected_shd"]),
        )


def metrics(
    posterior: np.ndarray, truth: Dag, universe: tuple[Dag, ...]
) -> tuple[float, float, float]:
    """(posterior mass on truth, entropy in nats, expected SHD to truth)."""
    universe = tuple(universe)
    try:
        idx = universe.index(truth)
    except ValueError:
        raise LoopError(f"truth {truth!r} is not in the hypothesis universe", step=-1) from None
    probs = np.asarray(posterior, dtype=float)
    p_true = float(probs[idx])
    nonzero = probs[probs > 0]
    entropy = float(-np.sum(nonzero * np.log(nonzero)))
    expected_shd = float(sum(p * shd(g, truth) for g, p in zip(universe, probs) if p > 0))
    return p_true, entropy, expected_shd


STRATEGY_NAMES = ("bo", "random", "round_robin", "grid_eig")
GRID_EIG_POINTS = 512


def baseline_strategies(name: str):
    """Strategy factory; every strategy shares the choose-intervention contract

        strategy(belief, design_cfg, step_seed, t) -> DesignResult

    ``random`` picks target and value uniformly; ``round_robin`` cycles
    targets with uniform values; ``grid_eig`` replaces BO with dense-grid EIG
    maximisation (a slow reference); ``bo`` is the GP-UCB design path.
    """
    if name not in STRATEGY_NAMES:
        raise ValueError(f"unknown strategy {name!r}; options: {', '.join(STRATEGY_NAMES)}")

    if name == "bo":
        def bo_strategy(belief, cfg, step_seed, t):
            return optimize_intervention(belief, _reseeded(cfg, step_seed))
        return bo_strategy

    if name == "random":
        def random_strategy(belief, cfg, step_seed, t):
            cfg = _reseeded(cfg, step_seed)
            doms = resolve_domains(belief, cfg)
            rng = substream(step_seed, "choice")
            j = int(rng.integers(belief.d))
            lo, hi = doms[j]
            x = float(rng.uniform(lo, hi))
            eig, _ = _mc_eig(belief, j, x, cfg, eval_order=0)
            return DesignResult(
                target=j, value=x, eig=eig,
                diagnostics=({"target": j, "x": x, "eig": eig, "order": 0},),
            )
        return random_strategy

    if name == "round_robin":
        def round_robin_strategy(belief, cfg, step_seed, t):
            cfg = _reseeded(cfg, step_seed)
            doms = resolve_domains(belief, cfg)
            j = t % belief.d
            lo, hi = doms[j]
            rng = substream(step_seed, "choice")
            x = float(rng.uniform(lo, hi))
            eig, _ = _mc_eig(belief, j, x, cfg, eval_order=0)
            return DesignResult(
                target=j, value=x, eig=eig,
                diagnostics=({"target": j, "x": x, "eig": eig, "order": 0},),
            )
        return round_robin_strategy

    def grid_eig_strategy(belief, cfg, step_seed, t):
        cfg = _reseeded(cfg, step_seed)
        doms = resolve_domains(belief, cfg)
        best = None
        diagnostics = []
        for j in range(belief.d):
            lo, hi = doms[j]
            for order, x in enumerate(np.linspace(lo, hi, GRID_EIG_POINTS)):
                eig, _ = _mc_eig(belief, j, float(x), cfg, eval_order=order)
                diagnostics.append({"target": j, "x": float(x), "eig": eig, "order": order})
                if best is None or eig > best[0] or (eig == best[0] and (j, x) < best[1:]):
                    best = (eig, j, float(x))
        return DesignResult(
            target=best[1], value=best[2], eig=best[0], diagnostics=tuple(diagnostics)
        )
    return grid_eig_strategy


def _reseeded(cfg: DesignConfig, seed: int) -> DesignConfig:
    return DesignConfig(
        mc_samples=cfg.mc_samples,
        beta=cfg.beta,
        bo_budget=cfg.bo_budget,
        domains=cfg.domains,
        seed=seed,
    )


@dataclass(frozen=True)
class EpisodeResult:
    records: list[StepRecord]
    init_belief: BeliefState
    final_belief: BeliefState
    obs: list[Sample]
    step_diagnostics: list[tuple[dict, ...]]


def run_episode(cfg: EpisodeConfig) -> list[StepRecord]:
    """Run one closed-loop episode; fully deterministic given cfg.seed."""
    return run_episode_detailed(cfg).records


def init_seed_for(cfg_seed: int) -> int:
    """The belief-initialisation seed an episode with master seed cfg_seed uses.

    Exposed so an API session can be created that reproduces a library-level
    run bit for bit.
    """
    return substream_seed(cfg_seed, "init")


def run_episode_detailed(cfg: EpisodeConfig) -> EpisodeResult:
    truth = cfg.scm.graph
    try:
        obs_rng = substream(cfg.seed, "obs")
        obs = [
            sample_truth(cfg.scm, InterventionSpec(), obs_rng) for _ in range(cfg.n_obs)
        ]
        belief = initialize(
            obs,
            prior=cfg.prior,
            root_model=cfg.root_model,
            seed=init_seed_for(cfg.seed),
            fit_restarts=cfg.fit_restarts,
            fit_bounds=cfg.fit_bounds,
        )
    except Exception as exc:
        raise LoopError(f"episode initialization failed: {exc}", step=-1) from exc

    init_belief = belief
    strategy = baseline_strategies(cfg.strategy)
    design = cfg.design
    if design.domains is None:
        design = DesignConfig(
            mc_samples=design.mc_samples,
            beta=design.beta,
            bo_budget=design.bo_budget,
            domains=resolve_domains(belief, design),
            seed=design.seed,
        )

    records: list[StepRecord] = []
    step_diagnostics: list[tuple[dict, ...]] = []
    for t in range(cfg.max_steps):
        if float(np.max(belief.posterior_probs())) >= cfg.confidence_stop:
            break
        step_seed = substream_seed(cfg.seed, "step", t)
        try:
            choice = strategy(belief, design, step_seed, t)
            spec = InterventionSpec(target=choice.target, value=choice.value)
            outcome = None
            for k in range(cfg.samples_per_step):
                outcome = sample_truth(cfg.scm, spec, substream(step_seed, "outcome", k))
                belief = update(belief, outcome)
        except Exception as exc:
            raise LoopError(f"episode failed at step {t}: {exc}", step=t) from exc
        posterior = belief.posterior_probs()
        p_true, entropy, e_shd = metrics(posterior, truth, belief.universe)
        records.append(
            StepRecord(
                t=t,
                chosen=spec,
                eig=choice.eig,
                outcome=outcome,
                posterior=tuple(float(p) for p in posterior),
                entropy=entropy,
                p_true=p_true,
                expected_shd=e_shd,
            )
        )
        step_diagnostics.append(choice.diagnostics)
    return EpisodeResult(
        records=records,
        init_belief=init_belief,
        final_belief=belief,
        obs=obs,
        step_diagnostics=step_diagnostics,
    )


SUMMARY_COLUMNS = ("t", "target", "value", "eig", "entropy", "p_true", "expected_shd")


def write_trace(records: list[StepRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json()) + "\n")


def read_trace(path: str | Path) -> list[StepRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(StepRecord.from_json(json.loads(line)))
    return records


def write_summary(records: list[StepRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.t,
                    rec.chosen.target,
                    repr(rec.chosen.value),
                    repr(rec.eig),
                    repr(rec.entropy),
                    "" if rec.p_true is None else repr(rec.p_true),
                    "" if rec.expected_shd is None else repr(rec.expected_shd),
                ]
            )
