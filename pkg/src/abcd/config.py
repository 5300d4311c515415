"""Run configuration files and run manifests.

One JSON schema (versioned via a "schema" field) is shared by the CLI and the
HTTP service. A run manifest records the fully resolved configuration before
the episode starts; re-running from a manifest reproduces the trace.
"""

from __future__ import annotations

import datetime
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .dags import Dag, GraphPrior
from .design import DesignConfig
from .belief import RootModel
from .envs import GroundTruthScm, ScmError
from .loop import EpisodeConfig, STRATEGY_NAMES

SCHEMA = "abcd/v1"


class ConfigError(ValueError):
    """Malformed configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")


def prior_to_json(prior: GraphPrior) -> dict:
    obj: dict = {"kind": prior.kind}
    if prior.max_edges is not None:
        obj["max_edges"] = prior.max_edges
    if prior.reference_graph is not None:
        obj["reference"] = prior.reference_graph.to_json()
    if prior.explicit_table is not None:
        obj["explicit"] = [
            {"graph": g.to_json(), "weight": w} for g, w in prior.explicit_table.items()
        ]
    return obj


def prior_from_json(obj: dict | None) -> GraphPrior:
    if obj is None:
        return GraphPrior()
    kind = obj.get("kind", "uniform")
    reference = Dag.from_json(obj["reference"]) if "reference" in obj else None
    explicit = None
    if "explicit" in obj:
        explicit = {
            Dag.from_json(rec["graph"]): float(rec["weight"]) for rec in obj["explicit"]
        }
    try:
        return GraphPrior(
            kind=kind,
            reference_graph=reference,
            max_edges=obj.get("max_edges"),
            explicit_table=explicit,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="prior") from exc


def design_to_json(design: DesignConfig) -> dict:
    return {
        "mc_samples": design.mc_samples,
        "beta": design.beta,
        "bo_budget": design.bo_budget,
        "domains": None if design.domains is None else [list(d) for d in design.domains],
    }


def design_from_json(obj: dict | None, seed: int = 0) -> DesignConfig:
    obj = obj or {}
    try:
        return DesignConfig(
            mc_samples=int(obj.get("mc_samples", 64)),
            beta=float(obj.get("beta", 2.0)),
            bo_budget=int(obj.get("bo_budget", 12)),
            domains=None
            if obj.get("domains") is None
            else tuple((float(lo), float(hi)) for lo, hi in obj["domains"]),
            seed=seed,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="design") from exc


def root_model_from_json(obj: dict | None) -> RootModel:
    obj = obj or {}
    try:
        return RootModel(
            mu0=float(obj.get("mu0", 0.0)),
            kappa0=float(obj.get("kappa0", 1.0)),
            alpha0=float(obj.get("alpha0", 2.0)),
            beta0=float(obj.get("beta0", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="root_model") from exc


def root_model_to_json(rm: RootModel) -> dict:
    return {"mu0": rm.mu0, "kappa0": rm.kappa0, "alpha0": rm.alpha0, "beta0": rm.beta0}


def episode_config_from_json(obj: dict) -> EpisodeConfig:
    """Parse a full simulation config (or a manifest wrapping one)."""
    if "resolved" in obj and "schema" in obj:
        obj = obj["resolved"]  # accept a manifest in place of a config
    schema = obj.get("schema")
    if schema != SCHEMA:
        raise ConfigError(f"expected schema {SCHEMA!r}, got {schema!r}", field="schema")
    if "scm" not in obj:
        raise ConfigError("missing ground-truth SCM section", field="scm")
    try:
        scm = GroundTruthScm.from_json(obj["scm"])
    except ScmError as exc:
        raise ConfigError(str(exc), field="scm") from exc
    episode = obj.get("episode", {})
    seed = int(episode.get("seed", 0))
    strategy = episode.get("strategy", "bo")
    if strategy not in STRATEGY_NAMES:
        raise ConfigError(
            f"unknown strategy {strategy!r}; options: {', '.join(STRATEGY_NAMES)}",
            field="episode.strategy",
        )
    try:
        return EpisodeConfig(
            scm=scm,
            max_steps=int(episode.get("max_steps", 10)),
            design=design_from_json(obj.get("design"), seed=seed),
            n_obs=int(episode.get("n_obs", 5)),
            confidence_stop=float(episode.get("confidence_stop", 0.99)),
            prior=prior_from_json(obj.get("prior")),
            root_model=root_model_from_json(obj.get("root_model")),
            strategy=strategy,
            seed=seed,
            samples_per_step=int(episode.get("samples_per_step", 1)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), field="episode") from exc


def episode_config_to_json(cfg: EpisodeConfig) -> dict:
    return {
        "schema": SCHEMA,
        "scm": cfg.scm.to_json(),
        "episode": {
            "n_obs": cfg.n_obs,
            "max_steps": cfg.max_steps,
            "confidence_stop": cfg.confidence_stop,
            "strategy": cfg.strategy,
            "seed": cfg.seed,
            "samples_per_step": cfg.samples_per_step,
        },
        "design": design_to_json(cfg.design),
        "prior": prior_to_json(cfg.prior),
        "root_model": root_model_to_json(cfg.root_model),
    }


def load_config(path: str | Path) -> EpisodeConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    return episode_config_from_json(obj)


@dataclass(frozen=True)
class RunManifest:
    config_path: str
    resolved: dict
    out_dir: str
    version: str
    timestamp: str

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "config_path": self.config_path,
            "resolved": self.resolved,
            "out_dir": self.out_dir,
            "version": self.version,
            "timestamp": self.timestamp,
        }


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    """Atomic write: the manifest is either fully present or absent."""
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(json.dumps(manifest.to_json(), indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def make_manifest(config_path: str, cfg: EpisodeConfig, out_dir: str, version: str) -> RunManifest:
    return RunManifest(
        config_path=str(config_path),
        resolved=episode_config_to_json(cfg),
        out_dir=str(out_dir),
        version=version,
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )
