"""Command-line entry points.

  abcd simulate   run a closed-loop episode against a ground-truth SCM config
  abcd enumerate  count (or list) all DAGs over d nodes
  abcd serve      start the decision-support HTTP service
  abcd report     render figures for a finished run directory

Exit codes: 0 success, 1 runtime failure, 2 bad configuration or arguments.
All randomness derives from --seed; identical config + seed reproduces traces
byte for byte. Set ABCD_LOG to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, episode_config_to_json, load_config, make_manifest, write_manifest
from .dags import DagError, enumerate_dags
from .design import DesignConfig
from .loop import (
    EpisodeConfig,
    LoopError,
    STRATEGY_NAMES,
    run_episode_detailed,
    write_summary,
    write_trace,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _setup_logging() -> None:
    level = os.environ.get("ABCD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _apply_overrides(cfg: EpisodeConfig, args: argparse.Namespace) -> EpisodeConfig:
    seed = cfg.seed if args.seed is None else args.seed
    design = cfg.design
    design = DesignConfig(
        mc_samples=design.mc_samples if args.mc_samples is None else args.mc_samples,
        beta=design.beta if args.beta is None else args.beta,
        bo_budget=design.bo_budget if args.bo_budget is None else args.bo_budget,
        domains=design.domains,
        seed=seed,
    )
    return EpisodeConfig(
        scm=cfg.scm,
        max_steps=cfg.max_steps if args.steps is None else args.steps,
        design=design,
        n_obs=cfg.n_obs,
        confidence_stop=cfg.confidence_stop,
        prior=cfg.prior,
        root_model=cfg.root_model,
        strategy=cfg.strategy if args.strategy is None else args.strategy,
        seed=seed,
        samples_per_step=cfg.samples_per_step,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except (ConfigError, ValueError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out)
    if out_dir.exists() and any(out_dir.iterdir()):
        print(f"error: output directory {out_dir} already exists and is not empty",
              file=sys.stderr)
        return EXIT_CONFIG
    # stage everything in a sibling directory; publish atomically on success
    stage = out_dir.parent / f".{out_dir.name}.partial-{os.getpid()}"
    if stage.exists():
        shutil.rmtree(stage)
    stage.mkdir(parents=True)
    try:
        manifest = make_manifest(args.config, cfg, str(out_dir), __version__)
        write_manifest(manifest, stage / "manifest.json")
        result = run_episode_detailed(cfg)
        write_trace(result.records, stage / "trace.jsonl")
        write_summary(result.records, stage / "summary.csv")
        diagnostics = [
            {"t": rec.t, "evaluations": list(evals)}
            for rec, evals in zip(result.records, result.step_diagnostics)
        ]
        (stage / "eig_diagnostics.json").write_text(
            json.dumps(diagnostics) + "\n", encoding="utf-8"
        )
        if out_dir.exists():
            out_dir.rmdir()  # only if still empty
        os.replace(stage, out_dir)
    except LoopError as exc:
        shutil.rmtree(stage, ignore_errors=True)
        print(f"error: {exc} (step {exc.step})", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        shutil.rmtree(stage, ignore_errors=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    final = result.records[-1] if result.records else None
    if final is not None:
        print(
            f"finished after {len(result.records)} interventions; "
            f"entropy {final.entropy:.4f} nats"
            + (f", p_true {final.p_true:.4f}" if final.p_true is not None else "")
        )
    else:
        print("finished without interventions (confidence already reached)")
    print(f"outputs written to {out_dir}")
    return EXIT_OK


def cmd_enumerate(args: argparse.Namespace) -> int:
    try:
        dags = enumerate_dags(args.d)
    except DagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(len(dags))
    if args.list:
        for g in dags:
            print(json.dumps(g.to_json()))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import make_server  # deferred: keeps CLI startup light

    state_dir = Path(args.state_dir) if args.state_dir else None
    if state_dir is not None:
        try:
            state_dir.mkdir(parents=True, exist_ok=True)
            probe = state_dir / ".write-probe"
            probe.write_text("", encoding="utf-8")
            probe.unlink()
        except OSError as exc:
            print(f"error: state dir {state_dir} is not writable: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    try:
        server, _ = make_server(
            args.port,
            state_dir=state_dir,
            recommend_time_budget=args.recommend_budget,
            static_dir=args.static_dir,
        )
    except OSError as exc:
        print(f"error: cannot bind port {args.port}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (state dir: {state_dir or 'none, in-memory'})",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    from .report import ReportError, render_run  # deferred: matplotlib import cost

    try:
        written = render_run(args.run, args.out)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abcd", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"abcd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a closed-loop episode")
    sim.add_argument("--config", required=True, help="path to a run config (or manifest) JSON")
    sim.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    sim.add_argument("--out", required=True, help="output directory for manifest/trace/summary")
    sim.add_argument("--strategy", choices=STRATEGY_NAMES, default=None)
    sim.add_argument("--steps", type=int, default=None, help="intervention budget")
    sim.add_argument("--mc-samples", type=int, default=None, dest="mc_samples")
    sim.add_argument("--beta", type=float, default=None, help="UCB exploration coefficient")
    sim.add_argument("--bo-budget", type=int, default=None, dest="bo_budget")
    sim.set_defaults(func=cmd_simulate)

    enum = sub.add_parser("enumerate", help="count or list all DAGs over d nodes")
    enum.add_argument("--d", type=int, required=True)
    enum.add_argument("--list", action="store_true", help="print each graph as JSON")
    enum.set_defaults(func=cmd_enumerate)

    srv = sub.add_parser("serve", help="start the decision-support HTTP service")
    srv.add_argument("--port", type=int, default=8747)
    srv.add_argument("--state-dir", default=None, dest="state_dir")
    srv.add_argument("--recommend-budget", type=float, default=30.0, dest="recommend_budget",
                     help="seconds allowed per recommendation before returning best-so-far")
    srv.add_argument("--static-dir", default=None, dest="static_dir",
                     help="directory of frontend assets to serve at /")
    srv.set_defaults(func=cmd_serve)

    rep = sub.add_parser("report", help="render figures for a finished run directory")
    rep.add_argument("--run", required=True, help="run directory produced by simulate")
    rep.add_argument("--out", default=None, help="where to write figures (default: the run dir)")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
