"""Command-line front end.

::

    cgmi scenario --seed 0 --out runs/scen
    cgmi attack runs/scen/scenario.json --generations 100 --out runs/a
    cgmi serve runs/scen/scenario.json --port 8765
    cgmi ablate runs/scen/scenario.json --out runs/ablation

Exit codes: 0 complete, 2 partial (budget exhausted or interrupted), 1 error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .attack import DIRECT_STYLE, MAPPED, MODES
from .losses import LOSSES
from .oracle import LocalOracle, RemoteOracle
from .pipeline import RunConfig, run_experiment
from .report import write_csv, write_run
from .scenario import Scenario, make_planted_scenario
from .server import OracleServer

log = logging.getLogger("cgmi")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2

ABLATION_FIELDS = ["arm", "loss", "mode", "selection", "acc1", "acc5", "delta_eval", "fid",
                   "overall_fid", "attack_queries", "selection_queries", "evaluation_queries",
                   "partial", "error"]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    # defaults are SUPPRESSed so config-file values can sit between flags and RunConfig defaults
    S = argparse.SUPPRESS
    p.add_argument("--config", help="flat JSON file with RunConfig field names")
    p.add_argument("--loss", choices=sorted(LOSSES), default=S)
    p.add_argument("--mode", choices=MODES, default=S)
    p.add_argument("--classes", type=_int_list, default=S, help="comma-separated class indices")
    p.add_argument("--restarts", type=int, default=S)
    p.add_argument("--generations", type=int, default=S)
    p.add_argument("--pop", type=int, default=S)
    p.add_argument("--pool", type=int, default=S)
    p.add_argument("--select", type=int, default=S)
    p.add_argument("--transforms", type=int, default=S)
    p.add_argument("--budget", type=int, default=S, help="target-oracle queries per class")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--jobs", type=int, default=S, help="concurrent restarts")
    p.add_argument("--features", choices=["identity", "projection"], default=S)
    p.add_argument("--harvest", choices=["trace", "final"], default=S)
    p.add_argument("--no-selection", dest="selection", action="store_false", default=S)
    p.add_argument("--no-early-stop", dest="early_stop", action="store_false", default=S)
    p.add_argument("--endpoint", help="query a remote oracle instead of the scenario's target")


def resolve_config(args: argparse.Namespace, **overrides) -> RunConfig:
    """Flags > config file > defaults."""
    values = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        unknown = set(doc) - set(RunConfig.field_names())
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    for name in RunConfig.field_names():
        if name in vars(args):
            values[name] = getattr(args, name)
    values.update(overrides)
    return RunConfig(**values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgmi", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="generate a planted-identity scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=10, dest="num_classes")
    p.add_argument("--dims", type=_int_list, default=[16, 16, 16], help="k,m,d")
    p.add_argument("--noise", type=float, default=0.1, help="evaluation centroid noise")
    p.add_argument("--tau-target", type=float, default=1.0)
    p.add_argument("--tau-eval", type=float, default=1.0)
    p.add_argument("--train-per-class", type=int, default=50)
    p.add_argument("--train-noise", type=float, default=0.1)
    p.add_argument("--style-samples", type=int, default=10_000)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("attack", help="attack, select and evaluate per class")
    p.add_argument("scenario")
    _add_run_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="serve the scenario's target model over HTTP")
    p.add_argument("scenario")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--max-queries", type=int, default=None)
    p.add_argument("--model", choices=["target", "evaluation"], default="target")

    p = sub.add_parser("ablate", help="run the loss / mode / selection ablation grid")
    p.add_argument("scenario")
    _add_run_flags(p)
    p.add_argument("--grid", help="LOSSES:MODES, e.g. poincare,max_margin:mapped "
                                  "(default: all losses mapped + direct_style + no-selection)")
    p.add_argument("--with-no-selection", action="store_true",
                   help="add the no-selection arm to an explicit --grid")
    p.add_argument("--out", required=True)
    return parser


def cmd_scenario(args) -> int:
    if len(args.dims) != 3:
        raise ValueError("--dims takes k,m,d")
    k, m, d = args.dims
    scen = make_planted_scenario(seed=args.seed, num_classes=args.num_classes, latent_dim=k,
                                 style_dim=m, sample_dim=d, tau_target=args.tau_target,
                                 tau_eval=args.tau_eval, centroid_noise=args.noise,
                                 train_per_class=args.train_per_class, train_noise=args.train_noise,
                                 style_samples=args.style_samples)
    scen_path, prior_path = scen.save(args.out)
    print(f"wrote {scen_path} and {prior_path}")
    return EXIT_OK


def _target_oracle(args, scen: Scenario):
    if getattr(args, "endpoint", None):
        oracle = RemoteOracle(args.endpoint)
        meta = oracle.meta()
        if (meta["classes"], meta["input_dim"]) != (scen.num_classes, scen.config.sample_dim):
            raise ValueError(f"remote oracle shape {meta} does not match the scenario")
        return oracle, {"kind": "remote", "endpoint": args.endpoint}
    return LocalOracle(scen.target), {"kind": "local"}


def cmd_attack(args) -> int:
    scen = Scenario.load(args.scenario)
    cfg = resolve_config(args)
    oracle, oracle_info = _target_oracle(args, scen)
    started = time.time()
    result = run_experiment(scen, cfg, oracle, allow_interrupt=True)
    path = write_run(result, args.out, args.scenario, oracle_info, started)
    s = result.summary()
    print(f"acc@1 {s['acc1']:.4f}  acc@5 {s['acc5']:.4f}  delta_eval {s['delta_eval']:.4f}  "
          f"fid {s['fid']:.4f}  target queries {s['target_queries']}  -> {path}")
    return EXIT_PARTIAL if result.partial else EXIT_OK


def cmd_serve(args) -> int:
    scen = Scenario.load(args.scenario)
    clf = scen.target if args.model == "target" else scen.evaluation
    server = OracleServer(clf, args.host, args.port, args.max_queries)
    print(f"serving {args.model} model ({clf.num_classes} classes, d={clf.input_dim}) on {server.url}",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def ablation_arms(grid: str | None, with_no_selection: bool):
    """List of (arm name, loss, mode, selection)."""
    if grid is None:
        arms = [(f"{loss}/{MAPPED}", loss, MAPPED, True) for loss in ("poincare", "max_margin", "cross_entropy")]
        arms.append((f"poincare/{DIRECT_STYLE}", "poincare", DIRECT_STYLE, True))
        arms.append(("poincare/mapped/no-selection", "poincare", MAPPED, False))
        return arms
    try:
        losses, modes = grid.split(":")
    except ValueError:
        raise ValueError("--grid must look like LOSSES:MODES") from None
    arms = [(f"{l}/{m}", l, m, True) for l in losses.split(",") for m in modes.split(",")]
    for _, l, m, _ in arms:
        if l not in LOSSES or m not in MODES:
            raise ValueError(f"bad grid entry {l}:{m}")
    if with_no_selection:
        arms.append((f"{arms[0][1]}/{arms[0][2]}/no-selection", arms[0][1], arms[0][2], False))
    return arms


def cmd_ablate(args) -> int:
    scen = Scenario.load(args.scenario)
    arms = ablation_arms(args.grid, args.with_no_selection)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    partial = False
    for name, loss, mode, selection in arms:
        row = {"arm": name, "loss": loss, "mode": mode, "selection": int(selection)}
        try:
            cfg = resolve_config(args, loss=loss, mode=mode, selection=selection)
            oracle, info = _target_oracle(args, scen)
            res = run_experiment(scen, cfg, oracle)
            write_run(res, out / name.replace("/", "_"), args.scenario, info)
            s = res.summary()
            row.update(acc1=s["acc1"], acc5=s["acc5"], delta_eval=s["delta_eval"], fid=s["fid"],
                       overall_fid=s["overall_fid"],
                       attack_queries=sum(r.ledger.attack for r in res.classes),
                       selection_queries=sum(r.ledger.selection for r in res.classes),
                       evaluation_queries=s["evaluation_queries"], partial=int(res.partial), error="")
            partial |= res.partial
        except Exception as exc:  # one failing arm must not stop the grid
            log.exception("arm %s failed", name)
            row["error"] = f"{type(exc).__name__}: {exc}"
            partial = True
        rows.append(row)
        print(f"{name:36s} acc@1 {row.get('acc1', float('nan')):.4f}  acc@5 {row.get('acc5', float('nan')):.4f}")
    write_csv(out / "ablation.csv", rows, ABLATION_FIELDS)
    return EXIT_PARTIAL if partial else EXIT_OK


COMMANDS = {"scenario": cmd_scenario, "attack": cmd_attack, "serve": cmd_serve, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"cgmi {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
