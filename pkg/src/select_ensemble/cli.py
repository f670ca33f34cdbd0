"""Command-line front end.

Subcommands
-----------
synth     write a synthetic edge stream with planted clique events
detect    run every detector x feature pair and write one score CSV each
ensemble  run the two-phase ensemble and write the report and final ranking
evaluate  ensemble plus AP-by-delay and the random-ensemble significance test
noise     sweep 0..K shuffled lists per strategy and write mean AP

Every file written carries a run manifest (config path, inputs, output
directory, master seed, version and effective options): JSON outputs under
the ``manifest`` key, CSV and text outputs as a leading ``# manifest:`` line.

Seeds: per-task seeds come from ``derive_seed(master, counter)`` with
counter 0 for synthetic generation, 1 for random-ensemble trials, 2 for the
noise sweep and 3 for random selection strategies given without a seed.

Exit status: 0 success, 1 invalid input or configuration, 2 I/O failure,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from . import __version__
from .errors import SelectEnsembleError
from .evaluation import (
    EventTruth,
    ap_by_delay,
    derive_seed,
    make_synthetic,
    noise_sweep,
    significance_vs_random,
    write_edge_csv,
)
from .ingestion import TickSpec, load_edge_stream, skip_weekends
from .pipeline import PipelineConfig, Strategy, run_detectors, run_ensemble

logger = logging.getLogger("select_ensemble")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3

SEED_SYNTH, SEED_TRIALS, SEED_NOISE, SEED_RANDOM = 0, 1, 2, 3

DEFAULTS = {
    "input": {"directed": True, "tick_width": 1.0, "tick_origin": None, "skip_weekends": False},
    "evaluation": {
        "delay_max": 3,
        "trials": 100,
        "k_max": 10,
        "repeats": 10,
        "noise_strategies": ["full", "diverse", "vertical", "horizontal"],
    },
    "synth": {"nodes": 100, "ticks": 200, "events": 10},
}


class UsageError(SelectEnsembleError):
    pass


class _Parser(argparse.ArgumentParser):
    """Bad usage is a validation failure (exit 1), not argparse's exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


# -- config ------------------------------------------------------------------


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    import yaml

    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise UsageError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a mapping")
    unknown = set(data) - {"pipeline", "input", "evaluation", "synth"}
    if unknown:
        raise UsageError(f"{path}: unknown config sections {sorted(unknown)}")
    return data


def _section(cfg: dict, name: str) -> dict:
    merged = dict(DEFAULTS.get(name, {}))
    merged.update(cfg.get(name) or {})
    return merged


def _pipeline_config(cfg: dict, args) -> PipelineConfig:
    raw = dict(cfg.get("pipeline") or {})
    if getattr(args, "strategy", None):
        raw["strategy"] = args.strategy
        raw.pop("phase2_strategy", None)
    pc = PipelineConfig.from_dict(raw)
    # random strategies without their own seed draw from the master seed
    updates = {}
    for key, strat in (("strategy", pc.strategy), ("phase2_strategy", pc.phase2_strategy)):
        if strat is not None and strat.name == "random" and strat.seed is None:
            updates[key] = Strategy("random", strat.k, derive_seed(args.seed, SEED_RANDOM))
    if updates:
        pc = PipelineConfig(**{**pc.__dict__, **updates})
    return pc


def _tick_spec(inp: dict) -> TickSpec:
    return TickSpec(
        width=float(inp["tick_width"]),
        origin=inp["tick_origin"],
        skip=skip_weekends if inp["skip_weekends"] else None,
    )


def _load_graph(args, cfg: dict):
    inp = _section(cfg, "input")
    if args.undirected:
        inp["directed"] = False
    return load_edge_stream(args.input, directed=bool(inp["directed"]), tick_spec=_tick_spec(inp))


# -- output ------------------------------------------------------------------


def _manifest(args, inputs: list[str], options: dict) -> dict:
    return {
        "command": args.command,
        "config": args.config,
        "inputs": inputs,
        "out": args.out,
        "seed": args.seed,
        "version": __version__,
        "options": options,
    }


def _header(manifest: dict) -> list[str]:
    return ["manifest: " + json.dumps(manifest, sort_keys=True, separators=(",", ":"))]


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _json(manifest: dict, body: dict) -> str:
    return json.dumps({"manifest": manifest, **body}, indent=2, sort_keys=True) + "\n"


def _safe_name(detector_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", detector_id).strip("_")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ----------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _read_config(args.config)
    syn = _section(cfg, "synth")
    for key in ("nodes", "ticks", "events"):
        if getattr(args, key) is not None:
            syn[key] = getattr(args, key)
    extra = {k: v for k, v in syn.items() if k not in ("nodes", "ticks", "events")}
    g, truth = make_synthetic(
        int(syn["nodes"]), int(syn["ticks"]), int(syn["events"]), derive_seed(args.seed, SEED_SYNTH), **extra
    )
    manifest = _manifest(args, [], dict(sorted(syn.items())))
    out = _out_dir(args)
    write_edge_csv(g, out / "edges.csv", _header(manifest))
    lines = [f"# {h}" for h in _header(manifest)] + [str(t) for t in truth.event_ticks]
    _write(out / "truth.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _read_config(args.config)
    pc = _pipeline_config(cfg, args)
    g = _load_graph(args, cfg)
    scores = run_detectors(g, pc)
    manifest = _manifest(args, [args.input], {"pipeline": pc.to_dict()})
    out = _out_dir(args)
    sdir = out / "scores"
    sdir.mkdir(exist_ok=True)
    for s in scores:
        s.to_csv(sdir / f"{_safe_name(s.detector_id)}.csv", _header(manifest))
    body = {"node_ids": list(g.node_ids), "timestamps": [int(t) for t in g.timestamps]}
    body["components"] = [s.to_dict() for s in scores]
    _write(out / "scores.json", _json(manifest, body))
    return EXIT_OK


def cmd_ensemble(args) -> int:
    cfg = _read_config(args.config)
    pc = _pipeline_config(cfg, args)
    g = _load_graph(args, cfg)
    report = run_ensemble(run_detectors(g, pc), pc)
    manifest = _manifest(args, [args.input], {"pipeline": pc.to_dict()})
    out = _out_dir(args)
    _write(out / "report.json", report.to_json(extra={"manifest": manifest}))
    report.final.to_csv(report.final_scores, out / "final.csv", _header(manifest))
    for w in report.phase1.warnings + report.phase2.warnings:
        logger.warning(w)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _read_config(args.config)
    ev = _section(cfg, "evaluation")
    delay_max = args.delay_max if args.delay_max is not None else int(ev["delay_max"])
    trials = args.trials if args.trials is not None else int(ev["trials"])
    if delay_max < 0:
        raise UsageError("--delay-max must be non-negative")
    if trials < 0 or trials == 1:
        raise UsageError("--trials must be 0 (skip the significance test) or at least 2")
    pc = _pipeline_config(cfg, args)
    truth = EventTruth.read(args.truth)
    g = _load_graph(args, cfg)
    truth.check(g.T)
    scores = run_detectors(g, pc)
    if trials:
        report = significance_vs_random(
            None, pc, truth, trials, derive_seed(args.seed, SEED_TRIALS), delay_max=delay_max, scores=scores
        )
        body = report.to_dict()
        curve = report.ap_by_delay
    else:
        curve = ap_by_delay(run_ensemble(scores, pc).final, truth, delay_max)
        body = {"ap_by_delay": {str(d): v for d, v in curve.items()}, "trials": 0, "z_gain": None}
    manifest = _manifest(
        args, [args.input, args.truth], {"pipeline": pc.to_dict(), "delay_max": delay_max, "trials": trials}
    )
    out = _out_dir(args)
    _write(out / "eval.json", _json(manifest, body))
    rows = [f"# {h}" for h in _header(manifest)] + ["delay,ap"]
    rows += [f"{d},{curve[d]!r}" for d in sorted(curve)]
    _write(out / "ap_delay.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_noise(args) -> int:
    cfg = _read_config(args.config)
    ev = _section(cfg, "evaluation")
    k_max = args.k_max if args.k_max is not None else int(ev["k_max"])
    repeats = args.repeats if args.repeats is not None else int(ev["repeats"])
    if args.strategy:
        strategies = [s.strip() for s in args.strategy.split(",") if s.strip()]
    else:
        strategies = list(ev["noise_strategies"])
    if k_max < 0 or repeats < 1:
        raise UsageError("--k-max must be >= 0 and --repeats >= 1")
    for s in strategies:
        if s == "random":
            raise UsageError("the noise sweep does not support the random strategy")
        Strategy(s)
    pc = PipelineConfig.from_dict(dict(cfg.get("pipeline") or {}))
    truth = EventTruth.read(args.truth)
    g = _load_graph(args, cfg)
    truth.check(g.T)
    rows = noise_sweep(
        run_detectors(g, pc), truth, pc, strategies, k_max, repeats, derive_seed(args.seed, SEED_NOISE)
    )
    options = {"pipeline": pc.to_dict(), "k_max": k_max, "repeats": repeats, "strategies": strategies}
    manifest = _manifest(args, [args.input, args.truth], options)
    lines = [f"# {h}" for h in _header(manifest)] + ["strategy,k,mean_ap"]
    lines += [f"{s},{k},{ap!r}" for s, k, ap in rows]
    _write(_out_dir(args) / "noise.csv", "\n".join(lines) + "\n")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="select-ensemble", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, needs_input=True, needs_truth=False):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        if needs_input:
            sp.add_argument("--input", required=True, help="edge list CSV: time,src,dst[,weight]")
            sp.add_argument("--undirected", action="store_true", help="treat edges as undirected")
        if needs_truth:
            sp.add_argument("--truth", required=True, help="event ticks, one per line")
        return sp

    s = common(sub.add_parser("synth", help="write a synthetic benchmark"), needs_input=False)
    s.add_argument("--nodes", type=int)
    s.add_argument("--ticks", type=int)
    s.add_argument("--events", type=int)
    s.set_defaults(func=cmd_synth)

    s = common(sub.add_parser("detect", help="run the base detectors"))
    s.set_defaults(func=cmd_detect, strategy=None)

    s = common(sub.add_parser("ensemble", help="run the two-phase ensemble"))
    s.add_argument("--strategy", help="full, vertical, horizontal, diverse or random(k[,seed])")
    s.set_defaults(func=cmd_ensemble)

    s = common(sub.add_parser("evaluate", help="accuracy and significance"), needs_truth=True)
    s.add_argument("--strategy", help="selection strategy for both phases")
    s.add_argument("--delay-max", type=int, help="largest detection delay for AP (default 3)")
    s.add_argument("--trials", type=int, help="random ensembles, 0 to skip (default 100)")
    s.set_defaults(func=cmd_evaluate)

    s = common(sub.add_parser("noise", help="noisy-list sweep"), needs_truth=True)
    s.add_argument("--strategy", help="comma-separated strategies (default full,diverse,vertical,horizontal)")
    s.add_argument("--k-max", type=int, help="largest number of noisy lists (default 10)")
    s.add_argument("--repeats", type=int, help="repeats per k (default 10)")
    s.set_defaults(func=cmd_noise)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SelectEnsembleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        name = getattr(exc, "filename", None)
        where = f" {name}" if name else ""
        print(f"error: I/O failure{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
