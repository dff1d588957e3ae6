"""Command-line interface.

Subcommands: ``certify``, ``search``, ``explain``, ``mitigate``, ``report``
and ``plant`` (writes a synthetic fixture).  Every command writes its JSON
report plus a manifest sidecar holding the resolved configuration, input
digests and wall-clock timings, so the report itself carries no timestamps.

Exit codes: 0 success or Fair, 10 Unfair, 20 Unknown, 30 degenerate k
distribution, 1 usage or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .cluster import DEFAULT_EPSILON, DiscriminationRecord
from .data import (load_csv, make_planted_network, planted_fixture, sample_dataset, save_csv,
                   train_test_split)
from .exceptions import DegenerateKError, KFairError
from .explain import ExplainConfig, ExplanationPredicate, explain
from .milp import FAIR, UNFAIR, SolveConfig, certify
from .mitigate import FineTuneConfig, augment_dataset, evaluate_mitigation, fine_tune
from .model import load_network, save_network
from .reports import validate_report
from .schema import load_schema, save_schema
from .search import RW, SA, SA_KNN, SearchConfig, SearchReport, run_search

log = logging.getLogger("kfair")

EXIT_OK = 0
EXIT_UNFAIR = 10
EXIT_UNKNOWN = 20
EXIT_DEGENERATE = 30
EXIT_ERROR = 1

STRATEGY_FLAGS = {"rw": RW, "sa": SA, "sa-knn": SA_KNN}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _clean(obj):
    """Replace NaN and infinities with None so the output is strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write(doc, out):
    text = _dumps(_clean(doc))
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _manifest(args, out, inputs, config, timings):
    if out is None:
        return
    doc = {
        "kind": "manifest",
        "tool_version": __version__,
        "command": args.command,
        "argv": args.argv,
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _digest(p) for p in inputs if p is not None},
        "timings": timings,
    }
    path = Path(str(out) + ".manifest.json") if not Path(out).is_dir() else Path(out) / "manifest.json"
    path.write_text(_dumps(_clean(doc)), encoding="utf-8")


def _solve_config(args):
    return SolveConfig(timeout_seconds=args.timeout, workers=args.workers,
                       max_nodes=args.max_nodes)


# -- commands ------------------------------------------------------------------------

def cmd_certify(args):
    t0 = time.monotonic()
    net, schema = load_network(args.model), load_schema(args.schema)
    cert = certify(net, schema, args.epsilon, _solve_config(args))
    doc = {"kind": "certificate", **cert.to_dict(timing=False)}
    _write(doc, args.out)
    cfg = {"epsilon": args.epsilon, "timeout": args.timeout, "workers": args.workers,
           "max_nodes": args.max_nodes}
    _manifest(args, args.out, [args.model, args.schema], cfg,
              {"wall_time": time.monotonic() - t0,
               "solver_wall_time": cert.stats.get("wall_time")})
    log.info("verdict %s", cert.verdict)
    return {FAIR: EXIT_OK, UNFAIR: EXIT_UNFAIR}.get(cert.verdict, EXIT_UNKNOWN)


def _search_config(args, strategy=None):
    return SearchConfig(strategy=strategy or STRATEGY_FLAGS[args.strategy],
                        epsilon=args.epsilon, timeout_seconds=args.timeout,
                        solver_timeout=args.solver_timeout, solver_max_nodes=args.max_nodes,
                        max_iterations=args.max_iterations, rng_seed=args.seed)


def cmd_search(args):
    t0 = time.monotonic()
    net, schema = load_network(args.model), load_schema(args.schema)
    data = load_csv(args.data, schema)
    cfg = _search_config(args)
    rep = run_search(net, schema, data, cfg)
    doc = {"kind": "search_report", "config": cfg.to_dict(), **rep.to_dict(timing=False)}
    _write(doc, args.out)
    _manifest(args, args.out, [args.model, args.schema, args.data], cfg.to_dict(),
              {"wall_time": time.monotonic() - t0, **rep.timings()})
    return EXIT_OK


def _load_json(path, what):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise KFairError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise KFairError(f"{path}: invalid JSON ({exc})") from None


def cmd_explain(args):
    t0 = time.monotonic()
    net, schema = load_network(args.model), load_schema(args.schema)
    rep = SearchReport.from_dict(_load_json(args.report, "search report"))
    seeds = [r.instance for r in rep.best_instances]
    cfg = ExplainConfig(n_samples=args.samples, delta=args.delta, rng_seed=args.seed)
    try:
        if not seeds:
            raise DegenerateKError("the search report holds no discriminatory instance")
        result = explain(net, schema, seeds, cfg, args.epsilon, workers=args.workers)
    except DegenerateKError as exc:
        print(f"kfair explain: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    _write({"kind": "explanation", **result.to_dict()}, args.out)
    _manifest(args, args.out, [args.model, args.schema, args.report], cfg.to_dict(),
              {"wall_time": time.monotonic() - t0})
    return EXIT_OK


def cmd_mitigate(args):
    t0 = time.monotonic()
    net, schema = load_network(args.model), load_schema(args.schema)
    data = load_csv(args.data, schema)
    if not data.has_labels:
        raise KFairError(f"{args.data}: mitigation needs a label column")
    guards = [ExplanationPredicate.from_dict(p, schema)
              for p in _load_json(args.explanation, "explanation")["predicates"]]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, held_out = train_test_split(data, 0.8, args.seed)
    debiased = None
    ft_cfg = FineTuneConfig(args.epochs, args.learning_rate, args.batch_size, args.seed)
    if not args.skip_retrain:
        rep = SearchReport.from_dict(_load_json(args.report, "search report"))
        augmented = augment_dataset(train, rep.ids, schema, net)
        debiased = fine_tune(net, augmented, ft_cfg)
        save_network(debiased, out / "debiased_model.json")
    (out / "guards.json").write_text(
        _dumps({"kind": "guards", "policy": "abstain",
                "predicates": [g.to_dict() for g in guards]}), encoding="utf-8")
    scfg = _search_config(args, SA)
    report = evaluate_mitigation(net, debiased, guards, schema, held_out, data, scfg)
    (out / "mitigation.json").write_text(
        _dumps(_clean({"kind": "mitigation_report", **report.to_dict(timing=False)})),
        encoding="utf-8")
    timings = {"wall_time": time.monotonic() - t0}
    for v in report.variants:
        timings[v.variant] = v.search.timings()
    cfg = {"search": scfg.to_dict(), "fine_tune": ft_cfg.to_dict(),
           "skip_retrain": args.skip_retrain}
    _manifest(args, out, [args.model, args.schema, args.data, args.explanation,
                          None if args.skip_retrain else args.report], cfg, timings)
    return EXIT_OK


def _summary(doc):
    kind = doc.get("kind")
    if kind == "certificate":
        return f"certificate: {doc['verdict']} ({doc['solver_status']})"
    if kind == "search_report":
        return (f"search {doc['strategy']}: Max.K {doc['max_k']}  #ID {doc['num_id']}  "
                f"Avg.K {doc['avg_k']:.2f}  Succ.rate {doc['success_rate']:.1f}%")
    if kind == "explanation":
        lines = [f"explanation: {len(doc['predicates'])} accepted predicate(s)"]
        for p in doc["predicates"]:
            lines.append(f"  {p['predicate']}  Size {p['size']}  Diff {p['robustness_diff']}"
                         f"  Cov {p['coverage_volume']:.4g}  Pert.K {p['perturbed_k']}")
        return "\n".join(lines)
    if kind == "mitigation_report":
        lines = ["variant       Acc(%)  Max.K  #ID  Succ.rate(%)"]
        for v in doc["variants"]:
            s = v["search"]
            acc = "n/a" if v["accuracy"] is None else f"{v['accuracy']:.2f}"
            lines.append(f"{v['variant']:<13} {acc:>6}  {s['max_k']:>5}  {s['num_id']:>3}  "
                         f"{s['success_rate']:.1f}")
        return "\n".join(lines)
    return f"{kind}"


def cmd_report(args):
    for path in args.files:
        doc = _load_json(path, "report")
        validate_report(doc)
        print(f"{path}: {_summary(doc)}")
    return EXIT_OK


def cmd_plant(args):
    t0 = time.monotonic()
    schema, plant = planted_fixture(args.k, graded=args.graded, epsilon=args.epsilon)
    net = make_planted_network(schema, plant, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_network(net, out / "model.json")
    save_schema(schema, out / "schema.json")
    save_csv(sample_dataset(schema, args.rows, args.seed, net), out / "data.csv")
    (out / "plant.json").write_text(_dumps(plant.to_dict()), encoding="utf-8")
    _manifest(args, out, [], {"k": args.k, "graded": args.graded, "rows": args.rows},
              {"wall_time": time.monotonic() - t0})
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def _common(p, data=False):
    p.add_argument("--model", required=True, help="network JSON file")
    p.add_argument("--schema", required=True, help="feature schema JSON file")
    if data:
        p.add_argument("--data", required=True, help="CSV dataset")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def _search_flags(p, timeout):
    p.add_argument("--timeout", type=float, default=timeout, help="search budget in seconds")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--solver-timeout", type=float, default=100.0)
    p.add_argument("--max-nodes", type=int, default=None, help="B&B node budget per query")


def build_parser():
    parser = _Parser(prog="kfair", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kfair {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("certify", help="prove or refute pairwise fairness")
    _common(p)
    p.add_argument("--timeout", type=float, default=100.0, help="solver budget in seconds")
    p.add_argument("--max-nodes", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("search", help="search for high-k discriminatory instances")
    _common(p, data=True)
    p.add_argument("--strategy", choices=sorted(STRATEGY_FLAGS), default="sa")
    _search_flags(p, 14_400.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("explain", help="explain max-k witnesses of a search report")
    _common(p)
    p.add_argument("--report", required=True, help="search report JSON")
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--delta", type=float, default=2.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("mitigate", help="compare guarded and retrained variants")
    _common(p, data=True)
    p.add_argument("--explanation", required=True)
    p.add_argument("--report", help="search report whose IDs drive augmentation")
    p.add_argument("--skip-retrain", action="store_true")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    _search_flags(p, 600.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("report", help="validate and summarize JSON reports")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plant", help="write a planted fixture (model, schema, data)")
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--graded", action="store_true")
    p.add_argument("--rows", type=int, default=500)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_plant)
    return parser


def _setup_logging():
    level = os.environ.get("KFAIR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_logging()
    args = build_parser().parse_args(argv)
    args.argv = argv
    if args.command == "mitigate" and not args.skip_retrain and not args.report:
        print("kfair mitigate: --report is required unless --skip-retrain", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (KFairError, OSError, KeyError, ValueError) as exc:
        print(f"kfair {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
