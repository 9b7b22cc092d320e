"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bundle import read_bundle, save_bundle
from .core import DenError
from .report import Analysis, AnalysisConfig, curve_csv, dumps, make_report
from .synth import SynthConfig, generate_model_family, generate_synthetic_dataset

log = logging.getLogger("denaudit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _analysis_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("bundle", help="bundle directory or manifest path")
    p.add_argument("--neighborhood", choices=["knn", "radius"], default="knn")
    p.add_argument("--metric", choices=["rawlsian", "stddev"], default="rawlsian")
    p.add_argument("--grid", default="default",
                   help="default | geom:<count> | lin:<count> | comma-separated sizes")
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.add_argument("--distance", choices=["l2", "cosine"], default="l2")
    p.add_argument("--anchors", default="all", help="all | sample:<m>")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--seed", type=_u64, default=0, help="seed for anchor sampling")
    p.add_argument("--model", action="append", help="restrict to this model (repeatable)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="also write plot-ready curve rows to this CSV file")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="denaudit", description="Disparity across embedding neighborhoods")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _analysis_options()

    sub.add_parser("curve", parents=[common], help="DEN curve per model")
    sub.add_parser("auc", parents=[common], help="AUC-DEN per model")
    for name, text in (("estimate", "estimation error vs true disparity"),
                       ("rank", "Kendall tau between AUC-DEN and true disparities")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--reference", action="append",
                       help="'individual' or a group partition name (repeatable; default all)")
    sub.add_parser("proxy-noise", parents=[common], help="retrieval AUROC vs error correlation")
    sub.add_parser("metrics", parents=[common], help="RMSE / SAGR / PCC / CCC per model run")

    p = sub.add_parser("check", help="validate a bundle")
    p.add_argument("bundle")

    p = sub.add_parser("synth", help="write a synthetic bundle")
    p.add_argument("--config", help="JSON file with synth settings")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--models", type=int, help="generate a model family of this size")
    p.add_argument("--disparity-range", default=None, help="low,high planted disparities")
    p.add_argument("--format", choices=["binary", "csv"], default="binary")
    p.add_argument("--out", required=True, help="output bundle directory")
    return parser


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_check(args) -> int:
    b = read_bundle(args.bundle)
    groups = ",".join(sorted(b.groups)) or "-"
    print(f"ok: n={b.n} d={b.embeddings.shape[1]} models={len(b.models)} "
          f"identity={'yes' if b.identity is not None else 'no'} groups={groups}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    raw = json.loads(Path(args.config).read_text()) if args.config else {}
    family = raw.pop("family", None)
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = SynthConfig.from_dict(raw)
    if args.models is not None or args.disparity_range is not None:
        family = dict(family or {})
        if args.models is not None:
            family["n_models"] = args.models
        if args.disparity_range is not None:
            family["disparity_range"] = [float(v) for v in args.disparity_range.split(",")]
    if family:
        fam = generate_model_family(cfg, int(family.get("n_models", 15)),
                                    tuple(family.get("disparity_range", (0.0, 0.6))))
        ds = fam.dataset
        models = {m.name: m.errors for m in fam.members}
    else:
        ds = generate_synthetic_dataset(cfg)
        models = {"model": ds.errors}
    path = save_bundle(args.out, ds.embeddings, models, ds.identity, dict(ds.groups), args.format)
    print(f"wrote {path} (n={ds.n}, models={len(models)})")
    return EXIT_OK


def _cmd_analysis(args) -> int:
    bundle = read_bundle(args.bundle)
    cfg = AnalysisConfig(args.neighborhood, args.metric, args.grid, args.epsilon,
                         args.distance, args.anchors, args.seed)
    an = Analysis(bundle, cfg, args.threads, args.model)
    cmd = args.command
    if cmd == "curve":
        results = an.curves()
    elif cmd == "auc":
        results = an.aucs()
    elif cmd == "estimate":
        results = an.estimates(args.reference)
    elif cmd == "rank":
        results = an.ranking(args.reference)
    elif cmd == "proxy-noise":
        results = an.proxy_noise()
    else:
        results = an.metrics()
    config = cfg.echo()
    config["models"] = an.model_names
    if getattr(args, "reference", None):
        config["references"] = args.reference
    _emit(dumps(make_report(cmd, bundle.digest(), config, results)), args.out)
    if args.csv and cmd in ("curve", "estimate"):
        Path(args.csv).write_text(curve_csv(results))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "synth":
            return _cmd_synth(args)
        return _cmd_analysis(args)
    except (DenError, OSError, json.JSONDecodeError) as exc:
        print(f"denaudit: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
