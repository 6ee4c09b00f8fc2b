"""Command-line orchestration of the pipeline.

Commands: gen-data | train | evaluate | pareto | emit-c | report.
Every command echoes the resolved seed set; outputs are byte-stable for a
given config.  Errors print one machine-parsable line:
``E:<module>:<code>:<detail>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import codegen, datagen, evaluation, families, lowering, model_io, oracle
from .datagen import MeshSpec, SequenceSpec
from .errors import TinyconvError, UnknownFamilyError
from .evaluation import EvalConfig
from .ir import DEFAULT_COST_TABLE, CostTable

_OUT_ENV = "TINYCONV_OUT"


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise TinyconvError("config file must hold a JSON object")
    return cfg


def _resolve(args) -> dict:
    cfg = _load_config(getattr(args, "config", None))
    calib_path = getattr(args, "calibration", None) or cfg.get("calibration")
    calib = (oracle.load_calibration(calib_path) if calib_path
             else oracle.default_calibration())
    master_seed = getattr(args, "seed", None)
    if master_seed is None:
        master_seed = cfg.get("master_seed", 0)
    cost_path = cfg.get("cost_table")
    cost_table = CostTable.from_json(cost_path) if cost_path else DEFAULT_COST_TABLE
    out = getattr(args, "out", None) or cfg.get("out_dir") or "."
    out = os.environ.get(_OUT_ENV, out)
    return {
        "calib": calib, "master_seed": int(master_seed),
        "cost_table": cost_table, "out": Path(out),
        "roster": cfg.get("roster"),
    }


def _echo_seeds(ctx, quantities, note: str = "") -> None:
    master = ctx["master_seed"]
    parts = [f"master={master}"]
    for q in quantities:
        parts.append(f"{q}:train_data={families.train_data_seed(master, q)}")
    parts.append(f"model_seeds={[families.model_seed(master, k) for k in range(5)]}")
    if quantities:
        q = quantities[0]
        parts.append(f"test_seeds[{q}]="
                     f"{[families.test_data_seed(master, j, q) for j in range(3)]}...")
    print(f"seeds: {' '.join(parts)} {note}".rstrip())


def _cmd_gen_data(args) -> int:
    ctx = _resolve(args)
    out = Path(args.out or ctx["out"])
    if args.kind == "mesh":
        spec = MeshSpec(args.levels, args.inverse_refined)
        ds = datagen.generate_mesh(args.quantity, spec, ctx["calib"])
    else:
        seed = args.data_seed
        if seed is None:
            seed = families.train_data_seed(ctx["master_seed"], args.quantity)
        spec = SequenceSpec(args.length, seed=seed)
        ds = datagen.generate_sequence_dataset(args.quantity, spec, ctx["calib"])
    if args.raw_like:
        ds = datagen.quantize_dataset(ds, ctx["calib"])
    out.parent.mkdir(parents=True, exist_ok=True)
    datagen.save_dataset(ds, out)
    _echo_seeds(ctx, [args.quantity])
    print(f"wrote {out} ({ds.n} rows)")
    return 0


def _cmd_train(args) -> int:
    ctx = _resolve(args)
    families.parse_family(args.family, args.quantity)
    if args.family == "original":
        raise UnknownFamilyError("original is not trainable; it is the reference")
    model = families.train_family(args.family, args.quantity, ctx["calib"],
                                  ctx["master_seed"], args.seed_index)
    out = Path(args.out or (ctx["out"] / f"{args.quantity}_{args.family}.json"))
    out.parent.mkdir(parents=True, exist_ok=True)
    model_io.save_model(model, out, args.family, args.quantity)
    _echo_seeds(ctx, [args.quantity])
    print(f"wrote {out}")
    return 0


def _eval_config(ctx, args) -> EvalConfig:
    return EvalConfig(
        sequence_length=getattr(args, "length", 1000) or 1000,
        dataset_count=getattr(args, "datasets", 10) or 10,
        seeds=getattr(args, "model_seeds", 5) or 5,
        master_seed=ctx["master_seed"],
        cost_table=ctx["cost_table"],
    )


def _cmd_evaluate(args) -> int:
    ctx = _resolve(args)
    cfg = _eval_config(ctx, args)
    records = []
    for path in args.model:
        model, meta = model_io.load_model(path)
        records.append(evaluation.evaluate_models(
            meta["family"], meta["quantity"], [model], cfg, ctx["calib"]))
    evaluation.pareto_frontier(records)
    out = Path(args.out or (ctx["out"] / "records.csv"))
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluation.write_report_csv(records, out)
    _echo_seeds(ctx, sorted({r.quantity for r in records}))
    for r in records:
        print(f"{r.quantity}/{r.model}: norm_rmse={r.norm_rmse:.6g} cost={r.cost}")
    print(f"wrote {out}")
    return 0


def _cmd_pareto(args) -> int:
    records = evaluation.read_report_csv(args.records)
    evaluation.pareto_frontier(records)
    out = Path(args.out or args.records)
    evaluation.write_report_csv(records, out)
    kept = [f"{r.quantity}:{r.model}" for r in records if r.pareto]
    print(f"frontier: {' '.join(kept)}")
    print(f"wrote {out}")
    return 0


def _cmd_emit_c(args) -> int:
    ctx = _resolve(args)
    out = Path(args.out or ctx["out"])
    named = []
    for path in args.model:
        model, meta = model_io.load_model(path)
        quantity, family = meta["quantity"], meta["family"]
        prog = lowering.lower(model, quantity, name=f"{quantity}_{family}")
        named.append((f"bme680_{quantity}_{family}".replace("-", "_"), prog))
    if args.family and args.quantity:
        if args.family != "original":
            raise UnknownFamilyError("emit-c takes trained model files; "
                                     "only 'original' can be emitted by name")
        prog = lowering.lower_reference(args.quantity, ctx["calib"])
        named.append((f"bme680_{args.quantity}_original", prog))
    written = codegen.write_kernels(named, out, n_vectors=args.vectors,
                                    seed=ctx["master_seed"])
    _echo_seeds(ctx, [])
    for w in written:
        print(f"wrote {w['c']} {w['h']} {w['vectors']}")
    return 0


def _cmd_report(args) -> int:
    ctx = _resolve(args)
    cfg = _eval_config(ctx, args)
    quantities = args.quantity or list(oracle.QUANTITIES)
    include_seq = True if args.include_sequence else None
    report = evaluation.run_suite(quantities, cfg, ctx["calib"],
                                  roster=ctx["roster"],
                                  include_sequence=include_seq)
    out = ctx["out"] if not args.out else Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_report_csv(report.records, out / "report.csv")
    evaluation.write_report_json(report, out / "report.json")
    evaluation.write_plot_data(report.records, out / "plot_data.csv")
    _echo_seeds(ctx, quantities)
    for rec in report.records:
        flag = " *" if rec.pareto else ""
        print(f"{rec.quantity}/{rec.model}: norm_rmse={rec.norm_rmse:.6g} "
              f"cost={rec.cost}{flag}")
    for f in report.failures:
        print(f"FAILED {f['quantity']}/{f['model']}: {f['error']}", file=sys.stderr)
    print(f"wrote {out / 'report.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tinyconv",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON run config")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output path"):
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--calibration", help="calibration JSON path")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", help=out_help)

    p = sub.add_parser("gen-data", help="write a dataset CSV + JSON sidecar")
    common(p)
    p.add_argument("--quantity", required=True, choices=oracle.QUANTITIES)
    p.add_argument("--kind", required=True, choices=("mesh", "sequence"))
    p.add_argument("--levels", type=int, default=20)
    p.add_argument("--inverse-refined", action="store_true")
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--data-seed", type=int, help="override the derived data seed")
    p.add_argument("--raw-like", action="store_true",
                   help="round codes to integers and relabel")

    p = sub.add_parser("train", help="train one family and write a model file")
    common(p)
    p.add_argument("--family", required=True)
    p.add_argument("--quantity", required=True, choices=oracle.QUANTITIES)
    p.add_argument("--seed-index", type=int, default=0)

    p = sub.add_parser("evaluate", help="evaluate trained model files")
    common(p)
    p.add_argument("--model", action="append", required=True,
                   help="model JSON path (repeatable)")
    p.add_argument("--datasets", type=int, default=10)
    p.add_argument("--length", type=int, default=1000)

    p = sub.add_parser("pareto", help="flag frontier membership in a records CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--out")

    p = sub.add_parser("emit-c", help="emit C kernels and golden vectors")
    common(p, out_help="output directory")
    p.add_argument("--model", action="append", default=[],
                   help="model JSON path (repeatable)")
    p.add_argument("--family", help="only 'original' is valid here")
    p.add_argument("--quantity", choices=oracle.QUANTITIES)
    p.add_argument("--vectors", type=int, default=1000)

    p = sub.add_parser("report", help="train, evaluate and report the roster")
    common(p, out_help="output directory")
    p.add_argument("--quantity", action="append", choices=oracle.QUANTITIES)
    p.add_argument("--include-sequence", action="store_true",
                   help="include sequence families for every quantity")
    p.add_argument("--datasets", type=int, default=10)
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--model-seeds", type=int, default=5)
    return parser


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "pareto": _cmd_pareto,
    "emit-c": _cmd_emit_c,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except TinyconvError as exc:
        print(f"E:{exc.module}:{exc.code}:{exc.detail}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"E:cli:internal:{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
