"""Command-line front end: gen-data, recommend, verify, attack, sweep.

Exit status: 0 success (or owned), 1 not owned, 2 error.
"""
import argparse
import csv
import io as _io
import os
import sys

from grew import io
from grew.config import ATTACK_MODES, SWEEP_PARAMS, RunConfig
from grew.partition import SecretKey, derive_projection, semantic_coordinates
from grew.sandbox.metrics import agreement_at_k
from grew.sandbox.models import recommend_all, train_student
from grew.sandbox.pipeline import Experiment, build_data
from grew.verifier import verify

EXIT_OK, EXIT_NOT_OWNED, EXIT_ERROR = 0, 1, 2

RECOMMENDATIONS = "recommendations.jsonl"
REPORT = "report.json"
STUDENT_LISTS = "student_lists.jsonl"
ATTACK_REPORT = "attack_report.json"


class CliError(Exception):
    pass


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must fit in an unsigned 64-bit integer")
    return v


def _common(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", default=default, help="JSON run configuration")
    g.add_argument("--seed", type=_u64, metavar="U64", default=default,
                   help="override the config seed")
    g.add_argument("--out", metavar="DIR", default=default, help="output directory (default .)")
    g.add_argument("--key", type=_u64, metavar="U64", default=default,
                   help="secret watermark key (never written to outputs)")


def build_parser():
    p = argparse.ArgumentParser(prog="grew", description="Watermark a next-item recommender's "
                                "Top-K lists with a secret key and test logs for it.")
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help, description=help)
        _common(sp, suppress=True)
        sp.set_defaults(func=func)
        return sp

    add("gen-data", cmd_gen_data, "generate a synthetic catalog and interaction log")

    sp = add("recommend", cmd_recommend, "serve Top-K lists for every user")
    sp.add_argument("--data", metavar="DIR", help="directory holding gen-data output "
                    "(default: --out)")
    sp.add_argument("--watermark", choices=("on", "off"), default="on")
    sp.add_argument("--calibrate", action=argparse.BooleanOptionalAction, default=None,
                    help="run the feedback controller before serving (default from config)")
    sp.add_argument("--output", metavar="PATH", help=f"default OUT/{RECOMMENDATIONS}")

    sp = add("verify", cmd_verify, "test a recommendation log for the watermark")
    sp.add_argument("--lists", metavar="PATH", required=True, help="recommendation JSONL")
    sp.add_argument("--embeddings", metavar="PATH", required=True,
                    help="item embeddings, binary or CSV")
    sp.add_argument("--null-rate", type=float, help="calibrated clean green rate; "
                    "defaults to the effective density of the partition")
    sp.add_argument("--threshold", type=float, help="Z threshold (default from config)")
    sp.add_argument("--report", metavar="PATH", help=f"default OUT/{REPORT}")

    sp = add("attack", cmd_attack, "extract a student from black-box answers and verify it")
    sp.add_argument("--data", metavar="DIR", help="gen-data directory (default: --out)")
    sp.add_argument("--queries", metavar="PATH",
                    help="train on an existing recommendation log instead of live queries")
    sp.add_argument("--watermark", choices=("on", "off"), default="on")
    sp.add_argument("--mode", choices=ATTACK_MODES, help="live query strategy")

    sp = add("sweep", cmd_sweep, "sweep one parameter and write a CSV of metrics")
    sp.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.add_argument("--data", metavar="DIR", help="gen-data directory "
                    "(default: generate in memory from the config)")
    sp.add_argument("--calibrate", action=argparse.BooleanOptionalAction, default=None,
                    help="calibrate per value (default: on, except off for delta_base)")
    return p


# ------------------------------------------------------------------ helpers


def load_config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    return cfg


def out_dir(args):
    d = args.out or "."
    os.makedirs(d, exist_ok=True)
    return d


def require_key(args):
    if args.key is None:
        raise CliError("--key is required for this command")
    return SecretKey(args.key)


def load_world(directory):
    if not os.path.exists(os.path.join(directory, io.CATALOG_BIN)):
        raise CliError(f"no catalog in {directory!r}; run gen-data first")
    catalog = io.read_catalog(directory)
    log, _ = io.read_interactions(os.path.join(directory, io.INTERACTIONS))
    return catalog, log


def write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(io.dumps(doc) + "\n")


def emit(doc):
    sys.stdout.write(io.dumps(doc) + "\n")


def partition_echo(cfg):
    return {k: getattr(cfg, k) for k in ("gamma", "omega", "hash_constant", "context_width")}


# ----------------------------------------------------------------- commands


def cmd_gen_data(args):
    cfg = load_config(args)
    d = out_dir(args)
    catalog, log = build_data(cfg)
    io.write_catalog(d, catalog)
    io.write_interactions(os.path.join(d, io.INTERACTIONS), log, header={"config": cfg.to_dict()})
    print(f"wrote {catalog.n_items} items and {log.n_users} users to {d}", file=sys.stderr)
    return EXIT_OK


def _watermarked_experiment(args, cfg, calibrate, key=None):
    """Return (experiment, watermark or None, header fields)."""
    d = out_dir(args)
    catalog, log = load_world(args.data or d)
    on = args.watermark == "on"
    if on and key is None:
        key = require_key(args)
    ex = Experiment(cfg.with_(calibrate=calibrate), key, catalog, log)
    info = {"config": cfg.to_dict(), "watermark": on, "calibrated": bool(on and calibrate)}
    if not on:
        return ex, None, info
    ctrl = ex.controller()
    info.update(alpha_global=ctrl.alpha_global, running_rate=ctrl.running_rate)
    return ex, ex.watermark(ctrl), info


def cmd_recommend(args):
    cfg = load_config(args)
    calibrate = cfg.calibrate if args.calibrate is None else args.calibrate
    ex, wm, header = _watermarked_experiment(args, cfg, calibrate)
    lists = ex.serve(wm)
    path = args.output or os.path.join(out_dir(args), RECOMMENDATIONS)
    io.write_recommendations(path, lists, header=header)
    print(f"wrote {len(lists)} lists to {path}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    header, lists = io.read_recommendations(args.lists)
    if args.config:
        cfg = load_config(args)
    elif header and "config" in header:
        cfg = RunConfig.from_dict(header["config"])
    else:
        cfg = RunConfig()
    key = require_key(args)
    E = io.read_embeddings(args.embeddings)
    coords = semantic_coordinates(E, derive_projection(key, E.shape[1]))
    threshold = cfg.threshold if args.threshold is None else args.threshold
    rep = verify(lists, key, coords, cfg.partition(), threshold=threshold,
                 null_rate=args.null_rate)
    doc = dict(rep.to_dict(), n_lists=len(lists), config=dict(partition_echo(cfg),
               threshold=threshold, null_rate_override=args.null_rate))
    emit(doc)
    write_json(args.report or os.path.join(out_dir(args), REPORT), doc)
    return EXIT_OK if rep.owned else EXIT_NOT_OWNED


def cmd_attack(args):
    cfg = load_config(args)
    if args.mode:
        cfg = cfg.with_(attack_mode=args.mode)
    d = out_dir(args)
    key = require_key(args)
    K = cfg.top_k
    if args.queries:
        # the log itself plays the teacher: train on it, answer the same histories
        _, teacher_lists = io.read_recommendations(args.queries)
        if not teacher_lists:
            raise CliError(f"{args.queries}: no recommendation records")
        catalog = io.read_catalog(args.data or d)
        coords = semantic_coordinates(catalog.embeddings,
                                      derive_projection(key, catalog.d))
        student = train_student(teacher_lists, catalog.n_items, cfg.student_smoothing)
        student_lists = recommend_all(student, [list(r.history) for r in teacher_lists], K,
                                      user_ids=[r.user_id for r in teacher_lists])
        info = {"config": cfg.to_dict(), "queries": "file"}
    else:
        ex, wm, info = _watermarked_experiment(args, cfg, cfg.calibrate, key=key)
        coords = ex.coords
        teacher_lists = ex.serve(wm)
        _, student_lists = ex.attack(wm)
        info["queries"] = cfg.attack_mode
    pcfg = cfg.partition()
    teacher = verify(teacher_lists, key, coords, pcfg, threshold=cfg.threshold)
    stud = verify(student_lists, key, coords, pcfg, threshold=cfg.threshold)
    agr = agreement_at_k(teacher_lists, student_lists, cfg.eval_k)
    doc = dict(info, teacher=teacher.to_dict(), student=stud.to_dict(),
               **{f"agreement@{cfg.eval_k}": agr})
    io.write_recommendations(os.path.join(d, STUDENT_LISTS), student_lists,
                             header={"config": cfg.to_dict(), "student": True})
    write_json(os.path.join(d, ATTACK_REPORT), doc)
    emit(doc)
    return EXIT_OK


def parse_values(param, text):
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if not vals:
        raise CliError("--values needs at least one value")
    typ = int if param == "k_cand" else float
    try:
        return [typ(v) for v in vals]
    except ValueError:
        raise CliError(f"bad value for {param}: {text!r}") from None


def sweep_rows(cfg, key, param, values, calibrate=None, catalog=None, log=None):
    """Watermarked metrics for each value of ``param``; returns a list of row dicts."""
    if catalog is None or log is None:
        catalog, log = build_data(cfg)
    if calibrate is None:
        # a calibrated controller would absorb delta_base, so it is frozen here
        calibrate = param != "delta_base" and cfg.calibrate
    k = cfg.eval_k
    rows = []
    for v in values:
        cv = cfg.with_(**{param: v, "calibrate": calibrate})
        ex = Experiment(cv, key, catalog, log)
        m = ex.evaluate(ex.serve(ex.watermark()))
        rows.append({"value": v, f"R@{k}": m[f"recall@{k}"], f"N@{k}": m[f"ndcg@{k}"],
                     "green_rate": m["green_rate"], "Z": m["z"]})
    return rows


def cmd_sweep(args):
    cfg = load_config(args)
    key = require_key(args)
    values = parse_values(args.param, args.values)
    d = out_dir(args)
    world = load_world(args.data) if args.data else (None, None)
    rows = sweep_rows(cfg, key, args.param, values, args.calibrate, *world)
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    path = os.path.join(d, f"sweep_{args.param}.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    write_json(os.path.join(d, f"sweep_{args.param}.json"),
               {"config": cfg.to_dict(), "param": args.param, "values": values,
                "calibrate": args.calibrate})
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, OSError, ValueError, KeyError, TypeError, RuntimeError) as exc:
        print(f"grew {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
