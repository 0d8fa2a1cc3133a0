"""Command-line harness: generate data, train and evaluate learners, print bounds, benchmark."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import datagen, hulls, multiclass, perceptrons, svm
from . import geometry as geo
from .errors import ConvergenceError, PoincareLinearError, UsageError

ALGORITHMS = ("perceptron", "second-order", "strategic", "hyperboloid-perceptron", "svm", "euclidean-svm")
BOUND_KINDS = ("perceptron", "second-order", "strategic", "hyperboloid")
DEFAULT_SEEDS = 20


# ---------------------------------------------------------------------------
# records


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form of ``config``."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def aggregate(runs: list[dict]) -> dict:
    """q1 / median / q3 / mean of every numeric per-seed field."""
    out = {}
    keys = [k for k in runs[0] if k != "seed"]
    for key in keys:
        vals = [r[key] for r in runs if isinstance(r.get(key), (int, float)) and not isinstance(r.get(key), bool)]
        if len(vals) != len(runs):
            continue
        arr = np.asarray(vals, dtype=float)
        q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
        out[key] = {"q1": float(q1), "median": float(med), "q3": float(q3), "mean": float(arr.mean())}
    return out


def make_record(config: dict, runs: list[dict]) -> dict:
    return {
        "version": __version__,
        "config": config,
        "config_hash": config_hash({**config, "version": __version__}),
        "runs": runs,
        "aggregate": aggregate(runs),
    }


def _runs_csv(runs: list[dict]) -> str:
    buf = io.StringIO()
    keys = list(runs[0])
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for r in runs:
        writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in keys})
    return buf.getvalue()


def emit(record, out, fmt: str) -> None:
    """Write a record as JSON or (for run records) flat per-seed CSV."""
    if fmt == "csv" and isinstance(record, dict) and "runs" in record:
        text = _runs_csv(record["runs"])
    elif fmt == "csv" and isinstance(record, list):
        text = _runs_csv(record)
    else:
        text = json.dumps(record, indent=2, sort_keys=False) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# training


def _reference(points, labels, truth, ref: str, hull_method: str) -> np.ndarray:
    if ref == "truth":
        if truth is None:
            raise UsageError("--ref truth needs a --truth file")
        return np.asarray(truth.p, dtype=float)
    return hulls.reference_point(points[labels == 1], points[labels == -1], hull_method).p


def run_seed(task: dict) -> dict:
    """Train and evaluate one algorithm for one seed; returns flat metrics."""
    algo, seed = task["algo"], task["seed"]
    x, y = task["points"], task["labels"]
    truth = task["truth"]
    test = task.get("test")
    start = time.perf_counter()
    row: dict = {"seed": seed}

    if not datagen.Dataset(x, y).is_binary:
        if algo not in multiclass.BASES:
            raise UsageError(f"--algo {algo} does not support multiclass labels")
        model = multiclass.ovr_train(x, y, base=algo, cfg=task["svm_cfg"], seed=seed, hull_method=task["hull"])
        row["accuracy"] = float(np.mean(multiclass.predict(model, x) == y))
        if test is not None:
            row["test_accuracy"] = float(np.mean(multiclass.predict(model, test[0]) == test[1]))
        row["classes"] = int(model.class_ids.size)
        row["wall_time"] = time.perf_counter() - start
        return row

    if algo in ("svm", "euclidean-svm"):
        if algo == "svm":
            p = _reference(x, y, truth, task["ref"], task["hull"])
            model, trace = svm.svm_train(x, y, p, task["svm_cfg"], seed)
        else:
            model, trace = svm.euclidean_svm_train(x, y, task["svm_cfg"], seed)
        row["accuracy"] = model.accuracy(x, y)
        if test is not None:
            row["test_accuracy"] = model.accuracy(*test)
        row["objective"] = float(np.min(trace) if task["svm_cfg"].keep_best else trace[-1])
        row["steps"] = model.steps
        row["converged"] = model.converged
        if model.kind == "poincare" and np.linalg.norm(model.w) > 0:
            row["margin_lower_bound"] = svm.margin_lower_bound(model)
        row["wall_time"] = time.perf_counter() - start
        return row

    max_epochs = task["max_iter"] or perceptrons.MAX_EPOCHS
    if algo == "hyperboloid-perceptron":
        z = geo.ball_to_lorentz(x)
        w, report = perceptrons.hyperboloid_perceptron_train(z, y, max_epochs=max_epochs, seed=seed)
        pred = geo.sgn(geo.minkowski(w, z))
        row["accuracy"] = float(np.mean(pred == y))
        if test is not None:
            row["test_accuracy"] = float(np.mean(geo.sgn(geo.minkowski(w, geo.ball_to_lorentz(test[0]))) == test[1]))
        if truth is not None:
            n = geo.hyperplane_to_lorentz(truth.hyperplane)
            radius = float(np.max(np.linalg.norm(z, axis=1)))
            row["bound"] = perceptrons.hyperboloid_bound(radius, float(np.sqrt(n @ n)), truth.eps)
    elif algo == "strategic":
        p = _reference(x, y, truth, task["ref"], task["hull"])
        _, report, learner = perceptrons.strategic_train(
            x, y, p, task["alpha"], max_epochs=max_epochs, seed=seed
        )
        row["accuracy"] = float(np.mean(learner.classify(x) == y))
        if test is not None:
            row["test_accuracy"] = float(np.mean(learner.classify(test[0]) == test[1]))
        row["dead_zone_hits"] = learner.dead_zone_hits
        if truth is not None:
            row["bound"] = perceptrons.strategic_bound(truth.R, float(np.linalg.norm(truth.p)), truth.eps, task["alpha"])
    else:
        p = _reference(x, y, truth, task["ref"], task["hull"])
        if algo == "perceptron":
            _, report = perceptrons.perceptron_train(x, y, p, max_epochs=max_epochs, seed=seed)
        else:
            _, report = perceptrons.second_order_train(x, y, p, a=task["a"], max_epochs=max_epochs, seed=seed)
        model = svm.LinearModel(p=p, w=report.final_w)
        row["accuracy"] = model.accuracy(x, y)
        if test is not None:
            row["test_accuracy"] = model.accuracy(*test)
        if truth is not None and task["ref"] == "truth":
            if algo == "perceptron":
                row["bound"] = perceptrons.perceptron_bound(truth.R, float(np.linalg.norm(truth.p)), truth.eps)
            elif task["a"] > 0:
                row["bound"] = perceptrons.second_order_bound(report.mistake_matrix, truth.w_star, task["a"], truth.eps)
    row["updates"] = report.updates
    row["epochs"] = report.epochs
    row["converged"] = report.converged
    row["wall_time"] = time.perf_counter() - start
    return row


def _map(fn, tasks, jobs: int):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _seeds(args) -> list[int]:
    if args.seed is not None:
        return [args.seed]
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    return list(range(args.seeds))


def _svm_cfg(args) -> svm.SvmConfig:
    C = args.c
    if C is None:
        C = svm.SYNTHETIC_C if args.truth else svm.REAL_DATA_C
    return svm.SvmConfig(C=C, tol=args.tol, max_iter=args.max_iter)


def train_config(args, eval_mode: bool) -> dict:
    config = {
        "command": "eval" if eval_mode else "train",
        "algo": args.algo,
        "data": file_digest(args.inp),
        "truth": file_digest(args.truth) if args.truth else None,
        "test": file_digest(args.test) if args.test else None,
        "ref": args.ref or ("truth" if args.truth else "learned"),
        "hull": args.hull,
        "C": args.c,
        "a": args.a,
        "alpha": args.alpha,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "seeds": _seeds(args),
    }
    return config


def cmd_train(args, eval_mode: bool = False) -> int:
    if args.algo not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {args.algo!r}")
    if eval_mode and not args.test:
        raise UsageError("eval needs --test")
    data = datagen.read_dataset(args.inp)
    truth = datagen.read_truth(args.truth) if args.truth else None
    test = datagen.read_dataset(args.test) if args.test else None
    if truth is not None and truth.p.shape != (data.dim,):
        raise UsageError(f"truth has dimension {truth.p.shape[0]}, data has {data.dim}")
    if test is not None and test.dim != data.dim:
        raise UsageError(f"test data has dimension {test.dim}, training data has {data.dim}")
    config = train_config(args, eval_mode)
    cfg = _svm_cfg(args)
    tasks = [
        {
            "algo": args.algo, "seed": seed, "points": data.points, "labels": data.labels,
            "truth": truth, "test": None if test is None else (test.points, test.labels),
            "ref": config["ref"], "hull": args.hull, "svm_cfg": cfg, "a": args.a,
            "alpha": args.alpha, "max_iter": args.max_iter,
        }
        for seed in config["seeds"]
    ]
    runs = _map(run_seed, tasks, args.jobs)
    record = make_record(config, runs)
    emit(record, args.out, args.format)
    online = args.algo not in ("svm", "euclidean-svm") and data.is_binary
    failed = [r["seed"] for r in runs if online and not r.get("converged", True)]
    if failed:
        raise ConvergenceError(f"no error-free pass within the epoch cap for seeds {failed}")
    over = [r["seed"] for r in runs if r.get("bound") is not None and r.get("updates", 0) > r["bound"]]
    if over:
        raise ConvergenceError(f"update count exceeded the theoretical bound for seeds {over}")
    return 0


# ---------------------------------------------------------------------------
# other commands


def cmd_generate(args) -> int:
    if args.out is None:
        raise UsageError("generate needs --out")
    p_norm = args.p_norm if args.p_norm is not None else args.r / 5.0
    seed = args.seed if args.seed is not None else 0
    inst = datagen.sample_separable(args.n, args.d, p_norm, args.eps, args.r, seed, measure=args.measure)
    out = Path(args.out)
    datagen.write_dataset(inst, out)
    datagen.write_truth(inst.truth, truth_path(out))
    if args.test_n:
        rng = np.random.default_rng([seed, 1])
        x, y = datagen.sample_points(inst.truth, args.test_n, rng, args.measure)
        datagen.write_dataset(datagen.Dataset(x, y), out.with_name(out.stem + ".test.csv"))
    return 0


def truth_path(data_path) -> Path:
    data_path = Path(data_path)
    return data_path.with_name(data_path.stem + ".truth.json")


def cmd_bound(args) -> int:
    kind = args.kind
    p_norm = args.p_norm if args.p_norm is not None else 0.0
    if kind == "perceptron":
        value = perceptrons.perceptron_bound(args.r, p_norm, args.eps)
    elif kind == "strategic":
        value = perceptrons.strategic_bound(args.r, p_norm, args.eps, args.alpha)
    elif kind == "hyperboloid":
        if args.w_norm is None:
            raise UsageError("hyperboloid bound needs --w-norm")
        value = perceptrons.hyperboloid_bound(args.r, args.w_norm, args.eps)
    elif kind == "second-order":
        if not (args.inp and args.truth):
            raise UsageError("second-order bound needs --in and --truth (it depends on the mistakes made)")
        data = datagen.read_dataset(args.inp, labels="binary")
        truth = datagen.read_truth(args.truth)
        _, report = perceptrons.second_order_train(data.points, data.labels, truth.p, a=args.a, seed=args.seed)
        value = perceptrons.second_order_bound(report.mistake_matrix, truth.w_star, args.a, truth.eps)
    else:
        raise UsageError(f"unknown bound kind {kind!r}")
    emit({"kind": kind, "bound": value}, args.out, "json")
    return 0


def cmd_bench(args) -> int:
    sizes = args.n if isinstance(args.n, list) else [args.n]
    p_norm = args.p_norm if args.p_norm is not None else args.r / 5.0
    cfg = svm.SvmConfig(C=args.c or svm.SYNTHETIC_C, tol=args.tol, max_iter=args.max_iter)
    # load the compiled kernels before anything is timed
    svm.sgd_solve(np.eye(2), np.array([1, -1]), svm.SvmConfig(max_iter=2), 0)
    rows = []
    for n in sizes:
        phases = {"generate": [], "tangent": [], "train": [], "eval": []}
        accs = []
        for seed in _seeds(args):
            t0 = time.perf_counter()
            inst = datagen.sample_separable(n, args.d, p_norm, args.eps, args.r, seed)
            t1 = time.perf_counter()
            v = geo.log_map(inst.truth.p, inst.points)
            t2 = time.perf_counter()
            if args.algo == "svm":
                w, _, _, _ = svm.sgd_solve(v, inst.labels, cfg, seed)
                model = svm.LinearModel(p=inst.truth.p, w=w)
            elif args.algo == "euclidean-svm":
                model, _ = svm.euclidean_svm_train(inst.points, inst.labels, cfg, seed)
            else:
                raise UsageError("bench supports --algo svm and euclidean-svm")
            t3 = time.perf_counter()
            accs.append(model.accuracy(inst.points, inst.labels))
            t4 = time.perf_counter()
            for name, dt in zip(phases, (t1 - t0, t2 - t1, t3 - t2, t4 - t3)):
                phases[name].append(dt)
        row = {"n": n, "d": args.d, "algo": args.algo, "accuracy": float(np.median(accs))}
        row.update({f"{k}_s": float(np.median(v)) for k, v in phases.items()})
        rows.append(row)
    emit(rows, args.out, args.format)
    return 0


def cmd_hull(args) -> int:
    data = datagen.read_dataset(args.inp)
    out = {}
    for cls in data.classes:
        idx = hulls.graham_scan(data.points[data.labels == cls]) if args.hull == "graham" \
            else hulls.quickhull(data.points[data.labels == cls])
        out[str(int(cls))] = data.points[data.labels == cls][idx].tolist()
    emit({"method": args.hull, "hulls": out}, args.out, "json")
    return 0


def cmd_refpoint(args) -> int:
    data = datagen.read_dataset(args.inp, labels="binary")
    ref = hulls.reference_point(data.points[data.labels == 1], data.points[data.labels == -1], args.hull)
    emit(
        {
            "p": ref.p.tolist(),
            "pair": {"pos": ref.pair.pos.tolist(), "neg": ref.pair.neg.tolist(), "distance": ref.pair.distance},
            "degenerate": ref.degenerate,
        },
        args.out,
        "json",
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_data_flags(sp):
    sp.add_argument("--in", dest="inp", required=True, help="dataset CSV (x1..xd,label)")
    sp.add_argument("--truth", help="planted truth JSON; enables bound checks")
    sp.add_argument("--hull", choices=("graham", "quickhull"), default="graham")


def _add_seed_flags(sp):
    sp.add_argument("--seed", type=int, help="run a single seed")
    sp.add_argument("--seeds", type=int, default=DEFAULT_SEEDS, help="run seeds 0..SEEDS-1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poincare-linear", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a planted separable dataset and its truth file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--eps", type=float, required=True)
    g.add_argument("--p-norm", type=float, help="reference point norm (default R/5)")
    g.add_argument("--r", type=float, default=0.95)
    g.add_argument("--seed", type=int)
    g.add_argument("--measure", choices=("euclidean", "hyperbolic"), default="euclidean")
    g.add_argument("--test-n", type=int, default=0, help="also write a held-out draw of this size")
    g.add_argument("--out", required=True, help="dataset CSV path; truth goes to <stem>.truth.json")

    for name, helptext in (("train", "train per seed and report"), ("eval", "train per seed and score on --test")):
        t = sub.add_parser(name, help=helptext)
        t.add_argument("--algo", choices=ALGORITHMS, required=True)
        _add_data_flags(t)
        t.add_argument("--test", help="held-out dataset CSV")
        t.add_argument("--ref", choices=("truth", "learned"), help="reference point source")
        t.add_argument("--c", type=float, help="SVM trade-off (default 1000 with --truth, else 5)")
        t.add_argument("--a", type=float, default=0.0, help="second-order regulariser")
        t.add_argument("--alpha", type=float, default=1.0, help="strategic manipulation budget")
        t.add_argument("--tol", type=float, default=1e-4)
        t.add_argument("--max-iter", type=int, help="SGD steps, or epochs for online learners")
        _add_seed_flags(t)
        t.add_argument("--jobs", type=int, default=1)
        t.add_argument("--out")
        t.add_argument("--format", choices=("json", "csv"), default="json")

    b = sub.add_parser("bound", help="evaluate a mistake bound")
    b.add_argument("--kind", choices=BOUND_KINDS, default="perceptron")
    b.add_argument("--r", type=float, default=0.95)
    b.add_argument("--p-norm", type=float)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--alpha", type=float, default=0.0)
    b.add_argument("--a", type=float, default=1.0)
    b.add_argument("--w-norm", type=float)
    b.add_argument("--in", dest="inp")
    b.add_argument("--truth")
    b.add_argument("--seed", type=int)
    b.add_argument("--out")

    bench = sub.add_parser("bench", help="time the SVM phases on planted data")
    bench.add_argument("--algo", choices=("svm", "euclidean-svm"), default="svm")
    bench.add_argument("--n", type=int, nargs="+", default=[1000, 10_000])
    bench.add_argument("--d", type=int, default=2)
    bench.add_argument("--eps", type=float, default=0.01)
    bench.add_argument("--p-norm", type=float)
    bench.add_argument("--r", type=float, default=0.95)
    bench.add_argument("--c", type=float)
    bench.add_argument("--tol", type=float, default=1e-4)
    bench.add_argument("--max-iter", type=int)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--seeds", type=int, default=3)
    bench.add_argument("--out")
    bench.add_argument("--format", choices=("json", "csv"), default="json")

    h = sub.add_parser("hull", help="hull vertices of every class (2-D data)")
    h.add_argument("--in", dest="inp", required=True)
    h.add_argument("--hull", choices=("graham", "quickhull"), default="graham")
    h.add_argument("--out")

    r = sub.add_parser("refpoint", help="learned reference point of a binary dataset")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--hull", choices=("graham", "quickhull"), default="graham")
    r.add_argument("--out")
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "train": lambda a: cmd_train(a, eval_mode=False),
    "eval": lambda a: cmd_train(a, eval_mode=True),
    "bound": cmd_bound,
    "bench": cmd_bench,
    "hull": cmd_hull,
    "refpoint": cmd_refpoint,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except PoincareLinearError as exc:
        print(f"poincare-linear: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
