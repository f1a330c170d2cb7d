"""Single entry point: simulate, extract, select, train, evaluate, attack,
inspect, serve.

Exit codes: 0 success, 1 usage error, 2 data/processing error. Every run
prints its resolved configuration as one JSON line before doing any work, so
outputs are attributable and reruns reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .attack import (
    QualityLevel,
    load_landmark_trace,
    run_attack,
    write_attack_csv,
)
from .dataset import Dataset, landmark_dir
from .errors import JawprintError
from .evaluation import SplitConfig, format_report_table, write_report_csv
from .features import (
    SelectionConfig,
    matrix_from_vectors,
    relieff_scores,
    RankedFeatures,
    write_matrix_csv,
    write_ranking_csv,
)
from .pipeline import (
    MODES,
    evaluate_population,
    evaluate_user,
    fused_columns,
    load_cohort,
    mode_locations,
)
from .evaluation import build_split
from .signal import Activity, LOCATION_ORDER, window_means
from .synthgen import write_dataset
from .verifiers import LstmConfig, SvmConfig, save_model

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _activity(token: str) -> Activity:
    try:
        return Activity.from_token(token)
    except ValueError as err:
        raise JawprintError(str(err)) from None


def build_parser() -> _Parser:
    parser = _Parser(prog="jawprint", description="Mouth-motion speaker verification toolkit")
    parser.add_argument("--seed", type=int, default=0, help="master seed for seeded operations")
    parser.add_argument(
        "--data-root",
        default=os.environ.get("JAWPRINT_DATA_ROOT", "data"),
        help="dataset directory (env JAWPRINT_DATA_ROOT)",
    )
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--format", choices=("csv", "table"), default="csv", help="report format")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic cohort dataset")
    p.add_argument("--users", type=int, default=10)
    p.add_argument("--sessions", type=int, default=2)
    p.add_argument("--activity", default="seated", help="comma-separated activities")
    p.add_argument("--duration", type=float, default=120.0, help="seconds per session")
    p.add_argument("--no-landmarks", action="store_true")

    p = sub.add_parser("extract", help="windowed feature matrices per location and fused")
    p.add_argument("--window", type=int, default=250)
    p.add_argument("--activity", default="seated")

    p = sub.add_parser("select", help="ReliefF ranking of the fused or per-location features")
    p.add_argument("--top", type=int, default=50)
    p.add_argument("--mode", default="fused", choices=("fused", "per-location"))
    p.add_argument("--activity", default="seated")
    p.add_argument("--neighbors", type=int, default=10)

    p = sub.add_parser("train", help="train one user's verifier on session 1")
    p.add_argument("--model", required=True, choices=("svm", "lstm"))
    p.add_argument("--user", required=True)
    p.add_argument("--mode", default="fused", choices=MODES)
    p.add_argument("--activity", default="seated")
    p.add_argument("--top", type=int, default=50)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--dtype", default="float64", choices=("float32", "float64"))

    p = sub.add_parser("evaluate", help="train and score every user, emit the EER report")
    p.add_argument("--model", required=True, choices=("svm", "lstm"))
    p.add_argument("--mode", default="fused", choices=MODES + ("per-location",))
    p.add_argument("--activity", default="seated")
    p.add_argument("--top", type=int, default=50)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--dtype", default="float64", choices=("float32", "float64"))
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("attack", help="video-driven impersonation at one quality level")
    p.add_argument("--landmarks", default=None, help="directory of master traces (default: data root)")
    p.add_argument("--fps", type=int, required=True, choices=(60, 30, 15))
    p.add_argument("--resolution", required=True, choices=("1080p", "720p"))
    p.add_argument("--models", required=True, help="directory with *.jwpr and thresholds.json")
    p.add_argument("--classifier", default="svm", choices=("svm", "lstm"))
    p.add_argument("--victims", default=None, help="comma-separated user ids (default: all enrolled)")

    p = sub.add_parser("inspect", help="0.5-second window means per axis (scatter data)")
    p.add_argument("--span", type=float, default=0.5)
    p.add_argument("--user", required=True)
    p.add_argument("--activity", default="seated")
    p.add_argument("--session", type=int, default=1)

    p = sub.add_parser("serve", help="run the continuous-authentication service")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--models", default=None)
    p.add_argument("--classifier", default=None, choices=("svm", "lstm"))
    p.add_argument("--config", default=None, help="JSON config file")
    return parser


def _print_config(args: argparse.Namespace) -> None:
    blob = {k: v for k, v in sorted(vars(args).items())}
    print(json.dumps({"resolved_config": blob}, sort_keys=True, default=str))


def _activities(tokens: str) -> list[Activity]:
    return [_activity(t.strip()) for t in tokens.split(",") if t.strip()]


def cmd_simulate(args) -> int:
    activities = _activities(args.activity)
    profiles = write_dataset(
        args.data_root,
        n_users=args.users,
        seed=args.seed,
        activities=activities,
        duration=args.duration,
        sessions=args.sessions,
        with_landmarks=not args.no_landmarks,
    )
    print(f"wrote {len(profiles)} users under {args.data_root}")
    return 0


def cmd_extract(args) -> int:
    dataset = Dataset(args.data_root)
    activity = _activity(args.activity)
    cohort = load_cohort(dataset, activity, window_length=args.window)
    out = Path(args.out)
    for loc in LOCATION_ORDER:
        vectors = []
        for key in sorted(cohort.sessions):
            data = cohort.sessions[key]
            vectors.extend(data.features[loc][: data.n_windows])
        write_matrix_csv(matrix_from_vectors(vectors), out / f"features_{loc.value}.csv")
    fused_vectors = []
    for key in sorted(cohort.sessions):
        data = cohort.sessions[key]
        fused_vectors.extend(data.fused_vector(i) for i in range(data.n_windows))
    write_matrix_csv(matrix_from_vectors(fused_vectors), out / "features_fused.csv")
    print(f"wrote feature matrices for {len(cohort.users())} users to {out}")
    return 0


def _population_ranking(cohort, mode: str, cfg: SelectionConfig) -> RankedFeatures:
    """Mean of per-user two-class ReliefF weights across the cohort."""
    locations = mode_locations(mode)
    columns = fused_columns(cohort, locations)
    users = cohort.users()
    total = np.zeros(len(columns))
    for user in users:
        split = build_split(cohort.window_pools(), user, SplitConfig(seed=cfg.seed))
        refs = split.train_genuine + split.train_impostor
        y = np.r_[np.ones(len(split.train_genuine), int), np.zeros(len(split.train_impostor), int)]
        X = cohort.rows(refs, 1, locations)
        total += relieff_scores(X, y, cfg)
    mean = total / len(users)
    order = np.lexsort((np.arange(len(columns)), -mean))
    return RankedFeatures(entries=tuple((columns[i], float(mean[i])) for i in order))


def cmd_select(args) -> int:
    dataset = Dataset(args.data_root)
    cohort = load_cohort(dataset, _activity(args.activity))
    cfg = SelectionConfig(k_top=args.top, relieff_neighbors=args.neighbors, seed=args.seed)
    out = Path(args.out)
    modes = [loc.value for loc in LOCATION_ORDER] if args.mode == "per-location" else ["fused"]
    for mode in modes:
        ranked = _population_ranking(cohort, mode, cfg)
        top = RankedFeatures(entries=ranked.entries[: args.top])
        write_ranking_csv(top, out / f"ranking_{mode}.csv")
    print(f"wrote rankings for modes {modes} to {out}")
    return 0


def cmd_train(args) -> int:
    dataset = Dataset(args.data_root)
    cohort = load_cohort(dataset, _activity(args.activity))
    select_cfg = SelectionConfig(k_top=args.top, seed=args.seed)
    split_cfg = SplitConfig(seed=args.seed)
    lstm_cfg = LstmConfig(max_epochs=args.epochs, seed=args.seed, dtype=args.dtype)
    result, model = evaluate_user(
        cohort, args.user, args.model, args.mode,
        split_cfg=split_cfg, select_cfg=select_cfg, svm_cfg=SvmConfig(), lstm_cfg=lstm_cfg,
    )
    out = Path(args.out)
    model_name = f"{args.user}.{args.model}.jwpr"
    save_model(model, out / model_name)
    _merge_thresholds(out, args.user, args.model, model_name, result.threshold, result.eer, args.mode)
    print(f"trained {args.model} for {args.user}: eer={result.eer:.4f} threshold={result.threshold:.4f}")
    return 0


def _merge_thresholds(out: Path, user: str, classifier: str, model_name: str,
                      threshold: float, eer: float, mode: str) -> None:
    index_path = Path(out) / "thresholds.json"
    blob = {"users": {}}
    if index_path.is_file():
        blob = json.loads(index_path.read_text(encoding="utf-8"))
    blob.setdefault("users", {}).setdefault(user, {})[classifier] = {
        "model": model_name,
        "threshold": threshold,
        "eer": eer,
        "mode": mode,
    }
    index_path.parent.mkdir(parents=True, exist_ok=True)
    index_path.write_text(json.dumps(blob, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_evaluate(args) -> int:
    dataset = Dataset(args.data_root)
    cohort = load_cohort(dataset, _activity(args.activity))
    sink = {}
    report = evaluate_population(
        cohort,
        args.model,
        args.mode,
        split_cfg=SplitConfig(seed=args.seed),
        select_cfg=SelectionConfig(k_top=args.top, seed=args.seed),
        svm_cfg=SvmConfig(),
        lstm_cfg=LstmConfig(max_epochs=args.epochs, seed=args.seed, dtype=args.dtype),
        workers=args.workers,
        model_sink=sink,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for (user, classifier, mode), (model, threshold) in sorted(sink.items()):
        model_name = f"{user}.{classifier}.jwpr"
        save_model(model, out / model_name)
        eer = next(u.eer for u in report.users if u.user_id == user and u.mode == mode)
        _merge_thresholds(out, user, classifier, model_name, threshold, eer, mode)
    if args.format == "table":
        text = format_report_table(report)
        (out / "report.txt").write_text(text, encoding="utf-8")
        print(text)
    else:
        write_report_csv(report, out / "report_users.csv", out / "report_summary.csv")
        print(f"wrote report_users.csv and report_summary.csv to {out}")
    return 0


def cmd_attack(args) -> int:
    models_dir = Path(args.models)
    index_path = models_dir / "thresholds.json"
    if not index_path.is_file():
        raise JawprintError(f"{index_path} not found; run `jawprint evaluate` or `train` first")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    users = sorted(index.get("users", {}))
    if args.victims:
        users = [u.strip() for u in args.victims.split(",") if u.strip()]

    from .verifiers import load_model

    resolution = (1920, 1080) if args.resolution == "1080p" else (1280, 720)
    quality = QualityLevel(args.fps, resolution)
    rows = []
    for user in users:
        entry = index["users"].get(user, {}).get(args.classifier)
        if entry is None:
            raise JawprintError(f"no {args.classifier} model for {user} in {models_dir}")
        model = load_model(models_dir / entry["model"])
        mode = entry.get("mode", "fused")
        if args.landmarks:
            base = Path(args.landmarks) / user
        else:
            base = landmark_dir(args.data_root, user, Activity.SEATED)
        traces = {
            loc: load_landmark_trace(base / f"{loc.value}.csv", loc)
            for loc in mode_locations(mode)
        }
        row, _ = run_attack(traces, model, entry["threshold"], quality, user, mode)
        rows.append(row)
    out = Path(args.out)
    write_attack_csv(rows, out / "attack_report.csv")
    for r in rows:
        print(f"{r.user_id} {r.classifier} {quality.label()}: {r.false_accepts}/{r.windows} accepted (far={r.far:.3f})")
    return 0


def cmd_inspect(args) -> int:
    dataset = Dataset(args.data_root)
    session = dataset.session(args.user, _activity(args.activity), args.session)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for loc in LOCATION_ORDER:
        means = window_means(session.streams[loc], span=args.span)
        path = out / f"means_{loc.value}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write("window_index,mean_ax,mean_ay,mean_az\n")
            for i, (mx, my, mz) in enumerate(means):
                fh.write(f"{i},{mx!r},{my!r},{mz!r}\n")
    print(f"wrote window means ({args.span}s spans) to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app, load_service_config

    config = load_service_config(args.config)
    config = dataclasses.replace(
        config,
        port=args.port if args.port is not None else config.port,
        host=args.host if args.host is not None else config.host,
        model_dir=args.models if args.models is not None else config.model_dir,
        classifier=args.classifier if args.classifier is not None else config.classifier,
    )
    app = build_app(config)
    print(f"serving {len(app.state.engine.users())} enrolled users on {config.host}:{config.port}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "extract": cmd_extract,
    "select": cmd_select,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "attack": cmd_attack,
    "inspect": cmd_inspect,
    "serve": cmd_serve,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else USAGE_EXIT
    _print_config(args)
    try:
        return COMMANDS[args.command](args)
    except JawprintError as err:
        print(f"jawprint: {err}", file=sys.stderr)
        return DATA_EXIT
    except FileNotFoundError as err:
        print(f"jawprint: {err}", file=sys.stderr)
        return DATA_EXIT


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
