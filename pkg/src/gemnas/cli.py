"""Command-line front end: ``gemnas <command> --config run.json``.

Exit codes: 0 success, 1 runtime or training failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .encoder import EncoderBundle, load_bundle, save_bundle, train_encoder
from .experiments import METHODS, EncoderRecipe, correlation_grid, make_embedder, stage_seed
from .graph import Dag, RandomDagSampler, parse_palette
from .metrics import pca_project, write_surface_csv
from .oracle import (
    BenchmarkTable,
    SyntheticOracle,
    TableSampler,
    TabularOracle,
    build_synthetic_table,
    efficiency_score,
)
from .predictor import build_estimator, load_predictor, save_predictor
from .search import SearchResult, sample_pool, score_pool, select_best
from .nn import TrainConfig

log = logging.getLogger("gemnas")


class UsageError(Exception):
    pass


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_effective_config(cfg: RunConfig, out: Path, command: str) -> None:
    (out / f"effective_config.{command}.json").write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n")


def _oracle(cfg: RunConfig):
    if cfg.oracle.kind == "tabular":
        return TabularOracle(BenchmarkTable.load(cfg.oracle.table_path))
    s = cfg.search_space
    return SyntheticOracle(cfg.oracle.synthetic, s.channels, tuple(s.resolution))


def _sampler(cfg: RunConfig, oracle):
    if isinstance(oracle, TabularOracle) and oracle.table.dags and cfg.oracle.on_missing == "fail":
        return TableSampler(oracle.table)
    return cfg.sampler()


def _check_bundle(bundle: EncoderBundle, cfg: RunConfig) -> None:
    if bundle.n != cfg.search_space.n:
        raise UsageError(f"encoder was trained for n={bundle.n}, config says n={cfg.search_space.n}")


def cmd_train_encoder(cfg: RunConfig) -> Path:
    out = _out_dir(cfg)
    e = cfg.encoder
    train_cfg = e.train.to_train_config(stage_seed(cfg.seed, "encoder"))
    palette = parse_palette(cfg.search_space.ops)
    bundle, history = train_encoder(
        e.pair_count, cfg.search_space.n, e.d, train_cfg, cfg.wl_config(),
        hidden=tuple(e.hidden), include_ops=e.include_ops, palette=palette, workers=cfg.workers,
    )
    bundle.meta["global_seed"] = cfg.seed
    save_bundle(out / "encoder", bundle)
    with open(out / "encoder_loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "similarity_loss", "reconstruction_loss"])
        for rec in history:
            writer.writerow([rec["iteration"], repr(rec["similarity_loss"]), repr(rec["reconstruction_loss"])])
    _write_effective_config(cfg, out, "train-encoder")
    return out / "encoder"


def cmd_build_estimator(cfg: RunConfig, encoder_dir: Path) -> Path:
    out = _out_dir(cfg)
    bundle = load_bundle(encoder_dir)
    _check_bundle(bundle, cfg)
    oracle = _oracle(cfg)
    est = cfg.estimator
    train_cfg = est.train.to_train_config(stage_seed(cfg.seed, "estimator"))
    records: list[dict] = []
    p = build_estimator(
        oracle, bundle, est.sample_budget, train_cfg, cfg.oracle.lam, _sampler(cfg, oracle),
        hidden=tuple(est.hidden),
        epochs_per_sample=est.epochs_per_sample,
        min_steps_per_sample=est.min_steps_per_sample,
        final_steps=est.final_steps,
        on_missing=cfg.oracle.on_missing,
        sample_log=records,
    )
    save_predictor(out / "predictor", p, {"oracle": oracle.describe(), "global_seed": cfg.seed})
    with open(out / "samples.ndjson", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    _write_effective_config(cfg, out, "build-estimator")
    return out / "predictor"


def cmd_search(cfg: RunConfig, encoder_dir: Path, predictor_dir: Path, surface: bool = False) -> SearchResult:
    out = _out_dir(cfg)
    bundle = load_bundle(encoder_dir)
    _check_bundle(bundle, cfg)
    p = load_predictor(predictor_dir)
    if p.d != bundle.d:
        raise UsageError(f"predictor expects d={p.d}, encoder produces d={bundle.d}")
    oracle = _oracle(cfg)
    sampler = _sampler(cfg, oracle)
    seed = stage_seed(cfg.seed, "search")
    pool = sample_pool(sampler, cfg.search.pool_size, seed)
    scores = score_pool(bundle, p, pool)
    k, value, key = select_best(bundle, p, pool, scores)
    result = SearchResult(pool[k], value, cfg.search.pool_size, seed, best_hash=key)
    try:
        result.true_score = efficiency_score(oracle.evaluate(pool[k]), cfg.oracle.lam)
    except (KeyError, ValueError) as exc:
        log.warning("could not re-evaluate the selected architecture: %s", exc)
    (out / "search_result.json").write_text(result.dumps())
    if surface:
        vectors = np.vstack([bundle.embed_many(pool[i:i + 8192]) for i in range(0, len(pool), 8192)])
        proj = pca_project(vectors, k=min(2, bundle.d))
        coords = proj.coords if proj.coords.shape[1] == 2 else np.hstack([proj.coords, np.zeros((len(pool), 1))])
        write_surface_csv(out / "surface.csv", coords, scores)
    _write_effective_config(cfg, out, "search")
    return result


def cmd_make_table(cfg: RunConfig, size: int, path: Path) -> BenchmarkTable:
    s = cfg.search_space
    oracle = SyntheticOracle(cfg.oracle.synthetic, s.channels, tuple(s.resolution))
    table = build_synthetic_table(cfg.sampler(), size, oracle, stage_seed(cfg.seed, "table"), h=cfg.encoder.wl_h)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.save(path)
    return table


def cmd_make_corpus(cfg: RunConfig, path: Path) -> int:
    c = cfg.correlation
    sampler = RandomDagSampler(c.n, c.edge_prob, parse_palette(c.ops))
    s = cfg.search_space
    oracle = SyntheticOracle(cfg.oracle.synthetic, s.channels, tuple(s.resolution))
    rng = np.random.default_rng(stage_seed(cfg.seed, "corpus"))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for _ in range(c.corpus_size):
            dag = sampler.sample(rng)
            ev = oracle.evaluate(dag)
            rec = {"dag": dag.to_json(), "accuracy": ev.accuracy, "mac_millions": ev.mac_millions,
                   "score": efficiency_score(ev, cfg.oracle.lam)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return c.corpus_size


def read_scored_corpus(path: Path) -> tuple[list[Dag], np.ndarray]:
    dags, scores = [], []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                dags.append(Dag.from_json(rec["dag"]))
                scores.append(rec["score"])
    return dags, np.array(scores)


def cmd_eval_correlation(cfg: RunConfig, corpus: Path) -> list[dict]:
    if not corpus.is_file():
        raise UsageError(f"corpus {corpus} does not exist; create it with make-corpus")
    out = _out_dir(cfg)
    dags, scores = read_scored_corpus(corpus)
    c, e = cfg.correlation, cfg.encoder
    n = dags[0].n
    palette = parse_palette(c.ops)
    recipe = EncoderRecipe(
        d=e.d, pair_count=e.pair_count, iterations=e.train.iterations, hidden=tuple(e.hidden),
        wl_cfg=cfg.wl_config(), include_ops=e.include_ops, batch_size=e.train.batch_size,
        learning_rate=e.train.learning_rate,
    )
    embedders = {m: make_embedder(m, n, palette, recipe, cfg.seed, cfg.workers) for m in c.methods}
    rows = correlation_grid(
        dags, scores, embedders, cfg.seed, c.train_fraction, c.proportions,
        TrainConfig(iterations=c.predictor_iterations), tuple(cfg.estimator.hidden),
    )
    with open(out / "correlation.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, ["method", "proportion", "n_train", "n_test", "kendall_tau", "pearson_r"])
        writer.writeheader()
        writer.writerows(rows)
    _write_effective_config(cfg, out, "eval-correlation")
    return rows


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _csv_methods(text: str) -> list[str]:
    methods = [t.strip() for t in text.split(",") if t.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {list(METHODS)}")
    return methods


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gemnas", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--output-dir", type=Path, help="overrides config output_dir")
        p.add_argument("--workers", type=int, help="parallel workers for WL targets and oracle calls")
        return p

    add("train-encoder", "train the kernel-guided encoder")
    p = add("build-estimator", "sample, evaluate and fit the efficiency-score predictor")
    p.add_argument("--encoder", type=Path, help="encoder checkpoint directory (default <out>/encoder)")
    p = add("search", "bootstrap optimisation over a sampled pool")
    p.add_argument("--encoder", type=Path)
    p.add_argument("--predictor", type=Path)
    p.add_argument("--surface", action="store_true", help="also write the PCA score surface CSV")
    p.add_argument("--pool-size", type=int)
    p = add("make-table", "write a synthetic benchmark table")
    p.add_argument("--size", type=int, default=10_000)
    p.add_argument("--table", type=Path, required=True)
    p = add("make-corpus", "write an evaluated DAG corpus for eval-correlation")
    p.add_argument("--corpus", type=Path, required=True)
    p = add("eval-correlation", "Kendall tau / Pearson grid over embedding methods and training proportions")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--split", type=float, help="train fraction")
    p.add_argument("--proportions", type=_csv_ints)
    p.add_argument("--methods", type=_csv_methods)
    return parser


def _resolve_config(args) -> RunConfig:
    overrides = {}
    if args.output_dir is not None:
        overrides["output_dir"] = str(args.output_dir)
    if args.workers is not None:
        overrides["workers"] = args.workers
    cfg = load_config(args.config, seed=args.seed, overrides=overrides)
    if getattr(args, "pool_size", None) is not None:
        cfg.search.pool_size = args.pool_size
    if args.command == "eval-correlation":
        if args.split is not None:
            cfg.correlation.train_fraction = args.split
        if args.proportions is not None:
            cfg.correlation.proportions = args.proportions
        if args.methods is not None:
            cfg.correlation.methods = args.methods
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _resolve_config(args)
        out = Path(cfg.output_dir)
        if args.command == "train-encoder":
            cmd_train_encoder(cfg)
        elif args.command == "build-estimator":
            cmd_build_estimator(cfg, args.encoder or out / "encoder")
        elif args.command == "search":
            result = cmd_search(cfg, args.encoder or out / "encoder", args.predictor or out / "predictor", args.surface)
            print(result.dumps(), end="")
        elif args.command == "make-table":
            cmd_make_table(cfg, args.size, args.table)
        elif args.command == "make-corpus":
            cmd_make_corpus(cfg, args.corpus)
        elif args.command == "eval-correlation":
            for row in cmd_eval_correlation(cfg, args.corpus):
                print(f"{row['method']:>12} {row['proportion']:>4}%  tau={row['kendall_tau']:.3f}  r={row['pearson_r']:.3f}")
    except (ConfigError, UsageError) as exc:
        print(f"gemnas: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"gemnas: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 1
        log.debug("command failed", exc_info=True)
        print(f"gemnas: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
