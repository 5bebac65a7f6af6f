"""Command-line interface.

Subcommands mirror the pipeline stages: embed-fallback, pca, cluster,
train, eval, sample-dump, report. Exit codes: 0 success, 1 validation
error (bad flags, missing files, schema mismatches), 2 runtime error.

Heavy imports happen inside the command handlers so that --threads can cap
the BLAS worker pools before numpy is loaded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_VALIDATION)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="kgemb",
        description="Knowledge-graph embedding training with pluggable "
                    "negative sampling and filtered link-prediction evaluation.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--threads", type=int, default=0,
                        help="cap numeric worker threads (0 = library default)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed-fallback", help="hashing-based entity embeddings",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--data", required=True, help="dataset directory with train/valid/test TSVs")
    p.add_argument("--texts", default="", help="entity text TSV (default: entity labels)")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output LEMB matrix")
    p.add_argument("--labels-out", required=True, help="output labels file")

    p = sub.add_parser("pca", help="fit PCA and write the reduced matrix",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--in", dest="input", required=True, help="input LEMB matrix")
    p.add_argument("--z", type=int, required=True, help="reduced dimensionality")
    p.add_argument("--out", required=True, help="output LEMB matrix")

    p = sub.add_parser("cluster", help="PCA-reduce and fit K-means++ clusters",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--in", dest="input", required=True, help="input LEMB matrix")
    p.add_argument("--labels", required=True, help="labels file, one per row")
    p.add_argument("--k", type=int, required=True, help="number of clusters")
    p.add_argument("--z", type=int, default=0,
                   help="reduce to this dimensionality first (0 = no reduction)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="train a model from a JSON config",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", required=True, help="flat JSON run config")
    for flag, typ in (("seed", int), ("data-dir", str), ("out-dir", str),
                      ("strategy", str), ("model", str), ("max-steps", int),
                      ("eval-every", int), ("num-clusters", int),
                      ("num-hops", int), ("num-negatives", int), ("dim", int),
                      ("lr", float), ("gamma", float), ("batch-size", int)):
        p.add_argument(f"--{flag}", type=typ, default=None,
                       help=f"override config field {flag.replace('-', '_')}")

    p = sub.add_parser("eval", help="filtered/raw link-prediction metrics",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.add_argument("--out", default="", help="also write the report as JSON here")

    p = sub.add_parser("sample-dump",
                       help="print sorted cluster distances and sampled negatives",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--cluster", required=True, help="cluster model directory")
    p.add_argument("--triple", nargs=3, required=True,
                   metavar=("HEAD", "RELATION", "TAIL"))
    p.add_argument("--side", default="random", choices=("head", "tail", "random"))
    p.add_argument("--n", type=int, default=5, help="negatives to sample")
    p.add_argument("--hops", type=int, default=2, help="nearest clusters to use")
    p.add_argument("--d-max", type=float, default=None,
                   help="distance cutoff instead of a hop count")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("report", help="compare run logs side by side",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("logs", nargs="+", help="JSON-lines run logs (first is baseline)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")

    return parser


# --- command handlers ------------------------------------------------------


def _cmd_embed_fallback(args) -> int:
    from . import lemb
    from .datasets import default_entity_texts, load_dataset, load_entity_texts
    from .embeddings import fallback_embed

    store = load_dataset(_existing_dir(args.data))
    if args.texts:
        texts = load_entity_texts(_existing(args.texts), store.entity_vocab)
    else:
        texts = default_entity_texts(store.entity_vocab)
    matrix = fallback_embed(texts, args.dim, args.seed)
    lemb.write_matrix(args.out, matrix)
    lemb.write_labels(args.labels_out, store.entity_vocab.id_to_label)
    print(f"wrote {matrix.shape[0]}x{matrix.shape[1]} matrix to {args.out}")
    return EXIT_OK


def _cmd_pca(args) -> int:
    from . import lemb
    from .embeddings import PcaReducer

    matrix = lemb.read_matrix(_existing(args.input)).astype("float64")
    reducer = PcaReducer(n_components=args.z).fit(matrix)
    lemb.write_matrix(args.out, reducer.transform(matrix))
    explained = reducer.explained_variance_.sum()
    print(f"reduced {matrix.shape[1]} -> {args.z} dims "
          f"(explained variance {explained:.4g}) into {args.out}")
    return EXIT_OK


def _cmd_cluster(args) -> int:
    from . import lemb
    from .clustering import ClusterModel, KMeansPP
    from .embeddings import PcaReducer

    matrix = lemb.read_matrix(_existing(args.input)).astype("float64")
    labels = lemb.read_labels(_existing(args.labels))
    if len(labels) != matrix.shape[0]:
        raise ValidationError(
            f"{args.labels}: {len(labels)} labels for {matrix.shape[0]} rows")
    reduced = matrix
    if args.z:
        reduced = PcaReducer(n_components=args.z).fit_transform(matrix)
    est = KMeansPP(n_clusters=args.k, max_iter=args.max_iter, tol=args.tol,
                   random_state=args.seed).fit(reduced)
    model = ClusterModel.from_estimator(est, reduced, seed=args.seed)
    model.save(args.out)
    lemb.write_labels(Path(args.out) / "labels.txt", labels)
    print(f"fit {args.k} clusters in {est.n_iter_} iterations "
          f"(inertia {est.inertia_:.6g}) into {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    from .datasets import load_dataset
    from .training import TrainConfig, train

    config = TrainConfig.from_json_file(_existing(args.config))
    overrides = {
        name: getattr(args, name) for name in (
            "seed", "data_dir", "out_dir", "strategy", "model", "max_steps",
            "eval_every", "num_clusters", "num_hops", "num_negatives", "dim",
            "lr", "gamma", "batch_size")
        if getattr(args, name) is not None
    }
    if overrides:
        config = TrainConfig.from_dict({**config.to_dict(), **overrides})
    if not config.data_dir:
        raise ValidationError("config needs data_dir (or pass --data-dir)")
    store = load_dataset(_existing_dir(config.data_dir))
    model, run_log = train(config, store)
    prep = run_log.preprocessing()
    if prep and prep.get("total_min"):
        from .training import PreprocessResult
        print(PreprocessResult(None, prep["embedding_generation_min"],
                               prep["cluster_formation_min"],
                               prep["total_min"]).format_table())
    final_loss = run_log.losses()[-1]
    print(f"trained {config.model} for {run_log.records[-1]['steps']} steps, "
          f"final loss {final_loss:.6f}")
    if config.out_dir:
        print(f"artifacts in {config.out_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .datasets import build_true_index, load_dataset
    from .evaluation import evaluate
    from .models import load_checkpoint

    model, header = load_checkpoint(_existing(args.checkpoint))
    store = load_dataset(_existing_dir(args.data))
    if store.num_entities != model.num_entities:
        raise ValidationError(
            f"checkpoint has {model.num_entities} entities, dataset has "
            f"{store.num_entities}; wrong --data directory?")
    triples = store.splits()[args.split]
    report = evaluate(model, triples, build_true_index(store))
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_sample_dump(args) -> int:
    import numpy as np

    from .clustering import ClusterModel, centroid_distances
    from .datasets import load_dataset
    from .sampling import NegSamplerConfig, LemonSampler

    store = load_dataset(_existing_dir(args.data))
    model = ClusterModel.load(_existing_dir(args.cluster))
    if model.n_entities != store.num_entities:
        raise ValidationError(
            f"cluster model covers {model.n_entities} entities, dataset has "
            f"{store.num_entities}")
    h, r, t = args.triple
    hid = _lookup(store.entity_vocab, h, "entity")
    rid = _lookup(store.relation_vocab, r, "relation")
    tid = _lookup(store.entity_vocab, t, "entity")

    rng = np.random.default_rng(args.seed)
    side = args.side
    if side == "random":
        side = "head" if rng.random() < 0.5 else "tail"
    target = hid if side == "head" else tid

    dists = centroid_distances(model.reduced[target], model)
    order = np.argsort(dists, kind="stable")
    label = store.entity_vocab.id_to_label[target]
    print(f"# corrupting {side} entity\t{label}\t{target}")
    print("rank\tcluster\tdistance\tmembers")
    for rank, c in enumerate(order):
        print(f"{rank}\t{c}\t{dists[c]:.6f}\t{len(model.members[c])}")

    cfg = NegSamplerConfig(strategy="lemon", num_negatives=args.n,
                           num_hops=args.hops, d_max=args.d_max, seed=args.seed)
    sampler = LemonSampler(cfg, model)
    batch = sampler.sample(np.array([[hid, rid, tid]]), rng,
                           p_head=1.0 if side == "head" else 0.0)
    print("negative\tentity\tid")
    for i, eid in enumerate(batch.replacements[0]):
        print(f"{i}\t{store.entity_vocab.id_to_label[eid]}\t{eid}")
    return EXIT_OK


def _final_metrics(log_path):
    from .training import TrainLog

    run_log = TrainLog.load(_existing(log_path))
    evals = run_log.eval_records()
    if not evals:
        raise ValidationError(
            f"{log_path}: no evaluation events; train with eval_every > 0")
    return dict(evals[-1]["filtered"])


def _cmd_report(args) -> int:
    names = [Path(p).stem for p in args.logs]
    metrics = [_final_metrics(p) for p in args.logs]
    keys = ("MRR", "Hits@1", "Hits@3", "Hits@10", "MR")
    base = metrics[0]

    if args.json:
        payload = []
        for name, m in zip(names, metrics):
            entry = {"run": name, **{k: m[k] for k in keys}}
            if m is not base:
                entry["delta_hits10"] = m["Hits@10"] - base["Hits@10"]
                entry["delta_mrr"] = m["MRR"] - base["MRR"]
            payload.append(entry)
        print(json.dumps(payload, indent=2, sort_keys=True))
        return EXIT_OK

    header = ["run"] + [k for k in keys] + ["dH@10", "dMRR"]
    rows = [header]
    for i, (name, m) in enumerate(zip(names, metrics)):
        row = [name] + [f"{m[k]:.4f}" for k in keys]
        if i == 0:
            row += ["-", "-"]
        else:
            row += [_signed(100 * (m["Hits@10"] - base["Hits@10"])),
                    _signed(m["MRR"] - base["MRR"])]
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return EXIT_OK


def _signed(x: float) -> str:
    return f"{x:+.4f}"


def _lookup(vocab, token, kind):
    if token in vocab:
        return vocab[token]
    if token.isdigit() and int(token) < len(vocab):
        return int(token)
    raise ValidationError(f"unknown {kind} {token!r}")


def _existing(path):
    if not Path(path).is_file():
        raise ValidationError(f"no such file: {path}")
    return path


def _existing_dir(path):
    if not Path(path).is_dir():
        raise ValidationError(f"no such directory: {path}")
    return path


_HANDLERS = {
    "embed-fallback": _cmd_embed_fallback,
    "pca": _cmd_pca,
    "cluster": _cmd_cluster,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sample-dump": _cmd_sample_dump,
    "report": _cmd_report,
}


def run_cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))
    try:
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
