"""Command-line pipeline: taxonomy, ingest, featurize, train, augment, eval, infer.

Exit codes: 0 success, 1 usage error, 2 validation or domain error, 3 I/O error.
Every output file is written atomically, and reruns with the same inputs,
config and seed produce byte-identical files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np

from verbspace import fileio, harmonize, nodetext, synthetic
from verbspace import evaluation as ev
from verbspace import taxonomy as tx
from verbspace.config import RunConfig, load_config
from verbspace.errors import ConfigMismatch, CyclicTaxonomy, DanglingParent, DuplicateId, MalformedDocument, VerbSpaceError
from verbspace.p2s import train
from verbspace.p2s.checkpoint import Checkpoint

log = logging.getLogger("verbspace")

EXIT_USAGE, EXIT_INVALID, EXIT_IO = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# shared helpers


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_overrides(seed=args.seed, taxonomy_path=args.taxonomy)


def _taxonomy(cfg: RunConfig) -> tx.Taxonomy:
    if not cfg.taxonomy_path:
        raise UsageError("no taxonomy: pass --taxonomy or set taxonomy_path in the config")
    return tx.load_taxonomy(cfg.taxonomy_path)


def _emit(args, data: bytes) -> None:
    if args.out:
        fileio.atomic_write(args.out, data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _node_features(tax: tx.Taxonomy, cfg: RunConfig) -> np.ndarray:
    return nodetext.node_features(tax, cfg.d_text, cfg.summary_budget, cfg.textrank_window)


def _aligned(ids, labels):
    """Label rows in feature-file order; every feature row needs exactly one label."""
    by_id = {}
    for lab in labels:
        if lab.sample_id in by_id:
            raise ConfigMismatch(f"duplicate label for sample {lab.sample_id!r}")
        by_id[lab.sample_id] = lab
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise ConfigMismatch(f"{len(missing)} feature rows have no label, first {missing[0]!r}")
    if len(by_id) != len(ids):
        raise ConfigMismatch(f"{len(by_id) - len(set(ids))} labels have no feature row")
    return [by_id[i] for i in ids]


def _load_checkpoint(path, tax: tx.Taxonomy | None) -> Checkpoint:
    ckpt = Checkpoint.load(path)
    if tax is not None:
        ckpt.check_fingerprint(tax.fingerprint())
        if tuple(tax.order) != ckpt.node_ids:
            raise ConfigMismatch("checkpoint node order differs from the taxonomy")
    return ckpt


def _config_echo(cfg: RunConfig) -> dict:
    echo = cfg.to_dict()
    echo.pop("taxonomy_path")
    return echo


# ---------------------------------------------------------------------------
# commands


def cmd_taxonomy(args) -> int:
    cfg = _config(args)
    try:
        tax = _taxonomy(cfg)
    except (MalformedDocument, CyclicTaxonomy, DuplicateId, DanglingParent) as exc:
        if args.action == "validate":
            print(f"invalid taxonomy: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_INVALID
        raise
    if args.action == "validate":
        print(f"ok: {tax.N} nodes, {len(tax.leaf_ids)} leaves, fingerprint {tax.fingerprint()}")
    elif args.action == "show":
        node = tax.node(args.node or tax.root)
        below = tx.descendants(tax, node.id)
        lines = [
            f"id: {node.id}",
            f"parent: {node.parent_id or '-'}",
            f"depth: {tax.depth(node.id)}",
            f"gloss: {node.gloss or '-'}",
            f"members: {', '.join(node.lemmas) or '-'}",
            f"children: {len(tax.children[node.id])}",
            f"nodes: {len(below) + 1}",
            f"leaves: {len(below & tax.leaf_ids) + (node.id in tax.leaf_ids)}",
        ]
        print("\n".join(lines))
    else:
        if not args.node:
            raise UsageError("taxonomy prompt needs a node id")
        sys.stdout.write(nodetext.geometric_prompt(tax, args.node) + "\n")
    return 0


def cmd_ingest(args) -> int:
    cfg = _config(args)
    tax = _taxonomy(cfg)
    samples = harmonize.load_manifest(args.manifest)
    mappings = harmonize.load_mappings(args.mapping)
    labels = harmonize.ingest(samples, mappings, tax, cfg.fps, args.allow_unmapped, cfg.ancestor_closure)
    _emit(args, fileio.dump_jsonl(harmonize.label_to_record(lab, tax.order) for lab in labels))
    log.info("ingested %d samples into %d label records", len(samples), len(labels))
    return 0


def cmd_featurize(args) -> int:
    cfg = _config(args)
    tax = _taxonomy(cfg)
    if not args.out:
        raise UsageError("featurize needs --out")
    fileio.write_features(args.out, list(tax.order), _node_features(tax, cfg))
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    tax = _taxonomy(cfg)
    if not args.out:
        raise UsageError("train needs --out")
    init = _load_checkpoint(args.init, tax) if args.init else None
    ids, X = fileio.read_features(args.features)
    labels = _aligned(ids, harmonize.load_labels(args.labels, tax))
    values, soft = train.stack_labels(labels)
    hp = cfg.hyperparams()
    if init is None:
        ckpt = train.fit(X, values, _node_features(tax, cfg), hp, tax.order, tax.fingerprint(), _config_echo(cfg))
    else:
        dims = ("d", "n", "d_text", "hidden", "disentangle")
        if any(getattr(hp, k) != getattr(init.hp, k) for k in dims):
            raise ConfigMismatch("config dimensions differ from the --init checkpoint")
        if soft is None:
            raise ConfigMismatch("--init fine-tuning needs augmented labels (run `augment` first)")
        if hp.epochs_phase2 < 1:
            raise ConfigMismatch("--init fine-tuning needs epochs_phase2 >= 1")
        ckpt = train.finetune(replace(init, config=_config_echo(cfg)), X, values, soft, hp)
    ckpt.save(args.out)
    return 0


def cmd_augment(args) -> int:
    cfg = _config(args)
    tax = _taxonomy(cfg)
    ckpt = _load_checkpoint(args.checkpoint, tax)
    labels = harmonize.load_labels(args.labels, tax)
    values = np.stack([lab.values for lab in labels]) if labels else np.zeros((0, tax.N), np.int8)
    soft, corr = train.make_pseudo_labels(ckpt, values)
    out = [replace(lab, soft=row) for lab, row in zip(labels, soft)]
    _emit(args, fileio.dump_jsonl(harmonize.label_to_record(lab, tax.order) for lab in out))
    if args.corr:
        fileio.write_features(args.corr, list(tax.order), corr.C)
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    tax = _taxonomy(cfg)
    ckpt = _load_checkpoint(args.checkpoint, tax)
    ids, X = fileio.read_features(args.features)
    labels = _aligned(ids, harmonize.load_labels(args.labels, tax))
    values = np.stack([lab.values for lab in labels])
    leaves = sorted(tax.leaf_ids)
    if args.train_labels:
        counts = Counter()
        for lab in harmonize.load_labels(args.train_labels, tax):
            counts.update(lab.pos(tax.order))
        rare, nonrare = tx.split_rare(leaves, {leaf: counts[leaf] for leaf in leaves}, cfg.rare_threshold)
    else:
        rare, nonrare = set(), set(leaves)
    scores = train.infer(X, ckpt)
    columns = ev.node_columns(scores, values, tax.order, leaves, cfg.unknown_eval_policy)
    _emit(args, ev.map_by_split(columns, rare, nonrare).to_json())
    return 0


def cmd_infer(args) -> int:
    cfg = _config(args)
    tax = _taxonomy(cfg) if cfg.taxonomy_path else None
    if not args.out:
        raise UsageError("infer needs --out")
    ckpt = _load_checkpoint(args.checkpoint, tax)
    ids, X = fileio.read_features(args.features)
    fileio.write_features(args.out, ids, train.infer(X, ckpt))
    return 0


def cmd_synth(args) -> int:
    """Demo corpus: taxonomy, train/test features and labels in ``--out``."""
    if not args.out:
        raise UsageError("synth needs --out (a directory)")
    seed = 0 if args.seed is None else args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tax = synthetic.tree_taxonomy()
    fileio.atomic_write(out / "taxonomy.json", tx.serialize_taxonomy(tax))
    means = synthetic.cluster_means(tax, args.dim, args.separation, seed)
    for split, count in (("train", args.train), ("test", args.test)):
        X, Y, _ = synthetic.sample_dataset(tax, means, count, seed, positives=args.positives,
                                           stream_name=f"synthetic/{split}")
        if split == "train" and args.remove > 0:
            Y = synthetic.remove_labels(Y, args.remove, seed)
        ids = [f"{split}-{k:05d}" for k in range(count)]
        fileio.write_features(out / f"{split}.pgea", ids, X)
        labels = [harmonize.PartialLabel(i, row) for i, row in zip(ids, Y)]
        harmonize.write_labels(out / f"{split}.labels.jsonl", labels, tax.order)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="run config (JSON)")
    common.add_argument("--taxonomy", help="taxonomy document (JSON); overrides taxonomy_path")
    common.add_argument("--out", help="output path (stdout when omitted, where allowed)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--allow-unmapped", action="store_true", help="treat unmapped classes as unknown")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="verbspace", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("taxonomy", parents=[common], help="validate, show or prompt a taxonomy")
    p.add_argument("action", choices=("validate", "show", "prompt"))
    p.add_argument("node", nargs="?")
    p.set_defaults(func=cmd_taxonomy)

    p = sub.add_parser("ingest", parents=[common], help="manifest + class mappings -> partial labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mapping", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", parents=[common], help="node text features")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", parents=[common], help="fit a checkpoint")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--init", help="phase-1 checkpoint to fine-tune with augmented labels")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("augment", parents=[common], help="pseudo labels from a phase-1 checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--corr", help="also write the co-relation matrix as a feature file")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", parents=[common], help="mAP report on labelled features")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--train-labels", help="training labels; leaf counts define the rare split")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", parents=[common], help="node probabilities for features")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic demo corpus")
    p.add_argument("--train", type=int, default=2400)
    p.add_argument("--test", type=int, default=600)
    p.add_argument("--dim", type=int, default=60)
    p.add_argument("--separation", type=float, default=synthetic.SEPARATION)
    p.add_argument("--positives", type=int, default=1)
    p.add_argument("--remove", type=float, default=0.0, help="fraction of train label entries made unknown")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"verbspace {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"verbspace {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (VerbSpaceError, ValueError, KeyError) as exc:
        print(f"verbspace {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
