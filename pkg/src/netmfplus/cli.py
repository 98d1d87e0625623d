"""Command-line entry point: convert, split, embed, spectrum, eval-link, eval-classify, oracle, replay."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import resource
import sys
import time
from pathlib import Path

import numpy as np

from . import graph as graphmod
from .errors import InputError, NetMFError
from .evaluate import eval_classification, eval_link_prediction, load_labels
from .freigs import freigs
from .graph import CsrGraph, EdgeSet, load_csr, load_edge_list, save_csr, write_vmap
from .oracle import dense_netmf_oracle, exact_truncated_svd
from .pipeline import (EmbedConfig, Embedding, PRESETS, netmf_plus, preset, save_embedding,
                       save_embedding_text, spectral_propagate, load_embedding)
from .runtime import set_threads
from .sketch import DEFAULT_MAX_BLOCK_BYTES

logger = logging.getLogger("netmfplus")

MANIFEST_SUFFIX = ".manifest.json"
# fields that legitimately differ between otherwise identical runs
VOLATILE_MANIFEST_KEYS = ("timings", "peak_rss_mb")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    """Collects what a command read, wrote and how long each step took."""

    def __init__(self, command: str, argv: list[str]):
        self.command = command
        self.argv = argv
        self.config: dict = {}
        self.seed = None
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}

    def read(self, path):
        self.inputs[str(path)] = _sha256(path)

    def wrote(self, path):
        self.outputs.append(str(path))

    def timed(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        self.timings[name] = round(time.perf_counter() - t0, 6)
        return out

    def write_manifest(self, anchor) -> Path:
        path = Path(str(anchor) + MANIFEST_SUFFIX)
        rss_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        doc = dict(command=self.command, argv=self.argv, config=self.config, seed=self.seed,
                   inputs=self.inputs, outputs=self.outputs, timings=self.timings,
                   peak_rss_mb=round(rss_kb / 1024.0, 1))
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path


def _load_graph(path, run: Run) -> CsrGraph:
    run.read(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == graphmod.CSR_MAGIC:
        vmap = Path(str(path) + ".vmap")
        if vmap.exists():
            run.read(vmap)
        return load_csr(path)
    return load_edge_list(path)


def _write_csv(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x) -> str:
    # 15 significant digits: stable text, and exact values print as such ("1.0")
    if isinstance(x, (float, np.floating)):
        return repr(float(f"{float(x):.15g}"))
    return str(x)


def _print_table(header, rows) -> None:
    cells = [[_fmt(x) if not isinstance(x, float) else f"{x:.4f}" for x in r] for r in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(header)]
    print("  ".join(h.rjust(w) for h, w in zip(header, widths)))
    for c in cells:
        print("  ".join(v.rjust(w) for v, w in zip(c, widths)))


# ---------------------------------------------------------------- commands

def cmd_convert(args, run: Run) -> Path:
    run.read(args.edges)
    g = run.timed("load", load_edge_list, args.edges, one_indexed=args.one_indexed,
                  keep_largest_component=args.largest_component)
    if args.id64:
        g = CsrGraph(g.n, g.m, g.offsets, g.neighbors.astype(np.int64), g.degrees, g.vmap)
    run.timed("write", save_csr, g, args.out)
    run.wrote(args.out)
    run.wrote(write_vmap(g, args.out))
    run.config = dict(one_indexed=args.one_indexed, largest_component=args.largest_component,
                      id64=args.id64, n=g.n, m=g.m)
    print(f"n={g.n} m={g.m}")
    return Path(args.out)


def cmd_split(args, run: Run) -> Path:
    g = _load_graph(args.graph, run)
    train, test = run.timed("split", graphmod.split_edges, g, args.fraction, args.seed)
    save_csr(train, args.out)
    run.wrote(args.out)
    run.wrote(write_vmap(train, args.out))
    test_path = Path(str(args.out) + ".test")
    np.savetxt(test_path, test.pairs, fmt="%d")
    run.wrote(test_path)
    run.config = dict(fraction=args.fraction, n=train.n, m_train=train.m, m_test=len(test))
    run.seed = args.seed
    print(f"train m={train.m} test={len(test)}")
    return Path(args.out)


def _config_from_args(args) -> EmbedConfig:
    base = preset(args.preset) if args.preset else EmbedConfig()
    overrides = {}
    for f in dataclasses.fields(EmbedConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            overrides[f.name] = val
    return dataclasses.replace(base, **overrides)


def cmd_embed(args, run: Run) -> Path:
    g = _load_graph(args.graph, run)
    cfg = _config_from_args(args)
    run.config = cfg.to_dict()
    run.seed = cfg.seed
    emb = netmf_plus(g, cfg, max_block_bytes=int(args.max_block_mb * 2**20))
    run.timings.update({k: round(v, 6) for k, v in emb.timings.items()})
    save_embedding(emb, args.out)
    run.wrote(args.out)
    if args.text:
        save_embedding_text(emb, args.text)
        run.wrote(args.text)
    print(f"embedding n={emb.n} d={emb.d} stage={emb.stage}")
    return Path(args.out)


def cmd_spectrum(args, run: Run) -> Path:
    g = _load_graph(args.graph, run)
    s1 = min(args.s1, max(0, g.n - args.k))
    if s1 < args.s1:
        logger.warning("oversampling reduced to %d to fit n=%d", s1, g.n)
    pair = run.timed("freigs", freigs, g, args.alpha, args.k, s1, args.q, args.seed)
    _write_csv(args.out, ["index", "eigenvalue"], enumerate(pair.eigenvalues))
    run.wrote(args.out)
    run.config = dict(alpha=args.alpha, k=args.k, s1=s1, q=args.q)
    run.seed = args.seed
    return Path(args.out)


def _read_test_edges(path, run: Run) -> EdgeSet:
    run.read(path)
    pairs = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if pairs.shape[1] != 2:
        raise InputError(f"{path}: expected two columns")
    return EdgeSet(np.sort(pairs, axis=1))


def _read_embedding(path, run: Run) -> Embedding:
    run.read(path)
    return load_embedding(path)


def cmd_eval_link(args, run: Run) -> Path:
    g = _load_graph(args.graph, run)
    emb = _read_embedding(args.embedding, run)
    test = _read_test_edges(args.test, run)
    m = run.timed("eval", eval_link_prediction, emb, test, g, args.negatives, args.seed,
                  cosine=args.cosine)
    header = ["mr", "mrr", "hits1", "hits10", "hits50", "auc", "evaluated", "skipped"]
    row = [getattr(m, h) for h in header]
    _write_csv(args.out, header, [row])
    run.wrote(args.out)
    _print_table(header, [row])
    run.config = dict(negatives=args.negatives, cosine=args.cosine)
    run.seed = args.seed
    return Path(args.out)


def cmd_eval_classify(args, run: Run) -> Path:
    g = _load_graph(args.graph, run)
    emb = _read_embedding(args.embedding, run)
    run.read(args.labels)
    labels = load_labels(args.labels, g.n, g.vmap)
    ratios = [float(x) for x in args.ratios.split(",")]
    rows = run.timed("eval", eval_classification, emb, labels, ratios, args.repeats, args.seed)
    header = ["ratio", "micro_f1", "macro_f1"]
    table = [[r[h] for h in header] for r in rows]
    _write_csv(args.out, header, table)
    run.wrote(args.out)
    _print_table(header, table)
    run.config = dict(ratios=ratios, repeats=args.repeats)
    run.seed = args.seed
    return Path(args.out)


def cmd_oracle(args, run: Run) -> Path:
    g = _load_graph(args.graph, run)
    M = run.timed("netmf_matrix", dense_netmf_oracle, g, args.T, args.b, exact=True,
                  logmode=args.logmode)
    U, sig, _ = run.timed("exact_svd", exact_truncated_svd, M, args.d)
    _write_csv(args.out, ["index", "singular_value"], enumerate(sig))
    run.wrote(args.out)
    if args.embedding:
        E = U * np.sqrt(sig)[None, :]
        cfg = dict(T=args.T, b=args.b, logmode=args.logmode, d=args.d,
                   prop_steps=args.prop_steps, mu=args.mu, theta=args.theta)
        digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).digest()
        emb = Embedding(E=E, config_hash=digest, vmap=g.vmap)
        if args.prop_steps > 0:
            emb = spectral_propagate(g, emb, args.prop_steps, args.mu, args.theta)
        save_embedding(emb, args.embedding)
        run.wrote(args.embedding)
    run.config = dict(T=args.T, b=args.b, logmode=args.logmode, d=args.d,
                      prop_steps=args.prop_steps)
    return Path(args.out)


def cmd_replay(args, run: Run) -> Path | None:
    doc = json.loads(Path(args.manifest).read_text())
    argv = doc["argv"]
    if argv and argv[0] == "replay":
        raise InputError("refusing to replay a replay manifest")
    return main(argv, _return_status=False)


# ---------------------------------------------------------------- parser

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("embedding config (defaults from --preset or built-ins)")
    g.add_argument("--preset", choices=sorted(PRESETS))
    types = {int: int, float: float, str: str}
    for f in dataclasses.fields(EmbedConfig):
        flag = "--" + f.name.replace("_", "-")
        kind = types[type(f.default)]
        extra = {"choices": ["trunc_log", "log1p"]} if f.name == "logmode" else {}
        g.add_argument(flag, dest=f.name, type=kind, default=None,
                       help=f"default {f.default}", **extra)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netmfplus", description=__doc__)
    ap.add_argument("--threads", type=int, default=None,
                    help="cap on internal parallelism; 1 = deterministic sequential mode")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="text edge list -> binary CSR + .vmap")
    p.add_argument("edges")
    p.add_argument("out")
    p.add_argument("--one-indexed", action="store_true")
    p.add_argument("--largest-component", action="store_true")
    p.add_argument("--id64", action="store_true", help="store 64-bit vertex ids")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("split", help="hold out edges for link prediction")
    p.add_argument("graph")
    p.add_argument("out")
    p.add_argument("--fraction", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("embed", help="run the embedding pipeline")
    p.add_argument("graph")
    p.add_argument("out")
    p.add_argument("--text", help="also write a text embedding here")
    p.add_argument("--max-block-mb", type=float, default=DEFAULT_MAX_BLOCK_BYTES / 2**20,
                   help="memory ceiling for the sampled core block")
    _add_config_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("spectrum", help="dump randomized eigenvalues as CSV")
    p.add_argument("graph")
    p.add_argument("out")
    p.add_argument("--alpha", type=float, default=0.45)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--s1", type=int, default=10)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("eval-link", help="link prediction metrics")
    p.add_argument("graph", help="training graph")
    p.add_argument("embedding")
    p.add_argument("test", help="held-out edges, one 'u v' pair per line")
    p.add_argument("out")
    p.add_argument("--negatives", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cosine", action="store_true")
    p.set_defaults(func=cmd_eval_link)

    p = sub.add_parser("eval-classify", help="multi-label classification Micro/Macro-F1")
    p.add_argument("graph")
    p.add_argument("embedding")
    p.add_argument("labels")
    p.add_argument("out")
    p.add_argument("--ratios", default="0.1,0.5,0.9")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval_classify)

    p = sub.add_parser("oracle", help="dense NetMF matrix + exact truncated SVD")
    p.add_argument("graph")
    p.add_argument("out", help="CSV of the top-d singular values")
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--logmode", default="trunc_log", choices=["trunc_log", "log1p"])
    p.add_argument("--embedding", help="also write the exact embedding here")
    p.add_argument("--prop-steps", type=int, default=0)
    p.add_argument("--mu", type=float, default=0.2)
    p.add_argument("--theta", type=float, default=0.5)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None, _return_status: bool = True):
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    set_threads(args.threads)
    run = Run(args.command, argv)
    try:
        anchor = args.func(args, run)
        if args.command != "replay" and anchor is not None:
            run.write_manifest(anchor)
    except NetMFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MemoryError as exc:
        print(f"error: out of memory: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
