"""Command-line entry point: ``ftcm <subcommand> ...``."""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .assignment import assign_tokens
from .bench import BENCH_COLUMNS, make_blobs, parse_blob_spec, run_uneven_bench
from .clustering import dpc_fknn
from .exceptions import FormatError, InternalInvariantViolation, InvalidInput
from .numerics import Rng, knn_graph
from .pipeline import FtcmWeights, TokenSet, ftcm_stage, origin_label_map, run_stages

fmt = io.format_float


def _k_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("k values must be positive integers")
    return values


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def cmd_cluster(args, out):
    X = io.load_tokens(args.tokens)
    _, result, selection = dpc_fknn(X, k=args.k, ratio=args.ratio, density=args.density)
    centers = set(selection.centers.tolist())
    out.write("index,rho,delta,gamma,center\n")
    for i in range(X.shape[0]):
        out.write(
            f"{i},{fmt(result.rho[i])},{fmt(result.delta[i])},{fmt(result.gamma[i])},{int(i in centers)}\n"
        )


def cmd_assign(args, out):
    X = io.load_tokens(args.tokens)
    graph, _, selection = dpc_fknn(X, k=args.k_fuzzy, ratio=args.ratio)
    scs_graph = graph if args.k_scs == graph.k else knn_graph(graph.dist, args.k_scs)
    asg = assign_tokens(scs_graph, selection)
    _write_assignment(out, asg)


def _write_assignment(out, asg):
    out.write("index,cluster,center\n")
    for i, c in enumerate(asg.assign):
        out.write(f"{i},{c},{asg.centers[c]}\n")


def _stage_config(cfg, channels):
    return type(cfg)(**{**cfg.to_dict(), "channels": channels})


def cmd_ftcm(args, out):
    X = io.load_tokens(args.tokens)
    cfg = _stage_config(io.load_config(args.config), X.shape[1])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    weights = FtcmWeights.init(cfg.channels, Rng(cfg.seed))
    ts = TokenSet(X, [np.array([t]) for t in range(X.shape[0])], 1, X.shape[0])
    res = ftcm_stage(ts, cfg, weights)
    io.write_token_file(out_dir / "merged.ftcm", res.tokens.features)
    with open(out_dir / "assignment.csv", "w", encoding="ascii", newline="\n") as fh:
        _write_assignment(fh, res.assignment)
    out.write(f"{X.shape[0]} tokens -> {res.tokens.n_tokens} tokens\n")


def _write_stages(results, out_dir, scale, write_tokens):
    out_dir.mkdir(parents=True, exist_ok=True)
    for s, res in enumerate(results):
        if write_tokens:
            io.write_token_file(out_dir / f"stage{s}_tokens.ftcm", res.tokens.features)
        io.save_label_ppm(origin_label_map(res.tokens), out_dir / f"stage{s}_labels.ppm", scale=scale)


def cmd_pipeline(args, out):
    cfg = io.load_config(args.config)
    image = io.load_image(args.input, index=args.index)
    results = run_stages(image, cfg)
    _write_stages(results, Path(args.out_dir), args.scale, write_tokens=True)
    counts = " -> ".join(str(r.tokens.n_tokens) for r in results)
    out.write(f"token counts: {counts}\n")


def cmd_visualize(args, out):
    cfg = io.load_config(args.config)
    image = io.load_image(args.input, index=args.index)
    results = run_stages(image, cfg)
    _write_stages(results, Path(args.out_dir), args.scale, write_tokens=False)
    for s, res in enumerate(results):
        out.write(f"stage{s}_labels.ppm: {res.tokens.n_tokens} regions\n")


def cmd_bench(args, out):
    rows = run_uneven_bench(args.trials, args.k_list, seed=args.seed)
    lines = [",".join(BENCH_COLUMNS)]
    for row in rows:
        lines.append(
            f"{row['k']},{row['method']},{row['trial']},{row['recovered']},{fmt(row['recovery_rate'])}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="ascii", newline="\n")
    else:
        out.write(text)


def _render_blob_images(blobs, rng, n_images, size):
    images = np.zeros((n_images, size, size))
    for i in range(n_images):
        X, _ = make_blobs(blobs, rng)
        rows = np.clip(np.floor(X[:, 0]).astype(int), 0, size - 1)
        cols = np.clip(np.floor(X[:, 1]).astype(int), 0, size - 1)
        np.add.at(images[i], (rows, cols), 1.0)
        images[i] /= images[i].max()
    return images


def cmd_gen(args, out):
    blobs = parse_blob_spec(args.blobs)
    rng = Rng(args.seed)
    path = str(args.out)
    if path.lower().endswith(".idx"):
        if blobs[0][2].shape[0] != 2:
            raise InvalidInput("image generation needs 2-D blob centers (row,col in pixels)")
        io.write_idx(path, _render_blob_images(blobs, rng, args.images, args.size))
        out.write(f"wrote {args.images} images of {args.size}x{args.size} to {path}\n")
        return
    X, _ = make_blobs(blobs, rng)
    if path.lower().endswith(".csv"):
        io.write_token_csv(path, X)
    else:
        io.write_token_file(path, X)
    out.write(f"wrote {X.shape[0]} tokens of dimension {X.shape[1]} to {path}\n")


def build_parser():
    parser = argparse.ArgumentParser(prog="ftcm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="density-peak scores and centers as CSV")
    p.add_argument("tokens")
    p.add_argument("--k", type=_positive, default=5)
    p.add_argument("--ratio", type=_positive, default=4)
    p.add_argument("--density", choices=("fuzzy", "knn"), default="fuzzy")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("assign", help="token-to-cluster assignment as CSV")
    p.add_argument("tokens")
    p.add_argument("--k-fuzzy", type=_positive, default=5)
    p.add_argument("--k-scs", type=_positive, default=5)
    p.add_argument("--ratio", type=_positive, default=4)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("ftcm", help="one clustering-and-merging stage on a token file")
    p.add_argument("tokens")
    p.add_argument("--config")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_ftcm)

    for name, func, helptext in (
        ("pipeline", cmd_pipeline, "multi-stage forward pass on an image"),
        ("visualize", cmd_visualize, "per-stage tokenization label maps"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input", help="IDX3, .npy, .pgm or .ppm image file")
        p.add_argument("--config")
        p.add_argument("--index", type=int, default=0, help="image index inside an IDX file")
        p.add_argument("--out-dir", default=".")
        p.add_argument("--scale", type=_positive, default=1, help="pixels per grid cell")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="center recovery on uneven blobs, DPC-FKNN vs DPC-KNN")
    p.add_argument("--uneven", action="store_true", required=True)
    p.add_argument("--trials", type=_positive, default=20)
    p.add_argument("--k-list", type=_k_list, default=[1, 3, 5, 7, 9])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="synthetic blob tokens (.ftcm/.csv) or images (.idx)")
    p.add_argument("--blobs", required=True, help='e.g. "80:0.1:0,0;20:1.0:4,0"')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--images", type=_positive, default=2)
    p.add_argument("--size", type=_positive, default=28)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        args.func(args, out)
    except (FormatError, InvalidInput, InternalInvariantViolation, OSError) as exc:
        print(f"ftcm: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
