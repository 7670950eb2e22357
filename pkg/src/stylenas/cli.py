"""Command line: stylize, train-decoder, search, random-search,
eval-metrics, decode-arch, bench, frames.

Successful runs print key=value lines on stdout; failures print a message
on stderr and exit nonzero. Every subcommand that consumes randomness
takes a seed, and single-worker runs are bit-reproducible.
"""

import argparse
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import BACKEND, arch, io, metrics, nas, train
from .errors import (
    CodeParseError,
    DimensionError,
    ImageFormatError,
    InputError,
    PreconditionError,
    TrainingDivergedError,
    WeightsFormatError,
)
from .metrics import ObjectiveWeights
from .transfer import TransferConfig

_USER_ERRORS = (
    CodeParseError,
    DimensionError,
    ImageFormatError,
    InputError,
    PreconditionError,
    TrainingDivergedError,
    WeightsFormatError,
    FileNotFoundError,
    IsADirectoryError,
    NotADirectoryError,
)


def _emit(**pairs):
    for key, value in pairs.items():
        print(f"{key}={value}")


def _encoder_from_file(path):
    tensors = io.load_weights(path)
    if "enc.stage1.conv1.weight" not in tensors:
        raise InputError("weights file does not contain the encoder tensors")
    width = int(tensors["enc.stage1.conv1.weight"].shape[0])
    return arch.Encoder.from_params(width, tensors), width


def _load_graph(code, weights_path, base_width, encoder_seed, decoder_seed,
                encoder_weights=None):
    if weights_path and encoder_weights:
        raise InputError("pass either --weights or --encoder-weights, not both")
    if weights_path:
        encoder, width = _encoder_from_file(weights_path)
        graph = arch.build_graph(code, width, encoder, decoder_seed=decoder_seed)
        io.load_graph_weights(graph, weights_path)
        return graph
    if encoder_weights:
        # encoder-only file (e.g. a converted pretrained checkpoint); the
        # decoder stays at its seeded initialization until trained
        encoder, width = _encoder_from_file(encoder_weights)
        return arch.build_graph(code, width, encoder, decoder_seed=decoder_seed)
    encoder = arch.Encoder.seeded(base_width, encoder_seed)
    return arch.build_graph(code, base_width, encoder, decoder_seed=decoder_seed)


def _transfer_config(args):
    return TransferConfig(
        epsilon=args.epsilon, blend=args.blend, module_kind=args.transfer
    )


def _cmd_stylize(args):
    code = arch.resolve_code(args.arch)
    graph = _load_graph(code, args.weights, args.base_width, args.encoder_seed, args.seed,
                        encoder_weights=args.encoder_weights)
    content = io.read_ppm(args.content)
    style = io.read_ppm(args.style)
    out = arch.forward(graph, content, style, _transfer_config(args))
    io.write_ppm(out, args.out)
    _emit(
        out=args.out,
        arch=str(code),
        transfer=args.transfer,
        epsilon=args.epsilon,
        blend=args.blend,
        psnr_vs_content=f"{train.psnr(out, content):.4f}",
    )
    return 0


def _cmd_train_decoder(args):
    code = arch.resolve_code(args.arch)
    if args.encoder_weights:
        encoder, width = _encoder_from_file(args.encoder_weights)
    else:
        encoder, width = arch.Encoder.seeded(args.base_width, args.encoder_seed), args.base_width
    graph = arch.build_graph(code, width, encoder, decoder_seed=args.seed)
    if args.corpus == "procedural":
        corpus = train.procedural_corpus(args.corpus_size, size=args.image_size, seed=args.corpus_seed)
    else:
        paths = sorted(Path(args.corpus).glob("*.ppm"))
        if not paths:
            raise InputError(f"no .ppm files in corpus directory {args.corpus}")
        corpus = train.Corpus(images=[io.read_ppm(p) for p in paths], source=str(args.corpus))
    config = train.TrainConfig(
        steps=args.steps,
        batch=args.batch,
        learning_rate=args.lr,
        seed=args.seed,
        image_size=args.image_size,
    )
    result = train.train_decoder(graph, corpus, config)
    io.save_graph_weights(graph, args.out)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write("step,loss\n")
            for i, loss in enumerate(result.loss_trace):
                fh.write(f"{i},{loss!r}\n")
    _emit(
        weights=args.out,
        arch=str(code),
        steps=args.steps,
        initial_loss=repr(result.loss_trace[0]),
        final_loss=repr(result.loss_trace[-1]),
        psnr=f"{train.reconstruction_psnr(graph, corpus):.4f}",
    )
    return 0


def parse_config_file(path):
    """key=value lines; '#' starts a comment; train.* keys configure the
    per-candidate training step."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


_CONFIG_KEYS = {
    "population": ("population", int),
    "budget": ("budget", int),
    "tournament": ("tournament", int),
    "seed": ("seed", int),
    "workers": ("workers", int),
    "strict": ("strict", lambda v: v.lower() in ("1", "true", "yes")),
    "base_width": ("base_width", int),
    "image_size": ("image_size", int),
    "corpus_size": ("corpus_size", int),
    "corpus_seed": ("corpus_seed", int),
    "val_pairs": ("val_pairs", int),
    "val_seed": ("val_seed", int),
    "epsilon": ("epsilon", float),
    "train.steps": ("train_steps", int),
    "train.batch": ("train_batch", int),
    "train.lr": ("train_lr", float),
    "eval_seed": ("eval_seed", int),
    "oracle_seed": ("oracle_seed", int),
    "encoder_seed": ("encoder_seed", int),
}


def search_config_from_file(path, overrides=None):
    raw = parse_config_file(path) if path else {}
    kwargs = {}
    weights = {}
    for key, value in raw.items():
        if key in ("alpha", "beta", "gamma"):
            weights[key] = float(value)
            continue
        if key not in _CONFIG_KEYS:
            raise InputError(f"unknown config key {key!r}")
        field, conv = _CONFIG_KEYS[key]
        kwargs[field] = conv(value)
    if weights:
        kwargs["weights"] = ObjectiveWeights(**weights)
    kwargs.update(overrides or {})
    return nas.SearchConfig(**kwargs)


def _run_search(args, strategy):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.strict:
        overrides["strict"] = True
    config = search_config_from_file(args.config, overrides)
    oracle = nas.train_oracle(config)
    result = strategy(config, oracle)
    if args.telemetry:
        nas.write_telemetry(result, args.telemetry)
    best = result.best
    _emit(
        best_code=str(best.code),
        best_loss=repr(best.loss),
        best_recon_error=repr(best.recon_error),
        best_perceptual=repr(best.perceptual),
        best_op_fraction=repr(best.op_fraction),
        evaluations=len(result.history),
        telemetry=args.telemetry or "",
    )
    return 0


def _cmd_search(args):
    return _run_search(args, nas.search)


def _cmd_random_search(args):
    return _run_search(args, nas.random_search)


def _cmd_eval_metrics(args):
    content = io.read_ppm(args.content)
    style = io.read_ppm(args.style)
    result = io.read_ppm(args.result)
    encoder = arch.Encoder.seeded(args.base_width, args.encoder_seed)
    ssim_whole = metrics.ssim(result, content)
    edge = metrics.ssim_edge(result, content)
    gram = metrics.gram_loss(result, style, encoder)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("ssim_whole,ssim_edge,gram_loss\n")
            fh.write(f"{ssim_whole!r},{edge!r},{gram!r}\n")
    _emit(ssim_whole=f"{ssim_whole:.6f}", ssim_edge=f"{edge:.6f}", gram_loss=f"{gram:.6e}")
    return 0


def _cmd_decode_arch(args):
    code = arch.resolve_code(args.code)
    encoder = arch.Encoder.seeded(args.base_width, args.encoder_seed)
    graph = arch.build_graph(code, args.base_width, encoder)
    inert = set(arch.inert_slots(code))
    _emit(
        code=str(code),
        popcount=code.popcount(),
        op_fraction=f"{arch.op_fraction(code):.6f}",
        flops=arch.count_flops(graph, (args.height, args.width)),
        transfer_sites=len(graph.transfer_sites),
    )
    for slot in range(arch.CODE_LENGTH):
        if code.bits[slot]:
            suffix = " inert" if slot in inert else ""
            print(f"slot=S{slot} name={arch.SLOT_NAMES[slot]}{suffix}")
    return 0


def _cmd_bench(args):
    code = arch.resolve_code(args.arch)
    graph = _load_graph(code, args.weights, args.base_width, args.encoder_seed, args.seed,
                        encoder_weights=args.encoder_weights)
    rng = np.random.default_rng(args.seed)
    content = rng.uniform(0, 1, (3, args.height, args.width)).astype(np.float32)
    style = rng.uniform(0, 1, (3, args.height, args.width)).astype(np.float32)
    cfg = _transfer_config(args)
    arch.forward(graph, content, style, cfg)  # warmup
    times = []
    for _ in range(args.repeats):
        start = time.perf_counter()
        arch.forward(graph, content, style, cfg)
        times.append((time.perf_counter() - start) * 1000.0)
    _emit(
        arch=str(code),
        height=args.height,
        width=args.width,
        repeats=args.repeats,
        median_ms=f"{statistics.median(times):.3f}",
        flops=arch.count_flops(graph, (args.height, args.width)),
        backend=BACKEND,
    )
    return 0


def _cmd_frames(args):
    code = arch.resolve_code(args.arch)
    graph = _load_graph(code, args.weights, args.base_width, args.encoder_seed, args.seed,
                        encoder_weights=args.encoder_weights)
    style = io.read_ppm(args.style)
    cfg = _transfer_config(args)
    # the style statistics depend only on the style image and the graph:
    # compute them once and reuse across every frame
    sides = arch.prepare_style(graph, style, cfg) if graph.transfer_sites else None
    frame_paths = sorted(Path(args.frames).glob("*.ppm"))
    if not frame_paths:
        raise InputError(f"no .ppm frames in {args.frames}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in frame_paths:
        frame = io.read_ppm(path)
        out = arch.forward(graph, frame, style_sides=sides, config=cfg)
        io.write_ppm(out, out_dir / path.name)
    _emit(frames=len(frame_paths), out_dir=str(out_dir), arch=str(code))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="stylenas")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_graph_args(p, with_transfer=True):
        p.add_argument("--weights", default=None, help="weights file (PNWT)")
        p.add_argument("--encoder-weights", default=None,
                       help="encoder-only weights file; decoder stays seeded")
        p.add_argument("--base-width", type=int, default=8)
        p.add_argument("--encoder-seed", type=int, default=arch.DEFAULT_ENCODER_SEED)
        p.add_argument("--seed", type=int, default=0)
        if with_transfer:
            p.add_argument("--epsilon", type=float, default=0.3)
            p.add_argument("--blend", type=float, default=1.0)
            p.add_argument("--transfer", choices=("wct", "adain"), default="wct")

    p = sub.add_parser("stylize", help="transfer a style photo onto a content photo")
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--arch", required=True, help="31-bit code or preset name")
    p.add_argument("--out", required=True)
    add_graph_args(p)
    p.set_defaults(func=_cmd_stylize)

    p = sub.add_parser("train-decoder", help="train a decoder for reconstruction")
    p.add_argument("--arch", required=True)
    p.add_argument("--out", required=True, help="output weights file")
    p.add_argument("--corpus", default="procedural", help="'procedural' or a directory of .ppm")
    p.add_argument("--corpus-size", type=int, default=16)
    p.add_argument("--corpus-seed", type=int, default=1)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--base-width", type=int, default=8)
    p.add_argument("--encoder-seed", type=int, default=arch.DEFAULT_ENCODER_SEED)
    p.add_argument("--encoder-weights", default=None,
                   help="start from an encoder-only weights file (e.g. converted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None, help="write per-step loss CSV")
    p.set_defaults(func=_cmd_train_decoder)

    for name, fn in (("search", _cmd_search), ("random-search", _cmd_random_search)):
        p = sub.add_parser(name, help=f"{name} over the 31-bit space")
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--telemetry", default=None, help="per-candidate CSV")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--strict", action="store_true")
        p.set_defaults(func=fn)

    p = sub.add_parser("eval-metrics", help="SSIM / edge SSIM / Gram loss of a result")
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--base-width", type=int, default=8)
    p.add_argument("--encoder-seed", type=int, default=arch.DEFAULT_ENCODER_SEED)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=_cmd_eval_metrics)

    p = sub.add_parser("decode-arch", help="list a code's active slots and cost")
    p.add_argument("code", help="31-bit code or preset name")
    p.add_argument("--base-width", type=int, default=8)
    p.add_argument("--encoder-seed", type=int, default=arch.DEFAULT_ENCODER_SEED)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    p.set_defaults(func=_cmd_decode_arch)

    p = sub.add_parser("bench", help="median forward wall time")
    p.add_argument("--arch", required=True)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--repeats", type=int, default=11)
    add_graph_args(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("frames", help="stylize a directory of frames with one style")
    p.add_argument("--frames", required=True, help="directory of .ppm frames")
    p.add_argument("--style", required=True)
    p.add_argument("--arch", required=True)
    p.add_argument("--out-dir", required=True)
    add_graph_args(p)
    p.set_defaults(func=_cmd_frames)

    return parser


def cli_dispatch(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
