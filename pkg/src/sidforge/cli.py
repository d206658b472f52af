"""Command-line entry point: ``sidforge <subcommand> [options]``.

Every option maps onto one field of :class:`AugmentConfig`,
:class:`TrainConfig`, :class:`Extractor` or :class:`PerturbSpec`. Options may
also come from a JSON file passed with ``--config``; explicit flags win.
Outputs are written to a temporary file and renamed into place, so a failed
run never leaves a partial artifact behind.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

from .classifier import TrainConfig, dumps_model, image_features, load_model, train
from .corrmap import corr_summary, local_correlation_map
from .features import Extractor, ExtractorKind
from .harness import IMAGE_SUFFIXES, evaluate, load_dataset, make_toy_corpus, synthesize_fake
from .imgcore import ImageDecodeError, dumps_sidt, encode_png, read_image, to_gray
from .parallel import default_workers
from .perturb import PERTURB_KINDS, PerturbSpec
from .transforms import AugmentConfig, center_crop

log = logging.getLogger("sidforge")

TRAIN_AXES = {"alpha": "alpha", "beta": "beta", "patch": "patch_size", "max_ratio": "max_mask_ratio"}
EVAL_AXES = {"sigma": "gaussian_blur", "quality": "jpeg", "eval_mask_ratio": "random_mask_eval",
             "eval_patch": "random_mask_eval"}


class CliError(Exception):
    """A user-facing failure; reported as one line and exit status 1."""


# -- output helpers ----------------------------------------------------------


class Outputs:
    """Collects outputs in temporaries; ``commit`` renames them, ``discard`` deletes them."""

    def __init__(self):
        self._pending: list[tuple[str, Path]] = []
        self._created: list[Path] = []

    def mkdir(self, path: str | os.PathLike) -> None:
        """Create ``path`` and any missing parents, remembering them for ``discard``."""
        path = Path(path)
        missing = [p for p in (path, *path.parents) if not p.exists()]
        path.mkdir(parents=True, exist_ok=True)
        self._created.extend(missing)

    def write(self, path: str | os.PathLike, data: bytes | str) -> None:
        path = Path(path)
        if path.parent and not path.parent.is_dir():
            raise CliError(f"output directory {path.parent} does not exist")
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        self._pending.append((tmp, path))

    def commit(self) -> None:
        for tmp, final in self._pending:
            os.replace(tmp, final)
        self._pending.clear()
        self._created.clear()

    def discard(self) -> None:
        for tmp, _ in self._pending:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
        self._pending.clear()
        # parents were recorded after their children, so the deepest go first
        for d in self._created:
            shutil.rmtree(d, ignore_errors=True)
        self._created.clear()


def _emit(outputs: Outputs, out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        outputs.write(out, text)


def _seed_default() -> int:
    env = os.environ.get("SIDFORGE_SEED")
    if env is None:
        return 42
    try:
        return int(env)
    except ValueError:
        raise CliError(f"SIDFORGE_SEED must be an integer, got {env!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# -- config builders ---------------------------------------------------------


def _extractor(args) -> Extractor:
    return Extractor(args.extractor, dct_delta=args.delta, laplace_variant=args.laplace_variant)


def _augment(args) -> AugmentConfig:
    if args.no_augment:
        return AugmentConfig.disabled(args.crop)
    return AugmentConfig(alpha=args.alpha, beta=args.beta, mask_prob=args.mask_prob, patch_size=args.patch,
                         max_mask_ratio=args.max_ratio, flip_prob=args.flip_prob, crop_size=args.crop,
                         blur_prob=args.blur_prob, jpeg_prob=args.jpeg_prob)


def _train_config(args) -> TrainConfig:
    return TrainConfig(lr=args.lr, weight_decay=args.weight_decay, batch_size=args.batch_size,
                       epochs=args.epochs, warmup_epochs=args.warmup_epochs, seed=args.seed)


def _perturb(args) -> PerturbSpec | None:
    kind = args.perturb
    if kind is None:
        given = [k for k, flag in (("gaussian_blur", args.sigma), ("jpeg", args.quality),
                                   ("random_mask_eval", args.eval_mask_ratio)) if flag is not None]
        if len(given) > 1:
            raise CliError("--sigma, --quality and --eval-mask-ratio are exclusive; pick one with --perturb")
        kind = given[0] if given else "none"
    if kind == "none":
        return None
    return PerturbSpec(kind, sigma=args.sigma if args.sigma is not None else 1.0,
                       quality=args.quality if args.quality is not None else 95,
                       mask_ratio=args.eval_mask_ratio if args.eval_mask_ratio is not None else 0.0,
                       patch_size=args.eval_patch)


# -- subcommands -------------------------------------------------------------


def _images_under(path: Path) -> list[Path]:
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise CliError(f"{path} does not exist")
    return sorted(p for p in path.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def cmd_extract(args, outputs: Outputs) -> None:
    x = center_crop(read_image(args.image), args.crop)
    fmap = _extractor(args)(x)
    if args.out is None:
        raise CliError("extract needs --out for the SIDT dump")
    outputs.write(args.out, dumps_sidt(fmap))
    if args.features:
        feats = image_features(x, _extractor(args))
        outputs.write(args.features, dumps_sidt(feats.reshape(1, 1, -1)))


def cmd_corrmap(args, outputs: Outputs) -> None:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["path", "mean_rho", "frac_neg", "frac_zero", "frac_pos"])
    images = _images_under(Path(args.path))
    if not images:
        raise CliError(f"no images under {args.path}")
    for p in images:
        x = read_image(p)
        if args.crop:
            x = center_crop(x, args.crop)
        cmap = local_correlation_map(to_gray(x), args.window)
        mean, (neg, zero, pos) = corr_summary(cmap)
        wr.writerow([str(p), f"{mean:.6f}", f"{neg:.6f}", f"{zero:.6f}", f"{pos:.6f}"])
        if args.dump_map and len(images) == 1:
            outputs.write(args.dump_map, dumps_sidt(cmap[None]))
    _emit(outputs, args.out, buf.getvalue())


def cmd_synth(args, outputs: Outputs) -> None:
    if args.out is None:
        raise CliError("synth needs --out")
    out = Path(args.out)
    if args.toy:
        if out.exists() and any(out.iterdir()):
            raise CliError(f"{out} is not empty")
        outputs.mkdir(out)
        make_toy_corpus(out, args.toy, seed=args.seed, size=args.size)
        return
    if args.source is None:
        raise CliError("synth needs a source directory or --toy N")
    src = Path(args.source)
    images = _images_under(src)
    if not images:
        raise CliError(f"no images under {src}")
    for p in images:
        x = read_image(p)
        _, h, w = x.shape
        # the synthesizer halves the image, so drop a trailing odd row or column
        fake = synthesize_fake(x[:, : h - h % 2, : w - w % 2])
        rel = p.relative_to(src) if src.is_dir() else Path(p.name)
        dest = (out / rel).with_suffix(".png")
        outputs.mkdir(dest.parent)
        outputs.write(dest, encode_png(fake))


def cmd_train(args, outputs: Outputs) -> None:
    if args.out is None:
        raise CliError("train needs --out for the model file")
    ds = load_dataset(args.dataset)
    res = train(ds, _train_config(args), _augment(args), _extractor(args), workers=args.workers)
    outputs.write(args.out, dumps_model(res.model))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["epoch", "loss", "acc"])
    for h in res.history:
        wr.writerow([h["epoch"], f"{h['loss']:.9f}", f"{h['acc']:.6f}"])
    loss_path = args.loss_csv or str(Path(args.out).with_suffix(".loss.csv"))
    outputs.write(loss_path, buf.getvalue())


def _report(model, ds, args, perturb):
    return evaluate(model, ds, _extractor(args), perturb, crop=args.crop, seed=args.seed,
                    workers=args.workers, skip_bad=args.skip_bad)


def cmd_eval(args, outputs: Outputs) -> None:
    model = load_model(args.model)
    rep = _report(model, load_dataset(args.dataset), args, _perturb(args))
    _emit(outputs, args.out, rep.to_json() + "\n" if args.format == "json" else rep.to_csv())
    if rep.errors:
        log.warning("skipped %d unreadable samples", rep.errors)


def cmd_sweep(args, outputs: Outputs) -> None:
    param = args.param.replace("-", "_")
    values = args.values
    if not values:
        raise CliError("--values is empty")
    test = load_dataset(args.test)
    rows: list[list] = []

    def add_rows(value, rep):
        for s in rep.sources:
            rows.append([param, value, s.source_id, f"{s.acc:.6f}", f"{s.ap:.6f}"])
        if len(rep.sources) > 1:
            rows.append([param, value, "MACRO", f"{rep.acc_m:.6f}", f"{rep.ap_m:.6f}"])

    if param in TRAIN_AXES:
        if args.dataset is None:
            raise CliError(f"sweeping {param} retrains; pass the training dataset")
        ds = load_dataset(args.dataset)
        for v in values:
            setattr(args, param, int(v) if param == "patch" else v)
            res = train(ds, _train_config(args), _augment(args), _extractor(args), workers=args.workers)
            add_rows(_fmt(v), _report(res.model, test, args, _perturb(args)))
    else:
        if args.model:
            model = load_model(args.model)
        elif args.dataset:
            model = train(load_dataset(args.dataset), _train_config(args), _augment(args), _extractor(args),
                          workers=args.workers).model
        else:
            raise CliError("pass --model or a training dataset")
        kind = EVAL_AXES[param]
        for v in values:
            setattr(args, param, int(v) if param in ("quality", "eval_patch") else v)
            args.perturb = kind
            add_rows(_fmt(v), _report(model, test, args, _perturb(args)))

    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["param", "value", "source", "acc", "ap"])
    wr.writerows(rows)
    _emit(outputs, args.out, buf.getvalue())


def _fmt(v: float) -> str:
    return f"{v:g}"


def cmd_selftest(args, outputs: Outputs) -> None:
    from .selftest import run_all

    failed = [name for name, ok, _ in run_all(sys.stdout) if not ok]
    if failed:
        raise CliError(f"{len(failed)} self-test checks failed: {', '.join(failed)}")


# -- parser ------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--seed", type=int, default=None, help="global seed; unset means $SIDFORGE_SEED or 42")
    g.add_argument("--workers", type=int, default=default_workers(), help="worker processes")
    g.add_argument("--out", default=None, help="output path ('-' or omitted: stdout for text outputs)")
    g.add_argument("--config", default=None, help="JSON file of option defaults (keys are option names)")
    g.add_argument("-v", "--verbose", action="count", default=0, help="more logging")


def _add_extractor(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("feature extraction")
    g.add_argument("--extractor", default="dwt_hh", choices=[k.value for k in ExtractorKind],
                   help="artifact map fed to the feature statistics")
    g.add_argument("--crop", type=int, default=256, help="crop side (random at training, centre otherwise)")
    g.add_argument("--delta", type=float, default=None, help="DCT high-pass threshold; unset means H/2")
    g.add_argument("--laplace-variant", type=int, default=4, choices=[4, 8], help="Laplace neighbourhood")


def _add_augment(p: argparse.ArgumentParser) -> None:
    d = AugmentConfig()
    g = p.add_argument_group("augmentation")
    g.add_argument("--alpha", type=float, default=d.alpha, help="colour-jitter factor")
    g.add_argument("--beta", type=float, default=d.beta, help="rotation bound in degrees")
    g.add_argument("--mask-prob", type=float, default=d.mask_prob, help="probability of patch masking")
    g.add_argument("--patch", type=int, default=d.patch_size, help="mask patch side d")
    g.add_argument("--max-ratio", type=float, default=d.max_mask_ratio, help="upper bound R of the mask ratio")
    g.add_argument("--flip-prob", type=float, default=d.flip_prob, help="horizontal flip probability")
    g.add_argument("--blur-prob", type=float, default=d.blur_prob, help="training blur probability")
    g.add_argument("--jpeg-prob", type=float, default=d.jpeg_prob, help="training JPEG probability")
    g.add_argument("--no-augment", action="store_true", help="crop only")


def _add_train(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    g = p.add_argument_group("optimisation")
    g.add_argument("--epochs", type=int, default=d.epochs, help="training epochs")
    g.add_argument("--lr", type=float, default=d.lr, help="peak learning rate")
    g.add_argument("--weight-decay", type=float, default=d.weight_decay, help="decoupled weight decay")
    g.add_argument("--batch-size", type=int, default=d.batch_size, help="samples per update")
    g.add_argument("--warmup-epochs", type=int, default=d.warmup_epochs, help="linear warmup length")


def _add_perturb(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("evaluation perturbation")
    g.add_argument("--perturb", choices=("none",) + PERTURB_KINDS, default=None,
                   help="perturbation kind; inferred when exactly one of the parameters below is set")
    g.add_argument("--sigma", type=float, default=None, help="Gaussian blur sigma")
    g.add_argument("--quality", type=int, default=None, help="JPEG quality Q")
    g.add_argument("--eval-mask-ratio", type=float, default=None, help="masked fraction r")
    g.add_argument("--eval-patch", type=int, default=16, help="mask patch side d2")
    g.add_argument("--skip-bad", action="store_true", help="skip undecodable samples instead of failing")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="sidforge", formatter_class=fmt,
                                     description="Artifact features and toy experiments for synthetic image detection.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("extract", help="feature map of one image as SIDT", formatter_class=fmt)
    p.add_argument("image")
    p.add_argument("--features", default=None, help="also write the 28-dim feature vector as SIDT")
    _add_common(p)
    _add_extractor(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("corrmap", help="correlation-map summary CSV", formatter_class=fmt)
    p.add_argument("path", help="image file or directory")
    p.add_argument("--window", type=int, default=2, help="window side w")
    p.add_argument("--crop", type=int, default=0, help="centre crop before analysis (0: whole image)")
    p.add_argument("--dump-map", default=None, help="write the map as SIDT (single image only)")
    _add_common(p)
    p.set_defaults(func=cmd_corrmap)

    p = sub.add_parser("synth", help="toy fakes from a directory, or a full toy corpus", formatter_class=fmt)
    p.add_argument("source", nargs="?", default=None)
    p.add_argument("--toy", type=int, default=0, help="generate N natural/fake pairs instead")
    p.add_argument("--size", type=int, default=256, help="toy image side")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the detector head", formatter_class=fmt)
    p.add_argument("dataset")
    p.add_argument("--loss-csv", default=None, help="loss history path (default: <out>.loss.csv)")
    _add_common(p)
    _add_extractor(p)
    _add_augment(p)
    _add_train(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a dataset", formatter_class=fmt)
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="report format")
    _add_common(p)
    _add_extractor(p)
    _add_perturb(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="metric grid over one parameter, long-format CSV", formatter_class=fmt)
    p.add_argument("dataset", nargs="?", default=None, help="training dataset (omit with --model for eval axes)")
    p.add_argument("--test", required=True, help="evaluation dataset")
    p.add_argument("--param", required=True,
                   choices=sorted(list(TRAIN_AXES) + list(EVAL_AXES)) + ["max-ratio", "eval-mask-ratio", "eval-patch"])
    p.add_argument("--values", required=True, type=_float_list, help="comma-separated values")
    p.add_argument("--model", default=None, help="trained model for perturbation axes")
    _add_common(p)
    _add_extractor(p)
    _add_augment(p)
    _add_train(p)
    _add_perturb(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("selftest", help="run the built-in oracle checks", formatter_class=fmt)
    _add_common(p)
    p.set_defaults(func=cmd_selftest)
    parser.subcommands = sub.choices
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
        values = {k.replace("-", "_"): v for k, v in values.items()}
        unknown = sorted(set(values) - set(vars(args)))
        if unknown:
            raise CliError(f"unknown config keys: {unknown}")
        parser.subcommands[args.command].set_defaults(**values)
        args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _seed_default()
    return args


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    outputs = Outputs()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        if args.workers < 1:
            raise CliError(f"--workers must be >= 1, got {args.workers}")
        args.func(args, outputs)
        outputs.commit()
        return 0
    except (CliError, ValueError, FileNotFoundError, ImageDecodeError, OSError) as exc:
        outputs.discard()
        print(f"sidforge: error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        outputs.discard()
        raise


def main() -> None:
    sys.exit(run())
