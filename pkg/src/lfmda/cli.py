"""``lfm`` command line: filter, spectrum, gen-data, mmd, train, ablation.

Images are 8-bit PGM. ``lfm filter`` writes high-pass results shifted by +0.5
so they fit in [0, 1]; give an ``.lfmt`` output path for the exact signed values.

Every option can also come from a ``--config`` file of ``key=value`` lines
(keys are option names, with dashes or underscores). Flags beat the file;
the file beats ``LFM_SEED`` for seeds; built-in defaults come last.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import discrepancy, experiments, filters, spectral, synthdata, tensorio
from .arch import toy_spec
from .errors import LfmError
from .lfm import LfmConfig
from .nn import TrainConfig, build_model, evaluate, train_source

log = logging.getLogger("lfmda.cli")

_GEN = synthdata.GenConfig()
# high-pass images are signed; PGM output stores them around mid-gray
HIGHPASS_OFFSET = 0.5
_TRAIN = TrainConfig()


class CliError(Exception):
    def __init__(self, message: str, code: str = "E_ARG"):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message, "E_USAGE")


def _odd_m(text: str) -> int:
    m = int(text)
    if m < 3 or m % 2 == 0:
        raise ValueError(f"m must be an odd integer >= 3, got {m}")
    return m


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise ValueError(f"expected a positive integer, got {v}")
    return v


def _seed_list(text: str) -> list:
    seeds = [int(s) for s in str(text).split(",") if s.strip()]
    if not seeds:
        raise ValueError("need at least one seed")
    return seeds


def _choice(*values):
    def conv(text: str) -> str:
        if text not in values:
            raise ValueError(f"expected one of {', '.join(values)}, got {text!r}")
        return text

    return conv


_PAD = _choice("reflect", "zero", "circular")
_PRE = _choice("none", "lowpass", "highpass")
_ARCH = _choice("baseline", "ie", "rsl")
_NORM = _choice("unit_sum", "unnormalized_eq2")

# command -> {option: (converter, default)}; a default of None means required
# unless noted in OPTIONAL
OPTIONS = {
    "filter": {
        "in": (str, None), "out": (str, None), "mode": (_choice("lowpass", "highpass"), "lowpass"),
        "m": (_odd_m, 3), "padding": (_PAD, "reflect"), "path": (_choice("spatial", "spectral"), "spatial"),
        "normalization": (_NORM, "unit_sum"),
    },
    "spectrum": {"in": (str, None), "bands": (_pos_int, 8), "out": (str, None)},
    "gen-data": {
        "out": (str, None), "classes": (int, _GEN.n_classes), "per-class": (_pos_int, _GEN.n_per_class_per_domain),
        "texture": (_choice("checkerboard", "bandlimited_noise"), _GEN.texture_kind),
        "amplitude": (float, _GEN.texture_amplitude), "illumination": (float, _GEN.illumination_gradient),
        "size": (_pos_int, _GEN.image_size), "seed": (int, _GEN.seed),
    },
    "mmd": {
        "domain-a": (str, None), "domain-b": (str, None), "preproc": (_PRE, "none"), "m": (_odd_m, 3),
        "model": (str, None), "out": (str, None),
    },
    "train": {
        "data": (str, None), "arch": (_ARCH, "baseline"), "preproc": (_PRE, "none"),
        "epochs": (int, _TRAIN.epochs), "seed": (int, _TRAIN.seed), "out": (str, None),
        "lr": (float, _TRAIN.learning_rate), "momentum": (float, _TRAIN.momentum),
        "batch-size": (_pos_int, _TRAIN.batch_size), "precision": (_choice("double", "single"), _TRAIN.precision),
        "m": (_odd_m, 3), "lfm-padding": (_PAD, "reflect"), "lfm-normalization": (_NORM, "unit_sum"),
        "log": (str, None),
    },
    "ablation": {
        "data": (str, None), "seeds": (_seed_list, [1, 2, 3, 4, 5]), "out": (str, None),
        "epochs": (int, _TRAIN.epochs), "lr": (float, _TRAIN.learning_rate), "momentum": (float, _TRAIN.momentum),
        "batch-size": (_pos_int, _TRAIN.batch_size), "precision": (_choice("double", "single"), _TRAIN.precision),
        "m": (_odd_m, 3), "lfm-padding": (_PAD, "reflect"), "lfm-normalization": (_NORM, "unit_sum"),
    },
}
OPTIONAL = {("spectrum", "out"), ("mmd", "model"), ("mmd", "out"), ("train", "out"), ("train", "log")}
HELP = {
    "filter": "Gaussian low-/high-pass filter a PGM image",
    "spectrum": "radial band energies of a PGM image",
    "gen-data": "write a synthetic two-domain dataset",
    "mmd": "MMD^2 between two directories of PGM images",
    "train": "source-only training on domain A, evaluated on domain B",
    "ablation": "five-arm ablation grid over seeds",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lfm", description="Low-frequency module toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for cmd, opts in OPTIONS.items():
        p = sub.add_parser(cmd, help=HELP[cmd], argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="key=value file with defaults for any option below")
        for name, (_, default) in opts.items():
            shown = "required" if default is None and (cmd, name) not in OPTIONAL else f"default {default}"
            p.add_argument(f"--{name}", dest=name.replace("-", "_"), help=shown)
    return parser


def read_config(path, cmd: str) -> dict:
    """Parse a key=value file, rejecting keys the command does not know."""
    known = {k.replace("-", "_") for k in OPTIONS[cmd]}
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", "E_IO") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {raw!r}", "E_CONFIG")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise CliError(f"{path}:{lineno}: unknown key {key!r} for '{cmd}'", "E_CONFIG")
        out[key] = value
    return out


def resolve(cmd: str, flags: dict) -> dict:
    """Merge flags > config file > LFM_SEED > defaults, converting every value."""
    flags = dict(flags)
    file_vals = read_config(flags.pop("config"), cmd) if "config" in flags else {}
    cfg = {}
    for name, (conv, default) in OPTIONS[cmd].items():
        key = name.replace("-", "_")
        if key in flags:
            raw, src = flags[key], f"--{name}"
        elif key in file_vals:
            raw, src = file_vals[key], "config"
        elif key == "seed" and os.environ.get("LFM_SEED"):
            raw, src = os.environ["LFM_SEED"], "LFM_SEED"
        else:
            if default is None and (cmd, name) not in OPTIONAL:
                raise CliError(f"'{cmd}' needs --{name}", "E_USAGE")
            cfg[key] = default
            continue
        try:
            cfg[key] = conv(raw)
        except ValueError as exc:
            raise CliError(f"bad value for {name} (from {src}): {exc}") from exc
    return cfg


def _log_config(cmd: str, cfg: dict) -> None:
    items = " ".join(f"{k}={v}" for k, v in cfg.items())
    log.info("config command=%s %s", cmd, items)


def _emit(text: str, out) -> None:
    if out:
        tensorio.atomic_write(out, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_filter(c: dict) -> None:
    img = tensorio.read_pgm(c["in"])
    kernel = filters.gaussian_kernel(c["m"], c["normalization"])
    if c["path"] == "spectral":
        if c["padding"] != "circular":
            raise CliError("--path spectral computes a circular convolution; use --padding circular")
        low = spectral.filter_spectral(img, kernel)
    else:
        low = filters.convolve2d(img, kernel, c["padding"])
    out = low if c["mode"] == "lowpass" else img - low
    if str(c["out"]).endswith(".lfmt"):
        tensorio.write_tensor(c["out"], out)
    else:
        tensorio.write_pgm(c["out"], out if c["mode"] == "lowpass" else out + HIGHPASS_OFFSET)


def cmd_spectrum(c: dict) -> None:
    stats = spectral.spectrum_stats(spectral.dft2(tensorio.read_pgm(c["in"])), c["bands"])
    lines = [f"total_energy={stats.total_energy!r}", f"dc_value={stats.dc_value!r}"]
    for i, ((lo, hi), e) in enumerate(stats.band_energies):
        lines.append(f"band={i} r_lo={lo!r} r_hi={hi!r} energy={e!r}")
    _emit("\n".join(lines) + "\n", c["out"])


def cmd_gen_data(c: dict) -> None:
    cfg = synthdata.GenConfig(image_size=c["size"], n_classes=c["classes"], n_per_class_per_domain=c["per_class"],
                              texture_amplitude=c["amplitude"], texture_kind=c["texture"],
                              illumination_gradient=c["illumination"], seed=c["seed"])
    manifest = synthdata.gen_dataset(cfg, c["out"])
    counts = {}
    for r in manifest.records:
        counts[(r.domain_id, r.split)] = counts.get((r.domain_id, r.split), 0) + 1
    lines = [f"images={len(manifest.records)} out={c['out']}"]
    lines += [f"domain={d} split={s} images={n}" for (d, s), n in sorted(counts.items())]
    sys.stdout.write("\n".join(lines) + "\n")


def _load_dir(path) -> np.ndarray:
    files = sorted(Path(path).rglob("*.pgm"))
    if not files:
        raise CliError(f"no .pgm files under {path}", "E_IO")
    return np.stack([tensorio.read_pgm(f) for f in files])


def cmd_mmd(c: dict) -> None:
    a, b = _load_dir(c["domain_a"]), _load_dir(c["domain_b"])
    model = tensorio.read_checkpoint(c["model"]) if c["model"] else None
    rep = discrepancy.domain_gap(a, b, c["preproc"], c["m"], model)
    _emit(f"preproc={c['preproc']} m={c['m']} embed={'model' if model else 'pixels'}\n" + rep.to_lines(), c["out"])


def _train_config(c: dict, seed: int, preproc: str) -> TrainConfig:
    return TrainConfig(epochs=c["epochs"], batch_size=c["batch_size"], learning_rate=c["lr"],
                       momentum=c["momentum"], seed=seed, precision=c["precision"], preproc=preproc, m=c["m"])


def _lfm_config(c: dict) -> LfmConfig:
    return LfmConfig(m=c["m"], padding=c["lfm_padding"], normalization=c["lfm_normalization"])


def _splits(root):
    source = synthdata.load_split(root, "A", "train")
    target = synthdata.load_split(root, "B", "test")
    return source, target


def cmd_train(c: dict) -> None:
    (xs, ys), (xt, yt) = _splits(c["data"])
    n_classes = int(max(ys.max(), yt.max())) + 1
    spec = toy_spec(c["arch"], n_classes, (1,) + xs.shape[1:], _lfm_config(c))
    cfg = _train_config(c, c["seed"], c["preproc"])
    res = train_source(build_model(spec, c["seed"], cfg.dtype), xs, ys, cfg, target=(xt, yt))
    lines = [rec.to_line() for rec in res.log]
    final = evaluate(res.model, xt, yt, c["preproc"], c["m"], n_classes)
    lines.append(f"final target_acc={final.accuracy!r} " + " ".join(
        f"class{k}_acc={v!r}" for k, v in sorted(final.per_class.items())))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if c["log"]:
        tensorio.atomic_write(c["log"], text.encode("utf-8"))
    if c["out"]:
        tensorio.write_checkpoint(c["out"], res.model)


def cmd_ablation(c: dict) -> None:
    (xs, ys), (xt, yt) = _splits(c["data"])
    n_classes = int(max(ys.max(), yt.max())) + 1
    res = experiments.run_ablation((xs, ys), (xt, yt), c["seeds"], _train_config(c, c["seeds"][0], "none"),
                                   _lfm_config(c), n_classes)
    table = res.table()
    tensorio.atomic_write(c["out"], table.encode("utf-8"))
    tensorio.atomic_write(str(c["out"]) + ".records", res.records().encode("utf-8"))
    sys.stdout.write(table)
    sys.stdout.write(f"ordering_holds={res.ordering_holds()} seconds={res.seconds:.1f}\n")


COMMANDS = {"filter": cmd_filter, "spectrum": cmd_spectrum, "gen-data": cmd_gen_data, "mmd": cmd_mmd,
            "train": cmd_train, "ablation": cmd_ablation}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise CliError("no command given; try 'lfm --help'", "E_USAGE")
        level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
        logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr, force=True)
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "verbose", "quiet")}
        cfg = resolve(args.command, flags)
        _log_config(args.command, cfg)
        COMMANDS[args.command](cfg)
        return 0
    except (CliError, LfmError) as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"E_IO: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"E_ARG: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
