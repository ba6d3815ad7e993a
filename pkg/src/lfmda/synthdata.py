"""Two-domain synthetic shapes: class lives in low frequencies, domain in high frequencies.

Domain A = shape + smooth illumination ramp. Domain B = the same plus a
high-frequency texture (Nyquist checkerboard or noise confined to the top
third of radial frequencies).
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import tensorio
from .spectral import band_index

SHAPES = ("disk", "square", "triangle", "cross")
DOMAINS = ("A", "B")
FOREGROUND, BACKGROUND = 0.9, 0.1
_SUPERSAMPLE = 4


@dataclass(frozen=True)
class GenConfig:
    image_size: int = 32
    n_classes: int = 3
    n_per_class_per_domain: int = 50
    texture_amplitude: float = 0.3
    texture_kind: str = "checkerboard"
    illumination_gradient: float = 0.2
    seed: int = 7

    def __post_init__(self):
        if not 2 <= self.n_classes <= len(SHAPES):
            raise ValueError(f"n_classes must be in 2..{len(SHAPES)}")
        if not 0.0 <= self.texture_amplitude <= 1.0:
            raise ValueError("texture_amplitude must lie in [0, 1]")
        if self.texture_kind not in ("checkerboard", "bandlimited_noise"):
            raise ValueError(f"unknown texture_kind {self.texture_kind!r}")
        if self.image_size < 4 or self.n_per_class_per_domain < 1:
            raise ValueError("image_size must be >= 4 and n_per_class_per_domain >= 1")


def _inside(kind: str, u: np.ndarray, v: np.ndarray, r: float) -> np.ndarray:
    """Point-in-shape test in shape-centred coordinates (u right, v down); ``r`` is the disk-equivalent radius."""
    if kind == "disk":
        return u * u + v * v <= r * r
    if kind == "square":
        half = r * math.sqrt(math.pi) / 2  # equal area to the disk
        return (np.abs(u) <= half) & (np.abs(v) <= half)
    if kind == "triangle":
        rc = r * math.sqrt(4 * math.pi / (3 * math.sqrt(3)))  # circumradius, equal area
        # upward equilateral triangle centred on its centroid
        return (v <= rc / 2) & (math.sqrt(3) * u - v <= rc) & (-math.sqrt(3) * u - v <= rc)
    if kind == "cross":
        arm, half_w = 1.2 * r, 0.4 * r
        return ((np.abs(u) <= arm) & (np.abs(v) <= half_w)) | ((np.abs(v) <= arm) & (np.abs(u) <= half_w))
    raise ValueError(f"unknown shape {kind!r}")


def render_shape(class_id: int, size: int = 32, jitter_rng: np.random.Generator | None = None,
                 scale: float = 1.0) -> np.ndarray:
    """Antialiased filled shape, foreground 0.9 on background 0.1.

    With a generator, the centre moves by up to 10% of ``size`` per axis and the
    scale by up to 15%; without one the shape is centred at ``scale`` times the
    nominal size (disk radius size/4).
    """
    if not 0 <= class_id < len(SHAPES):
        raise ValueError(f"class_id must be < {len(SHAPES)}")
    cy = cx = size / 2
    if jitter_rng is not None:
        cy += jitter_rng.uniform(-0.1, 0.1) * size
        cx += jitter_rng.uniform(-0.1, 0.1) * size
        scale = scale * jitter_rng.uniform(0.85, 1.15)
    r = scale * size / 4
    ss = _SUPERSAMPLE
    sub = (np.arange(size * ss) + 0.5) / ss
    v, u = np.meshgrid(sub - cy, sub - cx, indexing="ij")
    cover = _inside(SHAPES[class_id], u, v, r).reshape(size, ss, size, ss).mean(axis=(1, 3))
    return BACKGROUND + (FOREGROUND - BACKGROUND) * cover


def checkerboard(h: int, w: int) -> np.ndarray:
    """The Nyquist mode, +1/-1 alternating with +1 at the origin."""
    return np.where((np.arange(h)[:, None] + np.arange(w)[None, :]) % 2 == 0, 1.0, -1.0)


def bandlimited_noise(size: int, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean unit-RMS noise whose spectrum sits in the top third of radial bands."""
    idx, _ = band_index(size, size, 3)
    spec = (rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))) * (idx == 2)
    # the mask is point-symmetric, so the real part stays inside it
    noise = np.fft.ifft2(spec).real
    return noise / np.sqrt(np.mean(noise**2))


def illumination_ramp(size: int, angle: float) -> np.ndarray:
    c = (size - 1) / 2
    y, x = np.mgrid[0:size, 0:size]
    return ((x - c) * math.cos(angle) + (y - c) * math.sin(angle)) / size


def texture(cfg: GenConfig, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    n = size or cfg.image_size
    if cfg.texture_kind == "checkerboard":
        return cfg.texture_amplitude * rng.choice((-1.0, 1.0)) * checkerboard(n, n)
    return cfg.texture_amplitude * bandlimited_noise(n, rng)


def apply_domain_style(image: np.ndarray, domain_id: str, cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    """Add the shared illumination ramp and, for domain B, the high-frequency texture; clamp to [0, 1]."""
    if domain_id not in DOMAINS:
        raise ValueError(f"domain_id must be one of {DOMAINS}")
    out = np.asarray(image, dtype=np.float64).copy()
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise ValueError(f"expected a square image, got shape {out.shape}")
    angle = rng.uniform(0, 2 * math.pi)
    out += cfg.illumination_gradient * illumination_ramp(out.shape[0], angle)
    if domain_id == "B":
        out += texture(cfg, rng, out.shape[0])
    return np.clip(out, 0.0, 1.0)


def quantize(image: np.ndarray) -> np.ndarray:
    """The exact values an 8-bit PGM round trip produces."""
    return tensorio.to_bytes_u8(image).astype(np.float64) / 255.0


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Record:
    path: str
    class_id: int
    domain_id: str
    split: str
    seed: int = 0


@dataclass
class DatasetManifest:
    records: list = field(default_factory=list)
    root: Path | None = None

    def to_text(self) -> str:
        return "".join(f"{r.path},{r.class_id},{r.domain_id},{r.split}\n" for r in self.records)

    def select(self, domain_id: str | None = None, split: str | None = None) -> list:
        return [r for r in self.records
                if (domain_id is None or r.domain_id == domain_id) and (split is None or r.split == split)]

    def counts(self) -> dict:
        out = {}
        for r in self.records:
            key = (r.domain_id, r.split, r.class_id)
            out[key] = out.get(key, 0) + 1
        return out


def n_train(n: int) -> int:
    return int(0.8 * n + 0.5)


def _image_rng(seed: int, domain_index: int, class_id: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, domain_index, class_id, index])


def generate(cfg: GenConfig):
    """Yield (record, quantized image) for every sample, in manifest order."""
    for d, dom in enumerate(DOMAINS):
        for c in range(cfg.n_classes):
            k = n_train(cfg.n_per_class_per_domain)
            for i in range(cfg.n_per_class_per_domain):
                rng = _image_rng(cfg.seed, d, c, i)
                img = apply_domain_style(render_shape(c, cfg.image_size, rng), dom, cfg, rng)
                split = "train" if i < k else "test"
                rec = Record(f"{dom}/{split}/c{c}_{i:04d}.pgm", c, dom, split, cfg.seed)
                yield rec, quantize(img)


def generate_arrays(cfg: GenConfig) -> dict:
    """In-memory dataset: {(domain, split): (images (N, H, W), labels (N,))}."""
    buckets = {}
    for rec, img in generate(cfg):
        buckets.setdefault((rec.domain_id, rec.split), ([], []))
        buckets[(rec.domain_id, rec.split)][0].append(img)
        buckets[(rec.domain_id, rec.split)][1].append(rec.class_id)
    return {k: (np.stack(v[0]), np.array(v[1], dtype=np.int64)) for k, v in buckets.items()}


def config_to_text(cfg: GenConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in asdict(cfg).items())


def gen_dataset(cfg: GenConfig, out_dir) -> DatasetManifest:
    """Write PGM images, ``manifest.csv`` and ``gen_config.txt`` under ``out_dir``."""
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {root}: {exc}") from exc
    if not os.access(root, os.W_OK):
        raise OSError(f"output directory {root} is not writable")
    manifest = DatasetManifest(root=root)
    for rec, img in generate(cfg):
        path = root / rec.path
        path.parent.mkdir(parents=True, exist_ok=True)
        tensorio.write_pgm(path, img)
        manifest.records.append(rec)
    tensorio.atomic_write(root / "manifest.csv", manifest.to_text().encode("utf-8"))
    tensorio.atomic_write(root / "gen_config.txt", config_to_text(cfg).encode("utf-8"))
    return manifest


def read_manifest(root) -> DatasetManifest:
    root = Path(root)
    manifest = DatasetManifest(root=root)
    seed = 0
    cfg_path = root / "gen_config.txt"
    if cfg_path.exists():
        for line in cfg_path.read_text(encoding="utf-8").splitlines():
            if line.startswith("seed="):
                seed = int(line.split("=", 1)[1])
    for lineno, line in enumerate((root / "manifest.csv").read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"manifest line {lineno}: expected 4 fields, got {len(parts)}")
        path, cls, dom, split = parts
        manifest.records.append(Record(path, int(cls), dom, split, seed))
    return manifest


def load_split(root, domain_id: str, split: str | None = None):
    """Images and labels for one domain (and optionally one split) of a generated dataset."""
    manifest = read_manifest(root)
    recs = manifest.select(domain_id, split)
    if not recs:
        raise ValueError(f"no records for domain={domain_id} split={split} under {root}")
    images = np.stack([tensorio.read_pgm(Path(root) / r.path) for r in recs])
    return images, np.array([r.class_id for r in recs], dtype=np.int64)
