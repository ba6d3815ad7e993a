import numpy as np
import pytest

from lfmda import discrepancy as dc, filters, spectral, synthdata as sd, tensorio


def test_centered_disk_mean():
    img = sd.render_shape(0, 32)
    assert img.mean() == pytest.approx(0.1 + 0.8 * np.pi / 16, abs=0.02)
    assert img.min() >= 0.1 - 1e-12 and img.max() <= 0.9 + 1e-12


@pytest.mark.parametrize("cls", range(4))
def test_shapes_equal_area_and_deterministic(cls):
    a = sd.render_shape(cls, 32, np.random.default_rng(3))
    b = sd.render_shape(cls, 32, np.random.default_rng(3))
    assert np.array_equal(a, b)
    # equal-area construction: every centred shape covers the same fraction
    assert sd.render_shape(cls, 64).mean() == pytest.approx(sd.render_shape(0, 64).mean(), abs=0.01)


def test_shapes_are_distinct():
    imgs = [sd.render_shape(c, 32) for c in range(4)]
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.abs(imgs[i] - imgs[j]).mean() > 0.02


def test_render_shape_bad_class():
    with pytest.raises(ValueError):
        sd.render_shape(4)


@pytest.mark.parametrize("seed", range(10))
def test_shape_spectrum_is_low_frequency(seed):
    r = np.random.default_rng(seed)
    img = sd.render_shape(seed % 4, 32, r)
    assert spectral.low_band_share(img, 3, 1) >= 0.7


def test_no_style_is_identity():
    img = sd.render_shape(1, 32)
    cfg = sd.GenConfig(texture_amplitude=0.0, illumination_gradient=0.0)
    for dom in sd.DOMAINS:
        assert np.array_equal(sd.apply_domain_style(img, dom, cfg, np.random.default_rng(0)), img)


def test_injected_checkerboard_energy_survives_highpass():
    # mid-gray base so the clamp to [0, 1] never clips the texture
    base = 0.3 + 0.5 * (sd.render_shape(2, 32) - 0.1)
    cfg = sd.GenConfig(texture_amplitude=0.3, illumination_gradient=0.0)
    styled = sd.apply_domain_style(base, "B", cfg, np.random.default_rng(0))
    injected = np.sum((styled - base) ** 2)
    diff = filters.highpass(styled) - filters.highpass(base)
    assert np.sum(diff**2) == pytest.approx(injected, rel=0.15)


@pytest.mark.parametrize("kind", ["checkerboard", "bandlimited_noise"])
@pytest.mark.parametrize("seed", range(3))
def test_lowpass_removes_most_of_the_style(kind, seed):
    cfg = sd.GenConfig(texture_kind=kind)
    img = sd.render_shape(seed % 3, 32, np.random.default_rng(seed))
    a = sd.apply_domain_style(img, "A", cfg, np.random.default_rng(100 + seed))
    b = sd.apply_domain_style(img, "B", cfg, np.random.default_rng(100 + seed))
    raw = np.abs(a - b).mean()
    low = np.abs(filters.lowpass(a) - filters.lowpass(b)).mean()
    assert low < raw


def test_bandlimited_noise_band_and_scale(rng):
    n = sd.bandlimited_noise(32, rng)
    assert np.sqrt(np.mean(n**2)) == pytest.approx(1.0)
    stats = spectral.spectrum_stats(spectral.dft2(n), 3)
    e = stats.energies()
    assert e[2] / e.sum() > 1 - 1e-12


def test_checkerboard_is_nyquist():
    cb = sd.checkerboard(8, 8)
    assert cb[0, 0] == 1 and cb[0, 1] == -1 and cb[1, 1] == 1
    e = spectral.spectrum_stats(spectral.dft2(cb), 4).energies()
    assert e[-1] == pytest.approx(e.sum())


def test_quantize_matches_pgm_round_trip(rng):
    img = rng.random((5, 7))
    assert np.array_equal(sd.quantize(img), tensorio.decode_pgm(tensorio.encode_pgm(img)))


def test_genconfig_validation():
    with pytest.raises(ValueError):
        sd.GenConfig(n_classes=5)
    with pytest.raises(ValueError):
        sd.GenConfig(texture_amplitude=1.5)
    with pytest.raises(ValueError):
        sd.GenConfig(texture_kind="stripes")


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_gen_dataset_counts_and_determinism(tmp_path):
    cfg = sd.GenConfig(n_per_class_per_domain=25, n_classes=3)
    m1 = sd.gen_dataset(cfg, tmp_path / "a")
    sd.gen_dataset(cfg, tmp_path / "b")
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    assert len(m1.records) == 150
    assert len(m1.select(split="train")) == 120 and len(m1.select(split="test")) == 30
    for dom in sd.DOMAINS:
        for c in range(3):
            assert m1.counts()[(dom, "train", c)] == 20
            assert m1.counts()[(dom, "test", c)] == 5
    paths = [r.path for r in m1.records]
    assert len(set(paths)) == len(paths)
    for r in m1.records:
        assert (tmp_path / "a" / r.path).exists()
    back = sd.read_manifest(tmp_path / "a")
    assert back.records == m1.records
    assert (tmp_path / "a" / "manifest.csv").read_text().splitlines()[0].count(",") == 3


def test_gen_dataset_matches_in_memory(tmp_path):
    cfg = sd.GenConfig(n_per_class_per_domain=5)
    sd.gen_dataset(cfg, tmp_path)
    arrays = sd.generate_arrays(cfg)
    x, y = sd.load_split(tmp_path, "B", "test")
    assert np.array_equal(x, arrays["B", "test"][0]) and np.array_equal(y, arrays["B", "test"][1])
    # files written by the generator survive a read/write cycle byte for byte
    rec = sd.read_manifest(tmp_path).records[0]
    raw = (tmp_path / rec.path).read_bytes()
    assert tensorio.encode_pgm(tensorio.read_pgm(tmp_path / rec.path)) == raw


def test_gen_dataset_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        sd.gen_dataset(sd.GenConfig(n_per_class_per_domain=1), blocker / "sub")


def test_different_seeds_differ():
    a = sd.generate_arrays(sd.GenConfig(n_per_class_per_domain=3, seed=1))
    b = sd.generate_arrays(sd.GenConfig(n_per_class_per_domain=3, seed=2))
    assert not np.array_equal(a["A", "train"][0], b["A", "train"][0])


@pytest.mark.parametrize("kind", ["checkerboard", "bandlimited_noise"])
def test_generated_domain_gap_is_usable(kind):
    data = sd.generate_arrays(sd.GenConfig(n_per_class_per_domain=25, texture_kind=kind, texture_amplitude=0.3))
    assert dc.domain_gap(data["A", "train"][0], data["B", "train"][0]).mmd2 > 0.01


@pytest.mark.parametrize("kind", ["checkerboard", "bandlimited_noise"])
def test_class_domain_factorization(kind):
    cfg = sd.GenConfig(n_per_class_per_domain=40, texture_kind=kind, texture_amplitude=0.3)
    data = sd.generate_arrays(cfg)
    imgs = np.concatenate([data[d, s][0] for d in sd.DOMAINS for s in ("train", "test")])
    labels = np.concatenate([data[d, s][1] for d in sd.DOMAINS for s in ("train", "test")])
    doms = np.concatenate([np.full(len(data[d, s][1]), i) for i, d in enumerate(sd.DOMAINS) for s in ("train", "test")])
    # class from the low-pass image: nearest template over the jitter range of shifts and scales
    low = np.stack([filters.lowpass(im) for im in imgs])
    low -= low.mean(axis=(1, 2), keepdims=True)
    dist = np.full((len(imgs), cfg.n_classes), np.inf)
    for c in range(cfg.n_classes):
        for scale in (0.85, 0.925, 1.0, 1.075, 1.15):
            t = filters.lowpass(sd.render_shape(c, cfg.image_size, scale=scale))
            t -= t.mean()
            for dy in range(-4, 5):
                for dx in range(-4, 5):
                    d = ((low - np.roll(t, (dy, dx), (0, 1))) ** 2).sum(axis=(1, 2))
                    dist[:, c] = np.minimum(dist[:, c], d)
    assert np.mean(dist.argmin(axis=1) == labels) >= 0.95
    # domain from high-pass energy with a single threshold
    energy = np.array([np.sum(filters.highpass(im) ** 2) for im in imgs])
    thr = 0.5 * (energy[doms == 0].mean() + energy[doms == 1].mean())
    assert np.mean((energy > thr) == (doms == 1)) >= 0.95
