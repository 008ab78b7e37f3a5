import numpy as np
import pytest

import fcenet


def test_dft_roundtrip_and_dc():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(3, 16, 12))
    s = fcenet.dft2d(x)
    assert s.shape == x.shape and s.dtype == np.complex128
    np.testing.assert_allclose(s, np.fft.fft2(x), atol=1e-9)
    np.testing.assert_allclose(fcenet.idft2d(s), x, atol=1e-12)


def test_metrics():
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 1, size=(3, 16, 16))
    b = np.clip(a + rng.normal(0, 0.05, size=a.shape), 0, 1)
    mse = np.mean((a - b) ** 2)
    assert fcenet.psnr(a, b) == pytest.approx(10 * np.log10(1 / mse), abs=1e-9)
    assert fcenet.ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert fcenet.ssim(a, b) == pytest.approx(fcenet.ssim(b, a), abs=1e-12)
    with pytest.raises(ValueError):
        fcenet.psnr(a, b[:, :8])


def test_synthetic_triple_and_prior():
    spec = fcenet.NoiseSpec()
    spec.kind = "gaussian"
    spec.sigma = 25.0
    spec.darken = False
    t = fcenet.synth_triple(0, 64, 64, spec)
    assert t["clean"].shape == (3, 64, 64)
    assert t["nir"].shape == (1, 64, 64)
    grid = fcenet.standard_cutoff_grid()
    assert len(grid) == 12
    noisy_curve = fcenet.correlation_curve(t["noisy"], t["clean"])
    assert fcenet.spearman(grid, noisy_curve) < 0
    with pytest.raises(ValueError):
        spec.kind = "poisson"


def test_model_denoise_and_checkpoint(tmp_path):
    cfg = fcenet.ModelConfig()
    cfg.base_channels = 4
    cfg.blocks_per_scale = 1
    cfg.patch_height = cfg.patch_width = 32
    w = fcenet.ModelWeights(cfg)
    w.init(3)
    assert w.param_count() == fcenet.param_count(cfg)

    t = fcenet.synth_triple(1, 32, 64)
    out = fcenet.denoise(t["noisy"], t["nir"], w)
    assert out.shape == (3, 32, 64)
    assert out.min() >= 0.0 and out.max() <= 1.0

    path = str(tmp_path / "m.ckpt")
    fcenet.save_checkpoint(path, w)
    back = fcenet.load_checkpoint(path)
    assert back.config.base_channels == 4
    # Stored weights are float32, so outputs agree closely but not exactly.
    np.testing.assert_allclose(fcenet.denoise(t["noisy"], t["nir"], back), out, atol=1e-4)

    with pytest.raises(ValueError):
        fcenet.denoise(t["noisy"][:, :, :48], t["nir"][:, :, :48], w)
    with pytest.raises(OSError):
        fcenet.load_checkpoint(str(tmp_path / "missing.ckpt"))


def test_param_ratio():
    full, light = fcenet.ModelConfig(), fcenet.ModelConfig()
    full.base_channels, light.base_channels = 64, 36
    assert 2.5 <= fcenet.param_count(full) / fcenet.param_count(light) <= 3.5


def test_gradcheck_fdsm():
    (r,) = fcenet.gradcheck("fdsm")
    assert r["passed"] and r["max_rel_error"] < 1e-4
