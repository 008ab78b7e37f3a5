"""Python bindings for the fcenet C++ library.

Images are float64 numpy arrays shaped (C, H, W) with values in [0, 1].
"""

from ._core import (
    ModelConfig,
    ModelWeights,
    NoiseSpec,
    band_similarity,
    correlation_curve,
    denoise,
    dft2d,
    gradcheck,
    idft2d,
    load_checkpoint,
    param_count,
    psnr,
    save_checkpoint,
    spearman,
    ssim,
    standard_cutoff_grid,
    synth_triple,
)

__all__ = [
    "ModelConfig",
    "ModelWeights",
    "NoiseSpec",
    "band_similarity",
    "correlation_curve",
    "denoise",
    "dft2d",
    "gradcheck",
    "idft2d",
    "load_checkpoint",
    "param_count",
    "psnr",
    "save_checkpoint",
    "spearman",
    "ssim",
    "standard_cutoff_grid",
    "synth_triple",
]
