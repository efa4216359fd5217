"""Thermal-infrared to visible image translation: losses, metrics, inference.

Images are float64 numpy arrays shaped (H, W, 3) with values in [0, 1];
H and W must be divisible by 16 for translation.
"""

from ladlenet._core import (
    ConfigError,
    Translator,
    metrics,
    ms_ssim,
    ssim,
    total_loss,
)

__all__ = [
    "ConfigError",
    "Translator",
    "metrics",
    "ms_ssim",
    "ssim",
    "total_loss",
]
