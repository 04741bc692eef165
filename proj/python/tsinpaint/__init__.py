# Copyright 2026 The tsinpaint Authors
# SPDX-License-Identifier: Apache-2.0
"""Two-stream image inpainting with structure guidance."""

from ._tsinpaint import (
    PSNR_CAP,
    ConfigError,
    Error,
    GenerationError,
    InputError,
    IoError,
    Model,
    TrainingError,
    build_pyramid,
    frechet_distance,
    generate_mask,
    hole_ratio,
    l1_percent,
    load_image,
    load_mask,
    psnr,
    ssim,
    structure_label,
)

__all__ = [
    "PSNR_CAP",
    "ConfigError",
    "Error",
    "GenerationError",
    "InputError",
    "IoError",
    "Model",
    "TrainingError",
    "build_pyramid",
    "frechet_distance",
    "generate_mask",
    "hole_ratio",
    "l1_percent",
    "load_image",
    "load_mask",
    "psnr",
    "ssim",
    "structure_label",
]
