"""Desk-scale sparse-view CT toolkit: parallel-beam projectors, FBP,
geometry-aware sinogram upsampling, classical baselines, and image metrics.

The heavy lifting lives in the compiled ``_sparsect`` module; this package
re-exports its public surface.
"""

from _sparsect import (
    Geometry,
    back_project,
    dense_system_matrix,
    enhance,
    fbp_reconstruct,
    filter_weights,
    forward_project,
    hu_window,
    make_geometry,
    psnr,
    random_phantom,
    shepp_logan,
    ssim,
    wls_tv_reconstruct,
)

__all__ = [
    "Geometry",
    "back_project",
    "dense_system_matrix",
    "enhance",
    "fbp_reconstruct",
    "filter_weights",
    "forward_project",
    "hu_window",
    "make_geometry",
    "psnr",
    "random_phantom",
    "shepp_logan",
    "ssim",
    "wls_tv_reconstruct",
]
