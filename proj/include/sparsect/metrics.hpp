#pragma once

#include "sparsect/geometry.hpp"

namespace sparsect {

/// 10*log10(data_range^2 / MSE). Identical images give +infinity.
double psnr(const Image& x, const Image& ref, double data_range = 1.0);

/// Mean local SSIM over all fully interior 7x7 uniform windows with sample
/// (N-1) variance normalization and constants C1=(0.01*range)^2,
/// C2=(0.03*range)^2.
double ssim(const Image& x, const Image& ref, double data_range = 1.0);

/// Affine display-window map [lo,hi] -> [0,1] with clamping; export-only.
Image hu_window(const Image& x, double lo, double hi);

}  // namespace sparsect
